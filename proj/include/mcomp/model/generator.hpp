#pragma once

#include "mcomp/core/errors.hpp"
#include "mcomp/model/diffusion_model.hpp"
#include "mcomp/pde/value_field.hpp"

namespace mcomp::model {

/// L^X v = 1/2 sum a^{jk} d_jk v + sum b^j d_j v at the stored level t,
/// returned as a single-level field on the same grid.
inline pde::ValueField generator_apply(const DiffusionModel& m, const pde::ValueField& field, double t) {
  const auto& g = field.grid();
  if (g.n1 < 3 || g.n2 < 3) throw GridError("generator_apply: grid needs at least 3 nodes per axis");
  const int k = field.level_of(t);
  if (k < 0) throw GridError("generator_apply: no stored level at the requested time");
  pde::ValueField out(g, {t});
  for (int i = 0; i < g.n1; ++i)
    for (int j = 0; j < g.n2; ++j) {
      const auto c = eval_coeffs(m, t, g.node(i, j));
      out.at(0, i, j) = 0.5 * (c.a[0][0] * field.d11(k, i, j) + 2.0 * c.a[0][1] * field.d12(k, i, j) +
                               c.a[1][1] * field.d22(k, i, j)) +
                        c.b[0] * field.d1(k, i, j) + c.b[1] * field.d2(k, i, j);
    }
  return out;
}

}  // namespace mcomp::model
