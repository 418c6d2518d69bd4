#pragma once

#include "mcomp/model/diffusion_model.hpp"

namespace mcomp::model {

/// Values of the structural fields A^{jk}, B^j, C at one (t, x), plus the
/// row divergence divA_j = sum_k dA^{jk}/dx_k needed by the weak pairing.
struct StructuralOperators {
  Mat2 A{};
  Vec2 B{};
  double C = 0.0;
  Vec2 divA{};
};

/// generator: fields built from L^X = 1/2 a:D^2 + b.D with C = |J[f, r]|.
/// parabolic: fields built from G = L^X - r with zeroth-order coefficient
/// c = -r, so A and divA are halved and C changes sign; B is unchanged.
enum class Convention { generator, parabolic };

/// Evaluates A, B, C at (t, x). Requires third x-derivatives and the mixed
/// t-x derivative of f, second x-derivatives of sigma and first x-derivatives
/// of b and r.
inline StructuralOperators structural_operators(const DiffusionModel& m, double t, const Vec2& x,
                                                Convention conv = Convention::generator) {
  m.forward.require(3, true, true);
  for (const auto& row : m.vol)
    for (const auto& s : row) s.require(2, false, false);
  for (const auto& b : m.drift) b.require(1, false, false);
  m.rate.require(1, false, false);

  const Jet f = m.forward.jet(t, x);
  const JetMat2 a = m.covariance_jets(t, x);
  const Jet2 b = m.drift_jets(t, x);
  const Jet r = m.rate.jet(t, x);

  StructuralOperators out;
  for (int j = 0; j < 2; ++j) {
    const double sign = j == 0 ? -1.0 : 1.0;  // (-1)^j with 1-based j
    const int other = 1 - j;                  // index 3 - j
    double div = 0.0;
    for (int k = 0; k < 2; ++k) {
      double hess_a = 0.0;
      for (int mm = 0; mm < 2; ++mm) hess_a += f.xx[other][mm] * a[mm][k].v;
      out.A[j][k] = f.x[0] * a[j][k].x[1] - f.x[1] * a[j][k].x[0] - 2.0 * sign * hess_a;

      double d_hess_a = 0.0;
      for (int mm = 0; mm < 2; ++mm)
        d_hess_a += f.third(other, mm, k) * a[mm][k].v + f.xx[other][mm] * a[mm][k].x[k];
      div += f.xx[0][k] * a[j][k].x[1] + f.x[0] * a[j][k].xx[1][k] - f.xx[1][k] * a[j][k].x[0] -
             f.x[1] * a[j][k].xx[0][k] - 2.0 * sign * d_hess_a;
    }
    out.divA[j] = div;

    // (d/dt + L^X - r) applied to df/dx_other
    double gen = f.tx[other] - r.v * f.x[other];
    for (int p = 0; p < 2; ++p) {
      gen += b[p].v * f.xx[other][p];
      for (int q = 0; q < 2; ++q) gen += 0.5 * a[p][q].v * f.third(other, p, q);
    }
    out.B[j] = f.x[0] * b[j].x[1] - f.x[1] * b[j].x[0] - sign * gen;
  }
  out.C = f.x[0] * r.x[1] - f.x[1] * r.x[0];

  if (conv == Convention::parabolic) {
    out.A = 0.5 * out.A;
    out.divA = {0.5 * out.divA[0], 0.5 * out.divA[1]};
    out.C = -out.C;
  }
  return out;
}

}  // namespace mcomp::model
