#pragma once

#include "mcomp/core/linalg.hpp"

namespace mcomp::jacobian {

/// M with column `col` replaced by column `col` of C.
inline Mat2 replace_column(const Mat2& M, int col, const Mat2& C) {
  Mat2 out = M;
  out[0][col] = C[0][col];
  out[1][col] = C[1][col];
  return out;
}

/// First Frechet differential of det at M in direction C: the sum over l of
/// det(M with column l replaced by column l of C).
inline double det_differential(const Mat2& M, const Mat2& C) {
  return det(replace_column(M, 0, C)) + det(replace_column(M, 1, C));
}

/// Second differential of det at M in directions (C1, C2). In two dimensions
/// both columns are replaced, so the value does not depend on M.
inline double det_second_differential(const Mat2& /*M*/, const Mat2& C1, const Mat2& C2) {
  return det(from_cols(column(C1, 0), column(C2, 1))) + det(from_cols(column(C2, 0), column(C1, 1)));
}

}  // namespace mcomp::jacobian
