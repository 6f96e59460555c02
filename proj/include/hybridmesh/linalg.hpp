#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "hybridmesh/tensor.hpp"

namespace hybridmesh {

// Solves A·X = B in place with partial-pivot Gaussian elimination.
// A is n×n and B is n×m, both row-major; returns false on a singular pivot.
inline bool lu_solve(std::vector<double>& A, std::vector<double>& B, int n, int m,
                     double pivot_tol = 1e-12) {
  for (int k = 0; k < n; ++k) {
    int pivot = k;
    double best = std::fabs(A[static_cast<std::size_t>(k) * n + k]);
    for (int r = k + 1; r < n; ++r) {
      const double v = std::fabs(A[static_cast<std::size_t>(r) * n + k]);
      if (v > best) {
        best = v;
        pivot = r;
      }
    }
    if (best < pivot_tol) return false;
    if (pivot != k) {
      for (int c = k; c < n; ++c)
        std::swap(A[static_cast<std::size_t>(k) * n + c], A[static_cast<std::size_t>(pivot) * n + c]);
      for (int c = 0; c < m; ++c)
        std::swap(B[static_cast<std::size_t>(k) * m + c], B[static_cast<std::size_t>(pivot) * m + c]);
    }
    const double inv = 1.0 / A[static_cast<std::size_t>(k) * n + k];
    for (int r = k + 1; r < n; ++r) {
      const double f = A[static_cast<std::size_t>(r) * n + k] * inv;
      if (f == 0.0) continue;
      A[static_cast<std::size_t>(r) * n + k] = 0.0;
      for (int c = k + 1; c < n; ++c)
        A[static_cast<std::size_t>(r) * n + c] -= f * A[static_cast<std::size_t>(k) * n + c];
      for (int c = 0; c < m; ++c)
        B[static_cast<std::size_t>(r) * m + c] -= f * B[static_cast<std::size_t>(k) * m + c];
    }
  }
  for (int k = n - 1; k >= 0; --k) {
    const double inv = 1.0 / A[static_cast<std::size_t>(k) * n + k];
    for (int c = 0; c < m; ++c) {
      double s = B[static_cast<std::size_t>(k) * m + c];
      for (int r = k + 1; r < n; ++r)
        s -= A[static_cast<std::size_t>(k) * n + r] * B[static_cast<std::size_t>(r) * m + c];
      B[static_cast<std::size_t>(k) * m + c] = s * inv;
    }
  }
  return true;
}

inline bool lu_solve(Tensor& A, Tensor& B) {
  check(A.rank() == 2 && A.dim(0) == A.dim(1), "lu_solve needs a square matrix");
  check(B.rank() == 2 && B.dim(0) == A.dim(0), "lu_solve right-hand side mismatch");
  return lu_solve(A.data, B.data, A.dim(0), B.dim(1));
}

}  // namespace hybridmesh
