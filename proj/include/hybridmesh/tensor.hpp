#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "hybridmesh/error.hpp"

namespace hybridmesh {

using Shape = std::vector<int>;

inline std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (int d : s) {
    check(d >= 0, "negative dimension in tensor shape");
    n *= d;
  }
  return n;
}

inline std::string shape_string(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ')';
  return os.str();
}

// Dense row-major 64-bit array. Rank 0 with one element is a scalar.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s)
      : shape(std::move(s)), data(static_cast<std::size_t>(shape_numel(shape)), 0.0) {}
  Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
    check(static_cast<std::int64_t>(data.size()) == shape_numel(shape),
          "tensor data size does not match shape " + shape_string(shape));
  }

  static Tensor zeros(Shape s) { return Tensor(std::move(s)); }
  static Tensor full(Shape s, double v) {
    Tensor t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }
  static Tensor scalar(double v) { return Tensor(Shape{}, {v}); }

  std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

  double& operator[](std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }
  double* ptr() { return data.data(); }
  const double* ptr() const { return data.data(); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

// C (M×N) += A (M×K) · B (K×N), all row-major. Register-tiled 6×8 microkernel;
// the inner j loop maps onto one 8-wide vector accumulator per row.
inline void gemm_nn(const double* __restrict A, const double* __restrict B, double* __restrict C,
                    int M, int K, int N) {
  constexpr int MR = 6, NR = 8;
  int j0 = 0;
  for (; j0 + NR <= N; j0 += NR) {
    int i0 = 0;
    for (; i0 + MR <= M; i0 += MR) {
      const double* a0 = A + static_cast<std::size_t>(i0 + 0) * K;
      const double* a1 = A + static_cast<std::size_t>(i0 + 1) * K;
      const double* a2 = A + static_cast<std::size_t>(i0 + 2) * K;
      const double* a3 = A + static_cast<std::size_t>(i0 + 3) * K;
      const double* a4 = A + static_cast<std::size_t>(i0 + 4) * K;
      const double* a5 = A + static_cast<std::size_t>(i0 + 5) * K;
      double c0[NR] = {0}, c1[NR] = {0}, c2[NR] = {0};
      double c3[NR] = {0}, c4[NR] = {0}, c5[NR] = {0};
      const double* bp = B + j0;
      for (int k = 0; k < K; ++k, bp += N) {
        const double x0 = a0[k], x1 = a1[k], x2 = a2[k];
        const double x3 = a3[k], x4 = a4[k], x5 = a5[k];
#pragma omp simd
        for (int j = 0; j < NR; ++j) {
          const double b = bp[j];
          c0[j] += x0 * b;
          c1[j] += x1 * b;
          c2[j] += x2 * b;
          c3[j] += x3 * b;
          c4[j] += x4 * b;
          c5[j] += x5 * b;
        }
      }
      const double* acc[MR] = {c0, c1, c2, c3, c4, c5};
      for (int r = 0; r < MR; ++r) {
        double* cr = C + static_cast<std::size_t>(i0 + r) * N + j0;
        for (int j = 0; j < NR; ++j) cr[j] += acc[r][j];
      }
    }
    for (; i0 < M; ++i0) {
      const double* a = A + static_cast<std::size_t>(i0) * K;
      double acc[NR] = {0};
      const double* bp = B + j0;
      for (int k = 0; k < K; ++k, bp += N) {
        const double x = a[k];
#pragma omp simd
        for (int j = 0; j < NR; ++j) acc[j] += x * bp[j];
      }
      double* cr = C + static_cast<std::size_t>(i0) * N + j0;
      for (int j = 0; j < NR; ++j) cr[j] += acc[j];
    }
  }
  if (j0 < N) {
    for (int i = 0; i < M; ++i) {
      const double* a = A + static_cast<std::size_t>(i) * K;
      double* cr = C + static_cast<std::size_t>(i) * N;
      for (int k = 0; k < K; ++k) {
        const double x = a[k];
        const double* br = B + static_cast<std::size_t>(k) * N;
        for (int j = j0; j < N; ++j) cr[j] += x * br[j];
      }
    }
  }
}

// C (rows×cols) += Aᵀ · B where A is (inner×rows) and B is (inner×cols).
inline void gemm_tn(const double* __restrict A, const double* __restrict B, double* __restrict C,
                    int rows, int inner, int cols) {
  constexpr int MR = 6, NR = 8;
  int j0 = 0;
  for (; j0 + NR <= cols; j0 += NR) {
    int i0 = 0;
    for (; i0 + MR <= rows; i0 += MR) {
      double c0[NR] = {0}, c1[NR] = {0}, c2[NR] = {0};
      double c3[NR] = {0}, c4[NR] = {0}, c5[NR] = {0};
      const double* ap = A + i0;
      const double* bp = B + j0;
      for (int k = 0; k < inner; ++k, ap += rows, bp += cols) {
        const double x0 = ap[0], x1 = ap[1], x2 = ap[2];
        const double x3 = ap[3], x4 = ap[4], x5 = ap[5];
#pragma omp simd
        for (int j = 0; j < NR; ++j) {
          const double b = bp[j];
          c0[j] += x0 * b;
          c1[j] += x1 * b;
          c2[j] += x2 * b;
          c3[j] += x3 * b;
          c4[j] += x4 * b;
          c5[j] += x5 * b;
        }
      }
      const double* acc[MR] = {c0, c1, c2, c3, c4, c5};
      for (int r = 0; r < MR; ++r) {
        double* cr = C + static_cast<std::size_t>(i0 + r) * cols + j0;
        for (int j = 0; j < NR; ++j) cr[j] += acc[r][j];
      }
    }
    for (; i0 < rows; ++i0) {
      double acc[NR] = {0};
      const double* ap = A + i0;
      const double* bp = B + j0;
      for (int k = 0; k < inner; ++k, ap += rows, bp += cols) {
        const double x = ap[0];
#pragma omp simd
        for (int j = 0; j < NR; ++j) acc[j] += x * bp[j];
      }
      double* cr = C + static_cast<std::size_t>(i0) * cols + j0;
      for (int j = 0; j < NR; ++j) cr[j] += acc[j];
    }
  }
  if (j0 < cols) {
    for (int k = 0; k < inner; ++k) {
      const double* ar = A + static_cast<std::size_t>(k) * rows;
      const double* br = B + static_cast<std::size_t>(k) * cols;
      for (int i = 0; i < rows; ++i) {
        const double x = ar[i];
        double* cr = C + static_cast<std::size_t>(i) * cols;
        for (int j = j0; j < cols; ++j) cr[j] += x * br[j];
      }
    }
  }
}

// T (C×R) = transpose of A (R×C).
inline void transpose(const double* __restrict A, double* __restrict T, int R, int C) {
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c)
      T[static_cast<std::size_t>(c) * R + r] = A[static_cast<std::size_t>(r) * C + c];
}

inline Tensor mat_mul(const Tensor& a, const Tensor& b) {
  check(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0),
        "mat_mul shape mismatch " + shape_string(a.shape) + " x " + shape_string(b.shape));
  Tensor out(Shape{a.dim(0), b.dim(1)});
  gemm_nn(a.ptr(), b.ptr(), out.ptr(), a.dim(0), a.dim(1), b.dim(1));
  return out;
}

}  // namespace hybridmesh
