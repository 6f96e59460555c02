#pragma once

#include <algorithm>
#include <cstdint>
#include <tuple>
#include <vector>

#include "hybridmesh/tensor.hpp"

namespace hybridmesh {

// Compressed sparse row matrix with 64-bit values.
struct CsrMatrix {
  int rows = 0, cols = 0;
  std::vector<int> indptr{0};
  std::vector<int> indices;
  std::vector<double> values;

  std::int64_t nnz() const { return static_cast<std::int64_t>(indices.size()); }

  // Builds from (row, col, value) triplets; duplicates are summed.
  static CsrMatrix from_triplets(int rows, int cols,
                                 std::vector<std::tuple<int, int, double>> triplets) {
    for (const auto& [r, c, v] : triplets) {
      (void)v;
      check(r >= 0 && r < rows && c >= 0 && c < cols, "triplet index out of range");
    }
    std::sort(triplets.begin(), triplets.end(), [](const auto& a, const auto& b) {
      return std::get<0>(a) != std::get<0>(b) ? std::get<0>(a) < std::get<0>(b)
                                              : std::get<1>(a) < std::get<1>(b);
    });
    CsrMatrix m;
    m.rows = rows;
    m.cols = cols;
    m.indptr.assign(static_cast<std::size_t>(rows) + 1, 0);
    for (std::size_t i = 0; i < triplets.size();) {
      const int r = std::get<0>(triplets[i]);
      const int c = std::get<1>(triplets[i]);
      double v = 0.0;
      while (i < triplets.size() && std::get<0>(triplets[i]) == r &&
             std::get<1>(triplets[i]) == c) {
        v += std::get<2>(triplets[i]);
        ++i;
      }
      m.indices.push_back(c);
      m.values.push_back(v);
      ++m.indptr[static_cast<std::size_t>(r) + 1];
    }
    for (int r = 0; r < rows; ++r) m.indptr[static_cast<std::size_t>(r) + 1] += m.indptr[r];
    return m;
  }

  // Y (rows×C) = this · X (cols×C), dense row-major.
  void multiply(const double* X, int C, double* Y) const {
    for (int r = 0; r < rows; ++r) {
      double* y = Y + static_cast<std::size_t>(r) * C;
      for (int j = 0; j < C; ++j) y[j] = 0.0;
      for (int p = indptr[r]; p < indptr[static_cast<std::size_t>(r) + 1]; ++p) {
        const double v = values[static_cast<std::size_t>(p)];
        const double* x = X + static_cast<std::size_t>(indices[static_cast<std::size_t>(p)]) * C;
#pragma omp simd
        for (int j = 0; j < C; ++j) y[j] += v * x[j];
      }
    }
  }

  Tensor multiply(const Tensor& x) const {
    check(x.rank() == 2 && x.dim(0) == cols,
          "sparse multiply shape mismatch: matrix cols " + std::to_string(cols) + " vs " +
              shape_string(x.shape));
    Tensor y(Shape{rows, x.dim(1)});
    multiply(x.ptr(), x.dim(1), y.ptr());
    return y;
  }

  CsrMatrix transposed() const {
    std::vector<std::tuple<int, int, double>> t;
    t.reserve(indices.size());
    for (int r = 0; r < rows; ++r)
      for (int p = indptr[r]; p < indptr[static_cast<std::size_t>(r) + 1]; ++p)
        t.emplace_back(indices[static_cast<std::size_t>(p)], r,
                       values[static_cast<std::size_t>(p)]);
    return from_triplets(cols, rows, std::move(t));
  }

  Tensor to_dense() const {
    Tensor d(Shape{rows, cols});
    for (int r = 0; r < rows; ++r)
      for (int p = indptr[r]; p < indptr[static_cast<std::size_t>(r) + 1]; ++p)
        d[static_cast<std::int64_t>(r) * cols + indices[static_cast<std::size_t>(p)]] +=
            values[static_cast<std::size_t>(p)];
    return d;
  }

  double row_sum(int r) const {
    double s = 0.0;
    for (int p = indptr[r]; p < indptr[static_cast<std::size_t>(r) + 1]; ++p)
      s += values[static_cast<std::size_t>(p)];
    return s;
  }

  int row_nnz(int r) const { return indptr[static_cast<std::size_t>(r) + 1] - indptr[r]; }
};

}  // namespace hybridmesh
