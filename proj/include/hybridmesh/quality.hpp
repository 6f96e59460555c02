#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "hybridmesh/error.hpp"
#include "hybridmesh/geometry.hpp"
#include "hybridmesh/linalg.hpp"
#include "hybridmesh/mesh.hpp"
#include "hybridmesh/tensor.hpp"

namespace hybridmesh {

struct QualitySummary {
  double mean = 0.0, stddev = 0.0, min = 0.0, max = 0.0;
  double p1 = 0.0, p5 = 0.0, p25 = 0.0, p50 = 0.0, p75 = 0.0;
};

// Per-element tetra quality metrics plus a degenerate tally. A zero-volume
// element scores scaled_jacobian 0 and an infinite aspect ratio.
struct QualityReport {
  std::vector<double> scaled_jacobian;
  std::vector<double> aspect_ratio;
  std::vector<double> mean_ratio;
  std::vector<double> skewness;
  std::vector<double> shape_quality;
  int degenerate = 0;
};

// Linear-interpolation percentile on a sorted copy, numpy convention.
inline double percentile(std::vector<double> v, double p) {
  check(!v.empty(), "percentile of an empty set");
  std::sort(v.begin(), v.end());
  const double rank = p / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = static_cast<std::size_t>(std::ceil(rank));
  const double frac = rank - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

inline QualitySummary summarize(const std::vector<double>& v) {
  check(!v.empty(), "summarize of an empty set");
  QualitySummary s;
  s.min = std::numeric_limits<double>::infinity();
  s.max = -std::numeric_limits<double>::infinity();
  for (double x : v) {
    s.mean += x;
    s.min = std::min(s.min, x);
    s.max = std::max(s.max, x);
  }
  s.mean /= static_cast<double>(v.size());
  for (double x : v) s.stddev += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(s.stddev / static_cast<double>(v.size()));
  s.p1 = percentile(v, 1.0);
  s.p5 = percentile(v, 5.0);
  s.p25 = percentile(v, 25.0);
  s.p50 = percentile(v, 50.0);
  s.p75 = percentile(v, 75.0);
  return s;
}

namespace detail {

// Circumradius of the tetra, infinity when the points are coplanar.
inline double circumradius(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  Tensor m(Shape{3, 3}), rhs(Shape{3, 1});
  const Vec3 rows[3] = {b - a, c - a, d - a};
  for (int i = 0; i < 3; ++i) {
    m[static_cast<std::int64_t>(i) * 3 + 0] = 2.0 * rows[i].x;
    m[static_cast<std::int64_t>(i) * 3 + 1] = 2.0 * rows[i].y;
    m[static_cast<std::int64_t>(i) * 3 + 2] = 2.0 * rows[i].z;
    rhs[i] = norm2(rows[i]);
  }
  if (!lu_solve(m, rhs)) return std::numeric_limits<double>::infinity();
  return norm(Vec3{rhs[0], rhs[1], rhs[2]});
}

}  // namespace detail

// Scaled Jacobian via the verdict convention: the corner-0 Jacobian scaled by
// sqrt(2) over the largest corner edge-product, which keeps every element in
// [-1, 1] with regular tets at +/-1.
inline double scaled_jacobian(const Vec3& v0, const Vec3& v1, const Vec3& v2, const Vec3& v3) {
  const Vec3 s0 = v1 - v0, s1 = v2 - v1, s2 = v0 - v2;
  const Vec3 s3 = v3 - v0, s4 = v3 - v1, s5 = v3 - v2;
  const double jac = dot(s3, cross(s2, s0));
  const double lambda = std::max(std::max(norm2(s0) * norm2(s2) * norm2(s3),
                                          norm2(s0) * norm2(s1) * norm2(s4)),
                                 std::max(norm2(s1) * norm2(s2) * norm2(s5),
                                          norm2(s3) * norm2(s4) * norm2(s5)));
  if (lambda <= 0.0) return 0.0;
  return std::sqrt(2.0) * jac / std::sqrt(lambda);
}

inline QualityReport tetra_quality(const Tensor& coords,
                                   const std::vector<std::array<int, 4>>& tetras) {
  check(coords.rank() == 2 && coords.dim(1) == 3, "tetra_quality coords must be Mx3");
  check(!tetras.empty(), "tetra_quality requires a nonempty tetra list");
  const double inf = std::numeric_limits<double>::infinity();
  QualityReport r;
  r.scaled_jacobian.reserve(tetras.size());
  r.aspect_ratio.reserve(tetras.size());
  r.mean_ratio.reserve(tetras.size());
  r.skewness.reserve(tetras.size());
  r.shape_quality.reserve(tetras.size());

  auto at = [&](int i) {
    check(i >= 0 && i < coords.dim(0), "tetra vertex index out of range");
    return Vec3{coords[static_cast<std::int64_t>(i) * 3],
                coords[static_cast<std::int64_t>(i) * 3 + 1],
                coords[static_cast<std::int64_t>(i) * 3 + 2]};
  };

  for (const auto& t : tetras) {
    const Vec3 v0 = at(t[0]), v1 = at(t[1]), v2 = at(t[2]), v3 = at(t[3]);
    const double vol = tetra_volume(v0, v1, v2, v3);
    const Vec3 e[6] = {v1 - v0, v2 - v0, v3 - v0, v2 - v1, v3 - v1, v3 - v2};
    double sum_l2 = 0.0, max_l2 = 0.0;
    for (const auto& ev : e) {
      const double l2 = norm2(ev);
      sum_l2 += l2;
      max_l2 = std::max(max_l2, l2);
    }

    if (std::abs(vol) < 1e-300 || sum_l2 <= 0.0) {
      r.scaled_jacobian.push_back(sum_l2 <= 0.0 ? 0.0 : scaled_jacobian(v0, v1, v2, v3));
      r.aspect_ratio.push_back(inf);
      r.mean_ratio.push_back(0.0);
      r.shape_quality.push_back(0.0);
      r.skewness.push_back(1.0);
      ++r.degenerate;
      continue;
    }

    r.scaled_jacobian.push_back(scaled_jacobian(v0, v1, v2, v3));

    const double sign = vol < 0.0 ? -1.0 : 1.0;
    r.mean_ratio.push_back(sign * 12.0 * std::pow(3.0 * std::abs(vol), 2.0 / 3.0) / sum_l2);

    const double l_rms = std::sqrt(sum_l2 / 6.0);
    r.shape_quality.push_back(6.0 * std::numbers::sqrt2 * vol / (l_rms * l_rms * l_rms));

    const double area = 0.5 * (norm(cross(v1 - v0, v2 - v0)) + norm(cross(v1 - v0, v3 - v0)) +
                               norm(cross(v2 - v0, v3 - v0)) + norm(cross(v2 - v1, v3 - v1)));
    const double r_in = 3.0 * std::abs(vol) / area;
    r.aspect_ratio.push_back(std::sqrt(max_l2) / (2.0 * std::sqrt(6.0) * r_in));

    const double circ = detail::circumradius(v0, v1, v2, v3);
    double skew = 1.0;
    if (std::isfinite(circ) && circ > 0.0) {
      const double v_reg = 8.0 * std::sqrt(3.0) / 27.0 * circ * circ * circ;
      skew = std::clamp(1.0 - vol / v_reg, 0.0, 1.0);
    }
    r.skewness.push_back(skew);
  }
  return r;
}

inline QualityReport tetra_quality(const VertexField& coords,
                                   const std::vector<std::array<int, 4>>& tetras) {
  return tetra_quality(coords.coords, tetras);
}

}  // namespace hybridmesh
