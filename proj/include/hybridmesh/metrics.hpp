#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "hybridmesh/error.hpp"
#include "hybridmesh/mesh.hpp"
#include "hybridmesh/rasterize.hpp"

namespace hybridmesh {

struct VertexErrors {
  double mae = 0.0;  // mean Euclidean error, mm
  double mse = 0.0;  // mean squared Euclidean error, mm^2
};

inline VertexErrors vertex_errors(const VertexField& pred, const VertexField& gt,
                                  const std::vector<StructureLabel>& labels,
                                  const StructureLabel* filter = nullptr) {
  check(pred.space == CoordSpace::millimetre && gt.space == CoordSpace::millimetre,
        "vertex_errors expects both fields in millimetre space");
  check(pred.coords.shape == gt.coords.shape, "vertex_errors shape mismatch");
  check(static_cast<int>(labels.size()) == pred.count(),
        "vertex_errors label count mismatch");
  VertexErrors e;
  std::int64_t n = 0;
  for (int i = 0; i < pred.count(); ++i) {
    if (filter && labels[static_cast<std::size_t>(i)] != *filter) continue;
    const Vec3 d = pred.at(i) - gt.at(i);
    const double d2 = norm2(d);
    e.mae += std::sqrt(d2);
    e.mse += d2;
    ++n;
  }
  check(n > 0, "vertex_errors selection is empty");
  e.mae /= static_cast<double>(n);
  e.mse /= static_cast<double>(n);
  return e;
}

inline VertexErrors vertex_errors(const VertexField& pred, const VertexField& gt) {
  std::vector<StructureLabel> all(static_cast<std::size_t>(pred.count()), StructureLabel::LV);
  return vertex_errors(pred, gt, all, nullptr);
}

namespace detail {

struct GridPoint {
  int x, y, z;
};

// mask voxels with at least one six-connected background neighbor; voxels on
// the grid boundary count as boundary
inline std::vector<GridPoint> boundary_voxels(const VoxelMask& m) {
  std::vector<GridPoint> out;
  auto bg = [&](int x, int y, int z) {
    if (x < 0 || y < 0 || z < 0 || x >= m.nx || y >= m.ny || z >= m.nz) return true;
    return !m.at(x, y, z);
  };
  for (int z = 0; z < m.nz; ++z)
    for (int y = 0; y < m.ny; ++y)
      for (int x = 0; x < m.nx; ++x) {
        if (!m.at(x, y, z)) continue;
        if (bg(x - 1, y, z) || bg(x + 1, y, z) || bg(x, y - 1, z) || bg(x, y + 1, z) ||
            bg(x, y, z - 1) || bg(x, y, z + 1))
          out.push_back({x, y, z});
      }
  return out;
}

inline double directed_max_min(const std::vector<GridPoint>& a, const std::vector<GridPoint>& b,
                               const Vec3& sp) {
  double worst = 0.0;
  for (const auto& p : a) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : b) {
      const double dx = (p.x - q.x) * sp.x, dy = (p.y - q.y) * sp.y, dz = (p.z - q.z) * sp.z;
      best = std::min(best, dx * dx + dy * dy + dz * dz);
    }
    worst = std::max(worst, best);
  }
  return std::sqrt(worst);
}

}  // namespace detail

// 2 |A n B| / (|A| + |B|); two empty masks count as a perfect match.
inline double dice(const VoxelMask& a, const VoxelMask& b, bool* warned = nullptr) {
  check(a.same_grid(b), "dice requires identical grids");
  std::int64_t both = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    both += a.data[i] != 0 && b.data[i] != 0;
    na += a.data[i] != 0;
    nb += b.data[i] != 0;
  }
  if (warned) *warned = false;
  if (na + nb == 0) {
    if (warned) *warned = true;
    return 1.0;
  }
  return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

// Symmetric Hausdorff distance in mm over 3D boundary-voxel centers.
inline double hausdorff(const VoxelMask& a, const VoxelMask& b, bool* warned = nullptr) {
  check(a.same_grid(b), "hausdorff requires identical grids");
  const auto ba = detail::boundary_voxels(a);
  const auto bb = detail::boundary_voxels(b);
  if (warned) *warned = false;
  if (ba.empty() && bb.empty()) {
    if (warned) *warned = true;
    return 0.0;
  }
  if (ba.empty() || bb.empty()) {
    if (warned) *warned = true;
    return std::numeric_limits<double>::infinity();
  }
  return std::max(detail::directed_max_min(ba, bb, a.spacing),
                  detail::directed_max_min(bb, ba, a.spacing));
}

// Mean contour distance: per z-slice, the average of the two directed mean
// nearest-neighbor distances between 2D boundary pixel sets (4-connected
// background test within the slice); slices where either set is empty are
// skipped, and the result is the mean over the surviving slices.
inline double mcd(const VoxelMask& a, const VoxelMask& b, bool* warned = nullptr) {
  check(a.same_grid(b), "mcd requires identical grids");
  if (warned) *warned = false;
  double total = 0.0;
  int slices = 0;
  std::vector<std::pair<int, int>> pa, pb;
  for (int z = 0; z < a.nz; ++z) {
    pa.clear();
    pb.clear();
    auto collect = [&](const VoxelMask& m, std::vector<std::pair<int, int>>& out) {
      auto bg = [&](int x, int y) {
        if (x < 0 || y < 0 || x >= m.nx || y >= m.ny) return true;
        return !m.at(x, y, z);
      };
      for (int y = 0; y < m.ny; ++y)
        for (int x = 0; x < m.nx; ++x)
          if (m.at(x, y, z) && (bg(x - 1, y) || bg(x + 1, y) || bg(x, y - 1) || bg(x, y + 1)))
            out.emplace_back(x, y);
    };
    collect(a, pa);
    collect(b, pb);
    if (pa.empty() || pb.empty()) continue;
    auto directed_mean = [&](const std::vector<std::pair<int, int>>& from,
                             const std::vector<std::pair<int, int>>& to) {
      double sum = 0.0;
      for (const auto& p : from) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& q : to) {
          const double dx = (p.first - q.first) * a.spacing.x;
          const double dy = (p.second - q.second) * a.spacing.y;
          best = std::min(best, dx * dx + dy * dy);
        }
        sum += std::sqrt(best);
      }
      return sum / static_cast<double>(from.size());
    };
    total += 0.5 * (directed_mean(pa, pb) + directed_mean(pb, pa));
    ++slices;
  }
  if (slices == 0) {
    if (warned) *warned = true;
    return 0.0;
  }
  return total / static_cast<double>(slices);
}

}  // namespace hybridmesh
