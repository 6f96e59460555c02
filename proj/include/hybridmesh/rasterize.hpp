#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hybridmesh/error.hpp"
#include "hybridmesh/geometry.hpp"
#include "hybridmesh/mesh.hpp"
#include "hybridmesh/tensor.hpp"

namespace hybridmesh {

// Dense boolean grid; origin is the millimetre position of the (0,0,0) voxel
// center and data is x-fastest.
struct VoxelMask {
  int nx = 0, ny = 0, nz = 0;
  Vec3 spacing{1.0, 1.0, 1.0};
  Vec3 origin{0.0, 0.0, 0.0};
  std::vector<std::uint8_t> data;

  VoxelMask() = default;
  VoxelMask(int nx_, int ny_, int nz_, Vec3 spacing_, Vec3 origin_)
      : nx(nx_), ny(ny_), nz(nz_), spacing(spacing_), origin(origin_) {
    check(nx > 0 && ny > 0 && nz > 0, "voxel mask dimensions must be positive");
    check(spacing.x > 0.0 && spacing.y > 0.0 && spacing.z > 0.0,
          "voxel mask spacing must be positive");
    data.assign(static_cast<std::size_t>(nx) * ny * nz, 0);
  }

  std::int64_t index(int x, int y, int z) const {
    return (static_cast<std::int64_t>(z) * ny + y) * nx + x;
  }
  bool at(int x, int y, int z) const { return data[static_cast<std::size_t>(index(x, y, z))] != 0; }
  void set(int x, int y, int z, bool v) {
    data[static_cast<std::size_t>(index(x, y, z))] = v ? 1 : 0;
  }
  Vec3 center(int x, int y, int z) const {
    return {origin.x + x * spacing.x, origin.y + y * spacing.y, origin.z + z * spacing.z};
  }
  std::int64_t count() const {
    std::int64_t n = 0;
    for (auto v : data) n += v != 0;
    return n;
  }
  bool same_grid(const VoxelMask& o) const {
    return nx == o.nx && ny == o.ny && nz == o.nz && spacing.x == o.spacing.x &&
           spacing.y == o.spacing.y && spacing.z == o.spacing.z && origin.x == o.origin.x &&
           origin.y == o.origin.y && origin.z == o.origin.z;
  }
};

struct GridSpec {
  int nx = 0, ny = 0, nz = 0;
  Vec3 spacing{1.0, 1.0, 1.0};
  Vec3 origin{0.0, 0.0, 0.0};
};

namespace detail {

// All +x crossings of the ray through (y, z) with the triangle set. Hits on a
// triangle boundary or an x-parallel triangle are degenerate under parity, so
// the ray is retried with a deterministic epsilon offset until clean.
inline std::vector<double> ray_crossings(double y, double z, const Tensor& coords,
                                         const std::vector<std::array<int, 3>>& faces) {
  const double scale_y = 1.0 + std::abs(y), scale_z = 1.0 + std::abs(z);
  for (int attempt = 0; attempt < 64; ++attempt) {
    const double ry = y + 3e-9 * scale_y * attempt;
    const double rz = z + 7e-9 * scale_z * attempt;
    std::vector<double> xs;
    bool clean = true;
    for (const auto& f : faces) {
      const std::int64_t r0 = static_cast<std::int64_t>(f[0]) * 3;
      const std::int64_t r1 = static_cast<std::int64_t>(f[1]) * 3;
      const std::int64_t r2 = static_cast<std::int64_t>(f[2]) * 3;
      const double ay = coords[r0 + 1] - ry, az = coords[r0 + 2] - rz;
      const double by = coords[r1 + 1] - ry, bz = coords[r1 + 2] - rz;
      const double cy = coords[r2 + 1] - ry, cz = coords[r2 + 2] - rz;
      const double det = (by - ay) * (cz - az) - (bz - az) * (cy - ay);
      const double u = by * cz - bz * cy;  // weight of vertex 0, unnormalized
      const double v = cy * az - cz * ay;
      const double w = ay * bz - az * by;
      const double scale = std::abs(ay) + std::abs(by) + std::abs(cy) + std::abs(az) +
                           std::abs(bz) + std::abs(cz) + 1e-30;
      const double tol = 1e-12 * scale * scale;
      if (std::abs(det) <= tol) {
        // x-parallel triangle: a measure-zero parity case, so retry only when
        // the ray actually grazes one of its edges
        auto seg_dist2 = [](double py, double pz, double qy, double qz) {
          const double dy = qy - py, dz = qz - pz;
          const double l2 = dy * dy + dz * dz;
          double t = l2 > 0.0 ? (-py * dy - pz * dz) / l2 : 0.0;
          t = std::clamp(t, 0.0, 1.0);
          const double hy = py + t * dy, hz = pz + t * dz;
          return hy * hy + hz * hz;
        };
        const double d2 = std::min(std::min(seg_dist2(ay, az, by, bz), seg_dist2(by, bz, cy, cz)),
                                   seg_dist2(cy, cz, ay, az));
        if (d2 <= 1e-24 * scale * scale) {
          clean = false;
          break;
        }
        continue;
      }
      const double w0 = u / det, w1 = v / det, w2 = w / det;
      const double btol = 1e-12;
      if (std::abs(w0) <= btol || std::abs(w1) <= btol || std::abs(w2) <= btol) {
        clean = false;  // boundary hit
        break;
      }
      if (w0 > 0.0 && w1 > 0.0 && w2 > 0.0) {
        const double x0 = coords[r0];
        xs.push_back(x0 + w1 * (coords[r1] - x0) + w2 * (coords[r2] - x0));
      }
    }
    if (!clean) continue;
    std::sort(xs.begin(), xs.end());
    return xs;
  }
  throw ValidationError("ray casting could not escape degenerate hits at y=" +
                        std::to_string(y) + " z=" + std::to_string(z));
}

}  // namespace detail

// Parity test for a single point against a closed triangle set (millimetres).
inline bool point_inside_surface(const Vec3& p, const Tensor& coords,
                                 const std::vector<std::array<int, 3>>& faces) {
  const auto xs = detail::ray_crossings(p.y, p.z, coords, faces);
  std::int64_t after = 0;
  for (double x : xs) after += x > p.x;
  return (after % 2) != 0;
}

// Voxelize one closed, consistently oriented sub-surface by +x parity ray
// casting through every (y, z) column of voxel centers.
inline VoxelMask rasterize(const VertexField& mesh, const std::vector<std::array<int, 3>>& faces,
                           const GridSpec& grid) {
  check(mesh.space == CoordSpace::millimetre, "rasterize expects a millimetre-space mesh");
  check(!faces.empty(), "rasterize requires a nonempty face set");

  std::map<std::pair<int, int>, int> edge_count;
  for (const auto& f : faces)
    for (int k = 0; k < 3; ++k) {
      int a = f[static_cast<std::size_t>(k)], b = f[static_cast<std::size_t>((k + 1) % 3)];
      if (a > b) std::swap(a, b);
      ++edge_count[{a, b}];
    }
  int boundary = 0;
  for (const auto& [e, n] : edge_count) boundary += n != 2;
  check(boundary == 0,
        "rasterize requires a closed surface: " + std::to_string(boundary) + " boundary edges");

  VoxelMask mask(grid.nx, grid.ny, grid.nz, grid.spacing, grid.origin);
  for (int z = 0; z < grid.nz; ++z)
    for (int y = 0; y < grid.ny; ++y) {
      const Vec3 c0 = mask.center(0, y, z);
      const auto xs = detail::ray_crossings(c0.y, c0.z, mesh.coords, faces);
      if (xs.empty()) continue;
      std::size_t next = 0;
      std::int64_t before = 0;
      for (int x = 0; x < grid.nx; ++x) {
        const double cx = mask.center(x, y, z).x;
        while (next < xs.size() && xs[next] < cx) {
          ++next;
          ++before;
        }
        if ((before % 2) != 0) mask.set(x, y, z, true);
      }
    }
  return mask;
}

// LV myocardium between the epicardial and endocardial surfaces.
inline VoxelMask mask_and_not(const VoxelMask& outer, const VoxelMask& inner) {
  check(outer.same_grid(inner), "mask_and_not requires identical grids");
  VoxelMask out = outer;
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = (outer.data[i] != 0 && inner.data[i] == 0) ? 1 : 0;
  return out;
}

}  // namespace hybridmesh
