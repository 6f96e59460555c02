#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "hybridmesh/error.hpp"
#include "hybridmesh/geometry.hpp"
#include "hybridmesh/mesh.hpp"
#include "hybridmesh/rng.hpp"
#include "hybridmesh/tensor.hpp"
#include "hybridmesh/transforms.hpp"

namespace hybridmesh {

// Axis-aligned intensity volume, data laid out [nz, ny, nx] with x fastest;
// origin is the mm position of the voxel (0, 0, 0) centre.
struct Image3D {
  Tensor data;
  Vec3 spacing{1, 1, 1};
  Vec3 origin{0, 0, 0};

  int nx() const { return data.dim(2); }
  int ny() const { return data.dim(1); }
  int nz() const { return data.dim(0); }
  double at(int x, int y, int z) const {
    return data[(static_cast<std::int64_t>(z) * ny() + y) * nx() + x];
  }
  double& at(int x, int y, int z) {
    return data[(static_cast<std::int64_t>(z) * ny() + y) * nx() + x];
  }
};

// Oblique 2D slice embedded in 3D: pixel (i, j) sits at
// origin + axis_x * i * spacing_x + axis_y * j * spacing_y, data is [ny, nx].
struct ImagePlane {
  Tensor data;
  Vec3 origin{0, 0, 0};
  Vec3 axis_x{1, 0, 0};
  Vec3 axis_y{0, 0, 1};
  double spacing_x = 1.0, spacing_y = 1.0;

  int nx() const { return data.dim(1); }
  int ny() const { return data.dim(0); }
  double at(int x, int y) const { return data[static_cast<std::int64_t>(y) * nx() + x]; }
  double& at(int x, int y) { return data[static_cast<std::int64_t>(y) * nx() + x]; }
  Vec3 position(double x, double y) const {
    return origin + axis_x * (x * spacing_x) + axis_y * (y * spacing_y);
  }
};

enum class CardiacPhase { ED, ES };

inline std::string phase_name(CardiacPhase p) { return p == CardiacPhase::ED ? "ED" : "ES"; }

// One training/evaluation unit: a SAX stack, three LAX views (2CH, 3CH, 4CH),
// the ground-truth mesh in mm, and the transform tying gt to relative space.
struct MultiViewSample {
  Image3D sax;
  std::array<ImagePlane, 3> lax;
  VertexField gt;
  SpaceTransform transform;
  std::string subject;
  CardiacPhase phase = CardiacPhase::ED;
};

inline void validate_sample(const MultiViewSample& s) {
  check(s.sax.data.rank() == 3, "sample SAX volume must be rank 3");
  check(s.sax.spacing.x > 0 && s.sax.spacing.y > 0 && s.sax.spacing.z > 0,
        "sample SAX spacing must be positive");
  for (std::int64_t i = 0; i < s.sax.data.size(); ++i)
    check(s.sax.data[i] >= 0.0 && s.sax.data[i] <= 1.0, "SAX intensities must lie in [0,1]");
  for (const auto& p : s.lax) {
    check(p.data.rank() == 2, "sample LAX image must be rank 2");
    check(p.spacing_x > 0 && p.spacing_y > 0, "sample LAX spacing must be positive");
    for (std::int64_t i = 0; i < p.data.size(); ++i)
      check(p.data[i] >= 0.0 && p.data[i] <= 1.0, "LAX intensities must lie in [0,1]");
  }
  check(s.gt.space == CoordSpace::millimetre, "sample gt must be stored in mm");
}

struct PadCropConfig {
  std::array<int, 3> sax_full{64, 64, 12};     // target nx, ny, nz, full mode
  std::array<int, 3> sax_cropped{40, 40, 12};  // crop box size, cropped mode
  std::array<int, 2> lax{96, 96};              // target nx, ny for every LAX view
};

namespace detail {

inline ImagePlane pad_plane(const ImagePlane& p, int tx, int ty) {
  check(p.nx() <= tx && p.ny() <= ty,
        "LAX image larger than its padding target " + shape_string(p.data.shape));
  const int ox = (tx - p.nx()) / 2, oy = (ty - p.ny()) / 2;
  ImagePlane out = p;
  out.data = Tensor(Shape{ty, tx});
  for (int y = 0; y < p.ny(); ++y)
    for (int x = 0; x < p.nx(); ++x) out.at(x + ox, y + oy) = p.at(x, y);
  out.origin = p.origin - p.axis_x * (ox * p.spacing_x) - p.axis_y * (oy * p.spacing_y);
  return out;
}

// Voxel-space bounding box of the gt, using the native SAX grid.
inline void gt_voxel_bounds(const MultiViewSample& s, Vec3& lo, Vec3& hi) {
  const double inf = std::numeric_limits<double>::infinity();
  lo = {inf, inf, inf};
  hi = {-inf, -inf, -inf};
  for (int i = 0; i < s.gt.count(); ++i) {
    const Vec3 p = s.gt.at(i);
    const Vec3 v{(p.x - s.sax.origin.x) / s.sax.spacing.x,
                 (p.y - s.sax.origin.y) / s.sax.spacing.y,
                 (p.z - s.sax.origin.z) / s.sax.spacing.z};
    lo = {std::min(lo.x, v.x), std::min(lo.y, v.y), std::min(lo.z, v.z)};
    hi = {std::max(hi.x, v.x), std::max(hi.y, v.y), std::max(hi.z, v.z)};
  }
}

}  // namespace detail

// Pad (full) or crop (cropped) the SAX stack to the configured network input
// size, zero-pad every LAX view square, and record the SpaceTransform that
// maps gt mm coordinates into the relative cube of the result. In cropped
// mode the box is centred on the gt bounding box, or placed uniformly at
// random among all positions containing it when an rng is supplied.
inline MultiViewSample pad_and_crop(const MultiViewSample& s, TransformMode mode,
                                    const PadCropConfig& cfg = {}, Rng* rng = nullptr) {
  MultiViewSample out = s;
  out.transform.mode = mode;
  out.transform.spacing = s.sax.spacing;
  out.transform.origin = s.sax.origin;

  if (mode == TransformMode::full) {
    const auto& t = cfg.sax_full;
    check(s.sax.nx() <= t[0] && s.sax.ny() <= t[1] && s.sax.nz() <= t[2],
          "SAX image larger than its padding target " + shape_string(s.sax.data.shape));
    const int px = (t[0] - s.sax.nx()) / 2, py = (t[1] - s.sax.ny()) / 2,
              pz = (t[2] - s.sax.nz()) / 2;
    out.sax.data = Tensor(Shape{t[2], t[1], t[0]});
    for (int z = 0; z < s.sax.nz(); ++z)
      for (int y = 0; y < s.sax.ny(); ++y)
        for (int x = 0; x < s.sax.nx(); ++x) out.sax.at(x + px, y + py, z + pz) = s.sax.at(x, y, z);
    out.sax.origin = s.sax.origin - Vec3{px * s.sax.spacing.x, py * s.sax.spacing.y,
                                         pz * s.sax.spacing.z};
    out.transform.pad = {static_cast<double>(px), static_cast<double>(py),
                         static_cast<double>(pz)};
    out.transform.crop_origin = {0, 0, 0};
    out.transform.size = {static_cast<double>(t[0]), static_cast<double>(t[1]),
                          static_cast<double>(t[2])};
  } else {
    const auto& t = cfg.sax_cropped;
    Vec3 lo, hi;
    detail::gt_voxel_bounds(s, lo, hi);
    int org[3];
    for (int k = 0; k < 3; ++k) {
      const double bmin = lo[k], bmax = hi[k];
      const int size = t[static_cast<std::size_t>(k)];
      const int first = static_cast<int>(std::ceil(bmax - size));
      const int last = static_cast<int>(std::floor(bmin));
      check(first <= last, "crop box cannot contain the mesh bounding box along axis " +
                               std::to_string(k));
      if (rng)
        org[k] = first + rng->uniform_int(last - first + 1);
      else
        org[k] = std::clamp(static_cast<int>(std::lround(0.5 * (bmin + bmax) - 0.5 * size)),
                            first, last);
    }
    out.sax.data = Tensor(Shape{t[2], t[1], t[0]});
    for (int z = 0; z < t[2]; ++z)
      for (int y = 0; y < t[1]; ++y)
        for (int x = 0; x < t[0]; ++x) {
          const int sx = x + org[0], sy = y + org[1], sz = z + org[2];
          if (sx >= 0 && sy >= 0 && sz >= 0 && sx < s.sax.nx() && sy < s.sax.ny() &&
              sz < s.sax.nz())
            out.sax.at(x, y, z) = s.sax.at(sx, sy, sz);
        }
    out.sax.origin = s.sax.origin + Vec3{org[0] * s.sax.spacing.x, org[1] * s.sax.spacing.y,
                                         org[2] * s.sax.spacing.z};
    out.transform.pad = {0, 0, 0};
    out.transform.crop_origin = {static_cast<double>(org[0]), static_cast<double>(org[1]),
                                 static_cast<double>(org[2])};
    out.transform.size = {static_cast<double>(t[0]), static_cast<double>(t[1]),
                          static_cast<double>(t[2])};
  }

  for (auto& p : out.lax) p = detail::pad_plane(p, cfg.lax[0], cfg.lax[1]);
  return out;
}

}  // namespace hybridmesh
