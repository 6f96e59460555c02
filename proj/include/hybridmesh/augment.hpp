#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hybridmesh/image.hpp"
#include "hybridmesh/rng.hpp"

namespace hybridmesh {

struct AugmentParams {
  double theta_deg = 0.0;  // in-plane SAX rotation
  double sx = 1.0, sy = 1.0;
  double gain = 1.0, bias = 0.0;
};

inline AugmentParams draw_augment_params(Rng& rng) {
  AugmentParams p;
  p.theta_deg = rng.uniform(-10.0, 10.0);
  p.sx = rng.uniform(0.9, 1.1);
  p.sy = rng.uniform(0.9, 1.1);
  p.gain = rng.uniform(0.9, 1.1);
  p.bias = rng.uniform(-0.05, 0.05);
  return p;
}

namespace detail {

inline double bilinear2d(const Tensor& img, int nx, int ny, std::int64_t plane, double x,
                         double y) {
  if (x <= -1.0 || y <= -1.0 || x >= nx || y >= ny) return 0.0;
  const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0, fy = y - y0;
  auto at = [&](int xi, int yi) {
    if (xi < 0 || yi < 0 || xi >= nx || yi >= ny) return 0.0;
    return img[plane + static_cast<std::int64_t>(yi) * nx + xi];
  };
  return (1.0 - fy) * ((1.0 - fx) * at(x0, y0) + fx * at(x0 + 1, y0)) +
         fy * ((1.0 - fx) * at(x0, y0 + 1) + fx * at(x0 + 1, y0 + 1));
}

}  // namespace detail

// In-plane rotation and anisotropic xy scaling of the SAX stack about the
// image centre with the matching gt motion, the projection of that scaling
// onto each LAX view's horizontal direction, and intensity jitter everywhere.
// Geometry: p' = C + R(theta) S (p - C), z untouched. Identity parameters
// reproduce the input exactly.
inline MultiViewSample apply_augment(const MultiViewSample& s, const AugmentParams& prm) {
  check(prm.sx > 0.0 && prm.sy > 0.0, "augment scales must be positive");
  MultiViewSample out = s;
  const bool warp = prm.theta_deg != 0.0 || prm.sx != 1.0 || prm.sy != 1.0;
  const bool jitter = prm.gain != 1.0 || prm.bias != 0.0;

  const double th = prm.theta_deg * std::numbers::pi / 180.0;
  const double c = std::cos(th), sn = std::sin(th);
  // in-plane mm centre of the SAX stack
  const double cx = s.sax.origin.x + 0.5 * (s.sax.nx() - 1) * s.sax.spacing.x;
  const double cy = s.sax.origin.y + 0.5 * (s.sax.ny() - 1) * s.sax.spacing.y;

  if (warp) {
    for (int i = 0; i < out.gt.count(); ++i) {
      const Vec3 p = out.gt.at(i);
      const double dx = prm.sx * (p.x - cx), dy = prm.sy * (p.y - cy);
      out.gt.set(i, {cx + c * dx - sn * dy, cy + sn * dx + c * dy, p.z});
    }
    // inverse map per output voxel: unrotate, unscale, then sample the source
    for (int z = 0; z < s.sax.nz(); ++z) {
      const std::int64_t plane = static_cast<std::int64_t>(z) * s.sax.ny() * s.sax.nx();
      for (int y = 0; y < s.sax.ny(); ++y)
        for (int x = 0; x < s.sax.nx(); ++x) {
          const double px = s.sax.origin.x + x * s.sax.spacing.x - cx;
          const double py = s.sax.origin.y + y * s.sax.spacing.y - cy;
          const double ux = (c * px + sn * py) / prm.sx;
          const double uy = (-sn * px + c * py) / prm.sy;
          const double vx = (ux + cx - s.sax.origin.x) / s.sax.spacing.x;
          const double vy = (uy + cy - s.sax.origin.y) / s.sax.spacing.y;
          out.sax.at(x, y, z) = detail::bilinear2d(s.sax.data, s.sax.nx(), s.sax.ny(), plane,
                                                   vx, vy);
        }
    }
    for (std::size_t k = 0; k < s.lax.size(); ++k) {
      const ImagePlane& in = s.lax[k];
      ImagePlane& pl = out.lax[k];
      // stretch factor of the xy scaling along this view's horizontal direction
      const double factor = std::sqrt(prm.sx * prm.sx * in.axis_x.x * in.axis_x.x +
                                      prm.sy * prm.sy * in.axis_x.y * in.axis_x.y +
                                      in.axis_x.z * in.axis_x.z);
      // horizontal pixel coordinate of the SAX centre line, the stretch fixpoint
      const double h0 = (in.axis_x.x * (cx - in.origin.x) + in.axis_x.y * (cy - in.origin.y) -
                         in.axis_x.z * in.origin.z) /
                        in.spacing_x;
      for (int y = 0; y < in.ny(); ++y)
        for (int x = 0; x < in.nx(); ++x) {
          const double sx = h0 + (x - h0) / factor;
          pl.at(x, y) =
              detail::bilinear2d(in.data, in.nx(), in.ny(), 0, sx, static_cast<double>(y));
        }
    }
  }

  if (jitter) {
    for (std::int64_t i = 0; i < out.sax.data.size(); ++i)
      out.sax.data[i] = std::clamp(prm.gain * out.sax.data[i] + prm.bias, 0.0, 1.0);
    for (auto& pl : out.lax)
      for (std::int64_t i = 0; i < pl.data.size(); ++i)
        pl.data[i] = std::clamp(prm.gain * pl.data[i] + prm.bias, 0.0, 1.0);
  }
  return out;
}

inline MultiViewSample augment(const MultiViewSample& s, Rng& rng) {
  return apply_augment(s, draw_augment_params(rng));
}

}  // namespace hybridmesh
