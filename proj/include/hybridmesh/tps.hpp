#pragma once

#include "hybridmesh/linalg.hpp"
#include "hybridmesh/mesh.hpp"

namespace hybridmesh {

// 3D thin-plate spline with kernel U(r) = r. Fitting solves
//   [ K - lambda I   P ] [ W ]   [ T ]
//   [ P^T            0 ] [ A ] = [ 0 ]
// where K_ij = |s_i - s_j|, P = [1 | x y z], so the kernel weights W are
// orthogonal to constants and linear functions and the map reproduces
// affine targets exactly. U(r) = r is conditionally negative definite in 3D,
// so the smoothing ridge enters with a minus sign (equivalently +lambda on
// the kernel -r); the plus convention would cross a singularity and break
// the energy monotonicity in lambda.
struct TpsWarp {
  Tensor source;   // L x 3 landmarks
  Tensor affine;   // 4 x 3, row 0 the constant term
  Tensor weights;  // L x 3 kernel weights

  int landmark_count() const { return source.dim(0); }

  Vec3 apply(const Vec3& p) const {
    Vec3 out{affine[0 * 3 + 0] + affine[1 * 3 + 0] * p.x + affine[2 * 3 + 0] * p.y +
                 affine[3 * 3 + 0] * p.z,
             affine[0 * 3 + 1] + affine[1 * 3 + 1] * p.x + affine[2 * 3 + 1] * p.y +
                 affine[3 * 3 + 1] * p.z,
             affine[0 * 3 + 2] + affine[1 * 3 + 2] * p.x + affine[2 * 3 + 2] * p.y +
                 affine[3 * 3 + 2] * p.z};
    const int L = landmark_count();
    for (int i = 0; i < L; ++i) {
      const Vec3 s{source[static_cast<std::int64_t>(i) * 3 + 0],
                   source[static_cast<std::int64_t>(i) * 3 + 1],
                   source[static_cast<std::int64_t>(i) * 3 + 2]};
      const double u = norm(p - s);
      out.x += weights[static_cast<std::int64_t>(i) * 3 + 0] * u;
      out.y += weights[static_cast<std::int64_t>(i) * 3 + 1] * u;
      out.z += weights[static_cast<std::int64_t>(i) * 3 + 2] * u;
    }
    return out;
  }

  Tensor apply(const Tensor& points) const {
    check(points.rank() == 2 && points.dim(1) == 3, "tps apply needs Nx3 points");
    Tensor out(points.shape);
    for (int i = 0; i < points.dim(0); ++i) {
      const Vec3 q = apply(Vec3{points[static_cast<std::int64_t>(i) * 3 + 0],
                                points[static_cast<std::int64_t>(i) * 3 + 1],
                                points[static_cast<std::int64_t>(i) * 3 + 2]});
      out[static_cast<std::int64_t>(i) * 3 + 0] = q.x;
      out[static_cast<std::int64_t>(i) * 3 + 1] = q.y;
      out[static_cast<std::int64_t>(i) * 3 + 2] = q.z;
    }
    return out;
  }

  // Bending energy term -tr(W^T K W); U(r)=r is conditionally negative
  // definite, so this is nonnegative on the constrained weight space.
  double bending_energy() const {
    const int L = landmark_count();
    double e = 0.0;
    for (int i = 0; i < L; ++i) {
      const Vec3 si{source[static_cast<std::int64_t>(i) * 3 + 0],
                    source[static_cast<std::int64_t>(i) * 3 + 1],
                    source[static_cast<std::int64_t>(i) * 3 + 2]};
      for (int j = 0; j < L; ++j) {
        const Vec3 sj{source[static_cast<std::int64_t>(j) * 3 + 0],
                      source[static_cast<std::int64_t>(j) * 3 + 1],
                      source[static_cast<std::int64_t>(j) * 3 + 2]};
        const double k = norm(si - sj);
        double dotw = 0.0;
        for (int c = 0; c < 3; ++c)
          dotw += weights[static_cast<std::int64_t>(i) * 3 + c] *
                  weights[static_cast<std::int64_t>(j) * 3 + c];
        e -= k * dotw;
      }
    }
    return e;
  }
};

inline TpsWarp fit_tps(const Tensor& source, const Tensor& target, double regularization = 0.0) {
  check(source.rank() == 2 && source.dim(1) == 3, "tps source must be Lx3");
  check(target.same_shape(source), "tps source/target shape mismatch");
  check(regularization >= 0.0, "tps regularization must be >= 0");
  const int L = source.dim(0);
  check(L >= 4, "tps needs at least 4 landmarks");

  const int n = L + 4;
  Tensor A(Shape{n, n});
  Tensor rhs(Shape{n, 3});
  for (int i = 0; i < L; ++i) {
    const Vec3 si{source[static_cast<std::int64_t>(i) * 3 + 0],
                  source[static_cast<std::int64_t>(i) * 3 + 1],
                  source[static_cast<std::int64_t>(i) * 3 + 2]};
    for (int j = 0; j < L; ++j) {
      const Vec3 sj{source[static_cast<std::int64_t>(j) * 3 + 0],
                    source[static_cast<std::int64_t>(j) * 3 + 1],
                    source[static_cast<std::int64_t>(j) * 3 + 2]};
      A[static_cast<std::int64_t>(i) * n + j] = norm(si - sj);
    }
    A[static_cast<std::int64_t>(i) * n + i] -= regularization;
    A[static_cast<std::int64_t>(i) * n + L + 0] = 1.0;
    A[static_cast<std::int64_t>(i) * n + L + 1] = si.x;
    A[static_cast<std::int64_t>(i) * n + L + 2] = si.y;
    A[static_cast<std::int64_t>(i) * n + L + 3] = si.z;
    A[static_cast<std::int64_t>(L + 0) * n + i] = 1.0;
    A[static_cast<std::int64_t>(L + 1) * n + i] = si.x;
    A[static_cast<std::int64_t>(L + 2) * n + i] = si.y;
    A[static_cast<std::int64_t>(L + 3) * n + i] = si.z;
    for (int c = 0; c < 3; ++c)
      rhs[static_cast<std::int64_t>(i) * 3 + c] = target[static_cast<std::int64_t>(i) * 3 + c];
  }

  check(lu_solve(A, rhs), "tps system is singular (coplanar or repeated landmarks)");

  TpsWarp warp;
  warp.source = source;
  warp.weights = Tensor(Shape{L, 3});
  warp.affine = Tensor(Shape{4, 3});
  for (int i = 0; i < L; ++i)
    for (int c = 0; c < 3; ++c)
      warp.weights[static_cast<std::int64_t>(i) * 3 + c] =
          rhs[static_cast<std::int64_t>(i) * 3 + c];
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 3; ++c)
      warp.affine[static_cast<std::int64_t>(r) * 3 + c] =
          rhs[static_cast<std::int64_t>(L + r) * 3 + c];
  return warp;
}

// Registers the volumetric template onto a subject surface: exact TPS fitted
// on the surface correspondence carries the interior along, and surface
// vertices are assigned their exact targets.
inline VertexField warp_volumetric_template(const VertexField& template_coords,
                                            const std::vector<int>& surface_vertex_ids,
                                            const VertexField& subject_surface) {
  const int S = static_cast<int>(surface_vertex_ids.size());
  check(subject_surface.count() == S, "surface correspondence count mismatch");
  for (int v : surface_vertex_ids)
    check(v >= 0 && v < template_coords.count(), "surface vertex id out of range");

  Tensor source(Shape{S, 3});
  for (int i = 0; i < S; ++i) {
    const Vec3 p = template_coords.at(surface_vertex_ids[static_cast<std::size_t>(i)]);
    source[static_cast<std::int64_t>(i) * 3 + 0] = p.x;
    source[static_cast<std::int64_t>(i) * 3 + 1] = p.y;
    source[static_cast<std::int64_t>(i) * 3 + 2] = p.z;
  }
  const TpsWarp warp = fit_tps(source, subject_surface.coords, 0.0);

  VertexField out(warp.apply(template_coords.coords), subject_surface.space);
  for (int i = 0; i < S; ++i)
    out.set(surface_vertex_ids[static_cast<std::size_t>(i)], subject_surface.at(i));
  return out;
}

}  // namespace hybridmesh
