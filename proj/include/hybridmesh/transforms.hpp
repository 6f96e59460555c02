#pragma once

#include "hybridmesh/error.hpp"
#include "hybridmesh/geometry.hpp"
#include "hybridmesh/mesh.hpp"

namespace hybridmesh {

enum class TransformMode { full, cropped };

// Millimetre <-> relative positional space for one sample. Points are taken
// to voxel coordinates of the native image, shifted by the padding (full) or
// the crop origin (cropped), and divided by the final image size, so
// (0.5, 0.5, 0.5) lands at the centre of the network's input volume.
struct SpaceTransform {
  TransformMode mode = TransformMode::full;
  Vec3 pad{0, 0, 0};          // voxels prepended to the native image, full mode
  Vec3 crop_origin{0, 0, 0};  // voxel origin of the crop box, cropped mode
  Vec3 size{1, 1, 1};         // final image size in voxels
  Vec3 spacing{1, 1, 1};      // native voxel spacing, mm
  Vec3 origin{0, 0, 0};       // mm position of the native voxel (0,0,0) centre
};

namespace detail {

inline void validate(const SpaceTransform& t) {
  check(t.spacing.x > 0.0 && t.spacing.y > 0.0 && t.spacing.z > 0.0,
        "space transform spacing must be positive");
  check(t.size.x > 0.0 && t.size.y > 0.0 && t.size.z > 0.0,
        "space transform size must be positive");
}

inline Vec3 voxel_shift(const SpaceTransform& t) {
  return t.mode == TransformMode::full ? t.pad : Vec3{0, 0, 0} - t.crop_origin;
}

}  // namespace detail

inline Vec3 to_relative_point(const Vec3& p, const SpaceTransform& t) {
  const Vec3 s = detail::voxel_shift(t);
  return {((p.x - t.origin.x) / t.spacing.x + s.x) / t.size.x,
          ((p.y - t.origin.y) / t.spacing.y + s.y) / t.size.y,
          ((p.z - t.origin.z) / t.spacing.z + s.z) / t.size.z};
}

inline Vec3 to_mm_point(const Vec3& r, const SpaceTransform& t) {
  const Vec3 s = detail::voxel_shift(t);
  return {(r.x * t.size.x - s.x) * t.spacing.x + t.origin.x,
          (r.y * t.size.y - s.y) * t.spacing.y + t.origin.y,
          (r.z * t.size.z - s.z) * t.spacing.z + t.origin.z};
}

inline VertexField to_relative(const VertexField& mm, const SpaceTransform& t) {
  check(mm.space == CoordSpace::millimetre, "to_relative expects a millimetre-space field");
  detail::validate(t);
  VertexField out(mm.coords, CoordSpace::relative);
  for (int i = 0; i < mm.count(); ++i) out.set(i, to_relative_point(mm.at(i), t));
  return out;
}

inline VertexField to_mm(const VertexField& rel, const SpaceTransform& t) {
  check(rel.space == CoordSpace::relative, "to_mm expects a relative-space field");
  detail::validate(t);
  VertexField out(rel.coords, CoordSpace::millimetre);
  for (int i = 0; i < rel.count(); ++i) out.set(i, to_mm_point(rel.at(i), t));
  return out;
}

}  // namespace hybridmesh
