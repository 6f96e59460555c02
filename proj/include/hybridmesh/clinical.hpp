#pragma once

#include <optional>

#include "hybridmesh/error.hpp"
#include "hybridmesh/rasterize.hpp"

namespace hybridmesh {

// Method of disks on a voxel mask: per-slice area times inter-slice spacing,
// reported in millilitres.
inline double mask_volume_ml(const VoxelMask& m) {
  const double pixel_area = m.spacing.x * m.spacing.y;
  double total = 0.0;
  for (int z = 0; z < m.nz; ++z) {
    std::int64_t pixels = 0;
    for (int y = 0; y < m.ny; ++y)
      for (int x = 0; x < m.nx; ++x) pixels += m.at(x, y, z);
    total += static_cast<double>(pixels) * pixel_area * m.spacing.z;
  }
  return total / 1000.0;
}

// (EDV - ESV) / EDV * 100; undefined when the end-diastolic volume is zero.
inline std::optional<double> ejection_fraction(double edv_ml, double esv_ml) {
  if (edv_ml <= 0.0) return std::nullopt;
  return (edv_ml - esv_ml) / edv_ml * 100.0;
}

struct ClinicalIndices {
  double lv_edv_ml = 0.0, lv_esv_ml = 0.0;
  double rv_edv_ml = 0.0, rv_esv_ml = 0.0;
  std::optional<double> lv_ef;
  std::optional<double> rv_ef;
};

inline ClinicalIndices clinical_indices(const VoxelMask& lv_ed, const VoxelMask& lv_es,
                                        const VoxelMask& rv_ed, const VoxelMask& rv_es) {
  check(lv_ed.same_grid(lv_es), "clinical_indices LV masks must share a grid");
  check(rv_ed.same_grid(rv_es), "clinical_indices RV masks must share a grid");
  ClinicalIndices c;
  c.lv_edv_ml = mask_volume_ml(lv_ed);
  c.lv_esv_ml = mask_volume_ml(lv_es);
  c.rv_edv_ml = mask_volume_ml(rv_ed);
  c.rv_esv_ml = mask_volume_ml(rv_es);
  c.lv_ef = ejection_fraction(c.lv_edv_ml, c.lv_esv_ml);
  c.rv_ef = ejection_fraction(c.rv_edv_ml, c.rv_esv_ml);
  return c;
}

}  // namespace hybridmesh
