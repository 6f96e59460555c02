#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "hybridmesh/icosphere.hpp"
#include "hybridmesh/image.hpp"
#include "hybridmesh/mesh.hpp"
#include "hybridmesh/rng.hpp"

namespace hybridmesh {

// Procedural cardiac phantom: five ellipsoidal shells (LV endo, LV epi, RV,
// LA, RA) deformed per subject by anisotropic axis scales, a low-order bend,
// and a rigid pose, with an exact analytic inverse so images and ground-truth
// meshes are generated from the same scene.

enum PhantomShell { kLvEndo = 0, kLvEpi = 1, kRv = 2, kLa = 3, kRa = 4 };

struct ShellSpec {
  Vec3 center;
  Vec3 semi;
  StructureLabel label;
  double intensity;
};

inline const std::array<ShellSpec, 5>& phantom_shells() {
  static const std::array<ShellSpec, 5> shells{{
      {{-7, -4, -4}, {9.5, 9.5, 12.5}, StructureLabel::LV, 0.85},
      {{-7, -4, -4}, {15, 15, 19}, StructureLabel::LV, 0.35},
      {{9, 3, -5}, {10, 13, 17}, StructureLabel::RV, 0.75},
      {{-6, -2, 18}, {7.5, 8, 11}, StructureLabel::LA, 0.80},
      {{8, 3, 18}, {7, 8, 11}, StructureLabel::RA, 0.70},
  }};
  return shells;
}

constexpr double kPhantomBackground = 0.05;

struct PhantomScene {
  // per shell; endo and epi share the LV draw
  std::array<Vec3, 5> scale{{{1, 1, 1}, {1, 1, 1}, {1, 1, 1}, {1, 1, 1}, {1, 1, 1}}};
  double rot_z = 0.0, tilt_x = 0.0, tilt_y = 0.0;  // radians
  Vec3 translate{0, 0, 0};
  double bend_x = 0.0, bend_y = 0.0;  // mm of in-plane shift at |z| = 40
  double contraction = 1.0;           // LV cavity linear factor at ES
  CardiacPhase phase = CardiacPhase::ED;
};

namespace detail {

// ES linear factor per shell: the cavity contracts fully, the epicardium
// follows partially (wall thickening), the RV follows most of the way, and
// the atria dilate while the ventricles empty.
inline double phase_factor(const PhantomScene& s, int shell) {
  if (s.phase == CardiacPhase::ED) return 1.0;
  const double d = 1.0 - s.contraction;
  switch (shell) {
    case kLvEndo: return s.contraction;
    case kLvEpi: return 1.0 - 0.35 * d;
    case kRv: return 1.0 - 0.8 * d;
    default: return 1.0 + 0.5 * d;
  }
}

struct PoseMatrix {
  double m[3][3];
};

inline PoseMatrix pose_matrix(const PhantomScene& s) {
  const double ca = std::cos(s.rot_z), sa = std::sin(s.rot_z);
  const double cb = std::cos(s.tilt_y), sb = std::sin(s.tilt_y);
  const double cc = std::cos(s.tilt_x), sc = std::sin(s.tilt_x);
  // R = Rz(rot_z) * Ry(tilt_y) * Rx(tilt_x)
  PoseMatrix r;
  r.m[0][0] = ca * cb;
  r.m[0][1] = ca * sb * sc - sa * cc;
  r.m[0][2] = ca * sb * cc + sa * sc;
  r.m[1][0] = sa * cb;
  r.m[1][1] = sa * sb * sc + ca * cc;
  r.m[1][2] = sa * sb * cc - ca * sc;
  r.m[2][0] = -sb;
  r.m[2][1] = cb * sc;
  r.m[2][2] = cb * cc;
  return r;
}

inline Vec3 apply(const PoseMatrix& r, const Vec3& p) {
  return {r.m[0][0] * p.x + r.m[0][1] * p.y + r.m[0][2] * p.z,
          r.m[1][0] * p.x + r.m[1][1] * p.y + r.m[1][2] * p.z,
          r.m[2][0] * p.x + r.m[2][1] * p.y + r.m[2][2] * p.z};
}

inline Vec3 apply_transposed(const PoseMatrix& r, const Vec3& p) {
  return {r.m[0][0] * p.x + r.m[1][0] * p.y + r.m[2][0] * p.z,
          r.m[0][1] * p.x + r.m[1][1] * p.y + r.m[2][1] * p.z,
          r.m[0][2] * p.x + r.m[1][2] * p.y + r.m[2][2] * p.z};
}

inline Vec3 bend(const PhantomScene& s, const Vec3& p) {
  const double w = (p.z / 40.0) * (p.z / 40.0);
  return {p.x + s.bend_x * w, p.y + s.bend_y * w, p.z};
}

inline Vec3 unbend(const PhantomScene& s, const Vec3& p) {
  const double w = (p.z / 40.0) * (p.z / 40.0);
  return {p.x - s.bend_x * w, p.y - s.bend_y * w, p.z};
}

}  // namespace detail

// Scene with the pose matrix and per-shell scaled axes precomputed, for the
// per-voxel membership queries image synthesis makes.
struct SceneGeometry {
  PhantomScene scene;
  detail::PoseMatrix rot;
  std::array<Vec3, 5> semi;  // shell semi-axes after subject scale and phase
};

inline SceneGeometry scene_geometry(const PhantomScene& s) {
  SceneGeometry g;
  g.scene = s;
  g.rot = detail::pose_matrix(s);
  for (int shell = 0; shell < 5; ++shell) {
    const ShellSpec& spec = phantom_shells()[static_cast<std::size_t>(shell)];
    const double f = detail::phase_factor(s, shell);
    const Vec3& sc = s.scale[static_cast<std::size_t>(shell)];
    g.semi[static_cast<std::size_t>(shell)] = {spec.semi.x * sc.x * f, spec.semi.y * sc.y * f,
                                               spec.semi.z * sc.z * f};
  }
  return g;
}

// Shell surface point for unit-sphere coordinate u, in subject mm space.
inline Vec3 phantom_point(const SceneGeometry& g, int shell, const Vec3& u) {
  const ShellSpec& spec = phantom_shells()[static_cast<std::size_t>(shell)];
  const Vec3& semi = g.semi[static_cast<std::size_t>(shell)];
  const Vec3 local{spec.center.x + semi.x * u.x, spec.center.y + semi.y * u.y,
                   spec.center.z + semi.z * u.z};
  return detail::apply(g.rot, detail::bend(g.scene, local)) + g.scene.translate;
}

// Exact inverse membership test against one deformed shell.
inline bool phantom_inside(const SceneGeometry& g, int shell, const Vec3& mm) {
  const Vec3 local =
      detail::unbend(g.scene, detail::apply_transposed(g.rot, mm - g.scene.translate));
  const ShellSpec& spec = phantom_shells()[static_cast<std::size_t>(shell)];
  const Vec3& semi = g.semi[static_cast<std::size_t>(shell)];
  const double vx = (local.x - spec.center.x) / semi.x;
  const double vy = (local.y - spec.center.y) / semi.y;
  const double vz = (local.z - spec.center.z) / semi.z;
  return vx * vx + vy * vy + vz * vz <= 1.0;
}

// Layered tissue model: the innermost structure wins.
inline double phantom_intensity(const SceneGeometry& g, const Vec3& mm) {
  const Vec3 local =
      detail::unbend(g.scene, detail::apply_transposed(g.rot, mm - g.scene.translate));
  static const int order[5] = {kLvEndo, kLvEpi, kRv, kLa, kRa};
  for (int shell : order) {
    const ShellSpec& spec = phantom_shells()[static_cast<std::size_t>(shell)];
    const Vec3& semi = g.semi[static_cast<std::size_t>(shell)];
    const double vx = (local.x - spec.center.x) / semi.x;
    const double vy = (local.y - spec.center.y) / semi.y;
    const double vz = (local.z - spec.center.z) / semi.z;
    if (vx * vx + vy * vy + vz * vz <= 1.0) return spec.intensity;
  }
  return kPhantomBackground;
}

inline PhantomScene sample_scene(std::uint64_t seed, const std::string& subject,
                                 CardiacPhase phase) {
  Rng rng(derive_seed(seed, "scene/" + subject));
  PhantomScene s;
  const Vec3 lv{rng.uniform(0.8, 1.25), rng.uniform(0.8, 1.25), rng.uniform(0.8, 1.25)};
  s.scale[kLvEndo] = lv;
  s.scale[kLvEpi] = lv;
  s.scale[kRv] = {rng.uniform(0.8, 1.25), rng.uniform(0.8, 1.25), rng.uniform(0.8, 1.25)};
  s.scale[kLa] = {rng.uniform(0.8, 1.25), rng.uniform(0.8, 1.25), rng.uniform(0.8, 1.25)};
  s.scale[kRa] = {rng.uniform(0.8, 1.25), rng.uniform(0.8, 1.25), rng.uniform(0.8, 1.25)};
  const double deg = std::numbers::pi / 180.0;
  s.rot_z = rng.uniform(-8.0, 8.0) * deg;
  s.tilt_x = rng.uniform(-5.0, 5.0) * deg;
  s.tilt_y = rng.uniform(-5.0, 5.0) * deg;
  s.translate = {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), 0.0};
  s.bend_x = rng.uniform(-3.0, 3.0);
  s.bend_y = rng.uniform(-3.0, 3.0);
  s.contraction = rng.uniform(0.72, 0.82);
  s.phase = phase;
  return s;
}

// Fixed-topology phantom template: per-vertex shell id plus the unit-sphere
// coordinate that phantom_point maps into subject space.
struct PhantomTemplate {
  MeshTopology topology;
  std::vector<int> shell;
  std::vector<Vec3> unit;
};

namespace detail {

inline void append_shell(PhantomTemplate& t, const TriSurface& s, int shell,
                         const std::string& name) {
  const int base = static_cast<int>(t.unit.size());
  const int face_base = static_cast<int>(t.topology.faces.size());
  for (const auto& v : s.vertices) {
    t.unit.push_back(v);
    t.shell.push_back(shell);
    t.topology.structure_labels.push_back(phantom_shells()[static_cast<std::size_t>(shell)].label);
  }
  SubSurface sub;
  sub.name = name;
  sub.label = phantom_shells()[static_cast<std::size_t>(shell)].label;
  for (const auto& f : s.faces) {
    t.topology.faces.push_back({f[0] + base, f[1] + base, f[2] + base});
    sub.faces.push_back(face_base + static_cast<int>(sub.faces.size()));
  }
  t.topology.surfaces.push_back(std::move(sub));
}

}  // namespace detail

// 810-vertex surface template: one icosphere(2) shell per structure surface
// (LV endo, LV epi, RV, LA, RA).
inline const PhantomTemplate& surface_template() {
  static const PhantomTemplate t = [] {
    PhantomTemplate t;
    detail::append_shell(t, icosphere(2), kLvEndo, "lv_endo");
    detail::append_shell(t, icosphere(2), kLvEpi, "lv_epi");
    detail::append_shell(t, icosphere(2), kRv, "rv");
    detail::append_shell(t, icosphere(2), kLa, "la");
    detail::append_shell(t, icosphere(2), kRa, "ra");
    t.topology.vertex_count = static_cast<int>(t.unit.size());
    t.topology.edges = edges_from_cells(t.topology.faces, {});
    validate_topology(t.topology);
    return t;
  }();
  return t;
}

// 814-vertex, 2240-tet volumetric template: the surface shells plus four
// interior seeds; the LV wall is filled with radial prisms split by the
// smallest-vertex-index diagonal rule, each cavity fanned from its seed.
inline const PhantomTemplate& volumetric_template() {
  static const PhantomTemplate t = [] {
    PhantomTemplate t;
    const TriSurface ico2 = icosphere(2);
    detail::append_shell(t, ico2, kLvEndo, "lv_endo");
    detail::append_shell(t, ico2, kLvEpi, "lv_epi");
    detail::append_shell(t, ico2, kRv, "rv");
    detail::append_shell(t, ico2, kLa, "la");
    detail::append_shell(t, ico2, kRa, "ra");

    const int n2 = static_cast<int>(ico2.vertices.size());
    const int rv_base = 2 * n2, la_base = 3 * n2, ra_base = 4 * n2;
    const int seeds[4] = {5 * n2, 5 * n2 + 1, 5 * n2 + 2, 5 * n2 + 3};
    const int seed_shells[4] = {kLvEndo, kRv, kLa, kRa};
    for (int k = 0; k < 4; ++k) {
      t.unit.push_back({0, 0, 0});
      t.shell.push_back(seed_shells[k]);
      t.topology.structure_labels.push_back(
          phantom_shells()[static_cast<std::size_t>(seed_shells[k])].label);
    }

    // LV wall: prism per endo face, epi vertex = endo vertex + n2
    for (const auto& f : ico2.faces) {
      int b[3] = {f[0], f[1], f[2]};
      while (!(b[0] < b[1] && b[0] < b[2])) {
        const int tmp = b[0];
        b[0] = b[1];
        b[1] = b[2];
        b[2] = tmp;
      }
      const int v0 = b[0], v1 = b[1], v2 = b[2];
      const int v3 = v0 + n2, v4 = v1 + n2, v5 = v2 + n2;
      if (std::min(v1, v5) < std::min(v2, v4)) {
        t.topology.tetras.push_back({v0, v1, v2, v5});
        t.topology.tetras.push_back({v0, v1, v5, v4});
        t.topology.tetras.push_back({v0, v4, v5, v3});
      } else {
        t.topology.tetras.push_back({v0, v1, v2, v4});
        t.topology.tetras.push_back({v0, v4, v2, v5});
        t.topology.tetras.push_back({v0, v4, v5, v3});
      }
    }
    // cavity fans
    for (const auto& f : ico2.faces) t.topology.tetras.push_back({seeds[0], f[0], f[1], f[2]});
    for (const auto& f : ico2.faces)
      t.topology.tetras.push_back({seeds[1], f[0] + rv_base, f[1] + rv_base, f[2] + rv_base});
    for (const auto& f : ico2.faces)
      t.topology.tetras.push_back({seeds[2], f[0] + la_base, f[1] + la_base, f[2] + la_base});
    for (const auto& f : ico2.faces)
      t.topology.tetras.push_back({seeds[3], f[0] + ra_base, f[1] + ra_base, f[2] + ra_base});

    t.topology.vertex_count = static_cast<int>(t.unit.size());
    t.topology.edges = edges_from_cells(t.topology.faces, t.topology.tetras);
    validate_topology(t.topology);
    return t;
  }();
  return t;
}

inline VertexField deform_template(const PhantomTemplate& t, const PhantomScene& s) {
  const SceneGeometry g = scene_geometry(s);
  Tensor coords(Shape{t.topology.vertex_count, 3});
  for (int i = 0; i < t.topology.vertex_count; ++i) {
    const Vec3 p = phantom_point(g, t.shell[static_cast<std::size_t>(i)],
                                 t.unit[static_cast<std::size_t>(i)]);
    coords[static_cast<std::int64_t>(i) * 3] = p.x;
    coords[static_cast<std::int64_t>(i) * 3 + 1] = p.y;
    coords[static_cast<std::int64_t>(i) * 3 + 2] = p.z;
  }
  return VertexField(std::move(coords), CoordSpace::millimetre);
}

struct PhantomConfig {
  int sax_nx = 56, sax_ny = 56, sax_nz = 12;
  Vec3 sax_spacing{2.0, 2.0, 80.0 / 12.0};
  int lax_nx = 84, lax_ny = 72;
  double lax_spacing = 1.5;
  double noise_sigma = 0.03;
};

namespace detail {

inline Vec3 centered_origin(const PhantomConfig& c) {
  return {-(0.5 * c.sax_nx - 0.5) * c.sax_spacing.x, -(0.5 * c.sax_ny - 0.5) * c.sax_spacing.y,
          -(0.5 * c.sax_nz - 0.5) * c.sax_spacing.z};
}

}  // namespace detail

// Per-structure soft occupancy rendered at 2x in-plane supersampling (4x
// through-plane, where the slices are thick) with additive Gaussian noise,
// clamped to [0,1].
inline Image3D synthesize_sax(const PhantomScene& s, const PhantomConfig& cfg, Rng& noise) {
  const SceneGeometry g = scene_geometry(s);
  Image3D img;
  img.spacing = cfg.sax_spacing;
  img.origin = detail::centered_origin(cfg);
  img.data = Tensor(Shape{cfg.sax_nz, cfg.sax_ny, cfg.sax_nx});
  static const double zoff[4] = {-0.375, -0.125, 0.125, 0.375};
  for (int z = 0; z < cfg.sax_nz; ++z)
    for (int y = 0; y < cfg.sax_ny; ++y)
      for (int x = 0; x < cfg.sax_nx; ++x) {
        const Vec3 c{img.origin.x + x * img.spacing.x, img.origin.y + y * img.spacing.y,
                     img.origin.z + z * img.spacing.z};
        double acc = 0.0;
        for (int dz = 0; dz < 4; ++dz)
          for (int dy = -1; dy <= 1; dy += 2)
            for (int dx = -1; dx <= 1; dx += 2)
              acc += phantom_intensity(
                  g, {c.x + 0.25 * dx * img.spacing.x, c.y + 0.25 * dy * img.spacing.y,
                      c.z + zoff[dz] * img.spacing.z});
        const double v = acc / 16.0 + cfg.noise_sigma * noise.normal();
        img.at(x, y, z) = std::clamp(v, 0.0, 1.0);
      }
  return img;
}

// One long-axis view: a vertical plane through the posed heart axis at the
// given in-plane angle, horizontal direction (cos a, sin a, 0), vertical +z.
inline ImagePlane synthesize_lax(const PhantomScene& s, double angle_rad,
                                 const PhantomConfig& cfg, Rng& noise) {
  const SceneGeometry g = scene_geometry(s);
  ImagePlane p;
  p.axis_x = {std::cos(angle_rad), std::sin(angle_rad), 0.0};
  p.axis_y = {0.0, 0.0, 1.0};
  p.spacing_x = cfg.lax_spacing;
  p.spacing_y = cfg.lax_spacing;
  const Vec3 axis_point{s.translate.x, s.translate.y, 0.0};
  p.origin = axis_point - p.axis_x * (0.5 * (cfg.lax_nx - 1) * cfg.lax_spacing) -
             p.axis_y * (0.5 * (cfg.lax_ny - 1) * cfg.lax_spacing);
  p.data = Tensor(Shape{cfg.lax_ny, cfg.lax_nx});
  for (int y = 0; y < cfg.lax_ny; ++y)
    for (int x = 0; x < cfg.lax_nx; ++x) {
      double acc = 0.0;
      for (int dy = -1; dy <= 1; dy += 2)
        for (int dx = -1; dx <= 1; dx += 2)
          acc += phantom_intensity(g, p.position(x + 0.25 * dx, y + 0.25 * dy));
      const double v = acc / 4.0 + cfg.noise_sigma * noise.normal();
      p.at(x, y) = std::clamp(v, 0.0, 1.0);
    }
  return p;
}

// Native-resolution sample for one (subject, phase); deterministic in
// (seed, subject, phase). The transform records the native grid so callers
// can pad_and_crop into network space.
inline MultiViewSample phantom_sample(std::uint64_t seed, const std::string& subject,
                                      CardiacPhase phase, const PhantomTemplate& tmpl,
                                      const PhantomConfig& cfg = {}) {
  const PhantomScene scene = sample_scene(seed, subject, phase);
  MultiViewSample out;
  out.subject = subject;
  out.phase = phase;
  out.gt = deform_template(tmpl, scene);

  Rng sax_noise(derive_seed(seed, "sax/" + subject + "/" + phase_name(phase)));
  out.sax = synthesize_sax(scene, cfg, sax_noise);

  static const char* views[3] = {"lax2ch", "lax3ch", "lax4ch"};
  for (int k = 0; k < 3; ++k) {
    Rng lax_noise(
        derive_seed(seed, std::string(views[k]) + "/" + subject + "/" + phase_name(phase)));
    out.lax[static_cast<std::size_t>(k)] =
        synthesize_lax(scene, k * 60.0 * std::numbers::pi / 180.0, cfg, lax_noise);
  }

  out.transform.mode = TransformMode::full;
  out.transform.pad = {0, 0, 0};
  out.transform.crop_origin = {0, 0, 0};
  out.transform.size = {static_cast<double>(cfg.sax_nx), static_cast<double>(cfg.sax_ny),
                        static_cast<double>(cfg.sax_nz)};
  out.transform.spacing = out.sax.spacing;
  out.transform.origin = out.sax.origin;
  return out;
}

}  // namespace hybridmesh
