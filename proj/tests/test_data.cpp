#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "hybridmesh/augment.hpp"
#include "hybridmesh/dataset.hpp"
#include "hybridmesh/metrics.hpp"
#include "hybridmesh/quality.hpp"
#include "hybridmesh/rasterize.hpp"

using namespace hybridmesh;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

bool tensors_equal(const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape) return false;
  for (std::int64_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

bool samples_equal(const MultiViewSample& a, const MultiViewSample& b) {
  if (!tensors_equal(a.sax.data, b.sax.data) || !tensors_equal(a.gt.coords, b.gt.coords))
    return false;
  for (int k = 0; k < 3; ++k)
    if (!tensors_equal(a.lax[static_cast<std::size_t>(k)].data,
                       b.lax[static_cast<std::size_t>(k)].data))
      return false;
  return true;
}

GridSpec grid_of(const Image3D& img) {
  return {img.nx(), img.ny(), img.nz(), img.spacing, img.origin};
}

std::vector<std::array<int, 3>> sub_faces(const MeshTopology& topo, const SubSurface& sub) {
  std::vector<std::array<int, 3>> out;
  for (int f : sub.faces) out.push_back(topo.faces[static_cast<std::size_t>(f)]);
  return out;
}

VoxelMask occupancy_mask(const SceneGeometry& g, int shell, const GridSpec& grid) {
  VoxelMask m(grid.nx, grid.ny, grid.nz, grid.spacing, grid.origin);
  for (int z = 0; z < grid.nz; ++z)
    for (int y = 0; y < grid.ny; ++y)
      for (int x = 0; x < grid.nx; ++x)
        m.set(x, y, z, phantom_inside(g, shell, m.center(x, y, z)));
  return m;
}

VoxelMask threshold_mask(const Image3D& img, double thr) {
  VoxelMask m(img.nx(), img.ny(), img.nz(), img.spacing, img.origin);
  for (std::int64_t i = 0; i < img.data.size(); ++i)
    m.data[static_cast<std::size_t>(i)] = img.data[i] >= thr ? 1 : 0;
  return m;
}

VoxelMask mask_union(const VoxelMask& a, const VoxelMask& b) {
  VoxelMask out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = (a.data[i] != 0 || b.data[i] != 0) ? 1 : 0;
  return out;
}

int count_label(const std::vector<StructureLabel>& labels, StructureLabel want) {
  int n = 0;
  for (auto l : labels) n += l == want;
  return n;
}

constexpr std::uint64_t kSeed = 20260816ull;

}  // namespace

TEST_CASE("surface and volumetric phantom templates have the pinned layout") {
  const PhantomTemplate& s = surface_template();
  REQUIRE(s.topology.vertex_count == 810);
  REQUIRE(s.topology.faces.size() == 1600);
  REQUIRE(s.topology.edges.size() == 2400);
  REQUIRE(s.topology.tetras.empty());
  REQUIRE(s.shell.size() == 810);
  REQUIRE(s.unit.size() == 810);

  REQUIRE(s.topology.surfaces.size() == 5);
  const char* names[5] = {"lv_endo", "lv_epi", "rv", "la", "ra"};
  for (int i = 0; i < 5; ++i) {
    REQUIRE(s.topology.surfaces[static_cast<std::size_t>(i)].name == names[i]);
    REQUIRE(s.topology.surfaces[static_cast<std::size_t>(i)].faces.size() == 320);
    REQUIRE(is_closed_face_set(s.topology.faces,
                               s.topology.surfaces[static_cast<std::size_t>(i)].faces));
  }
  REQUIRE(count_label(s.topology.structure_labels, StructureLabel::LV) == 324);
  REQUIRE(count_label(s.topology.structure_labels, StructureLabel::RV) == 162);
  REQUIRE(count_label(s.topology.structure_labels, StructureLabel::LA) == 162);
  REQUIRE(count_label(s.topology.structure_labels, StructureLabel::RA) == 162);
  for (int i = 0; i < 810; i += 97)
    REQUIRE_THAT(norm(s.unit[static_cast<std::size_t>(i)]),
                 Catch::Matchers::WithinAbs(1.0, 1e-12));

  const PhantomTemplate& v = volumetric_template();
  REQUIRE(v.topology.vertex_count == 814);
  REQUIRE(v.topology.tetras.size() == 2240);
  REQUIRE(v.topology.faces == s.topology.faces);
  // shell edges + LV wall verticals/diagonals + cavity spokes; the diagonal
  // count doubles if the prism splits ever disagree across a shared quad
  REQUIRE(v.topology.edges.size() == 3690);
  REQUIRE(count_label(v.topology.structure_labels, StructureLabel::LV) == 325);
  REQUIRE(count_label(v.topology.structure_labels, StructureLabel::RV) == 163);
  REQUIRE(count_label(v.topology.structure_labels, StructureLabel::LA) == 163);
  REQUIRE(count_label(v.topology.structure_labels, StructureLabel::RA) == 163);
  const int seed_shells[4] = {kLvEndo, kRv, kLa, kRa};
  for (int k = 0; k < 4; ++k) {
    REQUIRE(v.shell[static_cast<std::size_t>(810 + k)] == seed_shells[k]);
    REQUIRE(norm(v.unit[static_cast<std::size_t>(810 + k)]) == 0.0);
  }
}

TEST_CASE("deformed templates are well-shaped, nested, and phase-consistent") {
  const PhantomTemplate& vol = volumetric_template();
  const PhantomTemplate& surf = surface_template();

  const PhantomScene base;  // identity deformation
  const VertexField base_coords = deform_template(vol, base);
  const QualityReport base_q = tetra_quality(base_coords, vol.topology.tetras);
  REQUIRE(base_q.degenerate == 0);
  REQUIRE(*std::min_element(base_q.scaled_jacobian.begin(), base_q.scaled_jacobian.end()) > 0.02);

  for (int subj = 0; subj < 8; ++subj) {
    for (CardiacPhase phase : {CardiacPhase::ED, CardiacPhase::ES}) {
      const PhantomScene s = sample_scene(kSeed, subject_id(subj), phase);
      const VertexField coords = deform_template(vol, s);
      const QualityReport q = tetra_quality(coords, vol.topology.tetras);
      REQUIRE(q.degenerate == 0);
      REQUIRE(*std::min_element(q.scaled_jacobian.begin(), q.scaled_jacobian.end()) > 0.0);

      // every endo vertex stays strictly inside the epi ellipsoid
      const SceneGeometry g = scene_geometry(s);
      const VertexField sc = deform_template(surf, s);
      for (int i = 0; i < 162; ++i) REQUIRE(phantom_inside(g, kLvEpi, sc.at(i)));
    }
    // contraction shrinks the cavity and dilates the atria
    const SceneGeometry ed = scene_geometry(sample_scene(kSeed, subject_id(subj), CardiacPhase::ED));
    const SceneGeometry es = scene_geometry(sample_scene(kSeed, subject_id(subj), CardiacPhase::ES));
    const double edv = ed.semi[kLvEndo].x * ed.semi[kLvEndo].y * ed.semi[kLvEndo].z;
    const double esv = es.semi[kLvEndo].x * es.semi[kLvEndo].y * es.semi[kLvEndo].z;
    const double ef = 1.0 - esv / edv;
    REQUIRE((ef > 0.40 && ef < 0.66));
    REQUIRE(es.semi[kRv].x < ed.semi[kRv].x);
    REQUIRE(es.semi[kLa].x > ed.semi[kLa].x);
  }
}

TEST_CASE("scene sampling is deterministic with phase-shared anatomy") {
  const PhantomScene a = sample_scene(kSeed, "s0007", CardiacPhase::ED);
  const PhantomScene b = sample_scene(kSeed, "s0007", CardiacPhase::ED);
  REQUIRE(a.scale[kLvEndo].x == b.scale[kLvEndo].x);
  REQUIRE(a.rot_z == b.rot_z);
  REQUIRE(a.bend_x == b.bend_x);
  REQUIRE(a.contraction == b.contraction);

  const PhantomScene es = sample_scene(kSeed, "s0007", CardiacPhase::ES);
  REQUIRE(es.phase == CardiacPhase::ES);
  REQUIRE(es.scale[kRa].y == a.scale[kRa].y);
  REQUIRE(es.rot_z == a.rot_z);
  REQUIRE(es.translate.x == a.translate.x);
  REQUIRE(es.contraction == a.contraction);

  const PhantomScene other = sample_scene(kSeed, "s0008", CardiacPhase::ED);
  REQUIRE(other.rot_z != a.rot_z);

  const double deg = std::numbers::pi / 180.0;
  for (int i = 0; i < 100; ++i) {
    const PhantomScene s = sample_scene(kSeed, subject_id(i), CardiacPhase::ES);
    for (int k = 0; k < 5; ++k)
      for (int ax = 0; ax < 3; ++ax) {
        const double v = s.scale[static_cast<std::size_t>(k)][ax];
        REQUIRE((v >= 0.8 && v <= 1.25));
      }
    REQUIRE(s.scale[kLvEndo].x == s.scale[kLvEpi].x);
    REQUIRE(s.scale[kLvEndo].z == s.scale[kLvEpi].z);
    REQUIRE(std::abs(s.rot_z) <= 8.0 * deg);
    REQUIRE(std::abs(s.tilt_x) <= 5.0 * deg);
    REQUIRE(std::abs(s.tilt_y) <= 5.0 * deg);
    REQUIRE(std::abs(s.translate.x) <= 2.0);
    REQUIRE(s.translate.z == 0.0);
    REQUIRE(std::abs(s.bend_x) <= 3.0);
    REQUIRE(std::abs(s.bend_y) <= 3.0);
    REQUIRE((s.contraction >= 0.72 && s.contraction <= 0.82));
  }
}

TEST_CASE("synthesized images are consistent with the ground-truth meshes") {
  const PhantomTemplate& tmpl = surface_template();
  const MultiViewSample s = phantom_sample(kSeed, "s0000", CardiacPhase::ED, tmpl);
  validate_sample(s);
  REQUIRE(s.sax.nx() == 56);
  REQUIRE(s.sax.nz() == 12);

  const SceneGeometry g = scene_geometry(sample_scene(kSeed, "s0000", CardiacPhase::ED));
  const GridSpec grid = grid_of(s.sax);

  // rasterized gt vs analytic occupancy, per structure
  for (int shell = 0; shell < 5; ++shell) {
    const VoxelMask ras =
        rasterize(s.gt, sub_faces(tmpl.topology, tmpl.topology.surfaces[static_cast<std::size_t>(shell)]), grid);
    const VoxelMask occ = occupancy_mask(g, shell, grid);
    REQUIRE(occ.count() > 0);
    REQUIRE(dice(ras, occ) >= 0.9);
  }

  // thresholded SAX vs the union of the outer structures
  VoxelMask heart = occupancy_mask(g, kLvEpi, grid);
  heart = mask_union(heart, occupancy_mask(g, kRv, grid));
  heart = mask_union(heart, occupancy_mask(g, kLa, grid));
  heart = mask_union(heart, occupancy_mask(g, kRa, grid));
  REQUIRE(dice(threshold_mask(s.sax, 0.2), heart) >= 0.9);

  // every LAX view sees some tissue
  for (const auto& pl : s.lax) {
    int bright = 0;
    for (std::int64_t i = 0; i < pl.data.size(); ++i) bright += pl.data[i] > 0.3;
    REQUIRE(bright > 50);
  }
}

TEST_CASE("phantom samples are deterministic per seed, subject, and phase") {
  const PhantomTemplate& tmpl = surface_template();
  const MultiViewSample a = phantom_sample(kSeed, "s0003", CardiacPhase::ES, tmpl);
  const MultiViewSample b = phantom_sample(kSeed, "s0003", CardiacPhase::ES, tmpl);
  REQUIRE(samples_equal(a, b));

  const MultiViewSample c = phantom_sample(kSeed, "s0004", CardiacPhase::ES, tmpl);
  REQUIRE(!tensors_equal(a.sax.data, c.sax.data));
  const MultiViewSample d = phantom_sample(kSeed + 1, "s0003", CardiacPhase::ES, tmpl);
  REQUIRE(!tensors_equal(a.sax.data, d.sax.data));
}

TEST_CASE("pad_and_crop full mode pads exactly and stays round-trip consistent") {
  const MultiViewSample s = phantom_sample(kSeed, "s0001", CardiacPhase::ED, surface_template());
  const MultiViewSample p = pad_and_crop(s, TransformMode::full);

  REQUIRE(p.sax.nx() == 64);
  REQUIRE(p.sax.ny() == 64);
  REQUIRE(p.sax.nz() == 12);
  for (int z = 0; z < s.sax.nz(); ++z)
    for (int y = 0; y < s.sax.ny(); ++y)
      for (int x = 0; x < s.sax.nx(); ++x)
        if (p.sax.at(x + 4, y + 4, z) != s.sax.at(x, y, z)) FAIL("padded voxel mismatch");
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 4; ++x)
      if (p.sax.at(x, y, 0) != 0.0 || p.sax.at(63 - x, y, 0) != 0.0) FAIL("pad border not zero");
  REQUIRE(p.sax.origin.x == s.sax.origin.x - 4 * s.sax.spacing.x);
  REQUIRE(p.transform.mode == TransformMode::full);
  REQUIRE(p.transform.pad.x == 4.0);
  REQUIRE(p.transform.pad.z == 0.0);
  REQUIRE(p.transform.size.x == 64.0);

  for (const auto& pl : p.lax) {
    REQUIRE(pl.nx() == 96);
    REQUIRE(pl.ny() == 96);
  }
  // original LAX intensities preserved exactly at the padded offset
  const int ox = (96 - s.lax[0].nx()) / 2, oy = (96 - s.lax[0].ny()) / 2;
  for (int y = 0; y < s.lax[0].ny(); ++y)
    for (int x = 0; x < s.lax[0].nx(); ++x)
      if (p.lax[0].at(x + ox, y + oy) != s.lax[0].at(x, y)) FAIL("padded LAX mismatch");
  {
    const Vec3 a = p.lax[0].position(ox + 10, oy + 20);
    const Vec3 b = s.lax[0].position(10, 20);
    REQUIRE_THAT(norm(a - b), Catch::Matchers::WithinAbs(0.0, 1e-12));
  }

  // gt lands inside the relative unit cube and round-trips
  const VertexField rel = to_relative(p.gt, p.transform);
  for (std::int64_t i = 0; i < rel.coords.size(); ++i)
    REQUIRE((rel.coords[i] >= 0.0 && rel.coords[i] <= 1.0));
  const VertexField back = to_mm(rel, p.transform);
  for (std::int64_t i = 0; i < back.coords.size(); ++i)
    REQUIRE_THAT(back.coords[i], Catch::Matchers::WithinAbs(p.gt.coords[i], 1e-9));

  // image already at target size is unchanged
  PadCropConfig same;
  same.sax_full = {56, 56, 12};
  same.lax = {84, 72};
  const MultiViewSample q = pad_and_crop(s, TransformMode::full, same);
  REQUIRE(tensors_equal(q.sax.data, s.sax.data));
  REQUIRE(tensors_equal(q.lax[1].data, s.lax[1].data));
  REQUIRE(q.transform.pad.x == 0.0);
  REQUIRE(q.sax.origin.x == s.sax.origin.x);

  // target smaller than the image is an error
  PadCropConfig tiny;
  tiny.sax_full = {32, 32, 12};
  REQUIRE_THROWS_AS(pad_and_crop(s, TransformMode::full, tiny), ValidationError);
}

TEST_CASE("pad_and_crop cropped mode keeps the mesh inside the crop") {
  const MultiViewSample s = phantom_sample(kSeed, "s0002", CardiacPhase::ED, surface_template());

  auto require_contained = [](const MultiViewSample& c) {
    REQUIRE(c.sax.nx() == 40);
    REQUIRE(c.sax.ny() == 40);
    REQUIRE(c.sax.nz() == 12);
    const VertexField rel = to_relative(c.gt, c.transform);
    for (std::int64_t i = 0; i < rel.coords.size(); ++i)
      REQUIRE((rel.coords[i] >= 0.0 && rel.coords[i] <= 1.0));
  };

  const MultiViewSample center = pad_and_crop(s, TransformMode::cropped);
  require_contained(center);
  REQUIRE(center.transform.mode == TransformMode::cropped);
  REQUIRE(center.transform.pad.x == 0.0);
  REQUIRE(center.transform.size.x == 40.0);

  // cropped voxels come verbatim from the source where the boxes overlap
  const int ox = static_cast<int>(center.transform.crop_origin.x);
  const int oy = static_cast<int>(center.transform.crop_origin.y);
  const int oz = static_cast<int>(center.transform.crop_origin.z);
  for (int z = 0; z < 12; ++z)
    for (int y = 0; y < 40; ++y)
      for (int x = 0; x < 40; ++x) {
        const int sx = x + ox, sy = y + oy, sz = z + oz;
        const double want =
            (sx >= 0 && sy >= 0 && sz >= 0 && sx < 56 && sy < 56 && sz < 12)
                ? s.sax.at(sx, sy, sz)
                : 0.0;
        if (center.sax.at(x, y, z) != want) FAIL("cropped voxel mismatch");
      }

  Rng rng(11);
  std::set<std::pair<int, int>> origins;
  for (int trial = 0; trial < 50; ++trial) {
    const MultiViewSample c = pad_and_crop(s, TransformMode::cropped, {}, &rng);
    require_contained(c);
    origins.insert({static_cast<int>(c.transform.crop_origin.x),
                    static_cast<int>(c.transform.crop_origin.y)});
  }
  REQUIRE(origins.size() > 1);

  PadCropConfig tiny;
  tiny.sax_cropped = {8, 8, 12};
  try {
    pad_and_crop(s, TransformMode::cropped, tiny);
    FAIL("expected crop containment error");
  } catch (const ValidationError& e) {
    REQUIRE(std::string(e.what()).find("cannot contain") != std::string::npos);
  }
}

TEST_CASE("identity augmentation reproduces the sample bitwise") {
  const MultiViewSample s = phantom_sample(kSeed, "s0005", CardiacPhase::ED, surface_template());
  const MultiViewSample id = apply_augment(s, AugmentParams{});
  REQUIRE(samples_equal(s, id));

  Rng r1(99), r2(99);
  REQUIRE(samples_equal(augment(s, r1), augment(s, r2)));

  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const AugmentParams p = draw_augment_params(rng);
    REQUIRE(std::abs(p.theta_deg) <= 10.0);
    REQUIRE((p.sx >= 0.9 && p.sx <= 1.1));
    REQUIRE((p.sy >= 0.9 && p.sy <= 1.1));
    REQUIRE((p.gain >= 0.9 && p.gain <= 1.1));
    REQUIRE(std::abs(p.bias) <= 0.05);
  }
}

TEST_CASE("augmentation moves the image and the mesh together") {
  const PhantomTemplate& tmpl = surface_template();
  const MultiViewSample s = phantom_sample(kSeed, "s0006", CardiacPhase::ED, tmpl);

  AugmentParams prm;
  prm.theta_deg = 8.0;
  prm.sx = 1.07;
  prm.sy = 0.95;
  prm.gain = 1.05;
  prm.bias = -0.02;
  const MultiViewSample a = apply_augment(s, prm);
  validate_sample(a);

  const GridSpec grid = grid_of(a.sax);
  auto raster_union = [&](const VertexField& gt) {
    VoxelMask m(56, 56, 12, grid.spacing, grid.origin);
    bool first = true;
    for (int shell : {kLvEpi, kRv, kLa, kRa}) {
      const VoxelMask r = rasterize(
          gt, sub_faces(tmpl.topology, tmpl.topology.surfaces[static_cast<std::size_t>(shell)]),
          grid);
      m = first ? r : mask_union(m, r);
      first = false;
    }
    return m;
  };

  // rasterized gt before/after: warping the binary gt mask through the image
  // path must land on the rasterization of the warped gt
  const VoxelMask before = raster_union(s.gt);
  MultiViewSample mask_sample = s;
  for (std::int64_t i = 0; i < mask_sample.sax.data.size(); ++i)
    mask_sample.sax.data[i] = before.data[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
  for (const double theta : {8.0, -10.0}) {
    AugmentParams warp = prm;
    warp.theta_deg = theta;
    const MultiViewSample w = apply_augment(mask_sample, warp);
    REQUIRE(dice(threshold_mask(w.sax, 0.5), raster_union(w.gt)) >= 0.95);
  }

  // thresholded real image against the rasterized augmented gt; partial
  // volume in the thick slices makes this the looser bound
  REQUIRE(dice(threshold_mask(a.sax, 0.2), raster_union(a.gt)) >= 0.9);

  // pure rotation: rigid on gt (pairwise distances, z) and a no-op on LAX
  AugmentParams rot;
  rot.theta_deg = -7.0;
  const MultiViewSample r = apply_augment(s, rot);
  Rng pick(3);
  for (int t = 0; t < 200; ++t) {
    const int i = pick.uniform_int(s.gt.count()), j = pick.uniform_int(s.gt.count());
    const double before = norm(s.gt.at(i) - s.gt.at(j));
    const double after = norm(r.gt.at(i) - r.gt.at(j));
    REQUIRE_THAT(after, Catch::Matchers::WithinAbs(before, 1e-9));
  }
  for (int i = 0; i < s.gt.count(); ++i) REQUIRE(r.gt.at(i).z == s.gt.at(i).z);
  for (int k = 0; k < 3; ++k)
    for (std::int64_t i = 0; i < s.lax[static_cast<std::size_t>(k)].data.size(); ++i)
      REQUIRE_THAT(r.lax[static_cast<std::size_t>(k)].data[i],
                   Catch::Matchers::WithinAbs(s.lax[static_cast<std::size_t>(k)].data[i], 1e-9));

  // horizontal LAX stretch doubles a box about the heart axis when sx = 2
  MultiViewSample box;
  box.sax.data = Tensor(Shape{2, 8, 8});
  box.sax.spacing = {1, 1, 1};
  box.sax.origin = {-3.5, -3.5, -0.5};
  box.gt = VertexField(Tensor(Shape{1, 3}), CoordSpace::millimetre);
  for (auto& pl : box.lax) {
    pl.data = Tensor(Shape{5, 40});
    pl.origin = {-20, 0, -2};
    pl.axis_x = {1, 0, 0};
    pl.axis_y = {0, 0, 1};
    for (int y = 0; y < 5; ++y)
      for (int x = 15; x <= 25; ++x) pl.at(x, y) = 1.0;
  }
  AugmentParams wide;
  wide.sx = 2.0;
  const MultiViewSample stretched = apply_augment(box, wide);
  int on = 0;
  for (int x = 0; x < 40; ++x) on += stretched.lax[0].at(x, 2) > 0.5;
  REQUIRE(on >= 19);
  REQUIRE(on <= 23);

  REQUIRE_THROWS_AS(apply_augment(s, AugmentParams{0.0, -1.0, 1.0, 1.0, 0.0}), ValidationError);
}

TEST_CASE("dataset generation writes a deterministic hashed manifest") {
  const auto root = scratch("hm_data_gen");
  const DatasetManifest m =
      generate_phantom_dataset(root.string(), 3, kSeed, TemplateKind::surface);

  REQUIRE(m.count == 3);
  REQUIRE(m.kind == TemplateKind::surface);
  REQUIRE(m.train.size() == 2);
  REQUIRE(m.val.empty());
  REQUIRE(m.test.size() == 1);

  // count = N -> exactly 2N sample directories
  int sample_dirs = 0;
  for (const auto& subj : std::filesystem::directory_iterator(root / "subjects"))
    for (const auto& phase : std::filesystem::directory_iterator(subj.path())) {
      REQUIRE(std::filesystem::exists(phase.path() / "sax.raw"));
      REQUIRE(std::filesystem::exists(phase.path() / "lax3ch.json"));
      REQUIRE(std::filesystem::exists(phase.path() / "gt.ply"));
      REQUIRE(std::filesystem::exists(phase.path() / "transform.json"));
      ++sample_dirs;
    }
  REQUIRE(sample_dirs == 6);

  // manifest hashes match the bytes on disk
  REQUIRE(m.hashes.size() == 6 * 10);
  for (const auto& [rel, h] : m.hashes) {
    std::ifstream is(root / rel, std::ios::binary);
    REQUIRE(static_cast<bool>(is));
    const std::string bytes{std::istreambuf_iterator<char>(is),
                            std::istreambuf_iterator<char>()};
    REQUIRE(fnv1a64(bytes.data(), bytes.size()) == h);
  }

  // regeneration with the same seed reproduces every hash; a different seed
  // does not
  const auto root2 = scratch("hm_data_gen2");
  const DatasetManifest m2 =
      generate_phantom_dataset(root2.string(), 3, kSeed, TemplateKind::surface);
  REQUIRE(m.hashes == m2.hashes);
  const auto root3 = scratch("hm_data_gen3");
  const DatasetManifest m3 =
      generate_phantom_dataset(root3.string(), 3, kSeed + 7, TemplateKind::surface);
  REQUIRE(m.hashes != m3.hashes);

  // seeded splits are disjoint and cover all subjects
  std::vector<std::string> ids;
  for (int i = 0; i < 20; ++i) ids.push_back(subject_id(i));
  std::vector<std::string> train, val, test;
  split_subjects(ids, kSeed, train, val, test);
  REQUIRE(train.size() == 14);
  REQUIRE(val.size() == 2);
  REQUIRE(test.size() == 4);
  std::set<std::string> all;
  for (const auto& v : {train, val, test}) all.insert(v.begin(), v.end());
  REQUIRE(all.size() == 20);
  std::vector<std::string> t2, v2, s2;
  split_subjects(ids, kSeed, t2, v2, s2);
  REQUIRE(t2 == train);
}

TEST_CASE("stored samples reload bit-identically") {
  const auto root = scratch("hm_data_reload");
  const DatasetManifest m =
      generate_phantom_dataset(root.string(), 2, kSeed, TemplateKind::surface);

  const PhantomTemplate& tmpl = surface_template();
  for (int i = 0; i < 2; ++i)
    for (CardiacPhase phase : {CardiacPhase::ED, CardiacPhase::ES}) {
      const MultiViewSample gen = phantom_sample(kSeed, subject_id(i), phase, tmpl);
      const MultiViewSample a = load_sample(root.string(), m.kind, subject_id(i), phase);
      const MultiViewSample b = load_sample(root.string(), m.kind, subject_id(i), phase);
      REQUIRE(samples_equal(a, b));

      // images round-trip through float32 exactly once
      REQUIRE(a.sax.data.shape == gen.sax.data.shape);
      for (std::int64_t k = 0; k < gen.sax.data.size(); ++k)
        if (a.sax.data[k] != static_cast<double>(static_cast<float>(gen.sax.data[k])))
          FAIL("raw image value mismatch");
      // mesh and transform round-trip exactly
      REQUIRE(tensors_equal(a.gt.coords, gen.gt.coords));
      REQUIRE(a.gt.space == CoordSpace::millimetre);
      REQUIRE(a.transform.origin.z == gen.transform.origin.z);
      REQUIRE(a.transform.spacing.z == gen.transform.spacing.z);
      REQUIRE(a.transform.size.x == gen.transform.size.x);
      REQUIRE(a.sax.origin.x == gen.sax.origin.x);
      REQUIRE(a.lax[2].origin.x == gen.lax[2].origin.x);
      REQUIRE(a.lax[1].spacing_x == gen.lax[1].spacing_x);
    }

  const DatasetManifest back = load_manifest(root.string());
  REQUIRE(back.seed == m.seed);
  REQUIRE(back.count == m.count);
  REQUIRE(back.kind == m.kind);
  REQUIRE(back.train == m.train);
  REQUIRE(back.test == m.test);
  REQUIRE(back.hashes == m.hashes);

  // volumetric datasets store the gt as a node/ele pair
  const auto vroot = scratch("hm_data_tetra");
  const DatasetManifest vm =
      generate_phantom_dataset(vroot.string(), 1, kSeed, TemplateKind::tetra);
  REQUIRE(std::filesystem::exists(vroot / "subjects/s0000/ED/gt.node"));
  REQUIRE(std::filesystem::exists(vroot / "subjects/s0000/ED/gt.ele"));
  const MultiViewSample vs = load_sample(vroot.string(), vm.kind, "s0000", CardiacPhase::ES);
  REQUIRE(vs.gt.count() == 814);
  const MultiViewSample vgen =
      phantom_sample(kSeed, "s0000", CardiacPhase::ES, volumetric_template());
  REQUIRE(tensors_equal(vs.gt.coords, vgen.gt.coords));

  // hash verification accepts the untouched tree and rejects a corrupted file
  const DatasetManifest verified = verify_dataset(vroot.string());
  REQUIRE(verified.hashes == vm.hashes);
  {
    const auto victim = vroot / vm.hashes.begin()->first;
    std::fstream f(victim, std::ios::in | std::ios::out | std::ios::binary);
    char c = 0;
    f.read(&c, 1);
    f.seekp(0);
    c = static_cast<char>(c ^ 0x5a);
    f.write(&c, 1);
  }
  REQUIRE_THROWS_AS(verify_dataset(vroot.string()), ValidationError);

  // a manifest with overlapping splits is rejected
  {
    std::ifstream is(root / "manifest.json");
    nlohmann::json j = nlohmann::json::parse(is);
    j["splits"]["val"] = j["splits"]["train"];
    std::ofstream os(root / "manifest.json");
    os << j.dump(2) << "\n";
  }
  REQUIRE_THROWS_AS(load_manifest(root.string()), ValidationError);
}
