#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "hybridmesh/transforms.hpp"
#include "test_util.hpp"

using namespace hybridmesh;
using hmtest::random_tensor;

namespace {

SpaceTransform random_transform(Rng& rng, TransformMode mode) {
  SpaceTransform t;
  t.mode = mode;
  t.pad = {static_cast<double>(rng.uniform_int(9)), static_cast<double>(rng.uniform_int(9)),
           static_cast<double>(rng.uniform_int(3))};
  t.crop_origin = {rng.uniform(0.0, 30.0), rng.uniform(0.0, 30.0), rng.uniform(0.0, 4.0)};
  t.size = {static_cast<double>(16 + rng.uniform_int(113)),
            static_cast<double>(16 + rng.uniform_int(113)),
            static_cast<double>(8 + rng.uniform_int(17))};
  t.spacing = {rng.uniform(0.5, 3.0), rng.uniform(0.5, 3.0), rng.uniform(2.0, 12.0)};
  t.origin = {rng.uniform(-80.0, 80.0), rng.uniform(-80.0, 80.0), rng.uniform(-80.0, 80.0)};
  return t;
}

}  // namespace

TEST_CASE("relative space round trip", "[transforms]") {
  Rng rng(401);
  for (int trial = 0; trial < 10; ++trial) {
    const SpaceTransform t =
        random_transform(rng, trial % 2 == 0 ? TransformMode::full : TransformMode::cropped);
    const VertexField mm(random_tensor(Shape{100000, 3}, rng, 60.0), CoordSpace::millimetre);
    const VertexField rel = to_relative(mm, t);
    REQUIRE(rel.space == CoordSpace::relative);
    const VertexField back = to_mm(rel, t);
    REQUIRE(back.space == CoordSpace::millimetre);
    double worst = 0.0;
    for (int i = 0; i < mm.count(); ++i) worst = std::max(worst, norm(back.at(i) - mm.at(i)));
    REQUIRE(worst < 1e-9);
  }
}

TEST_CASE("image centre maps to one half", "[transforms]") {
  Rng rng(402);
  for (int trial = 0; trial < 20; ++trial) {
    SpaceTransform t =
        random_transform(rng, trial % 2 == 0 ? TransformMode::full : TransformMode::cropped);
    // native image filling the whole input: no pad, crop box at the origin
    t.pad = {0, 0, 0};
    t.crop_origin = {0, 0, 0};

    // the exact midpoint of the voxel grid's span maps to one half exactly
    const Vec3 mid = to_relative_point(
        Vec3{t.origin.x + 0.5 * t.size.x * t.spacing.x, t.origin.y + 0.5 * t.size.y * t.spacing.y,
             t.origin.z + 0.5 * t.size.z * t.spacing.z},
        t);
    REQUIRE_THAT(mid.x, Catch::Matchers::WithinAbs(0.5, 1e-12));
    REQUIRE_THAT(mid.y, Catch::Matchers::WithinAbs(0.5, 1e-12));
    REQUIRE_THAT(mid.z, Catch::Matchers::WithinAbs(0.5, 1e-12));

    // the centre voxel is within half a voxel of (0.5, 0.5, 0.5)
    const Vec3 centre_voxel = to_relative_point(
        Vec3{t.origin.x + 0.5 * (t.size.x - 1.0) * t.spacing.x,
             t.origin.y + 0.5 * (t.size.y - 1.0) * t.spacing.y,
             t.origin.z + 0.5 * (t.size.z - 1.0) * t.spacing.z},
        t);
    REQUIRE(std::abs(centre_voxel.x - 0.5) <= 0.5 / t.size.x + 1e-12);
    REQUIRE(std::abs(centre_voxel.y - 0.5) <= 0.5 / t.size.y + 1e-12);
    REQUIRE(std::abs(centre_voxel.z - 0.5) <= 0.5 / t.size.z + 1e-12);
  }
}

TEST_CASE("padding and crop shifts move relative coords by known amounts", "[transforms]") {
  SpaceTransform t;
  t.mode = TransformMode::full;
  t.pad = {4, 4, 0};
  t.size = {64, 64, 12};
  t.spacing = {2, 2, 80.0 / 12.0};
  t.origin = {10, 20, 30};

  // voxel k along x sits at (k + pad) / size
  const Vec3 r = to_relative_point(Vec3{10.0 + 2.0 * 28.0, 20.0, 30.0}, t);
  REQUIRE_THAT(r.x, Catch::Matchers::WithinAbs(0.5, 1e-12));
  REQUIRE_THAT(r.y, Catch::Matchers::WithinAbs(4.0 / 64.0, 1e-12));
  REQUIRE_THAT(r.z, Catch::Matchers::WithinAbs(0.0, 1e-12));

  SpaceTransform extra = t;
  extra.pad = {7, 4, 0};
  const Vec3 rp = to_relative_point(Vec3{10.0 + 2.0 * 28.0, 20.0, 30.0}, extra);
  REQUIRE_THAT(rp.x - r.x, Catch::Matchers::WithinAbs(3.0 / 64.0, 1e-12));

  SpaceTransform c = t;
  c.mode = TransformMode::cropped;
  c.crop_origin = {8, 10, 0};
  c.size = {40, 40, 12};
  SpaceTransform cs = c;
  cs.crop_origin = {11, 10, 0};
  const Vec3 rc = to_relative_point(Vec3{50, 44, 36}, c);
  const Vec3 rcs = to_relative_point(Vec3{50, 44, 36}, cs);
  REQUIRE_THAT(rc.x - rcs.x, Catch::Matchers::WithinAbs(3.0 / 40.0, 1e-12));
  REQUIRE_THAT(rc.y, Catch::Matchers::WithinAbs(2.0 / 40.0, 1e-12));
  REQUIRE_THAT(rc.z - rcs.z, Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("transform validation", "[transforms]") {
  Rng rng(403);
  const VertexField mm(random_tensor(Shape{5, 3}, rng, 10.0), CoordSpace::millimetre);
  SpaceTransform t;
  t.size = {64, 64, 12};
  t.spacing = {2, 2, 0.0};
  REQUIRE_THROWS_AS(to_relative(mm, t), ValidationError);
  t.spacing = {2, 2, 6.0};
  t.size = {64, 0, 12};
  REQUIRE_THROWS_AS(to_relative(mm, t), ValidationError);
  t.size = {64, 64, 12};

  const VertexField rel = to_relative(mm, t);
  REQUIRE_THROWS_AS(to_relative(rel, t), ValidationError);
  REQUIRE_THROWS_AS(to_mm(mm, t), ValidationError);
}
