#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "hybridmesh/icosphere.hpp"
#include "hybridmesh/mesh_io.hpp"
#include "test_util.hpp"

using namespace hybridmesh;

namespace {

std::filesystem::path scratch() {
  auto p = std::filesystem::temp_directory_path() / "hm_io_test";
  std::filesystem::create_directories(p);
  return p;
}

SurfaceMesh sample_surface() {
  const TriSurface s = icosphere(1);
  SurfaceMesh mesh;
  mesh.topology.vertex_count = static_cast<int>(s.vertices.size());
  mesh.topology.faces = s.faces;
  mesh.topology.edges = edges_from_cells(s.faces, {});
  mesh.topology.structure_labels.assign(s.vertices.size(), StructureLabel::LV);
  for (std::size_t i = 0; i < s.vertices.size(); i += 2)
    mesh.topology.structure_labels[i] = StructureLabel::RV;
  mesh.topology.surfaces.push_back({"shell", StructureLabel::LV, {}});
  for (int i = 0; i < static_cast<int>(s.faces.size()); ++i)
    mesh.topology.surfaces[0].faces.push_back(i);
  Rng rng(71);
  Tensor c(Shape{static_cast<int>(s.vertices.size()), 3});
  for (std::int64_t i = 0; i < c.size(); ++i)
    c[i] = s.vertices[static_cast<std::size_t>(i / 3)][static_cast<int>(i % 3)] * 17.0 +
           rng.normal() * 1e-7;
  mesh.coords = VertexField(std::move(c), CoordSpace::millimetre);
  return mesh;
}

}  // namespace

TEST_CASE("ply round trip preserves coordinates and connectivity", "[mesh_io]") {
  const SurfaceMesh mesh = sample_surface();
  const auto path = (scratch() / "round.ply").string();
  write_ply(path, mesh.topology, mesh.coords);
  const SurfaceMesh back = read_ply(path);

  REQUIRE(back.topology.vertex_count == mesh.topology.vertex_count);
  REQUIRE(back.topology.faces == mesh.topology.faces);
  REQUIRE(back.topology.edges == mesh.topology.edges);
  REQUIRE(back.topology.structure_labels == mesh.topology.structure_labels);
  REQUIRE(back.topology.surfaces.size() == 1);
  REQUIRE(back.topology.surfaces[0].name == "shell");
  REQUIRE(back.topology.surfaces[0].faces == mesh.topology.surfaces[0].faces);
  for (std::int64_t i = 0; i < mesh.coords.coords.size(); ++i)
    REQUIRE(back.coords.coords[i] == mesh.coords.coords[i]);  // 17 digits: bit-exact
}

TEST_CASE("ply rejects malformed input with a line number", "[mesh_io]") {
  const auto dir = scratch();
  const auto path = (dir / "bad.ply").string();
  {
    std::ofstream os(path);
    os << "ply\nformat ascii 1.0\nelement vertex 3\n"
          "property double x\nproperty double y\nproperty double z\n"
          "element face 1\nproperty list uchar int vertex_indices\nend_header\n"
          "0 0 0\n1 0 0\n0 1 0\n"
          "3 0 1 7\n";  // face index out of range on line 13
  }
  try {
    read_ply(path);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    REQUIRE(msg.find(":13:") != std::string::npos);
    REQUIRE(msg.find("out of range") != std::string::npos);
  }

  const auto trunc = (dir / "trunc.ply").string();
  {
    std::ofstream os(trunc);
    os << "ply\nformat ascii 1.0\nelement vertex 5\n"
          "property double x\nproperty double y\nproperty double z\n"
          "element face 0\nproperty list uchar int vertex_indices\nend_header\n"
          "0 0 0\n";
  }
  REQUIRE_THROWS_AS(read_ply(trunc), ValidationError);

  const auto noply = (dir / "noply.ply").string();
  {
    std::ofstream os(noply);
    os << "solid nope\n";
  }
  try {
    read_ply(noply);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    REQUIRE(std::string(e.what()).find(":1:") != std::string::npos);
  }
}

TEST_CASE("node/ele round trip with 1-based external indices", "[mesh_io]") {
  MeshTopology topo;
  topo.vertex_count = 5;
  topo.tetras = {{0, 1, 2, 3}, {1, 2, 3, 4}};
  topo.edges = edges_from_cells({}, topo.tetras);
  topo.structure_labels.assign(5, StructureLabel::LV);
  Rng rng(72);
  Tensor c = hmtest::random_tensor(Shape{5, 3}, rng, 13.0);
  const VertexField coords(c, CoordSpace::millimetre);

  const auto base = (scratch() / "ball").string();
  write_tetra_mesh(base, topo, coords);

  // external file is 1-based
  {
    std::ifstream is(base + ".ele");
    std::string header;
    std::getline(is, header);
    int idx, a, b, cc, d;
    is >> idx >> a >> b >> cc >> d;
    REQUIRE(idx == 1);
    REQUIRE(a == 1);
    REQUIRE(d == 4);
  }

  const TetraMesh back = read_tetra_mesh(base);
  REQUIRE(back.topology.vertex_count == 5);
  REQUIRE(back.topology.tetras == topo.tetras);
  for (std::int64_t i = 0; i < c.size(); ++i) REQUIRE(back.coords.coords[i] == c[i]);
}

TEST_CASE("node/ele rejects malformed files", "[mesh_io]") {
  const auto dir = scratch();
  {
    std::ofstream os((dir / "bad.node").string());
    os << "2 3 0 0\n1 0 0 0\n2 1 0 0\n";
  }
  {
    std::ofstream os((dir / "bad.ele").string());
    os << "1 4 0\n1 1 2 3 9\n";  // index 9 out of range, line 2
  }
  try {
    read_tetra_mesh((dir / "bad").string());
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    REQUIRE(msg.find(".ele:2:") != std::string::npos);
  }
}

TEST_CASE("hierarchy container round trip", "[mesh_io]") {
  const TriSurface s = icosphere(2);
  MeshTopology topo;
  topo.vertex_count = static_cast<int>(s.vertices.size());
  topo.faces = s.faces;
  topo.edges = edges_from_cells(s.faces, {});
  topo.structure_labels.assign(s.vertices.size(), StructureLabel::LA);
  Tensor c(Shape{topo.vertex_count, 3});
  for (std::int64_t i = 0; i < c.size(); ++i)
    c[i] = s.vertices[static_cast<std::size_t>(i / 3)][static_cast<int>(i % 3)] * 20.0;
  const PoolHierarchy h = build_hierarchy(topo, VertexField(c, CoordSpace::millimetre), 4);

  const auto path = (scratch() / "hier.bin").string();
  save_hierarchy(path, h);
  const PoolHierarchy back = load_hierarchy(path);

  REQUIRE(back.levels.size() == h.levels.size());
  for (std::size_t i = 0; i < h.levels.size(); ++i) {
    REQUIRE(back.levels[i].pool.indptr == h.levels[i].pool.indptr);
    REQUIRE(back.levels[i].pool.indices == h.levels[i].pool.indices);
    REQUIRE(back.levels[i].pool.values == h.levels[i].pool.values);
    REQUIRE(back.levels[i].unpool.indptr == h.levels[i].unpool.indptr);
    REQUIRE(back.levels[i].unpool.indices == h.levels[i].unpool.indices);
    REQUIRE(back.levels[i].unpool.values == h.levels[i].unpool.values);
    REQUIRE(back.levels[i].topology.faces == h.levels[i].topology.faces);
    REQUIRE(back.levels[i].topology.edges == h.levels[i].topology.edges);
    REQUIRE(back.levels[i].topology.structure_labels == h.levels[i].topology.structure_labels);
    for (std::int64_t k = 0; k < h.levels[i].coords.size(); ++k)
      REQUIRE(back.levels[i].coords[k] == h.levels[i].coords[k]);
  }

  {
    std::ofstream os(path, std::ios::binary);
    os << "HMWRONG";
  }
  REQUIRE_THROWS_AS(load_hierarchy(path), ValidationError);
}
