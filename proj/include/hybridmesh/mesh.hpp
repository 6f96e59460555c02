#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "hybridmesh/geometry.hpp"
#include "hybridmesh/sparse.hpp"
#include "hybridmesh/tensor.hpp"

namespace hybridmesh {

enum class StructureLabel : int { LV = 0, RV = 1, LA = 2, RA = 3, AORTA = 4 };

inline const char* structure_label_name(StructureLabel l) {
  switch (l) {
    case StructureLabel::LV: return "LV";
    case StructureLabel::RV: return "RV";
    case StructureLabel::LA: return "LA";
    case StructureLabel::RA: return "RA";
    case StructureLabel::AORTA: return "AORTA";
  }
  return "?";
}

inline StructureLabel parse_structure_label(const std::string& s) {
  if (s == "LV") return StructureLabel::LV;
  if (s == "RV") return StructureLabel::RV;
  if (s == "LA") return StructureLabel::LA;
  if (s == "RA") return StructureLabel::RA;
  if (s == "AORTA") return StructureLabel::AORTA;
  throw ValidationError("unknown structure label '" + s + "'");
}

// A named closed sub-surface: indices into MeshTopology::faces.
struct SubSurface {
  std::string name;
  StructureLabel label = StructureLabel::LV;
  std::vector<int> faces;
};

struct MeshTopology {
  int vertex_count = 0;
  std::vector<std::pair<int, int>> edges;       // undirected, first < second
  std::vector<std::array<int, 3>> faces;        // surface triangles
  std::vector<std::array<int, 4>> tetras;       // empty for surface meshes
  std::vector<StructureLabel> structure_labels; // per vertex
  std::vector<SubSurface> surfaces;

  bool volumetric() const { return !tetras.empty(); }
};

enum class CoordSpace { millimetre, relative };

// M x 3 vertex coordinates plus the space they live in.
struct VertexField {
  Tensor coords;
  CoordSpace space = CoordSpace::millimetre;

  VertexField() = default;
  VertexField(Tensor c, CoordSpace s) : coords(std::move(c)), space(s) {
    check(coords.rank() == 2 && coords.dim(1) == 3,
          "VertexField needs an Mx3 tensor, got " + shape_string(coords.shape));
  }

  int count() const { return coords.rank() == 2 ? coords.dim(0) : 0; }
  Vec3 at(int i) const {
    return {coords[static_cast<std::int64_t>(i) * 3 + 0],
            coords[static_cast<std::int64_t>(i) * 3 + 1],
            coords[static_cast<std::int64_t>(i) * 3 + 2]};
  }
  void set(int i, const Vec3& p) {
    coords[static_cast<std::int64_t>(i) * 3 + 0] = p.x;
    coords[static_cast<std::int64_t>(i) * 3 + 1] = p.y;
    coords[static_cast<std::int64_t>(i) * 3 + 2] = p.z;
  }
};

// Soft validity check: finite always enforced, relative-space range only warned.
inline std::vector<std::string> vertex_field_warnings(const VertexField& f) {
  std::vector<std::string> warnings;
  for (std::int64_t i = 0; i < f.coords.size(); ++i)
    check(std::isfinite(f.coords[i]), "non-finite vertex coordinate at row " +
                                          std::to_string(i / 3));
  if (f.space == CoordSpace::relative) {
    int outside = 0;
    for (std::int64_t i = 0; i < f.coords.size(); ++i)
      if (f.coords[i] < -0.5 || f.coords[i] > 1.5) ++outside;
    if (outside > 0)
      warnings.push_back(std::to_string(outside) +
                         " relative coordinates outside [-0.5, 1.5]");
  }
  return warnings;
}

inline std::vector<std::pair<int, int>> edges_from_cells(
    const std::vector<std::array<int, 3>>& faces,
    const std::vector<std::array<int, 4>>& tetras) {
  std::set<std::pair<int, int>> s;
  auto put = [&s](int a, int b) { s.emplace(std::min(a, b), std::max(a, b)); };
  for (const auto& f : faces) {
    put(f[0], f[1]);
    put(f[1], f[2]);
    put(f[2], f[0]);
  }
  for (const auto& t : tetras)
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) put(t[static_cast<std::size_t>(i)],
                                          t[static_cast<std::size_t>(j)]);
  return {s.begin(), s.end()};
}

inline void validate_topology(const MeshTopology& t) {
  const int M = t.vertex_count;
  check(M > 0, "topology has no vertices");
  check(static_cast<int>(t.structure_labels.size()) == M,
        "structure label count " + std::to_string(t.structure_labels.size()) +
            " != vertex count " + std::to_string(M));
  for (const auto& [a, b] : t.edges) {
    check(a >= 0 && a < M && b >= 0 && b < M, "edge index out of range");
    check(a != b, "degenerate edge");
    check(a < b, "edges must be stored with first < second");
  }
  for (const auto& f : t.faces) {
    for (int v : f) check(v >= 0 && v < M, "face index out of range");
    check(f[0] != f[1] && f[1] != f[2] && f[0] != f[2], "degenerate face");
  }
  for (const auto& tet : t.tetras) {
    for (int v : tet) check(v >= 0 && v < M, "tetra index out of range");
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j)
        check(tet[static_cast<std::size_t>(i)] != tet[static_cast<std::size_t>(j)],
              "degenerate tetra");
  }
  for (const auto& s : t.surfaces)
    for (int fi : s.faces)
      check(fi >= 0 && fi < static_cast<int>(t.faces.size()),
            "sub-surface face index out of range in '" + s.name + "'");
}

// Symmetric 0/1 adjacency with zero diagonal.
inline CsrMatrix adjacency_matrix(const MeshTopology& t) {
  std::vector<std::tuple<int, int, double>> trip;
  trip.reserve(t.edges.size() * 2);
  for (const auto& [a, b] : t.edges) {
    trip.emplace_back(a, b, 1.0);
    trip.emplace_back(b, a, 1.0);
  }
  return CsrMatrix::from_triplets(t.vertex_count, t.vertex_count, trip);
}

inline std::vector<std::vector<int>> vertex_neighbors(const MeshTopology& t) {
  std::vector<std::vector<int>> nbr(static_cast<std::size_t>(t.vertex_count));
  for (const auto& [a, b] : t.edges) {
    nbr[static_cast<std::size_t>(a)].push_back(b);
    nbr[static_cast<std::size_t>(b)].push_back(a);
  }
  for (auto& v : nbr) std::sort(v.begin(), v.end());
  return nbr;
}

// A face set is closed when every edge it uses borders exactly two of its faces.
inline bool is_closed_face_set(const std::vector<std::array<int, 3>>& all_faces,
                               const std::vector<int>& face_ids) {
  std::map<std::pair<int, int>, int> edge_count;
  for (int fi : face_ids) {
    const auto& f = all_faces[static_cast<std::size_t>(fi)];
    for (int k = 0; k < 3; ++k) {
      const int a = f[static_cast<std::size_t>(k)];
      const int b = f[static_cast<std::size_t>((k + 1) % 3)];
      edge_count[{std::min(a, b), std::max(a, b)}] += 1;
    }
  }
  for (const auto& [e, c] : edge_count)
    if (c != 2) return false;
  return true;
}

// Vertices referenced by at least one face, ascending.
inline std::vector<int> surface_vertices(const MeshTopology& t) {
  std::vector<char> used(static_cast<std::size_t>(t.vertex_count), 0);
  for (const auto& f : t.faces)
    for (int v : f) used[static_cast<std::size_t>(v)] = 1;
  std::vector<int> out;
  for (int v = 0; v < t.vertex_count; ++v)
    if (used[static_cast<std::size_t>(v)]) out.push_back(v);
  return out;
}

}  // namespace hybridmesh
