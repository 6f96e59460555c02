#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>

#include "hybridmesh/checkpoint.hpp"
#include "hybridmesh/decimation.hpp"
#include "hybridmesh/mesh.hpp"

namespace hybridmesh {

namespace detail {

[[noreturn]] inline void io_fail(const std::string& path, std::size_t line,
                                 const std::string& what) {
  throw ValidationError(path + ":" + std::to_string(line) + ": " + what);
}

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream is(path);
  check(static_cast<bool>(is), "cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

}  // namespace detail

struct SurfaceMesh {
  MeshTopology topology;
  VertexField coords;
};

// ascii PLY with per-vertex structure labels and per-face sub-surface ids;
// sub-surface names ride in header comments.
inline void write_ply(const std::string& path, const MeshTopology& topo,
                      const VertexField& coords) {
  check(coords.count() == topo.vertex_count, "coords/topology vertex count mismatch");
  std::ofstream os(path);
  check(static_cast<bool>(os), "cannot open file for writing: " + path);
  os << "ply\nformat ascii 1.0\n";
  for (std::size_t si = 0; si < topo.surfaces.size(); ++si)
    os << "comment structure " << si << " " << topo.surfaces[si].name << " "
       << structure_label_name(topo.surfaces[si].label) << "\n";
  os << "element vertex " << topo.vertex_count << "\n";
  os << "property double x\nproperty double y\nproperty double z\nproperty int label\n";
  os << "element face " << topo.faces.size() << "\n";
  os << "property list uchar int vertex_indices\nproperty int surface\n";
  os << "end_header\n";

  for (int v = 0; v < topo.vertex_count; ++v) {
    const Vec3 p = coords.at(v);
    os << detail::fmt_double(p.x) << " " << detail::fmt_double(p.y) << " "
       << detail::fmt_double(p.z) << " "
       << static_cast<int>(topo.structure_labels[static_cast<std::size_t>(v)]) << "\n";
  }
  std::vector<int> face_surface(topo.faces.size(), -1);
  for (std::size_t si = 0; si < topo.surfaces.size(); ++si)
    for (int fi : topo.surfaces[si].faces)
      face_surface[static_cast<std::size_t>(fi)] = static_cast<int>(si);
  for (std::size_t fi = 0; fi < topo.faces.size(); ++fi) {
    const auto& f = topo.faces[fi];
    os << "3 " << f[0] << " " << f[1] << " " << f[2] << " " << face_surface[fi] << "\n";
  }
  check(static_cast<bool>(os), "write failed for: " + path);
}

inline SurfaceMesh read_ply(const std::string& path) {
  const auto lines = detail::read_lines(path);
  std::size_t ln = 0;
  auto next_line = [&]() -> const std::string& {
    if (ln >= lines.size()) detail::io_fail(path, lines.size(), "unexpected end of file");
    return lines[ln++];
  };

  if (next_line() != "ply") detail::io_fail(path, ln, "missing ply magic");
  if (next_line() != "format ascii 1.0") detail::io_fail(path, ln, "unsupported ply format");

  int vertex_count = -1;
  std::size_t face_count = 0;
  bool has_label = false, has_face_surface = false;
  std::vector<std::pair<std::string, StructureLabel>> surface_names;
  std::string element;
  while (true) {
    const std::string& line = next_line();
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    if (word == "end_header") break;
    if (word == "comment") {
      std::string kind;
      ss >> kind;
      if (kind == "structure") {
        std::size_t idx;
        std::string name, label;
        if (!(ss >> idx >> name >> label)) detail::io_fail(path, ln, "malformed structure comment");
        if (idx != surface_names.size())
          detail::io_fail(path, ln, "structure comments out of order");
        surface_names.emplace_back(name, parse_structure_label(label));
      }
    } else if (word == "element") {
      std::string name;
      long count;
      if (!(ss >> name >> count) || count < 0) detail::io_fail(path, ln, "malformed element line");
      element = name;
      if (name == "vertex") vertex_count = static_cast<int>(count);
      else if (name == "face") face_count = static_cast<std::size_t>(count);
      else detail::io_fail(path, ln, "unsupported element '" + name + "'");
    } else if (word == "property") {
      std::string rest;
      std::getline(ss, rest);
      if (element == "vertex" && rest.find(" label") != std::string::npos) has_label = true;
      if (element == "face" && rest.find("int surface") != std::string::npos)
        has_face_surface = true;
    } else {
      detail::io_fail(path, ln, "unexpected header line '" + word + "'");
    }
  }
  if (vertex_count < 0) detail::io_fail(path, ln, "header missing vertex element");

  SurfaceMesh mesh;
  mesh.topology.vertex_count = vertex_count;
  mesh.topology.structure_labels.assign(static_cast<std::size_t>(vertex_count),
                                        StructureLabel::LV);
  mesh.coords = VertexField(Tensor(Shape{vertex_count, 3}), CoordSpace::millimetre);
  for (int v = 0; v < vertex_count; ++v) {
    std::istringstream ss(next_line());
    double x, y, z;
    if (!(ss >> x >> y >> z)) detail::io_fail(path, ln, "malformed vertex line");
    if (has_label) {
      int label;
      if (!(ss >> label) || label < 0 || label > 4)
        detail::io_fail(path, ln, "malformed vertex label");
      mesh.topology.structure_labels[static_cast<std::size_t>(v)] =
          static_cast<StructureLabel>(label);
    }
    mesh.coords.set(v, {x, y, z});
  }
  for (const auto& [name, label] : surface_names)
    mesh.topology.surfaces.push_back({name, label, {}});
  for (std::size_t fi = 0; fi < face_count; ++fi) {
    std::istringstream ss(next_line());
    int n, a, b, c;
    if (!(ss >> n >> a >> b >> c) || n != 3)
      detail::io_fail(path, ln, "only triangular faces are supported");
    for (int v : {a, b, c})
      if (v < 0 || v >= vertex_count)
        detail::io_fail(path, ln, "face index " + std::to_string(v) + " out of range");
    if (a == b || b == c || a == c) detail::io_fail(path, ln, "degenerate face");
    mesh.topology.faces.push_back({a, b, c});
    if (has_face_surface) {
      int si;
      if (!(ss >> si)) detail::io_fail(path, ln, "missing face surface id");
      if (si >= 0) {
        if (si >= static_cast<int>(mesh.topology.surfaces.size()))
          detail::io_fail(path, ln, "face surface id out of range");
        mesh.topology.surfaces[static_cast<std::size_t>(si)].faces.push_back(
            static_cast<int>(fi));
      }
    }
  }
  mesh.topology.edges = edges_from_cells(mesh.topology.faces, {});
  validate_topology(mesh.topology);
  return mesh;
}

// TetGen-style pair: base.node / base.ele, 1-based indices on disk.
inline void write_tetra_mesh(const std::string& path_base, const MeshTopology& topo,
                             const VertexField& coords) {
  check(coords.count() == topo.vertex_count, "coords/topology vertex count mismatch");
  check(topo.volumetric(), "write_tetra_mesh needs a volumetric topology");
  {
    std::ofstream os(path_base + ".node");
    check(static_cast<bool>(os), "cannot open file for writing: " + path_base + ".node");
    os << topo.vertex_count << " 3 0 0\n";
    for (int v = 0; v < topo.vertex_count; ++v) {
      const Vec3 p = coords.at(v);
      os << (v + 1) << " " << detail::fmt_double(p.x) << " " << detail::fmt_double(p.y) << " "
         << detail::fmt_double(p.z) << "\n";
    }
    check(static_cast<bool>(os), "write failed for: " + path_base + ".node");
  }
  {
    std::ofstream os(path_base + ".ele");
    check(static_cast<bool>(os), "cannot open file for writing: " + path_base + ".ele");
    os << topo.tetras.size() << " 4 0\n";
    for (std::size_t t = 0; t < topo.tetras.size(); ++t) {
      const auto& tet = topo.tetras[t];
      os << (t + 1) << " " << (tet[0] + 1) << " " << (tet[1] + 1) << " " << (tet[2] + 1) << " "
         << (tet[3] + 1) << "\n";
    }
    check(static_cast<bool>(os), "write failed for: " + path_base + ".ele");
  }
}

struct TetraMesh {
  MeshTopology topology;  // tetras + edges only; faces/surfaces empty
  VertexField coords;
};

inline TetraMesh read_tetra_mesh(const std::string& path_base) {
  TetraMesh mesh;
  {
    const std::string path = path_base + ".node";
    const auto lines = detail::read_lines(path);
    if (lines.empty()) detail::io_fail(path, 0, "empty file");
    std::istringstream header(lines[0]);
    long n, dim, attrs, markers;
    if (!(header >> n >> dim >> attrs >> markers) || n <= 0 || dim != 3)
      detail::io_fail(path, 1, "malformed node header");
    mesh.topology.vertex_count = static_cast<int>(n);
    mesh.coords = VertexField(Tensor(Shape{static_cast<int>(n), 3}), CoordSpace::millimetre);
    for (long i = 0; i < n; ++i) {
      const std::size_t ln = static_cast<std::size_t>(i) + 1;
      if (ln >= lines.size()) detail::io_fail(path, lines.size(), "unexpected end of file");
      std::istringstream ss(lines[ln]);
      long idx;
      double x, y, z;
      if (!(ss >> idx >> x >> y >> z) || idx != i + 1)
        detail::io_fail(path, ln + 1, "malformed node line (expected 1-based index " +
                                          std::to_string(i + 1) + ")");
      mesh.coords.set(static_cast<int>(i), {x, y, z});
    }
  }
  {
    const std::string path = path_base + ".ele";
    const auto lines = detail::read_lines(path);
    if (lines.empty()) detail::io_fail(path, 0, "empty file");
    std::istringstream header(lines[0]);
    long t, nodes_per, attrs;
    if (!(header >> t >> nodes_per >> attrs) || t < 0 || nodes_per != 4)
      detail::io_fail(path, 1, "malformed ele header");
    for (long i = 0; i < t; ++i) {
      const std::size_t ln = static_cast<std::size_t>(i) + 1;
      if (ln >= lines.size()) detail::io_fail(path, lines.size(), "unexpected end of file");
      std::istringstream ss(lines[ln]);
      long idx, a, b, c, d;
      if (!(ss >> idx >> a >> b >> c >> d) || idx != i + 1)
        detail::io_fail(path, ln + 1, "malformed ele line");
      for (long v : {a, b, c, d})
        if (v < 1 || v > mesh.topology.vertex_count)
          detail::io_fail(path, ln + 1, "tetra index " + std::to_string(v) + " out of range");
      mesh.topology.tetras.push_back({static_cast<int>(a - 1), static_cast<int>(b - 1),
                                      static_cast<int>(c - 1), static_cast<int>(d - 1)});
    }
  }
  mesh.topology.structure_labels.assign(static_cast<std::size_t>(mesh.topology.vertex_count),
                                        StructureLabel::LV);
  mesh.topology.edges = edges_from_cells({}, mesh.topology.tetras);
  validate_topology(mesh.topology);
  return mesh;
}

// ---------------------------------------------------------------------------
// Hierarchy container: binary, little-endian.
//   magic "HMHIER\n\0" | u32 version | u64 level count | per level:
//     pool rows/cols/nnz + triplets (u32 row, u32 col, f64 value)
//     unpool likewise, then the coarse topology and coords.
// ---------------------------------------------------------------------------

namespace detail {

constexpr char kHierMagic[8] = {'H', 'M', 'H', 'I', 'E', 'R', '\n', '\0'};
constexpr std::uint32_t kHierVersion = 1;

inline void write_csr(std::ostream& os, const CsrMatrix& m) {
  write_pod(os, static_cast<std::uint64_t>(m.rows));
  write_pod(os, static_cast<std::uint64_t>(m.cols));
  write_pod(os, static_cast<std::uint64_t>(m.nnz()));
  for (int r = 0; r < m.rows; ++r)
    for (int k = m.indptr[static_cast<std::size_t>(r)];
         k < m.indptr[static_cast<std::size_t>(r) + 1]; ++k) {
      write_pod(os, static_cast<std::uint32_t>(r));
      write_pod(os, static_cast<std::uint32_t>(m.indices[static_cast<std::size_t>(k)]));
      write_pod(os, m.values[static_cast<std::size_t>(k)]);
    }
}

inline CsrMatrix read_csr(std::istream& is) {
  std::uint64_t rows = 0, cols = 0, nnz = 0;
  read_pod(is, rows);
  read_pod(is, cols);
  read_pod(is, nnz);
  check(rows <= (1u << 24) && cols <= (1u << 24) && nnz <= (1ull << 32),
        "hierarchy matrix size implausible");
  std::vector<std::tuple<int, int, double>> trip;
  trip.reserve(static_cast<std::size_t>(nnz));
  for (std::uint64_t i = 0; i < nnz; ++i) {
    std::uint32_t r = 0, c = 0;
    double v = 0.0;
    read_pod(is, r);
    read_pod(is, c);
    read_pod(is, v);
    trip.emplace_back(static_cast<int>(r), static_cast<int>(c), v);
  }
  return CsrMatrix::from_triplets(static_cast<int>(rows), static_cast<int>(cols), trip);
}

inline void write_topology(std::ostream& os, const MeshTopology& t, const Tensor& coords) {
  write_pod(os, static_cast<std::uint64_t>(t.vertex_count));
  for (auto l : t.structure_labels) write_pod(os, static_cast<std::int32_t>(l));
  write_pod(os, static_cast<std::uint64_t>(t.edges.size()));
  for (const auto& [a, b] : t.edges) {
    write_pod(os, static_cast<std::uint32_t>(a));
    write_pod(os, static_cast<std::uint32_t>(b));
  }
  write_pod(os, static_cast<std::uint64_t>(t.faces.size()));
  for (const auto& f : t.faces)
    for (int v : f) write_pod(os, static_cast<std::uint32_t>(v));
  write_pod(os, static_cast<std::uint64_t>(t.tetras.size()));
  for (const auto& tet : t.tetras)
    for (int v : tet) write_pod(os, static_cast<std::uint32_t>(v));
  write_pod(os, static_cast<std::uint64_t>(t.surfaces.size()));
  for (const auto& s : t.surfaces) {
    write_string(os, s.name);
    write_pod(os, static_cast<std::int32_t>(s.label));
    write_pod(os, static_cast<std::uint64_t>(s.faces.size()));
    for (int fi : s.faces) write_pod(os, static_cast<std::uint32_t>(fi));
  }
  write_doubles(os, coords.ptr(), coords.size());
}

inline void read_topology(std::istream& is, MeshTopology& t, Tensor& coords) {
  std::uint64_t m = 0;
  read_pod(is, m);
  check(m > 0 && m <= (1u << 24), "hierarchy vertex count implausible");
  t.vertex_count = static_cast<int>(m);
  t.structure_labels.resize(static_cast<std::size_t>(m));
  for (auto& l : t.structure_labels) {
    std::int32_t v = 0;
    read_pod(is, v);
    check(v >= 0 && v <= 4, "bad structure label in hierarchy file");
    l = static_cast<StructureLabel>(v);
  }
  std::uint64_t n = 0;
  read_pod(is, n);
  t.edges.resize(static_cast<std::size_t>(n));
  for (auto& [a, b] : t.edges) {
    std::uint32_t x = 0, y = 0;
    read_pod(is, x);
    read_pod(is, y);
    a = static_cast<int>(x);
    b = static_cast<int>(y);
  }
  read_pod(is, n);
  t.faces.resize(static_cast<std::size_t>(n));
  for (auto& f : t.faces)
    for (int& v : f) {
      std::uint32_t x = 0;
      read_pod(is, x);
      v = static_cast<int>(x);
    }
  read_pod(is, n);
  t.tetras.resize(static_cast<std::size_t>(n));
  for (auto& tet : t.tetras)
    for (int& v : tet) {
      std::uint32_t x = 0;
      read_pod(is, x);
      v = static_cast<int>(x);
    }
  read_pod(is, n);
  t.surfaces.resize(static_cast<std::size_t>(n));
  for (auto& s : t.surfaces) {
    s.name = read_string(is);
    std::int32_t label = 0;
    read_pod(is, label);
    check(label >= 0 && label <= 4, "bad surface label in hierarchy file");
    s.label = static_cast<StructureLabel>(label);
    std::uint64_t fc = 0;
    read_pod(is, fc);
    s.faces.resize(static_cast<std::size_t>(fc));
    for (int& fi : s.faces) {
      std::uint32_t x = 0;
      read_pod(is, x);
      fi = static_cast<int>(x);
    }
  }
  coords = Tensor(Shape{t.vertex_count, 3});
  read_doubles(is, coords.ptr(), coords.size());
  validate_topology(t);
}

}  // namespace detail

inline void save_hierarchy(const std::string& path, const PoolHierarchy& h) {
  std::ofstream os(path, std::ios::binary);
  check(static_cast<bool>(os), "cannot open file for writing: " + path);
  os.write(detail::kHierMagic, 8);
  detail::write_pod(os, detail::kHierVersion);
  detail::write_pod(os, static_cast<std::uint64_t>(h.levels.size()));
  for (const auto& level : h.levels) {
    detail::write_csr(os, level.pool);
    detail::write_csr(os, level.unpool);
    detail::write_topology(os, level.topology, level.coords);
  }
  check(static_cast<bool>(os), "write failed for: " + path);
}

inline PoolHierarchy load_hierarchy(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  check(static_cast<bool>(is), "cannot open file: " + path);
  char magic[8];
  is.read(magic, 8);
  check(static_cast<bool>(is) && std::equal(magic, magic + 8, detail::kHierMagic),
        "not a hierarchy file: " + path);
  std::uint32_t version = 0;
  detail::read_pod(is, version);
  check(version == detail::kHierVersion,
        "unsupported hierarchy version " + std::to_string(version));
  std::uint64_t count = 0;
  detail::read_pod(is, count);
  check(count >= 1 && count <= 8, "hierarchy level count implausible");
  PoolHierarchy h;
  h.levels.resize(static_cast<std::size_t>(count));
  for (auto& level : h.levels) {
    level.pool = detail::read_csr(is);
    level.unpool = detail::read_csr(is);
    detail::read_topology(is, level.topology, level.coords);
  }
  return h;
}

}  // namespace hybridmesh
