#pragma once

#include <queue>
#include <set>

#include "hybridmesh/mesh.hpp"

namespace hybridmesh {

// Four-level pooling hierarchy. levels[i] holds the transition from level i
// (fine) to level i+1 (coarse): pool is M_{i+1} x M_i, unpool is M_i x M_{i+1},
// topology/coords describe the coarse side.
struct HierarchyLevel {
  CsrMatrix pool;
  CsrMatrix unpool;
  MeshTopology topology;
  Tensor coords;  // coarse vertex positions, mm
};

struct PoolHierarchy {
  std::vector<HierarchyLevel> levels;
};

namespace detail {

using Quadric = std::array<double, 16>;

inline void quadric_add(Quadric& q, const Quadric& r) {
  for (int i = 0; i < 16; ++i) q[static_cast<std::size_t>(i)] += r[static_cast<std::size_t>(i)];
}

inline Quadric face_quadric(const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 n_raw = cross(b - a, c - a);
  const double area2 = norm(n_raw);
  Quadric q{};
  if (area2 < 1e-300) return q;
  const Vec3 n = n_raw * (1.0 / area2);
  const double d = -dot(n, a);
  const double p[4] = {n.x, n.y, n.z, d};
  const double w = 0.5 * area2;  // area-weighted plane quadric
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) q[static_cast<std::size_t>(i * 4 + j)] = w * p[i] * p[j];
  return q;
}

inline double quadric_cost(const Quadric& q, const Vec3& v) {
  const double h[4] = {v.x, v.y, v.z, 1.0};
  double c = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) c += h[i] * q[static_cast<std::size_t>(i * 4 + j)] * h[j];
  return c;
}

}  // namespace detail

struct SurfaceDecimation {
  std::vector<int> kept;         // surviving old vertex ids, ascending
  std::vector<int> merged_into;  // per old vertex: the kept old id it collapsed into
  std::vector<std::array<int, 3>> faces;  // coarse faces in old vertex ids
  std::vector<int> face_surface;          // sub-surface id per coarse face (-1 if none)
};

// Quadric-error vertex-pair contraction keeping endpoint positions
// (vertex-keep variant). Deterministic: heap ties break on the smallest
// vertex index pair, the kept endpoint ties to the smaller index.
inline SurfaceDecimation decimate_surface(const std::vector<std::array<int, 3>>& in_faces,
                                          const std::vector<int>& in_face_surface,
                                          const VertexField& coords, int target_count) {
  const int M = coords.count();
  check(target_count >= 1 && target_count <= M, "decimation target out of range");
  check(in_face_surface.empty() || in_face_surface.size() == in_faces.size(),
        "face_surface size mismatch");

  std::vector<detail::Quadric> quadric(static_cast<std::size_t>(M), detail::Quadric{});
  std::vector<std::set<int>> nbr(static_cast<std::size_t>(M));
  std::vector<std::vector<int>> incident(static_cast<std::size_t>(M));
  std::vector<std::array<int, 3>> faces = in_faces;
  std::vector<char> face_alive(faces.size(), 1);
  std::vector<char> alive(static_cast<std::size_t>(M), 1);
  std::vector<int> version(static_cast<std::size_t>(M), 0);
  std::vector<int> merged_into(static_cast<std::size_t>(M));
  for (int v = 0; v < M; ++v) merged_into[static_cast<std::size_t>(v)] = v;

  // vertices outside every face (volumetric interiors) are ignored entirely:
  // not counted, never kept, merged_into stays the identity
  int alive_count = 0;
  {
    std::vector<char> used(static_cast<std::size_t>(M), 0);
    for (std::size_t fi = 0; fi < faces.size(); ++fi) {
      const auto& f = faces[fi];
      check(f[0] != f[1] && f[1] != f[2] && f[0] != f[2], "degenerate input face");
      const detail::Quadric fq =
          detail::face_quadric(coords.at(f[0]), coords.at(f[1]), coords.at(f[2]));
      for (int k = 0; k < 3; ++k) {
        const int v = f[static_cast<std::size_t>(k)];
        check(v >= 0 && v < M, "face index out of range");
        used[static_cast<std::size_t>(v)] = 1;
        detail::quadric_add(quadric[static_cast<std::size_t>(v)], fq);
        incident[static_cast<std::size_t>(v)].push_back(static_cast<int>(fi));
        const int w = f[static_cast<std::size_t>((k + 1) % 3)];
        nbr[static_cast<std::size_t>(v)].insert(w);
        nbr[static_cast<std::size_t>(w)].insert(v);
      }
    }
    for (int v = 0; v < M; ++v) {
      if (used[static_cast<std::size_t>(v)]) ++alive_count;
      else alive[static_cast<std::size_t>(v)] = 0;
    }
    check(target_count <= alive_count, "decimation target exceeds surface vertex count");
  }

  struct Entry {
    double cost;
    int a, b, va, vb;
    bool operator>(const Entry& o) const {
      if (cost != o.cost) return cost > o.cost;
      if (a != o.a) return a > o.a;
      return b > o.b;
    }
  };
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap;

  auto push_edge = [&](int a, int b) {
    if (a > b) std::swap(a, b);
    detail::Quadric q = quadric[static_cast<std::size_t>(a)];
    detail::quadric_add(q, quadric[static_cast<std::size_t>(b)]);
    const double cost = std::min(detail::quadric_cost(q, coords.at(a)),
                                 detail::quadric_cost(q, coords.at(b)));
    heap.push({cost, a, b, version[static_cast<std::size_t>(a)],
               version[static_cast<std::size_t>(b)]});
  };
  for (int a = 0; a < M; ++a)
    for (int b : nbr[static_cast<std::size_t>(a)])
      if (a < b) push_edge(a, b);

  while (alive_count > target_count) {
    check(!heap.empty(), "decimation stalled at " + std::to_string(alive_count) +
                             " vertices before reaching target " +
                             std::to_string(target_count));
    const Entry e = heap.top();
    heap.pop();
    const auto ua = static_cast<std::size_t>(e.a), ub = static_cast<std::size_t>(e.b);
    if (!alive[ua] || !alive[ub]) continue;
    if (version[ua] != e.va || version[ub] != e.vb) continue;
    if (nbr[ua].find(e.b) == nbr[ua].end()) continue;
    {  // link condition: exactly two common neighbours keeps the surface manifold
      int common = 0;
      const auto& small = nbr[ua].size() <= nbr[ub].size() ? nbr[ua] : nbr[ub];
      const auto& large = nbr[ua].size() <= nbr[ub].size() ? nbr[ub] : nbr[ua];
      for (int n : small) common += large.count(n) ? 1 : 0;
      if (common != 2) continue;
    }

    detail::Quadric q = quadric[ua];
    detail::quadric_add(q, quadric[ub]);
    const double cost_a = detail::quadric_cost(q, coords.at(e.a));
    const double cost_b = detail::quadric_cost(q, coords.at(e.b));
    const int keep = cost_a <= cost_b ? e.a : e.b;
    const int rem = keep == e.a ? e.b : e.a;
    const auto uk = static_cast<std::size_t>(keep), ur = static_cast<std::size_t>(rem);

    quadric[uk] = q;
    alive[ur] = 0;
    merged_into[ur] = keep;
    --alive_count;

    for (int fi : incident[ur]) {
      if (!face_alive[static_cast<std::size_t>(fi)]) continue;
      auto& f = faces[static_cast<std::size_t>(fi)];
      for (int& v : f)
        if (v == rem) v = keep;
      if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) {
        face_alive[static_cast<std::size_t>(fi)] = 0;
      } else {
        incident[uk].push_back(fi);
      }
    }
    incident[ur].clear();

    nbr[uk].erase(rem);
    for (int n : nbr[ur]) {
      if (n == keep) continue;
      const auto un = static_cast<std::size_t>(n);
      nbr[un].erase(rem);
      nbr[un].insert(keep);
      nbr[uk].insert(n);
    }
    nbr[ur].clear();

    version[uk] += 1;
    // refresh candidates whose cost or link eligibility may have changed
    for (int n : nbr[uk]) push_edge(keep, n);
    for (int n : nbr[uk])
      for (int m : nbr[uk])
        if (n < m && nbr[static_cast<std::size_t>(n)].count(m)) push_edge(n, m);
  }

  SurfaceDecimation out;
  for (int v = 0; v < M; ++v)
    if (alive[static_cast<std::size_t>(v)]) out.kept.push_back(v);
  out.merged_into.resize(static_cast<std::size_t>(M));
  for (int v = 0; v < M; ++v) {
    int r = v;
    while (merged_into[static_cast<std::size_t>(r)] != r)
      r = merged_into[static_cast<std::size_t>(r)];
    out.merged_into[static_cast<std::size_t>(v)] = r;
  }
  for (std::size_t fi = 0; fi < faces.size(); ++fi) {
    if (!face_alive[fi]) continue;
    out.faces.push_back(faces[fi]);
    out.face_surface.push_back(in_face_surface.empty() ? -1
                                                       : in_face_surface[fi]);
  }
  return out;
}

namespace detail {

// Greedy farthest-point selection: repeatedly keep the candidate farthest
// from everything kept so far. Ties break to the smallest index.
inline std::vector<int> farthest_point_selection(const VertexField& coords,
                                                 const std::vector<int>& seeds,
                                                 const std::vector<int>& candidates,
                                                 int count) {
  check(count <= static_cast<int>(candidates.size()), "farthest-point count too large");
  std::vector<double> min_d(candidates.size(), 1e300);
  for (std::size_t i = 0; i < candidates.size(); ++i)
    for (int s : seeds)
      min_d[i] = std::min(min_d[i], norm2(coords.at(candidates[i]) - coords.at(s)));
  std::vector<char> taken(candidates.size(), 0);
  std::vector<int> out;
  for (int pick = 0; pick < count; ++pick) {
    int best = -1;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (taken[i]) continue;
      if (best < 0 || min_d[i] > min_d[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    }
    taken[static_cast<std::size_t>(best)] = 1;
    out.push_back(candidates[static_cast<std::size_t>(best)]);
    for (std::size_t i = 0; i < candidates.size(); ++i)
      if (!taken[i])
        min_d[i] = std::min(min_d[i], norm2(coords.at(candidates[i]) -
                                            coords.at(candidates[static_cast<std::size_t>(best)])));
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Barycentric row for a removed surface vertex: closest point on the nearest
// coarse triangle, restricted to the vertex's own sub-surface when known.
inline void nearest_triangle_row(const Vec3& p, const MeshTopology& coarse, const Tensor& ccoords,
                                 int sub_surface, std::vector<std::tuple<int, int, double>>& trip,
                                 int row) {
  const std::vector<int>* face_ids = nullptr;
  std::vector<int> all;
  if (sub_surface >= 0 && sub_surface < static_cast<int>(coarse.surfaces.size()) &&
      !coarse.surfaces[static_cast<std::size_t>(sub_surface)].faces.empty()) {
    face_ids = &coarse.surfaces[static_cast<std::size_t>(sub_surface)].faces;
  } else {
    all.resize(coarse.faces.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    face_ids = &all;
  }
  check(!face_ids->empty(), "no coarse faces available for barycentric unpooling");
  auto vertex = [&](int v) {
    return Vec3{ccoords[static_cast<std::int64_t>(v) * 3 + 0],
                ccoords[static_cast<std::int64_t>(v) * 3 + 1],
                ccoords[static_cast<std::int64_t>(v) * 3 + 2]};
  };
  double best_d = 1e300;
  int best_f = -1;
  std::array<double, 3> best_bc{};
  for (int fi : *face_ids) {
    const auto& f = coarse.faces[static_cast<std::size_t>(fi)];
    const Vec3 a = vertex(f[0]), b = vertex(f[1]), c = vertex(f[2]);
    const auto bc = closest_point_triangle(p, a, b, c);
    const Vec3 q = a * bc[0] + b * bc[1] + c * bc[2];
    const double d = norm2(p - q);
    if (d < best_d - 1e-15 || (std::abs(d - best_d) <= 1e-15 && fi < best_f)) {
      best_d = d;
      best_f = fi;
      best_bc = bc;
    }
  }
  const auto& f = coarse.faces[static_cast<std::size_t>(best_f)];
  for (int k = 0; k < 3; ++k)
    if (best_bc[static_cast<std::size_t>(k)] != 0.0)
      trip.emplace_back(row, f[static_cast<std::size_t>(k)],
                        best_bc[static_cast<std::size_t>(k)]);
}

// Barycentric row for a removed interior vertex: the enclosing coarse tetra,
// or failing that the one whose smallest barycentric coordinate is largest.
inline void enclosing_tetra_row(const Vec3& p, const MeshTopology& coarse, const Tensor& ccoords,
                                std::vector<std::tuple<int, int, double>>& trip, int row) {
  check(!coarse.tetras.empty(), "no coarse tetras available for interior unpooling");
  auto vertex = [&](int v) {
    return Vec3{ccoords[static_cast<std::int64_t>(v) * 3 + 0],
                ccoords[static_cast<std::int64_t>(v) * 3 + 1],
                ccoords[static_cast<std::int64_t>(v) * 3 + 2]};
  };
  double best_min = -1e300;
  std::array<double, 4> best_bc{};
  int best_t = -1;
  for (std::size_t ti = 0; ti < coarse.tetras.size(); ++ti) {
    const auto& t = coarse.tetras[ti];
    const auto bc = tetra_barycentric(p, vertex(t[0]), vertex(t[1]), vertex(t[2]), vertex(t[3]));
    const double mn = std::min(std::min(bc[0], bc[1]), std::min(bc[2], bc[3]));
    if (mn > best_min) {
      best_min = mn;
      best_bc = bc;
      best_t = static_cast<int>(ti);
    }
  }
  check(best_t >= 0, "interior unpooling found no usable tetra");
  const auto& t = coarse.tetras[static_cast<std::size_t>(best_t)];
  for (int k = 0; k < 4; ++k)
    if (best_bc[static_cast<std::size_t>(k)] != 0.0)
      trip.emplace_back(row, t[static_cast<std::size_t>(k)],
                        best_bc[static_cast<std::size_t>(k)]);
}

}  // namespace detail

// One hierarchy step: decimate to about half the vertices, derive pool /
// unpool matrices and the coarse topology.
inline HierarchyLevel build_hierarchy_level(const MeshTopology& topo, const VertexField& coords) {
  const int M = topo.vertex_count;
  const int target_total = (M + 1) / 2;

  const std::vector<int> surf_ids = surface_vertices(topo);
  std::vector<char> is_surface(static_cast<std::size_t>(M), 0);
  for (int v : surf_ids) is_surface[static_cast<std::size_t>(v)] = 1;
  std::vector<int> interior_ids;
  for (int v = 0; v < M; ++v)
    if (!is_surface[static_cast<std::size_t>(v)]) interior_ids.push_back(v);
  check(static_cast<int>(surf_ids.size()) == M || topo.volumetric(),
        "surface mesh has vertices outside all faces");

  // per-vertex sub-surface id from the fine face lists
  std::vector<int> vertex_surface(static_cast<std::size_t>(M), -1);
  for (std::size_t si = 0; si < topo.surfaces.size(); ++si)
    for (int fi : topo.surfaces[si].faces)
      for (int v : topo.faces[static_cast<std::size_t>(fi)])
        vertex_surface[static_cast<std::size_t>(v)] = static_cast<int>(si);
  std::vector<int> face_surface(topo.faces.size(), -1);
  for (std::size_t si = 0; si < topo.surfaces.size(); ++si)
    for (int fi : topo.surfaces[si].faces)
      face_surface[static_cast<std::size_t>(fi)] = static_cast<int>(si);

  // surface part: quadric decimation to its own factor two
  const int surface_target =
      topo.volumetric() ? (static_cast<int>(surf_ids.size()) + 1) / 2
                        : target_total;
  const SurfaceDecimation dec =
      decimate_surface(topo.faces, face_surface, coords, surface_target);

  // interior part: greedy farthest-point keeps the count on the factor-two rule
  int interior_target = target_total - static_cast<int>(dec.kept.size());
  interior_target = std::max(0, std::min(interior_target, static_cast<int>(interior_ids.size())));
  const std::vector<int> interior_kept =
      interior_ids.empty() || interior_target == 0
          ? std::vector<int>{}
          : detail::farthest_point_selection(coords, dec.kept, interior_ids, interior_target);

  std::vector<int> kept = dec.kept;
  kept.insert(kept.end(), interior_kept.begin(), interior_kept.end());
  std::sort(kept.begin(), kept.end());
  const int Mc = static_cast<int>(kept.size());
  check(Mc == M / 2 || Mc == (M + 1) / 2,
        "hierarchy level count " + std::to_string(Mc) + " violates the factor-two rule from " +
            std::to_string(M));

  std::vector<int> old_to_new(static_cast<std::size_t>(M), -1);
  for (int r = 0; r < Mc; ++r) old_to_new[static_cast<std::size_t>(kept[static_cast<std::size_t>(r)])] = r;

  // every old vertex resolves to a kept old id: collapse chains for surface
  // vertices, nearest kept vertex for removed interior ones
  std::vector<char> kept_flag(static_cast<std::size_t>(M), 0);
  for (int v : kept) kept_flag[static_cast<std::size_t>(v)] = 1;
  std::vector<int> resolve(static_cast<std::size_t>(M), -1);
  for (int v = 0; v < M; ++v) {
    if (kept_flag[static_cast<std::size_t>(v)]) {
      resolve[static_cast<std::size_t>(v)] = v;
    } else if (is_surface[static_cast<std::size_t>(v)]) {
      resolve[static_cast<std::size_t>(v)] = dec.merged_into[static_cast<std::size_t>(v)];
    } else {
      double best = 1e300;
      int best_k = -1;
      for (int k : kept) {
        const double d = norm2(coords.at(v) - coords.at(k));
        if (d < best) {
          best = d;
          best_k = k;
        }
      }
      resolve[static_cast<std::size_t>(v)] = best_k;
    }
  }

  HierarchyLevel level;
  MeshTopology& coarse = level.topology;
  coarse.vertex_count = Mc;
  coarse.structure_labels.resize(static_cast<std::size_t>(Mc));
  for (int r = 0; r < Mc; ++r)
    coarse.structure_labels[static_cast<std::size_t>(r)] =
        topo.structure_labels[static_cast<std::size_t>(kept[static_cast<std::size_t>(r)])];

  coarse.surfaces.resize(topo.surfaces.size());
  for (std::size_t si = 0; si < topo.surfaces.size(); ++si) {
    coarse.surfaces[si].name = topo.surfaces[si].name;
    coarse.surfaces[si].label = topo.surfaces[si].label;
  }
  for (std::size_t fi = 0; fi < dec.faces.size(); ++fi) {
    std::array<int, 3> f;
    for (int k = 0; k < 3; ++k)
      f[static_cast<std::size_t>(k)] =
          old_to_new[static_cast<std::size_t>(dec.faces[fi][static_cast<std::size_t>(k)])];
    coarse.faces.push_back(f);
    const int si = dec.face_surface[fi];
    if (si >= 0)
      coarse.surfaces[static_cast<std::size_t>(si)].faces.push_back(
          static_cast<int>(coarse.faces.size()) - 1);
  }

  if (topo.volumetric()) {
    std::set<std::array<int, 4>> seen;
    for (const auto& t : topo.tetras) {
      std::array<int, 4> m;
      for (int k = 0; k < 4; ++k)
        m[static_cast<std::size_t>(k)] =
            old_to_new[static_cast<std::size_t>(resolve[static_cast<std::size_t>(
                t[static_cast<std::size_t>(k)])])];
      bool degenerate = false;
      for (int i = 0; i < 4 && !degenerate; ++i)
        for (int j = i + 1; j < 4; ++j)
          if (m[static_cast<std::size_t>(i)] == m[static_cast<std::size_t>(j)]) {
            degenerate = true;
            break;
          }
      if (degenerate) continue;
      std::array<int, 4> key = m;
      std::sort(key.begin(), key.end());
      if (seen.insert(key).second) coarse.tetras.push_back(m);
    }
  }
  coarse.edges = edges_from_cells(coarse.faces, coarse.tetras);

  level.coords = Tensor(Shape{Mc, 3});
  for (int r = 0; r < Mc; ++r) {
    const Vec3 p = coords.at(kept[static_cast<std::size_t>(r)]);
    level.coords[r * 3 + 0] = p.x;
    level.coords[r * 3 + 1] = p.y;
    level.coords[r * 3 + 2] = p.z;
  }

  std::vector<std::tuple<int, int, double>> ptrip;
  for (int r = 0; r < Mc; ++r) ptrip.emplace_back(r, kept[static_cast<std::size_t>(r)], 1.0);
  level.pool = CsrMatrix::from_triplets(Mc, M, ptrip);

  std::vector<std::tuple<int, int, double>> utrip;
  for (int v = 0; v < M; ++v) {
    if (kept_flag[static_cast<std::size_t>(v)]) {
      utrip.emplace_back(v, old_to_new[static_cast<std::size_t>(v)], 1.0);
    } else if (is_surface[static_cast<std::size_t>(v)]) {
      detail::nearest_triangle_row(coords.at(v), coarse, level.coords,
                                   vertex_surface[static_cast<std::size_t>(v)], utrip, v);
    } else {
      detail::enclosing_tetra_row(coords.at(v), coarse, level.coords, utrip, v);
    }
  }
  level.unpool = CsrMatrix::from_triplets(M, Mc, utrip);
  return level;
}

inline PoolHierarchy build_hierarchy(const MeshTopology& topo, const VertexField& coords,
                                     int levels = 4) {
  check(levels >= 1 && levels <= 8, "hierarchy level count out of range");
  check(coords.count() == topo.vertex_count, "coords/topology vertex count mismatch");
  PoolHierarchy h;
  MeshTopology cur = topo;
  VertexField cur_coords = coords;
  for (int i = 0; i < levels; ++i) {
    h.levels.push_back(build_hierarchy_level(cur, cur_coords));
    cur = h.levels.back().topology;
    cur_coords = VertexField(h.levels.back().coords, coords.space);
  }
  return h;
}

// P_level ... P_1 applied to a full-resolution field.
inline VertexField downsample_ground_truth(const PoolHierarchy& h, const VertexField& gt,
                                           int level) {
  check(level >= 1 && level <= static_cast<int>(h.levels.size()),
        "hierarchy level " + std::to_string(level) + " out of range");
  check(gt.count() == h.levels[0].pool.cols, "ground-truth vertex count mismatch");
  Tensor cur = gt.coords;
  for (int i = 0; i < level; ++i) cur = h.levels[static_cast<std::size_t>(i)].pool.multiply(cur);
  return VertexField(std::move(cur), gt.space);
}

}  // namespace hybridmesh
