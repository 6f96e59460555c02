#pragma once

#include <cmath>
#include <map>

#include "hybridmesh/mesh.hpp"

namespace hybridmesh {

struct TriSurface {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;  // outward-oriented (CCW from outside)
};

// Unit icosphere via midpoint subdivision of an icosahedron.
// Vertex counts: 12, 42, 162, 642, ... (10 * 4^n + 2).
inline TriSurface icosphere(int subdivisions) {
  check(subdivisions >= 0 && subdivisions <= 6, "icosphere subdivisions out of range");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  TriSurface s;
  s.vertices = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0},
                {0, -1, t}, {0, 1, t},  {0, -1, -t}, {0, 1, -t},
                {t, 0, -1}, {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : s.vertices) v = normalized(v);
  s.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};

  for (int step = 0; step < subdivisions; ++step) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::make_pair(std::min(a, b), std::max(a, b));
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const int idx = static_cast<int>(s.vertices.size());
      s.vertices.push_back(normalized(s.vertices[static_cast<std::size_t>(a)] +
                                      s.vertices[static_cast<std::size_t>(b)]));
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(s.faces.size() * 4);
    for (const auto& f : s.faces) {
      const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    s.faces = std::move(next);
  }
  return s;
}

}  // namespace hybridmesh
