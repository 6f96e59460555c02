#pragma once

#include "hybridmesh/rng.hpp"
#include "hybridmesh/tensor.hpp"

namespace hmtest {

inline hybridmesh::Tensor random_tensor(hybridmesh::Shape shape, hybridmesh::Rng& rng,
                                        double scale = 1.0) {
  hybridmesh::Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal() * scale;
  return t;
}

// random values kept away from zero so relu/clamp kinks cannot bias a
// finite-difference probe
inline hybridmesh::Tensor random_tensor_off_kinks(hybridmesh::Shape shape, hybridmesh::Rng& rng,
                                                  double margin = 0.05) {
  hybridmesh::Tensor t = random_tensor(std::move(shape), rng);
  for (std::int64_t i = 0; i < t.size(); ++i)
    if (std::abs(t[i]) < margin) t[i] += t[i] >= 0.0 ? margin : -margin;
  return t;
}

inline hybridmesh::Tensor random_positive_tensor(hybridmesh::Shape shape, hybridmesh::Rng& rng,
                                                 double lo = 0.2, double hi = 3.0) {
  hybridmesh::Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

}  // namespace hmtest
