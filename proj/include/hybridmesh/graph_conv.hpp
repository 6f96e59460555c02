#pragma once

#include "hybridmesh/autodiff.hpp"
#include "hybridmesh/decimation.hpp"
#include "hybridmesh/mesh.hpp"
#include "hybridmesh/rng.hpp"

namespace hybridmesh {

enum class Activation { relu, identity };

struct ChebLayerConfig {
  int in_channels = 0;
  int out_channels = 0;
  int K = 6;
  bool bias = true;
  Activation activation = Activation::relu;
};

// Scaled Laplacian and its spectral-norm estimate for one topology.
struct GraphOperatorCache {
  CsrMatrix laplacian;  // L~ = L - I under the fixed lambda_max = 2 convention
  double spectral_norm = 0.0;
};

// L = I - D^{-1/2} A D^{-1/2}; the shift by -I leaves L~ = -D^{-1/2} A D^{-1/2}
// with zero rows for isolated vertices.
inline GraphOperatorCache scaled_laplacian(const MeshTopology& topo) {
  const int M = topo.vertex_count;
  std::vector<double> degree(static_cast<std::size_t>(M), 0.0);
  for (const auto& [a, b] : topo.edges) {
    check(a != b, "scaled_laplacian forbids self-loops");
    degree[static_cast<std::size_t>(a)] += 1.0;
    degree[static_cast<std::size_t>(b)] += 1.0;
  }
  std::vector<std::tuple<int, int, double>> trip;
  trip.reserve(topo.edges.size() * 2);
  for (const auto& [a, b] : topo.edges) {
    const double w = -1.0 / std::sqrt(degree[static_cast<std::size_t>(a)] *
                                      degree[static_cast<std::size_t>(b)]);
    trip.emplace_back(a, b, w);
    trip.emplace_back(b, a, w);
  }
  GraphOperatorCache cache;
  cache.laplacian = CsrMatrix::from_triplets(M, M, trip);

  // symmetric power iteration with a fixed seed estimates |lambda|_max
  Rng rng(derive_seed(0, "laplacian-power-iteration"));
  std::vector<double> v(static_cast<std::size_t>(M));
  double nrm = 0.0;
  for (auto& x : v) {
    x = rng.normal();
    nrm += x * x;
  }
  nrm = std::sqrt(nrm);
  if (nrm == 0.0) nrm = 1.0;
  for (auto& x : v) x /= nrm;
  std::vector<double> w(static_cast<std::size_t>(M));
  double estimate = 0.0;
  for (int it = 0; it < 128; ++it) {
    cache.laplacian.multiply(v.data(), 1, w.data());
    double wn = 0.0;
    for (double x : w) wn += x * x;
    wn = std::sqrt(wn);
    if (wn < 1e-300) break;  // edgeless graph: norm 0
    estimate = wn;
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = w[i] / wn;
  }
  cache.spectral_norm = estimate;
  check(cache.spectral_norm <= 1.0 + 1e-6,
        "scaled laplacian spectral norm " + std::to_string(cache.spectral_norm) +
            " exceeds the lambda_max = 2 convention bound");
  return cache;
}

struct ChebConvLayer {
  ChebLayerConfig config;
  std::vector<ValuePtr> W;  // K matrices, each in_channels x out_channels
  ValuePtr bias;            // null when config.bias is false
};

// Registers the layer's parameters in params under
// "<prefix>.W{k}" and "<prefix>.bias".
inline ChebConvLayer make_cheb_layer(const std::string& prefix, const ChebLayerConfig& cfg,
                                     Rng& rng, std::map<std::string, ValuePtr>& params) {
  check(cfg.K >= 1 && cfg.in_channels >= 1 && cfg.out_channels >= 1,
        "invalid cheb layer config for " + prefix);
  ChebConvLayer layer;
  layer.config = cfg;
  const double limit = std::sqrt(6.0 / (cfg.in_channels * cfg.K + cfg.out_channels));
  for (int k = 0; k < cfg.K; ++k) {
    Tensor w(Shape{cfg.in_channels, cfg.out_channels});
    for (std::int64_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-limit, limit);
    const std::string name = prefix + ".W" + std::to_string(k);
    layer.W.push_back(variable(std::move(w), name));
    params[name] = layer.W.back();
  }
  if (cfg.bias) {
    const std::string name = prefix + ".bias";
    layer.bias = variable(Tensor(Shape{cfg.out_channels}), name);
    params[name] = layer.bias;
  }
  return layer;
}

// Y = sum_k T_k(L~) X W_k (+ bias), T_0 = I, T_1 = L~,
// T_k = 2 L~ T_{k-1} - T_{k-2}, applied to X without materializing T_k.
inline ValuePtr cheb_conv(const ValuePtr& x, const GraphOperatorCache& cache,
                          const ChebConvLayer& layer) {
  check(x->data.rank() == 2, "cheb_conv input must be rank 2");
  check(x->data.dim(0) == cache.laplacian.rows,
        "cheb_conv row count " + std::to_string(x->data.dim(0)) + " does not match topology " +
            std::to_string(cache.laplacian.rows));
  check(x->data.dim(1) == layer.config.in_channels,
        "cheb_conv channel mismatch: input " + std::to_string(x->data.dim(1)) + ", layer " +
            std::to_string(layer.config.in_channels));
  ValuePtr t_prev2 = x;
  ValuePtr acc = matmul(x, layer.W[0]);
  ValuePtr t_prev;
  if (layer.config.K > 1) {
    t_prev = sparse_matmul(cache.laplacian, x);
    acc = add(acc, matmul(t_prev, layer.W[1]));
  }
  for (int k = 2; k < layer.config.K; ++k) {
    ValuePtr t_cur = sub(scale(sparse_matmul(cache.laplacian, t_prev), 2.0), t_prev2);
    acc = add(acc, matmul(t_cur, layer.W[static_cast<std::size_t>(k)]));
    t_prev2 = t_prev;
    t_prev = t_cur;
  }
  if (layer.bias) acc = add(acc, layer.bias);
  if (layer.config.activation == Activation::relu) acc = relu(acc);
  return acc;
}

inline ValuePtr apply_pool(const ValuePtr& x, const PoolHierarchy& h, int level) {
  check(level >= 1 && level <= static_cast<int>(h.levels.size()),
        "pool level " + std::to_string(level) + " out of range");
  const CsrMatrix& p = h.levels[static_cast<std::size_t>(level - 1)].pool;
  check(x->data.rank() == 2 && x->data.dim(0) == p.cols,
        "apply_pool row count " + std::to_string(x->data.dim(0)) + " does not match level " +
            std::to_string(level));
  return sparse_matmul(p, x);
}

inline ValuePtr apply_unpool(const ValuePtr& x, const PoolHierarchy& h, int level) {
  check(level >= 1 && level <= static_cast<int>(h.levels.size()),
        "unpool level " + std::to_string(level) + " out of range");
  const CsrMatrix& u = h.levels[static_cast<std::size_t>(level - 1)].unpool;
  check(x->data.rank() == 2 && x->data.dim(0) == u.cols,
        "apply_unpool row count " + std::to_string(x->data.dim(0)) + " does not match level " +
            std::to_string(level));
  return sparse_matmul(u, x);
}

}  // namespace hybridmesh
