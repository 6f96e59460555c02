#include <catch2/catch_amalgamated.hpp>

#include "hybridmesh/graph_conv.hpp"
#include "hybridmesh/icosphere.hpp"
#include "test_util.hpp"

using namespace hybridmesh;
using hmtest::random_tensor;

namespace {

MeshTopology graph_from_edges(int n, std::vector<std::pair<int, int>> edges) {
  MeshTopology t;
  t.vertex_count = n;
  for (auto& [a, b] : edges)
    if (a > b) std::swap(a, b);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  t.edges = std::move(edges);
  t.structure_labels.assign(static_cast<std::size_t>(n), StructureLabel::LV);
  return t;
}

MeshTopology random_graph(int n, Rng& rng, double p = 0.5) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.uniform() < p) edges.emplace_back(i, j);
  return graph_from_edges(n, std::move(edges));
}

// Cyclic Jacobi eigensolver for small dense symmetric matrices: the
// spectral oracle the sparse Chebyshev path is checked against.
void jacobi_eigen(std::vector<double> a, int n, std::vector<double>& eigenvalues,
                  std::vector<double>& eigenvectors) {
  eigenvectors.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) eigenvectors[static_cast<std::size_t>(i) * n + i] = 1.0;
  for (int sweep = 0; sweep < 200; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off += a[static_cast<std::size_t>(i) * n + j] *
                                              a[static_cast<std::size_t>(i) * n + j];
    if (off < 1e-26) break;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        const double apq = a[static_cast<std::size_t>(p) * n + q];
        if (std::abs(apq) < 1e-300) continue;
        const double app = a[static_cast<std::size_t>(p) * n + p];
        const double aqq = a[static_cast<std::size_t>(q) * n + q];
        const double theta = 0.5 * (aqq - app) / apq;
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a[static_cast<std::size_t>(k) * n + p];
          const double akq = a[static_cast<std::size_t>(k) * n + q];
          a[static_cast<std::size_t>(k) * n + p] = c * akp - s * akq;
          a[static_cast<std::size_t>(k) * n + q] = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a[static_cast<std::size_t>(p) * n + k];
          const double aqk = a[static_cast<std::size_t>(q) * n + k];
          a[static_cast<std::size_t>(p) * n + k] = c * apk - s * aqk;
          a[static_cast<std::size_t>(q) * n + k] = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = eigenvectors[static_cast<std::size_t>(k) * n + p];
          const double vkq = eigenvectors[static_cast<std::size_t>(k) * n + q];
          eigenvectors[static_cast<std::size_t>(k) * n + p] = c * vkp - s * vkq;
          eigenvectors[static_cast<std::size_t>(k) * n + q] = s * vkp + c * vkq;
        }
      }
  }
  eigenvalues.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) eigenvalues[static_cast<std::size_t>(i)] =
      a[static_cast<std::size_t>(i) * n + i];
}

double cheb_poly(int k, double x) {
  double t0 = 1.0, t1 = x;
  if (k == 0) return t0;
  if (k == 1) return t1;
  for (int i = 2; i <= k; ++i) {
    const double t = 2.0 * x * t1 - t0;
    t0 = t1;
    t1 = t;
  }
  return t1;
}

// dense oracle: Y = sum_k U diag(T_k(lambda)) U^T X W_k
Tensor dense_cheb_reference(const MeshTopology& topo, const Tensor& x,
                            const std::vector<Tensor>& weights) {
  const int n = topo.vertex_count;
  const GraphOperatorCache cache = scaled_laplacian(topo);
  const Tensor dense = cache.laplacian.to_dense();
  std::vector<double> a(dense.data.begin(), dense.data.end());
  std::vector<double> lam, u;
  jacobi_eigen(a, n, lam, u);

  const int cin = x.dim(1), cout = weights[0].dim(1);
  Tensor y(Shape{n, cout});
  for (std::size_t k = 0; k < weights.size(); ++k) {
    // F = U diag(T_k(lam)) U^T
    Tensor f(Shape{n, n});
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int e = 0; e < n; ++e)
          s += u[static_cast<std::size_t>(i) * n + e] *
               cheb_poly(static_cast<int>(k), lam[static_cast<std::size_t>(e)]) *
               u[static_cast<std::size_t>(j) * n + e];
        f[static_cast<std::int64_t>(i) * n + j] = s;
      }
    Tensor fx = mat_mul(f, x);
    Tensor fxw = mat_mul(fx, weights[k]);
    for (std::int64_t i = 0; i < y.size(); ++i) y[i] += fxw[i];
  }
  (void)cin;
  return y;
}

ChebConvLayer layer_from_weights(const std::vector<Tensor>& weights, Activation act,
                                 std::map<std::string, ValuePtr>& params) {
  ChebConvLayer layer;
  layer.config.in_channels = weights[0].dim(0);
  layer.config.out_channels = weights[0].dim(1);
  layer.config.K = static_cast<int>(weights.size());
  layer.config.bias = false;
  layer.config.activation = act;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    const std::string name = "t.W" + std::to_string(k);
    layer.W.push_back(variable(weights[k], name));
    params[name] = layer.W.back();
  }
  return layer;
}

}  // namespace

TEST_CASE("scaled laplacian hand values", "[graph_conv]") {
  // 2-node path: D = I, A = [[0,1],[1,0]] -> L~ = [[0,-1],[-1,0]]
  const MeshTopology path = graph_from_edges(2, {{0, 1}});
  const GraphOperatorCache cache = scaled_laplacian(path);
  const Tensor d = cache.laplacian.to_dense();
  REQUIRE(d[0] == 0.0);
  REQUIRE(d[1] == -1.0);
  REQUIRE(d[2] == -1.0);
  REQUIRE(d[3] == 0.0);
  REQUIRE_THAT(cache.spectral_norm, Catch::Matchers::WithinAbs(1.0, 1e-6));

  // edgeless graph: zero matrix
  const GraphOperatorCache empty = scaled_laplacian(graph_from_edges(4, {}));
  REQUIRE(empty.laplacian.nnz() == 0);
  REQUIRE(empty.spectral_norm == 0.0);
}

TEST_CASE("scaled laplacian is symmetric with bounded spectrum", "[graph_conv]") {
  Rng rng(81);
  for (int trial = 0; trial < 5; ++trial) {
    const MeshTopology g = random_graph(8, rng);
    const GraphOperatorCache cache = scaled_laplacian(g);
    const Tensor d = cache.laplacian.to_dense();
    for (int i = 0; i < 8; ++i) {
      REQUIRE(d[static_cast<std::int64_t>(i) * 8 + i] == 0.0);
      for (int j = 0; j < 8; ++j)
        REQUIRE(d[static_cast<std::int64_t>(i) * 8 + j] ==
                d[static_cast<std::int64_t>(j) * 8 + i]);
    }
    REQUIRE(cache.spectral_norm <= 1.0 + 1e-6);
  }
  const TriSurface s = icosphere(2);
  MeshTopology t;
  t.vertex_count = static_cast<int>(s.vertices.size());
  t.faces = s.faces;
  t.edges = edges_from_cells(s.faces, {});
  t.structure_labels.assign(s.vertices.size(), StructureLabel::LV);
  REQUIRE(scaled_laplacian(t).spectral_norm <= 1.0 + 1e-6);
}

TEST_CASE("cheb identity case", "[graph_conv]") {
  Rng rng(82);
  const MeshTopology g = random_graph(6, rng);
  const GraphOperatorCache cache = scaled_laplacian(g);
  Tensor w0(Shape{3, 3});
  for (int i = 0; i < 3; ++i) w0[static_cast<std::int64_t>(i) * 3 + i] = 1.0;
  std::map<std::string, ValuePtr> params;
  const ChebConvLayer layer = layer_from_weights({w0}, Activation::identity, params);
  Tensor x = random_tensor(Shape{6, 3}, rng);
  const ValuePtr y = cheb_conv(constant(x), cache, layer);
  for (std::int64_t i = 0; i < x.size(); ++i) REQUIRE(y->data[i] == x[i]);
}

TEST_CASE("cheb matches the dense spectral oracle", "[graph_conv]") {
  Rng rng(83);
  for (int trial = 0; trial < 6; ++trial) {
    const int n = 4 + rng.uniform_int(7);
    // include the edgeless graph as one deterministic case
    const MeshTopology g = trial == 0 ? graph_from_edges(n, {}) : random_graph(n, rng);
    std::vector<Tensor> weights;
    const int K = 1 + rng.uniform_int(6);
    for (int k = 0; k < K; ++k) weights.push_back(random_tensor(Shape{3, 2}, rng));
    Tensor x = random_tensor(Shape{n, 3}, rng);

    std::map<std::string, ValuePtr> params;
    const ChebConvLayer layer = layer_from_weights(weights, Activation::identity, params);
    const ValuePtr y = cheb_conv(constant(x), scaled_laplacian(g), layer);
    const Tensor ref = dense_cheb_reference(g, x, weights);
    for (std::int64_t i = 0; i < ref.size(); ++i)
      REQUIRE_THAT(y->data[i], Catch::Matchers::WithinAbs(ref[i], 1e-8));
  }
}

TEST_CASE("cheb is linear in X", "[graph_conv]") {
  Rng rng(84);
  const MeshTopology g = random_graph(7, rng);
  const GraphOperatorCache cache = scaled_laplacian(g);
  std::vector<Tensor> weights;
  for (int k = 0; k < 4; ++k) weights.push_back(random_tensor(Shape{2, 3}, rng));
  std::map<std::string, ValuePtr> params;
  const ChebConvLayer layer = layer_from_weights(weights, Activation::identity, params);

  Tensor x1 = random_tensor(Shape{7, 2}, rng), x2 = random_tensor(Shape{7, 2}, rng);
  const double a = 1.7, b = -0.6;
  Tensor mix(Shape{7, 2});
  for (std::int64_t i = 0; i < mix.size(); ++i) mix[i] = a * x1[i] + b * x2[i];
  const ValuePtr y1 = cheb_conv(constant(x1), cache, layer);
  const ValuePtr y2 = cheb_conv(constant(x2), cache, layer);
  const ValuePtr ym = cheb_conv(constant(mix), cache, layer);
  for (std::int64_t i = 0; i < ym->data.size(); ++i)
    REQUIRE_THAT(ym->data[i], Catch::Matchers::WithinAbs(a * y1->data[i] + b * y2->data[i],
                                                         1e-10));
}

TEST_CASE("cheb is permutation equivariant", "[graph_conv]") {
  Rng rng(85);
  const int n = 8;
  const MeshTopology g = random_graph(n, rng);
  std::vector<Tensor> weights;
  for (int k = 0; k < 3; ++k) weights.push_back(random_tensor(Shape{2, 2}, rng));
  Tensor x = random_tensor(Shape{n, 2}, rng);

  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  for (int i = n - 1; i > 0; --i)
    std::swap(perm[static_cast<std::size_t>(i)],
              perm[static_cast<std::size_t>(rng.uniform_int(i + 1))]);

  std::vector<std::pair<int, int>> pedges;
  for (const auto& [a, b] : g.edges)
    pedges.emplace_back(perm[static_cast<std::size_t>(a)], perm[static_cast<std::size_t>(b)]);
  const MeshTopology gp = graph_from_edges(n, std::move(pedges));
  Tensor xp(Shape{n, 2});
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 2; ++c)
      xp[static_cast<std::int64_t>(perm[static_cast<std::size_t>(i)]) * 2 + c] =
          x[static_cast<std::int64_t>(i) * 2 + c];

  std::map<std::string, ValuePtr> params;
  const ChebConvLayer layer = layer_from_weights(weights, Activation::identity, params);
  const ValuePtr y = cheb_conv(constant(x), scaled_laplacian(g), layer);
  const ValuePtr yp = cheb_conv(constant(xp), scaled_laplacian(gp), layer);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 2; ++c)
      REQUIRE_THAT(yp->data[static_cast<std::int64_t>(perm[static_cast<std::size_t>(i)]) * 2 + c],
                   Catch::Matchers::WithinAbs(y->data[static_cast<std::int64_t>(i) * 2 + c],
                                              1e-12));
}

TEST_CASE("cheb gradients for X and weights", "[graph_conv]") {
  Rng rng(86);
  for (int trial = 0; trial < 3; ++trial) {
    const MeshTopology g = random_graph(6, rng);
    const GraphOperatorCache cache = scaled_laplacian(g);
    std::vector<Tensor> weights;
    for (int k = 0; k < 3; ++k) weights.push_back(random_tensor(Shape{2, 2}, rng));
    Tensor x = random_tensor(Shape{6, 2}, rng);
    Tensor wsum = random_tensor(Shape{6, 2}, rng);
    const auto cw = constant(wsum);

    std::map<std::string, ValuePtr> params;
    ChebConvLayer layer = layer_from_weights(weights, Activation::relu, params);
    REQUIRE(grad_check(
                [&](const ValuePtr& v) { return sum(mul(cheb_conv(v, cache, layer), cw)); },
                x) < 1e-4);

    // gradient w.r.t. one of the K weight matrices
    const auto cx = constant(x);
    auto fw = [&](const ValuePtr& v) {
      ChebConvLayer l2 = layer;
      l2.W[1] = v;
      return sum(mul(cheb_conv(cx, cache, l2), cw));
    };
    REQUIRE(grad_check(fw, weights[1]) < 1e-4);
  }
}

TEST_CASE("cheb layer parameter registration", "[graph_conv]") {
  Rng rng(87);
  std::map<std::string, ValuePtr> params;
  ChebLayerConfig cfg;
  cfg.in_channels = 4;
  cfg.out_channels = 5;
  cfg.K = 6;
  cfg.bias = true;
  const ChebConvLayer layer = make_cheb_layer("decoder.cheb2", cfg, rng, params);
  REQUIRE(params.size() == 7);
  REQUIRE(params.count("decoder.cheb2.W0") == 1);
  REQUIRE(params.count("decoder.cheb2.W5") == 1);
  REQUIRE(params.count("decoder.cheb2.bias") == 1);
  REQUIRE(layer.W[3]->data.shape == Shape{4, 5});
  REQUIRE(layer.bias->data.shape == Shape{5});
}

TEST_CASE("pool and unpool application", "[graph_conv]") {
  const TriSurface s = icosphere(2);
  MeshTopology topo;
  topo.vertex_count = static_cast<int>(s.vertices.size());
  topo.faces = s.faces;
  topo.edges = edges_from_cells(s.faces, {});
  topo.structure_labels.assign(s.vertices.size(), StructureLabel::LV);
  Tensor c(Shape{topo.vertex_count, 3});
  for (std::int64_t i = 0; i < c.size(); ++i)
    c[i] = s.vertices[static_cast<std::size_t>(i / 3)][static_cast<int>(i % 3)] * 20.0;
  const PoolHierarchy h = build_hierarchy(topo, VertexField(c, CoordSpace::millimetre), 4);

  // constant preservation through unpool
  const ValuePtr coarse = constant(Tensor::full(Shape{h.levels[0].pool.rows, 2}, 1.25));
  const ValuePtr up = apply_unpool(coarse, h, 1);
  REQUIRE(up->data.dim(0) == topo.vertex_count);
  for (std::int64_t i = 0; i < up->data.size(); ++i)
    REQUIRE_THAT(up->data[i], Catch::Matchers::WithinAbs(1.25, 1e-12));

  // gradient of sum(unpool(X)) equals the column sums of U
  auto leaf = variable(Tensor::full(Shape{h.levels[0].pool.rows, 1}, 0.5));
  backward(sum(apply_unpool(leaf, h, 1)));
  const CsrMatrix ut = h.levels[0].unpool.transposed();
  for (int r = 0; r < ut.rows; ++r)
    REQUIRE_THAT(leaf->grad[r], Catch::Matchers::WithinAbs(ut.row_sum(r), 1e-12));

  // shape errors
  REQUIRE_THROWS_AS(apply_pool(coarse, h, 1), ValidationError);
  REQUIRE_THROWS_AS(apply_pool(constant(Tensor(Shape{5, 2})), h, 9), ValidationError);

  // pool then unpool of a linear field stays within the mean edge length
  Tensor fx(Shape{topo.vertex_count, 1});
  for (int v = 0; v < topo.vertex_count; ++v) fx[v] = c[static_cast<std::int64_t>(v) * 3 + 0];
  const ValuePtr round = apply_unpool(apply_pool(constant(fx), h, 1), h, 1);
  double mean_edge = 0.0;
  for (const auto& [a, b] : topo.edges)
    mean_edge += norm(Vec3{c[static_cast<std::int64_t>(a) * 3] - c[static_cast<std::int64_t>(b) * 3],
                           c[static_cast<std::int64_t>(a) * 3 + 1] - c[static_cast<std::int64_t>(b) * 3 + 1],
                           c[static_cast<std::int64_t>(a) * 3 + 2] - c[static_cast<std::int64_t>(b) * 3 + 2]});
  mean_edge /= static_cast<double>(topo.edges.size());
  for (std::int64_t i = 0; i < fx.size(); ++i)
    REQUIRE(std::abs(round->data[i] - fx[i]) < mean_edge);
}
