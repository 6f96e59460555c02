#pragma once

#include <array>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hybridmesh/autodiff.hpp"
#include "hybridmesh/decimation.hpp"
#include "hybridmesh/mesh.hpp"

namespace hybridmesh {

enum class RegKind { none, laplacian, edge, normal, ter };

inline const char* reg_kind_name(RegKind k) {
  switch (k) {
    case RegKind::none: return "none";
    case RegKind::laplacian: return "laplacian";
    case RegKind::edge: return "edge";
    case RegKind::normal: return "normal";
    case RegKind::ter: return "ter";
  }
  return "none";
}

inline RegKind parse_reg_kind(const std::string& s) {
  if (s == "none") return RegKind::none;
  if (s == "laplacian") return RegKind::laplacian;
  if (s == "edge") return RegKind::edge;
  if (s == "normal") return RegKind::normal;
  if (s == "ter") return RegKind::ter;
  throw ValidationError("unknown regularizer kind '" + s + "'");
}

inline double default_reg_lambda(RegKind k) {
  switch (k) {
    case RegKind::laplacian: return 0.01;
    case RegKind::ter: return 1e-3;
    default: return 0.0;
  }
}

// lambda_ter sweep used by the volumetric quality/accuracy trade-off study
inline constexpr std::array<double, 4> kTerLambdaGrid{0.0, 1e-4, 1e-3, 1e-2};

struct LatentDistribution {
  ValuePtr mu;       // rank-1 [L]
  ValuePtr log_var;  // rank-1 [L]
};

// Full-resolution prediction plus the four deep-supervision heads,
// coarse to fine (aux[0] at level 4 ... aux[3] at level 1).
struct DecoderOutputs {
  ValuePtr final;
  std::vector<ValuePtr> aux;
};

struct LossWeights {
  double lambda_kl = 1e-5;
  double lambda_ds = 1.0;
  RegKind reg_kind = RegKind::none;
  double lambda_reg = 0.0;
  // optional combined mode: laplacian regularizer with a ter term folded in as
  // (lambda_ter / lambda_reg) * ter so the report keeps a single weight
  bool combine_ter = false;
  double lambda_ter = 0.0;
};

inline void validate_loss_weights(const LossWeights& w) {
  check(w.lambda_kl >= 0.0 && w.lambda_ds >= 0.0 && w.lambda_reg >= 0.0 && w.lambda_ter >= 0.0,
        "loss weights must be nonnegative");
  if (w.combine_ter)
    check(w.reg_kind == RegKind::laplacian && w.lambda_reg > 0.0,
          "combined regularization requires kind=laplacian with a positive weight");
}

struct LossReport {
  double total = 0.0;
  double reconstruction = 0.0;
  double kl = 0.0;
  std::array<double, 4> ds{};  // ds[i] is the level-(i+1) term
  double regularizer = 0.0;
  ValuePtr node;  // differentiable total
};

inline ValuePtr recon_loss(const ValuePtr& pred, const VertexField& gt) {
  check(gt.space == CoordSpace::relative, "recon_loss expects ground truth in relative space");
  check(pred->data.shape == gt.coords.shape,
        "recon_loss shape mismatch: pred " + shape_string(pred->data.shape) + ", gt " +
            shape_string(gt.coords.shape));
  const ValuePtr d = sub(pred, constant(gt.coords));
  return mean(mul(d, d));
}

inline ValuePtr recon_loss(const VertexField& pred, const VertexField& gt) {
  check(pred.space == gt.space, "recon_loss expects both fields in the same space");
  return recon_loss(constant(pred.coords), gt);
}

// KL(N(mu, diag(sigma^2)) || N(0, I)) = -1/2 sum(1 + log_var - mu^2 - exp(log_var))
inline ValuePtr kl_loss(const LatentDistribution& dist) {
  check(dist.mu && dist.log_var, "kl_loss requires mu and log_var");
  check(dist.mu->data.shape == dist.log_var->data.shape,
        "kl_loss mu/log_var shape mismatch");
  const ValuePtr inner =
      sub(sub(shift(dist.log_var, 1.0), mul(dist.mu, dist.mu)), exp(dist.log_var));
  return scale(sum(inner), -0.5);
}

// Deep-supervision targets P_i ... P_1 gt, one per level, computed once per
// sample since the pooling matrices are constant.
inline std::vector<VertexField> ds_ground_truths(const VertexField& gt, const PoolHierarchy& h) {
  std::vector<VertexField> out;
  out.reserve(h.levels.size());
  for (int level = 1; level <= static_cast<int>(h.levels.size()); ++level)
    out.push_back(downsample_ground_truth(h, gt, level));
  return out;
}

inline std::vector<ValuePtr> ds_loss(const DecoderOutputs& outputs,
                                     const std::vector<VertexField>& pooled_gt) {
  check(outputs.aux.size() == pooled_gt.size(),
        "deep-supervision head count " + std::to_string(outputs.aux.size()) +
            " does not match hierarchy depth " + std::to_string(pooled_gt.size()));
  const std::size_t n = pooled_gt.size();
  std::vector<ValuePtr> out(n);  // out[i] is the level-(i+1) term
  for (std::size_t i = 0; i < n; ++i) out[i] = recon_loss(outputs.aux[n - 1 - i], pooled_gt[i]);
  return out;
}

inline std::vector<ValuePtr> ds_loss(const DecoderOutputs& outputs, const VertexField& gt,
                                     const PoolHierarchy& h) {
  return ds_loss(outputs, ds_ground_truths(gt, h));
}

// mean over vertices of ||v_i - mean_{j in N(i)} v_j||^2; isolated vertices
// get an identity row in the neighbor-mean operator and contribute zero
inline ValuePtr laplacian_reg(const ValuePtr& pred, const MeshTopology& topo) {
  const int m = topo.vertex_count;
  check(pred->data.rank() == 2 && pred->data.dim(0) == m,
        "laplacian_reg prediction rows do not match the topology");
  const auto neighbors = vertex_neighbors(topo);
  std::vector<std::tuple<int, int, double>> trip;
  trip.reserve(topo.edges.size() * 2 + static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    const auto& n = neighbors[static_cast<std::size_t>(i)];
    if (n.empty()) {
      trip.emplace_back(i, i, 1.0);
      continue;
    }
    const double w = 1.0 / static_cast<double>(n.size());
    for (int j : n) trip.emplace_back(i, j, w);
  }
  const ValuePtr d = sub(pred, sparse_matmul(CsrMatrix::from_triplets(m, m, trip), pred));
  return scale(sum(mul(d, d)), 1.0 / static_cast<double>(m));
}

// mean over edges of squared length
inline ValuePtr edge_reg(const ValuePtr& pred, const MeshTopology& topo) {
  check(!topo.edges.empty(), "edge_reg requires a topology with edges");
  check(pred->data.rank() == 2 && pred->data.dim(0) == topo.vertex_count,
        "edge_reg prediction rows do not match the topology");
  std::vector<int> ia, ib;
  ia.reserve(topo.edges.size());
  ib.reserve(topo.edges.size());
  for (const auto& [a, b] : topo.edges) {
    ia.push_back(a);
    ib.push_back(b);
  }
  const ValuePtr d = sub(gather_rows(pred, std::move(ia)), gather_rows(pred, std::move(ib)));
  return scale(sum(mul(d, d)), 1.0 / static_cast<double>(topo.edges.size()));
}

namespace detail {

inline ValuePtr column3(const ValuePtr& x, int c) {
  Tensor sel(Shape{3, 1});
  sel[c] = 1.0;
  return matmul(x, constant(std::move(sel)));
}

struct Columns3 {
  ValuePtr x, y, z;
};

inline Columns3 split3(const ValuePtr& v) { return {column3(v, 0), column3(v, 1), column3(v, 2)}; }

inline Columns3 cross3(const Columns3& u, const Columns3& w) {
  return {sub(mul(u.y, w.z), mul(u.z, w.y)), sub(mul(u.z, w.x), mul(u.x, w.z)),
          sub(mul(u.x, w.y), mul(u.y, w.x))};
}

inline ValuePtr dot3(const Columns3& a, const Columns3& b) {
  return add(add(mul(a.x, b.x), mul(a.y, b.y)), mul(a.z, b.z));
}

inline Vec3 row_vec(const Tensor& t, int r) {
  return {t[static_cast<std::int64_t>(r) * 3 + 0], t[static_cast<std::int64_t>(r) * 3 + 1],
          t[static_cast<std::int64_t>(r) * 3 + 2]};
}

}  // namespace detail

// For each incidence of edge e=(a,b), a the smaller index, in face f with
// opposite vertex c: squared cosine between (c - a) and the normal of the
// other face sharing e. Flat regions score zero, curved ones do not.
// Incidences with a zero-area opposite face or a zero (c - a) vector are
// skipped and tallied in *skipped.
inline ValuePtr normal_reg(const ValuePtr& pred, const MeshTopology& topo,
                           int* skipped = nullptr) {
  check(!topo.faces.empty(), "normal_reg requires a topology with faces");
  check(pred->data.rank() == 2 && pred->data.dim(0) == topo.vertex_count &&
            pred->data.dim(1) == 3,
        "normal_reg prediction must be vertex positions matching the topology");
  if (skipped) *skipped = 0;

  std::map<std::pair<int, int>, std::vector<int>> edge_faces;
  for (std::size_t f = 0; f < topo.faces.size(); ++f) {
    const auto& tri = topo.faces[f];
    for (int k = 0; k < 3; ++k) {
      int a = tri[static_cast<std::size_t>(k)], b = tri[static_cast<std::size_t>((k + 1) % 3)];
      if (a > b) std::swap(a, b);
      edge_faces[{a, b}].push_back(static_cast<int>(f));
    }
  }

  constexpr double kDegenerate = 1e-24;
  const Tensor& p = pred->data;
  std::vector<int> ia, ic, i0, i1, i2;
  int tally = 0;
  for (const auto& [edge, faces] : edge_faces) {
    if (faces.size() != 2) continue;  // boundary edge: no opposite face
    const int a = edge.first, b = edge.second;
    for (int side = 0; side < 2; ++side) {
      const auto& f = topo.faces[static_cast<std::size_t>(faces[static_cast<std::size_t>(side)])];
      const auto& g =
          topo.faces[static_cast<std::size_t>(faces[static_cast<std::size_t>(1 - side)])];
      int c = -1;
      for (int v : f)
        if (v != a && v != b) c = v;
      const Vec3 d = detail::row_vec(p, c) - detail::row_vec(p, a);
      const Vec3 n = cross(detail::row_vec(p, g[1]) - detail::row_vec(p, g[0]),
                           detail::row_vec(p, g[2]) - detail::row_vec(p, g[0]));
      if (norm2(n) <= kDegenerate || norm2(d) <= kDegenerate) {
        ++tally;
        continue;
      }
      ia.push_back(a);
      ic.push_back(c);
      i0.push_back(g[0]);
      i1.push_back(g[1]);
      i2.push_back(g[2]);
    }
  }
  if (skipped) *skipped = tally;
  if (ia.empty()) return constant(Tensor::scalar(0.0));

  const auto k = static_cast<double>(ia.size());
  const detail::Columns3 d = detail::split3(
      sub(gather_rows(pred, std::move(ic)), gather_rows(pred, std::move(ia))));
  const ValuePtr f0 = gather_rows(pred, std::move(i0));
  const detail::Columns3 u = detail::split3(sub(gather_rows(pred, std::move(i1)), f0));
  const detail::Columns3 w = detail::split3(sub(gather_rows(pred, std::move(i2)), f0));
  const detail::Columns3 n = detail::cross3(u, w);
  const ValuePtr num = detail::dot3(n, d);
  const ValuePtr denom = mul(detail::dot3(n, n), detail::dot3(d, d));
  const ValuePtr cos2 = mul(mul(num, num), reciprocal(denom));
  return scale(sum(cos2), 1.0 / k);
}

// Eq-style per-element edge-length variance: (1/N) sum_i (1/6) sum_j
// (||e_j|| - mean_k ||e_k||)^2 with a safe norm sqrt(s + 1e-24)
inline ValuePtr ter_loss(const ValuePtr& pred, const std::vector<std::array<int, 4>>& tetras) {
  check(!tetras.empty(), "ter_loss requires a nonempty tetra list");
  check(pred->data.rank() == 2 && pred->data.dim(1) == 3,
        "ter_loss prediction must be vertex positions");
  const auto n = static_cast<int>(tetras.size());
  static constexpr int kPairs[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
  std::vector<int> ia, ib;
  ia.reserve(static_cast<std::size_t>(n) * 6);
  ib.reserve(static_cast<std::size_t>(n) * 6);
  std::vector<std::tuple<int, int, double>> to_mean, from_mean;
  to_mean.reserve(static_cast<std::size_t>(n) * 6);
  from_mean.reserve(static_cast<std::size_t>(n) * 6);
  for (int t = 0; t < n; ++t) {
    const auto& tet = tetras[static_cast<std::size_t>(t)];
    for (int j = 0; j < 6; ++j) {
      ia.push_back(tet[static_cast<std::size_t>(kPairs[j][0])]);
      ib.push_back(tet[static_cast<std::size_t>(kPairs[j][1])]);
      to_mean.emplace_back(t, t * 6 + j, 1.0 / 6.0);
      from_mean.emplace_back(t * 6 + j, t, 1.0);
    }
  }
  const ValuePtr d = sub(gather_rows(pred, std::move(ia)), gather_rows(pred, std::move(ib)));
  Tensor ones(Shape{3, 1});
  ones[0] = ones[1] = ones[2] = 1.0;
  const ValuePtr len = sqrt(shift(matmul(mul(d, d), constant(std::move(ones))), 1e-24));
  const ValuePtr mean_len =
      sparse_matmul(CsrMatrix::from_triplets(n, n * 6, to_mean), len);
  const ValuePtr dev =
      sub(len, sparse_matmul(CsrMatrix::from_triplets(n * 6, n, from_mean), mean_len));
  return scale(sum(mul(dev, dev)), 1.0 / (6.0 * static_cast<double>(n)));
}

inline LossReport total_loss(const DecoderOutputs& outputs, const LatentDistribution& dist,
                             const VertexField& gt, const LossWeights& w,
                             const MeshTopology& topo,
                             const std::vector<VertexField>& pooled_gt) {
  validate_loss_weights(w);
  switch (w.reg_kind) {
    case RegKind::none:
      break;
    case RegKind::ter:
      check(topo.volumetric(), "ter regularization requires a volumetric topology");
      break;
    default:
      check(!topo.faces.empty(), "surface regularization requires a topology with faces");
      break;
  }
  if (w.combine_ter) check(topo.volumetric(), "combined regularization requires tetras");

  LossReport report;
  const ValuePtr recon = recon_loss(outputs.final, gt);
  const ValuePtr kl = kl_loss(dist);
  const std::vector<ValuePtr> ds = ds_loss(outputs, pooled_gt);

  ValuePtr reg;
  switch (w.reg_kind) {
    case RegKind::none:
      break;
    case RegKind::laplacian:
      reg = laplacian_reg(outputs.final, topo);
      if (w.combine_ter && w.lambda_ter > 0.0)
        reg = add(reg, scale(ter_loss(outputs.final, topo.tetras), w.lambda_ter / w.lambda_reg));
      break;
    case RegKind::edge:
      reg = edge_reg(outputs.final, topo);
      break;
    case RegKind::normal:
      reg = normal_reg(outputs.final, topo);
      break;
    case RegKind::ter:
      reg = ter_loss(outputs.final, topo.tetras);
      break;
  }

  ValuePtr total = recon;
  if (w.lambda_kl > 0.0) total = add(total, scale(kl, w.lambda_kl));
  if (w.lambda_ds > 0.0) {
    ValuePtr ds_sum = ds[0];
    for (std::size_t i = 1; i < ds.size(); ++i) ds_sum = add(ds_sum, ds[i]);
    total = add(total, scale(ds_sum, w.lambda_ds));
  }
  if (reg && w.lambda_reg > 0.0) total = add(total, scale(reg, w.lambda_reg));

  report.reconstruction = recon->data[0];
  report.kl = kl->data[0];
  for (std::size_t i = 0; i < ds.size() && i < report.ds.size(); ++i)
    report.ds[i] = ds[i]->data[0];
  report.regularizer = reg ? reg->data[0] : 0.0;
  report.total = total->data[0];
  report.node = total;
  return report;
}

inline LossReport total_loss(const DecoderOutputs& outputs, const LatentDistribution& dist,
                             const VertexField& gt, const LossWeights& w,
                             const MeshTopology& topo, const PoolHierarchy& h) {
  return total_loss(outputs, dist, gt, w, topo, ds_ground_truths(gt, h));
}

}  // namespace hybridmesh
