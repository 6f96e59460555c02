#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hybridmesh/autodiff.hpp"
#include "hybridmesh/graph_conv.hpp"
#include "hybridmesh/image.hpp"
#include "hybridmesh/losses.hpp"
#include "hybridmesh/rng.hpp"

namespace hybridmesh {

enum class ViewMode { single_view, multi_view };

inline const char* view_mode_name(ViewMode m) {
  return m == ViewMode::single_view ? "single_view" : "multi_view";
}

inline ViewMode parse_view_mode(const std::string& s) {
  if (s == "single_view") return ViewMode::single_view;
  if (s == "multi_view") return ViewMode::multi_view;
  throw ValidationError("unknown view mode '" + s + "'");
}

// One residual-CNN encoder branch. channels has one entry per block; a 2x2
// max-pool sits between consecutive blocks. For the volumetric branch the
// pool after block z_pool_block (1-based) also halves Z; the 2D branch
// ignores the field.
struct EncoderConfig {
  std::vector<int> channels{8, 16, 16, 32, 32, 64};
  int latent = 32;
  int z_pool_block = 3;
};

struct ModelConfig {
  ViewMode mode = ViewMode::multi_view;
  int sax_nx = 64, sax_ny = 64, sax_nz = 12;
  int lax_n = 96;
  EncoderConfig sax{};
  EncoderConfig lax{{16, 32, 32, 64, 64, 128}, 8, 0};
  std::vector<int> decoder_channels{32, 32, 16, 16, 8};
  int cheb_k = 6;
  int levels = 4;
};

inline int latent_dim(const ModelConfig& cfg) {
  return cfg.mode == ViewMode::multi_view ? cfg.sax.latent + 3 * cfg.lax.latent
                                          : cfg.sax.latent;
}

inline void validate_model_config(const ModelConfig& cfg) {
  check(!cfg.sax.channels.empty() && !cfg.lax.channels.empty(),
        "encoder channel schedule must not be empty");
  for (int c : cfg.sax.channels) check(c >= 1, "encoder channels must be positive");
  for (int c : cfg.lax.channels) check(c >= 1, "encoder channels must be positive");
  check(cfg.sax.latent >= 1 && cfg.lax.latent >= 1, "latent dims must be positive");
  check(cfg.cheb_k >= 1, "cheb_k must be >= 1");
  check(cfg.levels >= 1, "decoder needs at least one pooling level");
  check(static_cast<int>(cfg.decoder_channels.size()) == cfg.levels + 1,
        "decoder_channels must have levels+1 entries, got " +
            std::to_string(cfg.decoder_channels.size()));
  for (int c : cfg.decoder_channels) check(c >= 1, "decoder channels must be positive");
  check(cfg.sax_nx >= 1 && cfg.sax_ny >= 1 && cfg.sax_nz >= 1 && cfg.lax_n >= 1,
        "model input dims must be positive");
}

namespace detail {

struct ConvLayer {
  ValuePtr w;
  ValuePtr b;
};

struct AffineNorm {
  ValuePtr gamma;
  ValuePtr beta;
};

struct DenseLayer {
  ValuePtr w;
  ValuePtr b;
};

inline Tensor glorot(Shape shape, std::int64_t fan_in, std::int64_t fan_out, Rng& rng) {
  Tensor t(std::move(shape));
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-limit, limit);
  return t;
}

inline ValuePtr register_param(const std::string& name, Tensor t,
                               std::map<std::string, ValuePtr>& params) {
  ValuePtr p = variable(std::move(t), name);
  params[name] = p;
  return p;
}

inline ConvLayer make_conv(const std::string& prefix, bool volumetric, int k, int cin, int cout,
                           bool bias, Rng& rng, std::map<std::string, ValuePtr>& params) {
  const int taps = volumetric ? k * k * k : k * k;
  const Shape shape = volumetric ? Shape{k, k, k, cin, cout} : Shape{k, k, cin, cout};
  ConvLayer layer;
  layer.w = register_param(prefix + ".w",
                           glorot(shape, static_cast<std::int64_t>(taps) * cin,
                                  static_cast<std::int64_t>(taps) * cout, rng),
                           params);
  if (bias) layer.b = register_param(prefix + ".b", Tensor(Shape{cout}), params);
  return layer;
}

inline AffineNorm make_norm(const std::string& prefix, int c,
                            std::map<std::string, ValuePtr>& params) {
  AffineNorm n;
  n.gamma = register_param(prefix + ".gamma", Tensor::full(Shape{c}, 1.0), params);
  n.beta = register_param(prefix + ".beta", Tensor(Shape{c}), params);
  return n;
}

inline DenseLayer make_dense(const std::string& prefix, int in, int out, Rng& rng,
                             std::map<std::string, ValuePtr>& params) {
  DenseLayer d;
  d.w = register_param(prefix + ".w", glorot(Shape{in, out}, in, out, rng), params);
  d.b = register_param(prefix + ".b", Tensor(Shape{out}), params);
  return d;
}

inline ValuePtr dense(const DenseLayer& d, const ValuePtr& x) {
  return add(matmul(x, d.w), d.b);
}

// Two 3x3(x3) convolutions with layer normalization, additive skip with a
// 1x1 projection when the channel count changes.
struct ResidualBlock {
  bool volumetric = false;
  ConvLayer conv1, conv2;
  AffineNorm norm1, norm2;
  ConvLayer proj;
};

inline ResidualBlock make_residual_block(const std::string& prefix, bool volumetric, int cin,
                                         int cout, Rng& rng,
                                         std::map<std::string, ValuePtr>& params) {
  ResidualBlock b;
  b.volumetric = volumetric;
  b.conv1 = make_conv(prefix + ".conv1", volumetric, 3, cin, cout, true, rng, params);
  b.norm1 = make_norm(prefix + ".norm1", cout, params);
  b.conv2 = make_conv(prefix + ".conv2", volumetric, 3, cout, cout, true, rng, params);
  b.norm2 = make_norm(prefix + ".norm2", cout, params);
  if (cin != cout)
    b.proj = make_conv(prefix + ".proj", volumetric, 1, cin, cout, false, rng, params);
  return b;
}

inline ValuePtr residual_forward(const ResidualBlock& b, const ValuePtr& x) {
  auto conv = [&](const ConvLayer& c, const ValuePtr& v, int pad) {
    return b.volumetric ? conv3d(v, c.w, c.b, pad) : conv2d(v, c.w, c.b, pad);
  };
  ValuePtr y = relu(layer_norm(conv(b.conv1, x, 1), b.norm1.gamma, b.norm1.beta));
  y = layer_norm(conv(b.conv2, y, 1), b.norm2.gamma, b.norm2.beta);
  const ValuePtr skip = b.proj.w ? conv(b.proj, x, 0) : x;
  return relu(add(y, skip));
}

struct EncoderBranch {
  EncoderConfig config;
  bool volumetric = false;
  std::vector<ResidualBlock> blocks;
  DenseLayer fc_mu, fc_log_var;
  int flat_dim = 0;
};

inline EncoderBranch make_encoder_branch(const std::string& prefix, const EncoderConfig& cfg,
                                         bool volumetric, int nz, int ny, int nx, Rng& rng,
                                         std::map<std::string, ValuePtr>& params) {
  EncoderBranch branch;
  branch.config = cfg;
  branch.volumetric = volumetric;
  const int n = static_cast<int>(cfg.channels.size());
  int d = nz, h = ny, w = nx, cin = 1;
  for (int i = 0; i < n; ++i) {
    const int cout = cfg.channels[static_cast<std::size_t>(i)];
    branch.blocks.push_back(make_residual_block(prefix + ".block" + std::to_string(i),
                                                volumetric, cin, cout, rng, params));
    cin = cout;
    if (i < n - 1) {
      h /= 2;
      w /= 2;
      if (volumetric && i + 1 == cfg.z_pool_block) d /= 2;
      check(h >= 1 && w >= 1 && d >= 1,
            prefix + ": input too small for the pooling schedule");
    }
  }
  branch.flat_dim = (volumetric ? d : 1) * h * w * cin;
  branch.fc_mu = make_dense(prefix + ".fc_mu", branch.flat_dim, cfg.latent, rng, params);
  branch.fc_log_var =
      make_dense(prefix + ".fc_log_var", branch.flat_dim, cfg.latent, rng, params);
  return branch;
}

// image arrives channel-less ([nz,ny,nx] or [ny,nx]); a trailing singleton
// channel axis is appended for the convolution stack
inline std::pair<ValuePtr, ValuePtr> branch_forward(const EncoderBranch& branch,
                                                    const Tensor& image) {
  Shape with_channel = image.shape;
  with_channel.push_back(1);
  ValuePtr x = reshape(constant(image), with_channel);
  const int n = static_cast<int>(branch.blocks.size());
  for (int i = 0; i < n; ++i) {
    x = residual_forward(branch.blocks[static_cast<std::size_t>(i)], x);
    if (i < n - 1) {
      if (branch.volumetric)
        x = maxpool3d(x, i + 1 == branch.config.z_pool_block ? 2 : 1, 2, 2);
      else
        x = maxpool2d(x, 2, 2);
    }
  }
  x = reshape(x, Shape{1, branch.flat_dim});
  const Shape latent{branch.config.latent};
  ValuePtr mu = reshape(dense(branch.fc_mu, x), latent);
  ValuePtr log_var = clamp(reshape(dense(branch.fc_log_var, x), latent), -10.0, 10.0);
  return {mu, log_var};
}

}  // namespace detail

struct HybridVNet {
  ModelConfig config;
  MeshTopology topology;
  PoolHierarchy hierarchy;
  std::vector<GraphOperatorCache> ops;  // ops[0] full resolution ... ops[levels] coarsest
  detail::EncoderBranch sax;
  std::vector<detail::EncoderBranch> lax;  // 2ch/3ch/4ch, empty in single_view
  detail::DenseLayer decoder_fc;
  std::vector<ChebConvLayer> cheb;        // hidden layers, coarse to fine
  std::vector<detail::AffineNorm> norms;  // one per hidden layer
  std::vector<ChebConvLayer> readout;     // aux heads at levels L..1
  ChebConvLayer final_layer;
  std::map<std::string, ValuePtr> params;
};

// reference holds template vertex positions (mm) used to build the pooling
// hierarchy; the same hierarchy then serves every sample of the topology
inline HybridVNet make_model(const ModelConfig& cfg, const MeshTopology& topology,
                             const VertexField& reference, std::uint64_t seed) {
  validate_model_config(cfg);
  HybridVNet m;
  m.config = cfg;
  m.topology = topology;
  m.hierarchy = build_hierarchy(topology, reference, cfg.levels);
  m.ops.push_back(scaled_laplacian(topology));
  for (const auto& level : m.hierarchy.levels) m.ops.push_back(scaled_laplacian(level.topology));

  Rng rng(derive_seed(seed, "model-init"));
  m.sax = detail::make_encoder_branch("encoder.sax", cfg.sax, true, cfg.sax_nz, cfg.sax_ny,
                                      cfg.sax_nx, rng, m.params);
  if (cfg.mode == ViewMode::multi_view) {
    static const char* views[3] = {"lax2ch", "lax3ch", "lax4ch"};
    for (const char* v : views)
      m.lax.push_back(detail::make_encoder_branch(std::string("encoder.") + v, cfg.lax, false,
                                                  1, cfg.lax_n, cfg.lax_n, rng, m.params));
  }

  const int coarse = m.hierarchy.levels.back().topology.vertex_count;
  const int c0 = cfg.decoder_channels.front();
  m.decoder_fc = detail::make_dense("decoder.fc", latent_dim(cfg), coarse * c0, rng, m.params);

  int cin = c0;
  for (int i = 0; i <= cfg.levels; ++i) {
    const int cout = cfg.decoder_channels[static_cast<std::size_t>(i)];
    m.cheb.push_back(make_cheb_layer(
        "decoder.cheb" + std::to_string(i),
        ChebLayerConfig{cin, cout, cfg.cheb_k, true, Activation::identity}, rng, m.params));
    m.norms.push_back(detail::make_norm("decoder.norm" + std::to_string(i), cout, m.params));
    const int level = cfg.levels - i;
    if (level > 0)
      m.readout.push_back(
          make_cheb_layer("decoder.readout" + std::to_string(level),
                          ChebLayerConfig{cout, 3, 1, false, Activation::identity}, rng,
                          m.params));
    cin = cout;
  }
  m.final_layer = make_cheb_layer(
      "decoder.cheb" + std::to_string(cfg.levels + 1),
      ChebLayerConfig{cin, 3, cfg.cheb_k, false, Activation::identity}, rng, m.params);
  return m;
}

inline LatentDistribution encode(const HybridVNet& m, const MultiViewSample& sample) {
  const ModelConfig& cfg = m.config;
  check(sample.sax.nz() == cfg.sax_nz && sample.sax.ny() == cfg.sax_ny &&
            sample.sax.nx() == cfg.sax_nx,
        "SAX shape " + shape_string(sample.sax.data.shape) + " does not match the model");
  auto [mu, log_var] = detail::branch_forward(m.sax, sample.sax.data);
  if (cfg.mode == ViewMode::single_view) return {mu, log_var};

  std::vector<ValuePtr> mus{mu}, log_vars{log_var};
  for (std::size_t k = 0; k < 3; ++k) {
    const ImagePlane& plane = sample.lax[k];
    check(plane.data.dim(0) == cfg.lax_n && plane.data.dim(1) == cfg.lax_n,
          "LAX shape " + shape_string(plane.data.shape) + " does not match the model");
    auto [mu_k, log_var_k] = detail::branch_forward(m.lax[k], plane.data);
    mus.push_back(mu_k);
    log_vars.push_back(log_var_k);
  }
  return {concat(mus, 0), concat(log_vars, 0)};
}

// training draws z = mu + sigma * eps from the given stream; inference takes
// the mean directly
inline ValuePtr reparameterize(const LatentDistribution& dist, bool training, Rng& rng) {
  if (!training) return dist.mu;
  Tensor eps(dist.mu->data.shape);
  for (std::int64_t i = 0; i < eps.size(); ++i) eps[i] = rng.normal();
  return add(dist.mu, mul(exp(scale(dist.log_var, 0.5)), constant(eps)));
}

inline DecoderOutputs decode(const HybridVNet& m, const ValuePtr& z) {
  const int L = latent_dim(m.config);
  check(z->data.rank() == 1 && z->data.dim(0) == L,
        "latent vector length " + std::to_string(z->data.size()) + ", expected " +
            std::to_string(L));
  const int coarse = m.hierarchy.levels.back().topology.vertex_count;
  const int c0 = m.config.decoder_channels.front();
  ValuePtr x = reshape(detail::dense(m.decoder_fc, reshape(z, Shape{1, L})), Shape{coarse, c0});

  DecoderOutputs out;
  std::size_t head = 0;
  for (int i = 0; i <= m.config.levels; ++i) {
    const int level = m.config.levels - i;
    const auto& ops = m.ops[static_cast<std::size_t>(level)];
    x = cheb_conv(x, ops, m.cheb[static_cast<std::size_t>(i)]);
    const auto& norm = m.norms[static_cast<std::size_t>(i)];
    x = relu(layer_norm(x, norm.gamma, norm.beta));
    if (level > 0) {
      out.aux.push_back(cheb_conv(x, ops, m.readout[head++]));
      x = apply_unpool(x, m.hierarchy, level);
    }
  }
  out.final = cheb_conv(x, m.ops[0], m.final_layer);
  return out;
}

struct ForwardResult {
  DecoderOutputs outputs;
  LatentDistribution dist;
};

inline ForwardResult forward(const HybridVNet& m, const MultiViewSample& sample, bool training,
                             Rng& rng) {
  ForwardResult r;
  r.dist = encode(m, sample);
  r.outputs = decode(m, reparameterize(r.dist, training, rng));
  return r;
}

inline ForwardResult forward(const HybridVNet& m, const MultiViewSample& sample) {
  Rng unused(0);
  return forward(m, sample, false, unused);
}

// inference-mode prediction in relative positional space
inline VertexField predict_mesh(const HybridVNet& m, const MultiViewSample& sample) {
  return VertexField(forward(m, sample).outputs.final->data, CoordSpace::relative);
}

inline std::int64_t parameter_count(const HybridVNet& m) {
  std::int64_t n = 0;
  for (const auto& [name, p] : m.params) n += p->data.size();
  return n;
}

inline std::string describe(const HybridVNet& m) {
  std::map<std::string, std::int64_t> groups;
  for (const auto& [name, p] : m.params)
    groups[name.substr(0, name.find('.'))] += p->data.size();
  std::string s = "mode=" + std::string(view_mode_name(m.config.mode)) +
                  " latent=" + std::to_string(latent_dim(m.config)) +
                  " params=" + std::to_string(parameter_count(m));
  for (const auto& [g, n] : groups) s += " " + g + "=" + std::to_string(n);
  return s;
}

}  // namespace hybridmesh
