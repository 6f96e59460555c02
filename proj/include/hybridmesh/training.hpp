#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hybridmesh/augment.hpp"
#include "hybridmesh/checkpoint.hpp"
#include "hybridmesh/dataset.hpp"
#include "hybridmesh/image.hpp"
#include "hybridmesh/losses.hpp"
#include "hybridmesh/model.hpp"
#include "hybridmesh/optim.hpp"
#include "hybridmesh/threading.hpp"
#include "hybridmesh/transforms.hpp"

namespace hybridmesh {

struct TrainConfig {
  std::string dataset_root;
  std::string out_dir;
  TransformMode transform = TransformMode::full;
  LossWeights weights;
  int epochs = 50;
  int batch_size = 4;
  double lr = 1e-4;
  double lr_decay = 0.99;
  std::uint64_t seed = 0;
  int workers = 0;
  bool augment = true;
  int keep_checkpoints = 2;
};

inline void validate_train_config(const TrainConfig& cfg) {
  check(!cfg.dataset_root.empty(), "dataset root is required");
  check(cfg.epochs >= 1, "epochs must be >= 1");
  check(cfg.batch_size >= 1, "batch size must be >= 1");
  check(cfg.lr > 0.0, "learning rate must be positive");
  check(cfg.lr_decay > 0.0 && cfg.lr_decay <= 1.0, "lr decay must lie in (0, 1]");
  check(cfg.keep_checkpoints >= 1, "keep_checkpoints must be >= 1");
}

// compact architecture signature stored in checkpoints so a resume against a
// differently configured model fails instead of silently mixing weights
inline std::string model_signature(const ModelConfig& cfg) {
  auto join = [](const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
  };
  return std::string(view_mode_name(cfg.mode)) + "|" + std::to_string(cfg.sax_nx) + "x" +
         std::to_string(cfg.sax_ny) + "x" + std::to_string(cfg.sax_nz) + "|" +
         std::to_string(cfg.lax_n) + "|" + join(cfg.sax.channels) + ":" +
         std::to_string(cfg.sax.latent) + ":" + std::to_string(cfg.sax.z_pool_block) + "|" +
         join(cfg.lax.channels) + ":" + std::to_string(cfg.lax.latent) + "|" +
         join(cfg.decoder_channels) + "|K" + std::to_string(cfg.cheb_k) + "|L" +
         std::to_string(cfg.levels);
}

struct EpochSummary {
  int epoch = 0;
  double lr = 0.0;
  double train_mse = 0.0;
  double val_mse = 0.0;
};

struct Trainer {
  TrainConfig config;
  ModelConfig model_config;
  DatasetManifest manifest;
  PadCropConfig pad_cfg;
  HybridVNet model;
  std::map<std::string, AdamState> adam;
  std::vector<MultiViewSample> train_set;
  std::vector<MultiViewSample> val_set;
  std::int64_t step = 0;
  int epoch = 0;
};

namespace detail {

inline std::vector<MultiViewSample> load_split(const std::string& root, TemplateKind kind,
                                               const std::vector<std::string>& subjects,
                                               int workers) {
  std::vector<MultiViewSample> out(subjects.size() * 2);
  parallel_for(static_cast<std::int64_t>(out.size()), worker_count(workers),
               [&](std::int64_t lo, std::int64_t hi) {
                 for (std::int64_t i = lo; i < hi; ++i) {
                   const std::string& subject = subjects[static_cast<std::size_t>(i / 2)];
                   const CardiacPhase phase = i % 2 == 0 ? CardiacPhase::ED : CardiacPhase::ES;
                   out[static_cast<std::size_t>(i)] = load_sample(root, kind, subject, phase);
                 }
               });
  return out;
}

}  // namespace detail

// model input dims always follow the pad/crop pipeline of the chosen mode
inline ModelConfig resolve_model_dims(ModelConfig cfg, TransformMode mode,
                                      const PadCropConfig& pad) {
  const auto& sax = mode == TransformMode::full ? pad.sax_full : pad.sax_cropped;
  cfg.sax_nx = sax[0];
  cfg.sax_ny = sax[1];
  cfg.sax_nz = sax[2];
  cfg.lax_n = pad.lax[0];
  return cfg;
}

inline Trainer make_trainer(const TrainConfig& cfg, const ModelConfig& model_cfg) {
  validate_train_config(cfg);
  Trainer t;
  t.config = cfg;
  t.manifest = load_manifest(cfg.dataset_root);
  t.model_config = resolve_model_dims(model_cfg, cfg.transform, t.pad_cfg);
  validate_model_config(t.model_config);

  const PhantomTemplate& tmpl = phantom_template(t.manifest.kind);
  t.model = make_model(t.model_config, tmpl.topology, deform_template(tmpl, PhantomScene{}),
                       cfg.seed);
  t.train_set =
      detail::load_split(cfg.dataset_root, t.manifest.kind, t.manifest.train, cfg.workers);
  t.val_set = detail::load_split(cfg.dataset_root, t.manifest.kind, t.manifest.val, cfg.workers);
  check(!t.train_set.empty(), "training split is empty");
  return t;
}

// deterministic per-sample pipeline: optional augmentation, then pad/crop;
// the cropped pipeline draws its crop centre from the same stream while
// training and uses the clamped centre when rng is null
inline MultiViewSample training_view(const MultiViewSample& native, const TrainConfig& cfg,
                                     const PadCropConfig& pad, Rng* rng) {
  MultiViewSample s =
      cfg.augment && rng ? apply_augment(native, draw_augment_params(*rng)) : native;
  return pad_and_crop(s, cfg.transform, pad, rng);
}

inline double validation_mse(const Trainer& t) {
  if (t.val_set.empty()) return 0.0;
  std::vector<double> mse(t.val_set.size());
  parallel_for(static_cast<std::int64_t>(t.val_set.size()), worker_count(t.config.workers),
               [&](std::int64_t lo, std::int64_t hi) {
                 for (std::int64_t i = lo; i < hi; ++i) {
                   const MultiViewSample s =
                       pad_and_crop(t.val_set[static_cast<std::size_t>(i)], t.config.transform,
                                    t.pad_cfg);
                   const VertexField gt_rel = to_relative(s.gt, s.transform);
                   const VertexField pred = predict_mesh(t.model, s);
                   double acc = 0.0;
                   for (std::int64_t j = 0; j < pred.coords.size(); ++j) {
                     const double d = pred.coords[j] - gt_rel.coords[j];
                     acc += d * d;
                   }
                   mse[static_cast<std::size_t>(i)] =
                       acc / static_cast<double>(pred.coords.size());
                 }
               });
  double total = 0.0;
  for (const double v : mse) total += v;
  return total / static_cast<double>(mse.size());
}

// one pass over the training split; appends one CSV row per optimizer step
// to log (columns: step,total,recon,kl,ds1..ds4,reg)
inline EpochSummary train_epoch(Trainer& t, std::ostream* log = nullptr) {
  const TrainConfig& cfg = t.config;
  const int e = t.epoch;
  const double lr_e = cfg.lr * std::pow(cfg.lr_decay, static_cast<double>(e));
  for (const auto& [name, p] : t.model.params) t.adam[name].lr = lr_e;

  std::vector<int> order(t.train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  Rng shuffle(derive_seed(cfg.seed, "shuffle/" + std::to_string(e)));
  for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
    std::swap(order[static_cast<std::size_t>(i)],
              order[static_cast<std::size_t>(shuffle.uniform_int(i + 1))]);

  Rng stream(derive_seed(cfg.seed, "train-epoch/" + std::to_string(e)));
  zero_grads(t.model.params);

  double recon_sum = 0.0;
  const std::size_t n = order.size();
  std::size_t done = 0;
  while (done < n) {
    const std::size_t chunk = std::min<std::size_t>(cfg.batch_size, n - done);
    LossReport avg;
    for (std::size_t j = 0; j < chunk; ++j) {
      const MultiViewSample& native =
          t.train_set[static_cast<std::size_t>(order[done + j])];
      const MultiViewSample s = training_view(native, cfg, t.pad_cfg, &stream);
      const VertexField gt_rel = to_relative(s.gt, s.transform);
      const ForwardResult r = forward(t.model, s, true, stream);
      const LossReport rep =
          total_loss(r.outputs, r.dist, gt_rel, cfg.weights, t.model.topology,
                     t.model.hierarchy);
      backward(scale(rep.node, 1.0 / static_cast<double>(chunk)));
      avg.total += rep.total / static_cast<double>(chunk);
      avg.reconstruction += rep.reconstruction / static_cast<double>(chunk);
      avg.kl += rep.kl / static_cast<double>(chunk);
      for (std::size_t d = 0; d < avg.ds.size(); ++d)
        avg.ds[d] += rep.ds[d] / static_cast<double>(chunk);
      avg.regularizer += rep.regularizer / static_cast<double>(chunk);
      recon_sum += rep.reconstruction;
    }
    adam_step(t.model.params, t.adam);
    zero_grads(t.model.params);
    if (log) {
      char row[256];
      std::snprintf(row, sizeof(row), "%lld,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n",
                    static_cast<long long>(t.step), avg.total, avg.reconstruction, avg.kl,
                    avg.ds[0], avg.ds[1], avg.ds[2], avg.ds[3], avg.regularizer);
      (*log) << row;
    }
    ++t.step;
    done += chunk;
  }

  EpochSummary s;
  s.epoch = e;
  s.lr = lr_e;
  s.train_mse = recon_sum / static_cast<double>(n);
  s.val_mse = validation_mse(t);
  t.epoch = e + 1;
  return s;
}

inline std::string checkpoint_path(const std::string& out_dir, int epoch) {
  char name[32];
  std::snprintf(name, sizeof(name), "ckpt-%04d.bin", epoch);
  return out_dir + "/" + name;
}

inline std::string latest_checkpoint(const std::string& out_dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(out_dir)) return {};
  int best = -1;
  for (const auto& entry : fs::directory_iterator(out_dir)) {
    int epoch = 0;
    if (std::sscanf(entry.path().filename().string().c_str(), "ckpt-%d.bin", &epoch) == 1)
      best = std::max(best, epoch);
  }
  return best < 0 ? std::string{} : checkpoint_path(out_dir, best);
}

inline void save_trainer_checkpoint(const Trainer& t, const std::string& path) {
  Checkpoint ck;
  for (const auto& [name, p] : t.model.params) ck.params[name] = p->data;
  ck.states = t.adam;
  ck.meta["model"] = model_signature(t.model_config);
  ck.meta["template"] = template_kind_name(t.manifest.kind);
  ck.meta["transform"] = t.config.transform == TransformMode::full ? "full" : "cropped";
  ck.meta["epoch"] = std::to_string(t.epoch);
  ck.meta["step"] = std::to_string(t.step);
  ck.meta["seed"] = std::to_string(t.config.seed);
  save_checkpoint(path, ck);
}

inline void resume_trainer(Trainer& t, const std::string& path) {
  const Checkpoint ck = load_checkpoint(path);
  check(ck.meta.at("model") == model_signature(t.model_config),
        "checkpoint was trained with a different model configuration");
  check(ck.meta.at("template") == template_kind_name(t.manifest.kind),
        "checkpoint template kind does not match the dataset");
  const std::string transform = t.config.transform == TransformMode::full ? "full" : "cropped";
  check(ck.meta.at("transform") == transform,
        "checkpoint transform mode does not match the run");
  restore_params(ck, t.model.params);
  t.adam = ck.states;
  t.epoch = std::stoi(ck.meta.at("epoch"));
  t.step = std::stoll(ck.meta.at("step"));
}

// full run: per-step loss log, per-epoch curve CSV, rolling checkpoints
inline std::vector<EpochSummary> run_training(Trainer& t, bool quiet = false) {
  namespace fs = std::filesystem;
  const TrainConfig& cfg = t.config;
  check(!cfg.out_dir.empty(), "output directory is required");
  fs::create_directories(cfg.out_dir);

  const bool fresh = t.step == 0;
  std::ofstream log(cfg.out_dir + "/training_log.csv",
                    fresh ? std::ios::trunc : std::ios::app);
  check(static_cast<bool>(log), "cannot open training log in " + cfg.out_dir);
  if (fresh) log << "step,total,recon,kl,ds1,ds2,ds3,ds4,reg\n";
  std::ofstream curve(cfg.out_dir + "/curve.csv", fresh ? std::ios::trunc : std::ios::app);
  if (fresh) curve << "epoch,lr,train_mse,val_mse\n";

  std::vector<EpochSummary> history;
  while (t.epoch < cfg.epochs) {
    const EpochSummary s = train_epoch(t, &log);
    char row[160];
    std::snprintf(row, sizeof(row), "%d,%.12g,%.12g,%.12g\n", s.epoch, s.lr, s.train_mse,
                  s.val_mse);
    curve << row;
    log.flush();
    curve.flush();
    save_trainer_checkpoint(t, checkpoint_path(cfg.out_dir, t.epoch));
    const int stale = t.epoch - cfg.keep_checkpoints;
    if (stale >= 1) fs::remove(checkpoint_path(cfg.out_dir, stale));
    if (!quiet)
      std::printf("epoch %d/%d lr %.3g train_mse %.6g val_mse %.6g\n", t.epoch, cfg.epochs,
                  s.lr, s.train_mse, s.val_mse);
    history.push_back(s);
  }
  return history;
}

}  // namespace hybridmesh
