#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hybridmesh/clinical.hpp"
#include "hybridmesh/dataset.hpp"
#include "hybridmesh/metrics.hpp"
#include "hybridmesh/model.hpp"
#include "hybridmesh/quality.hpp"
#include "hybridmesh/rasterize.hpp"
#include "hybridmesh/threading.hpp"
#include "hybridmesh/transforms.hpp"

namespace hybridmesh {

struct EvalRow {
  std::string subject;
  CardiacPhase phase = CardiacPhase::ED;
  std::string structure;
  double dice = 0.0, hd = 0.0, mcd = 0.0;
  double mae = 0.0, mse = 0.0;
};

struct QualityRow {
  std::string subject;
  CardiacPhase phase = CardiacPhase::ED;
  std::string source;  // "pred" or "gt"
  QualityReport report;
};

struct ClinicalRow {
  std::string subject;
  ClinicalIndices gt;
  ClinicalIndices pred;
};

struct EvalOptions {
  TransformMode transform = TransformMode::full;
  int workers = 0;
};

struct EvalResult {
  std::vector<EvalRow> rows;
  std::vector<QualityRow> quality_rows;
  std::vector<ClinicalRow> clinical_rows;
};

inline GridSpec native_grid(const Image3D& sax) {
  return {sax.nx(), sax.ny(), sax.nz(), sax.spacing, sax.origin};
}

namespace detail {

inline const SubSurface& find_surface(const MeshTopology& topo, const std::string& name) {
  for (const auto& s : topo.surfaces)
    if (s.name == name) return s;
  throw ValidationError("topology has no sub-surface named '" + name + "'");
}

inline std::vector<std::array<int, 3>> surface_faces(const MeshTopology& topo,
                                                     const SubSurface& sub) {
  std::vector<std::array<int, 3>> out;
  out.reserve(sub.faces.size());
  for (int f : sub.faces) out.push_back(topo.faces[static_cast<std::size_t>(f)]);
  return out;
}

inline std::vector<int> surface_vertices(const MeshTopology& topo, const SubSurface& sub) {
  std::vector<int> out;
  for (int f : sub.faces)
    for (int v : topo.faces[static_cast<std::size_t>(f)]) out.push_back(v);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline VertexErrors subset_errors(const VertexField& pred, const VertexField& gt,
                                  const std::vector<int>& idx) {
  check(!idx.empty(), "subset_errors selection is empty");
  VertexErrors e;
  for (int i : idx) {
    const double d2 = norm2(pred.at(i) - gt.at(i));
    e.mae += std::sqrt(d2);
    e.mse += d2;
  }
  e.mae /= static_cast<double>(idx.size());
  e.mse /= static_cast<double>(idx.size());
  return e;
}

}  // namespace detail

// Masks for the reported structures: the LV blood pool and myocardium come
// from the paired endo/epi shells, the remaining chambers from their own
// closed surfaces.
inline std::map<std::string, VoxelMask> structure_masks(const VertexField& mm,
                                                        const MeshTopology& topo,
                                                        const GridSpec& grid) {
  auto shell = [&](const char* name) {
    const SubSurface& sub = detail::find_surface(topo, name);
    return rasterize(mm, detail::surface_faces(topo, sub), grid);
  };
  std::map<std::string, VoxelMask> m;
  const VoxelMask endo = shell("lv_endo");
  const VoxelMask epi = shell("lv_epi");
  m["lv_endo"] = endo;
  m["lv_myo"] = mask_and_not(epi, endo);
  m["rv"] = shell("rv");
  m["la"] = shell("la");
  m["ra"] = shell("ra");
  return m;
}

// Vertex subsets scoring each structure row: the blood pool against the endo
// shell, the myocardium against both of its boundaries, chambers against
// their own shells.
inline std::map<std::string, std::vector<int>> structure_vertices(const MeshTopology& topo) {
  auto verts = [&](const char* name) {
    return detail::surface_vertices(topo, detail::find_surface(topo, name));
  };
  std::map<std::string, std::vector<int>> m;
  m["lv_endo"] = verts("lv_endo");
  std::vector<int> myo = verts("lv_endo");
  const std::vector<int> epi = verts("lv_epi");
  myo.insert(myo.end(), epi.begin(), epi.end());
  std::sort(myo.begin(), myo.end());
  m["lv_myo"] = std::move(myo);
  m["rv"] = verts("rv");
  m["la"] = verts("la");
  m["ra"] = verts("ra");
  return m;
}

inline std::vector<EvalRow> evaluate_sample_pair(const std::string& subject, CardiacPhase phase,
                                                 const VertexField& pred_mm,
                                                 const VertexField& gt_mm,
                                                 const MeshTopology& topo, const GridSpec& grid) {
  check(pred_mm.space == CoordSpace::millimetre && gt_mm.space == CoordSpace::millimetre,
        "evaluate_sample_pair expects millimetre-space meshes");
  const auto pred_masks = structure_masks(pred_mm, topo, grid);
  const auto gt_masks = structure_masks(gt_mm, topo, grid);
  const auto vertices = structure_vertices(topo);

  std::vector<EvalRow> rows;
  for (const auto& [name, idx] : vertices) {
    EvalRow r;
    r.subject = subject;
    r.phase = phase;
    r.structure = name;
    const VoxelMask& a = pred_masks.at(name);
    const VoxelMask& b = gt_masks.at(name);
    r.dice = dice(a, b);
    r.hd = hausdorff(a, b);
    r.mcd = mcd(a, b);
    const VertexErrors e = detail::subset_errors(pred_mm, gt_mm, idx);
    r.mae = e.mae;
    r.mse = e.mse;
    rows.push_back(std::move(r));
  }
  return rows;
}

inline VertexField predict_mm(const HybridVNet& model, const MultiViewSample& native,
                              TransformMode mode) {
  const MultiViewSample s = pad_and_crop(native, mode);
  return to_mm(predict_mesh(model, s), s.transform);
}

inline EvalResult evaluate_model(const HybridVNet& model, const std::string& root,
                                 TemplateKind kind, const std::vector<std::string>& subjects,
                                 const EvalOptions& opt = {}) {
  check(!subjects.empty(), "evaluation subject list is empty");
  const bool volumetric = model.topology.volumetric();
  std::vector<EvalResult> per_subject(subjects.size());
  parallel_for(static_cast<std::int64_t>(subjects.size()), worker_count(opt.workers),
               [&](std::int64_t lo, std::int64_t hi) {
                 for (std::int64_t i = lo; i < hi; ++i) {
                   EvalResult& res = per_subject[static_cast<std::size_t>(i)];
                   const std::string& subject = subjects[static_cast<std::size_t>(i)];
                   ClinicalRow clin;
                   clin.subject = subject;
                   std::map<CardiacPhase, std::map<std::string, VoxelMask>> masks_gt, masks_pred;
                   for (const CardiacPhase phase : {CardiacPhase::ED, CardiacPhase::ES}) {
                     const MultiViewSample native = load_sample(root, kind, subject, phase);
                     const GridSpec grid = native_grid(native.sax);
                     const VertexField pred = predict_mm(model, native, opt.transform);
                     auto rows = evaluate_sample_pair(subject, phase, pred, native.gt,
                                                      model.topology, grid);
                     res.rows.insert(res.rows.end(), rows.begin(), rows.end());
                     masks_gt[phase] = structure_masks(native.gt, model.topology, grid);
                     masks_pred[phase] = structure_masks(pred, model.topology, grid);
                     if (volumetric) {
                       res.quality_rows.push_back(
                           {subject, phase, "pred",
                            tetra_quality(pred, model.topology.tetras)});
                       res.quality_rows.push_back(
                           {subject, phase, "gt",
                            tetra_quality(native.gt, model.topology.tetras)});
                     }
                   }
                   clin.gt = clinical_indices(
                       masks_gt.at(CardiacPhase::ED).at("lv_endo"),
                       masks_gt.at(CardiacPhase::ES).at("lv_endo"),
                       masks_gt.at(CardiacPhase::ED).at("rv"),
                       masks_gt.at(CardiacPhase::ES).at("rv"));
                   clin.pred = clinical_indices(
                       masks_pred.at(CardiacPhase::ED).at("lv_endo"),
                       masks_pred.at(CardiacPhase::ES).at("lv_endo"),
                       masks_pred.at(CardiacPhase::ED).at("rv"),
                       masks_pred.at(CardiacPhase::ES).at("rv"));
                   res.clinical_rows.push_back(std::move(clin));
                 }
               });

  EvalResult out;
  for (auto& r : per_subject) {
    out.rows.insert(out.rows.end(), r.rows.begin(), r.rows.end());
    out.quality_rows.insert(out.quality_rows.end(), r.quality_rows.begin(),
                            r.quality_rows.end());
    out.clinical_rows.insert(out.clinical_rows.end(), r.clinical_rows.begin(),
                             r.clinical_rows.end());
  }
  return out;
}

namespace detail {

inline std::string fmt_metric(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace detail

inline void write_metrics_csv(const std::string& path, const std::vector<EvalRow>& rows) {
  std::ofstream os(path);
  check(static_cast<bool>(os), "cannot open file for writing: " + path);
  os << "subject,phase,structure,dice,hd,mcd,mae,mse\n";
  for (const auto& r : rows)
    os << r.subject << "," << phase_name(r.phase) << "," << r.structure << ","
       << detail::fmt_metric(r.dice) << "," << detail::fmt_metric(r.hd) << ","
       << detail::fmt_metric(r.mcd) << "," << detail::fmt_metric(r.mae) << ","
       << detail::fmt_metric(r.mse) << "\n";
  check(static_cast<bool>(os), "write failed for: " + path);
}

inline const std::array<std::pair<const char*, std::vector<double> QualityReport::*>, 5>&
quality_metrics() {
  static const std::array<std::pair<const char*, std::vector<double> QualityReport::*>, 5> m = {
      {{"scaled_jacobian", &QualityReport::scaled_jacobian},
       {"aspect_ratio", &QualityReport::aspect_ratio},
       {"mean_ratio", &QualityReport::mean_ratio},
       {"skewness", &QualityReport::skewness},
       {"shape_quality", &QualityReport::shape_quality}}};
  return m;
}

inline std::string quality_summary_line(const QualitySummary& s) {
  std::string out;
  for (const double v : {s.mean, s.stddev, s.min, s.max, s.p1, s.p5, s.p25, s.p50, s.p75}) {
    if (!out.empty()) out += ",";
    out += detail::fmt_metric(v);
  }
  return out;
}

inline constexpr const char* kQualityColumns = "mean,std,min,max,p1,p5,p25,p50,p75";

inline void write_quality_csv(const std::string& path, const std::vector<QualityRow>& rows) {
  std::ofstream os(path);
  check(static_cast<bool>(os), "cannot open file for writing: " + path);
  os << "subject,phase,source,metric," << kQualityColumns << ",degenerate\n";
  for (const auto& r : rows)
    for (const auto& [name, member] : quality_metrics())
      os << r.subject << "," << phase_name(r.phase) << "," << r.source << "," << name << ","
         << quality_summary_line(summarize(r.report.*member)) << "," << r.report.degenerate
         << "\n";
  check(static_cast<bool>(os), "write failed for: " + path);
}

// Standalone table for a single mesh, one row per metric.
inline std::string quality_table(const QualityReport& report) {
  std::string out = std::string("metric,") + kQualityColumns + ",degenerate\n";
  for (const auto& [name, member] : quality_metrics())
    out += std::string(name) + "," + quality_summary_line(summarize(report.*member)) + "," +
           std::to_string(report.degenerate) + "\n";
  return out;
}

inline void write_clinical_csv(const std::string& path, const std::vector<ClinicalRow>& rows) {
  std::ofstream os(path);
  check(static_cast<bool>(os), "cannot open file for writing: " + path);
  os << "subject,lv_edv_gt,lv_edv_pred,lv_esv_gt,lv_esv_pred,lv_ef_gt,lv_ef_pred,"
        "rv_edv_gt,rv_edv_pred,rv_esv_gt,rv_esv_pred,rv_ef_gt,rv_ef_pred\n";
  auto ef = [](const std::optional<double>& v) {
    return v ? detail::fmt_metric(*v) : std::string("");
  };
  for (const auto& r : rows)
    os << r.subject << "," << detail::fmt_metric(r.gt.lv_edv_ml) << ","
       << detail::fmt_metric(r.pred.lv_edv_ml) << "," << detail::fmt_metric(r.gt.lv_esv_ml)
       << "," << detail::fmt_metric(r.pred.lv_esv_ml) << "," << ef(r.gt.lv_ef) << ","
       << ef(r.pred.lv_ef) << "," << detail::fmt_metric(r.gt.rv_edv_ml) << ","
       << detail::fmt_metric(r.pred.rv_edv_ml) << "," << detail::fmt_metric(r.gt.rv_esv_ml)
       << "," << detail::fmt_metric(r.pred.rv_esv_ml) << "," << ef(r.gt.rv_ef) << ","
       << ef(r.pred.rv_ef) << "\n";
  check(static_cast<bool>(os), "write failed for: " + path);
}

namespace detail {

inline nlohmann::json summary_node(const QualitySummary& s) {
  auto num = [](double v) {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json();
  };
  return {{"mean", num(s.mean)}, {"std", num(s.stddev)}, {"min", num(s.min)},
          {"max", num(s.max)},   {"p1", num(s.p1)},      {"p5", num(s.p5)},
          {"p25", num(s.p25)},   {"p50", num(s.p50)},    {"p75", num(s.p75)}};
}

}  // namespace detail

inline nlohmann::json summary_json(const EvalResult& result) {
  nlohmann::json j;
  j["subjects"] = result.clinical_rows.size();
  j["samples"] = result.clinical_rows.size() * 2;

  std::map<std::string, std::map<std::string, std::vector<double>>> per_structure;
  for (const auto& r : result.rows) {
    auto& s = per_structure[r.structure];
    s["dice"].push_back(r.dice);
    s["hd"].push_back(r.hd);
    s["mcd"].push_back(r.mcd);
    s["mae"].push_back(r.mae);
    s["mse"].push_back(r.mse);
  }
  for (const auto& [structure, metrics] : per_structure)
    for (const auto& [metric, values] : metrics)
      j["structures"][structure][metric] = detail::summary_node(summarize(values));

  if (!result.quality_rows.empty()) {
    for (const char* source : {"pred", "gt"}) {
      QualityReport pooled;
      for (const auto& r : result.quality_rows) {
        if (r.source != source) continue;
        for (const auto& [name, member] : quality_metrics()) {
          auto& dst = pooled.*member;
          const auto& src = r.report.*member;
          dst.insert(dst.end(), src.begin(), src.end());
        }
        pooled.degenerate += r.report.degenerate;
      }
      if (pooled.scaled_jacobian.empty()) continue;
      for (const auto& [name, member] : quality_metrics())
        j["quality"][source][name] = detail::summary_node(summarize(pooled.*member));
      j["quality"][source]["degenerate"] = pooled.degenerate;
      j["quality"][source]["elements"] = pooled.scaled_jacobian.size();
    }
  }

  if (!result.clinical_rows.empty()) {
    auto volumes = [&](const char* key, double ClinicalIndices::*member) {
      std::vector<double> gt, pred, err;
      for (const auto& r : result.clinical_rows) {
        gt.push_back(r.gt.*member);
        pred.push_back(r.pred.*member);
        err.push_back(std::abs(r.gt.*member - r.pred.*member));
      }
      j["clinical"][key] = {{"gt", detail::summary_node(summarize(gt))},
                            {"pred", detail::summary_node(summarize(pred))},
                            {"mae", summarize(err).mean}};
    };
    volumes("lv_edv_ml", &ClinicalIndices::lv_edv_ml);
    volumes("lv_esv_ml", &ClinicalIndices::lv_esv_ml);
    volumes("rv_edv_ml", &ClinicalIndices::rv_edv_ml);
    volumes("rv_esv_ml", &ClinicalIndices::rv_esv_ml);
    auto fractions = [&](const char* key, std::optional<double> ClinicalIndices::*member) {
      std::vector<double> gt, pred, err;
      for (const auto& r : result.clinical_rows) {
        if (!(r.gt.*member) || !(r.pred.*member)) continue;
        gt.push_back(*(r.gt.*member));
        pred.push_back(*(r.pred.*member));
        err.push_back(std::abs(*(r.gt.*member) - *(r.pred.*member)));
      }
      if (gt.empty()) return;
      j["clinical"][key] = {{"gt", detail::summary_node(summarize(gt))},
                            {"pred", detail::summary_node(summarize(pred))},
                            {"mae", summarize(err).mean}};
    };
    fractions("lv_ef", &ClinicalIndices::lv_ef);
    fractions("rv_ef", &ClinicalIndices::rv_ef);
  }
  return j;
}

inline void write_summary_json(const std::string& path, const EvalResult& result) {
  std::ofstream os(path);
  check(static_cast<bool>(os), "cannot open file for writing: " + path);
  os << summary_json(result).dump(2) << "\n";
  check(static_cast<bool>(os), "write failed for: " + path);
}

}  // namespace hybridmesh
