#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hybridmesh/mesh_io.hpp"
#include "hybridmesh/phantom.hpp"
#include "hybridmesh/threading.hpp"

namespace hybridmesh {

static_assert(std::endian::native == std::endian::little,
              "raw image files are little-endian float32");

enum class TemplateKind { surface, tetra };

inline std::string template_kind_name(TemplateKind k) {
  return k == TemplateKind::surface ? "surface" : "tetra";
}

inline TemplateKind parse_template_kind(const std::string& name) {
  if (name == "surface") return TemplateKind::surface;
  if (name == "tetra") return TemplateKind::tetra;
  throw ValidationError("unknown template kind: " + name);
}

inline const PhantomTemplate& phantom_template(TemplateKind k) {
  return k == TemplateKind::surface ? surface_template() : volumetric_template();
}

struct DatasetManifest {
  std::uint64_t seed = 0;
  int count = 0;
  TemplateKind kind = TemplateKind::surface;
  std::vector<std::string> train, val, test;         // subject ids
  std::map<std::string, std::uint64_t> hashes;       // relative path -> fnv1a64
};

inline std::string subject_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "s%04d", index);
  return buf;
}

inline std::string dataset_sample_dir(const std::string& root, const std::string& subject,
                                      CardiacPhase phase) {
  return root + "/subjects/" + subject + "/" + phase_name(phase);
}

namespace detail {

inline void write_raw_f32(const std::string& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary);
  check(static_cast<bool>(os), "cannot open file for writing: " + path);
  std::vector<float> buf(static_cast<std::size_t>(t.size()));
  for (std::int64_t i = 0; i < t.size(); ++i)
    buf[static_cast<std::size_t>(i)] = static_cast<float>(t[i]);
  os.write(reinterpret_cast<const char*>(buf.data()),
           static_cast<std::streamsize>(buf.size() * sizeof(float)));
  check(static_cast<bool>(os), "write failed for: " + path);
}

inline Tensor read_raw_f32(const std::string& path, const Shape& shape) {
  std::ifstream is(path, std::ios::binary | std::ios::ate);
  check(static_cast<bool>(is), "cannot open file: " + path);
  Tensor t(shape);
  const auto bytes = static_cast<std::int64_t>(is.tellg());
  check(bytes == t.size() * static_cast<std::int64_t>(sizeof(float)),
        "raw file size does not match sidecar shape: " + path);
  is.seekg(0);
  std::vector<float> buf(static_cast<std::size_t>(t.size()));
  is.read(reinterpret_cast<char*>(buf.data()), bytes);
  check(static_cast<bool>(is), "read failed for: " + path);
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = buf[static_cast<std::size_t>(i)];
  return t;
}

inline std::string file_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  check(static_cast<bool>(is), "cannot open file: " + path);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::uint64_t parse_hash_hex(const std::string& s) {
  check(s.size() == 16, "manifest hash must be 16 hex digits: " + s);
  return std::stoull(s, nullptr, 16);
}

inline nlohmann::json vec3_json(const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); }

inline Vec3 vec3_from_json(const nlohmann::json& j) {
  check(j.is_array() && j.size() == 3, "expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream os(path);
  check(static_cast<bool>(os), "cannot open file for writing: " + path);
  os << j.dump(2) << "\n";
  check(static_cast<bool>(os), "write failed for: " + path);
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream is(path);
  check(static_cast<bool>(is), "cannot open file: " + path);
  return nlohmann::json::parse(is);
}

inline void write_image3d(const std::string& base, const Image3D& img) {
  write_raw_f32(base + ".raw", img.data);
  nlohmann::json meta{
      {"shape", {img.nz(), img.ny(), img.nx()}},
      {"spacing", vec3_json(img.spacing)},
      {"origin", vec3_json(img.origin)},
      {"direction", {vec3_json({1, 0, 0}), vec3_json({0, 1, 0}), vec3_json({0, 0, 1})}}};
  write_json_file(base + ".json", meta);
}

inline Image3D read_image3d(const std::string& base) {
  const nlohmann::json meta = read_json_file(base + ".json");
  const auto& sh = meta.at("shape");
  check(sh.is_array() && sh.size() == 3, "bad image shape in " + base + ".json");
  Image3D img;
  img.data = read_raw_f32(base + ".raw",
                          Shape{sh[0].get<int>(), sh[1].get<int>(), sh[2].get<int>()});
  img.spacing = vec3_from_json(meta.at("spacing"));
  img.origin = vec3_from_json(meta.at("origin"));
  return img;
}

inline void write_plane(const std::string& base, const ImagePlane& p) {
  write_raw_f32(base + ".raw", p.data);
  nlohmann::json meta{{"shape", {p.ny(), p.nx()}},
                      {"spacing", {p.spacing_x, p.spacing_y}},
                      {"origin", vec3_json(p.origin)},
                      {"axis_x", vec3_json(p.axis_x)},
                      {"axis_y", vec3_json(p.axis_y)}};
  write_json_file(base + ".json", meta);
}

inline ImagePlane read_plane(const std::string& base) {
  const nlohmann::json meta = read_json_file(base + ".json");
  const auto& sh = meta.at("shape");
  check(sh.is_array() && sh.size() == 2, "bad image shape in " + base + ".json");
  ImagePlane p;
  p.data = read_raw_f32(base + ".raw", Shape{sh[0].get<int>(), sh[1].get<int>()});
  p.spacing_x = meta.at("spacing")[0].get<double>();
  p.spacing_y = meta.at("spacing")[1].get<double>();
  p.origin = vec3_from_json(meta.at("origin"));
  p.axis_x = vec3_from_json(meta.at("axis_x"));
  p.axis_y = vec3_from_json(meta.at("axis_y"));
  return p;
}

inline void write_transform(const std::string& path, const SpaceTransform& t) {
  nlohmann::json j{{"mode", t.mode == TransformMode::full ? "full" : "cropped"},
                   {"pad", vec3_json(t.pad)},
                   {"crop_origin", vec3_json(t.crop_origin)},
                   {"size", vec3_json(t.size)},
                   {"spacing", vec3_json(t.spacing)},
                   {"origin", vec3_json(t.origin)}};
  write_json_file(path, j);
}

inline SpaceTransform read_transform(const std::string& path) {
  const nlohmann::json j = read_json_file(path);
  SpaceTransform t;
  const std::string mode = j.at("mode").get<std::string>();
  check(mode == "full" || mode == "cropped", "unknown transform mode: " + mode);
  t.mode = mode == "full" ? TransformMode::full : TransformMode::cropped;
  t.pad = vec3_from_json(j.at("pad"));
  t.crop_origin = vec3_from_json(j.at("crop_origin"));
  t.size = vec3_from_json(j.at("size"));
  t.spacing = vec3_from_json(j.at("spacing"));
  t.origin = vec3_from_json(j.at("origin"));
  return t;
}

}  // namespace detail

// Seeded 70/10/20 split, disjoint by subject id.
inline void split_subjects(const std::vector<std::string>& ids, std::uint64_t seed,
                           std::vector<std::string>& train, std::vector<std::string>& val,
                           std::vector<std::string>& test) {
  std::vector<std::string> pool = ids;
  Rng rng(derive_seed(seed, "split"));
  for (int i = static_cast<int>(pool.size()) - 1; i > 0; --i)
    std::swap(pool[static_cast<std::size_t>(i)],
              pool[static_cast<std::size_t>(rng.uniform_int(i + 1))]);
  const int n = static_cast<int>(pool.size());
  const int n_train = 7 * n / 10, n_val = n / 10;
  train.assign(pool.begin(), pool.begin() + n_train);
  val.assign(pool.begin() + n_train, pool.begin() + n_train + n_val);
  test.assign(pool.begin() + n_train + n_val, pool.end());
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  std::sort(test.begin(), test.end());
}

// Writes subjects/<id>/<phase>/{sax,lax*}.{raw,json}, the gt mesh, and
// transform.json for 2*count samples, plus manifest.json with content hashes.
inline DatasetManifest generate_phantom_dataset(const std::string& root, int count,
                                                std::uint64_t seed, TemplateKind kind,
                                                int workers = 0) {
  check(count > 0, "dataset needs a positive subject count");
  const PhantomTemplate& tmpl = phantom_template(kind);

  DatasetManifest manifest;
  manifest.seed = seed;
  manifest.count = count;
  manifest.kind = kind;

  std::vector<std::string> ids;
  for (int i = 0; i < count; ++i) ids.push_back(subject_id(i));
  split_subjects(ids, seed, manifest.train, manifest.val, manifest.test);

  using Entry = std::pair<std::string, std::uint64_t>;
  std::vector<std::vector<Entry>> per_subject(ids.size());

  parallel_for(static_cast<std::int64_t>(ids.size()), worker_count(workers),
               [&](std::int64_t lo, std::int64_t hi) {
                 for (std::int64_t i = lo; i < hi; ++i) {
                   auto& entries = per_subject[static_cast<std::size_t>(i)];
                   for (CardiacPhase phase : {CardiacPhase::ED, CardiacPhase::ES}) {
                     const std::string rel =
                         "subjects/" + ids[static_cast<std::size_t>(i)] + "/" + phase_name(phase);
                     const std::string dir = root + "/" + rel;
                     std::filesystem::create_directories(dir);
                     const MultiViewSample s = phantom_sample(
                         seed, ids[static_cast<std::size_t>(i)], phase, tmpl);

                     std::vector<std::string> files;
                     detail::write_image3d(dir + "/sax", s.sax);
                     files.insert(files.end(), {"sax.raw", "sax.json"});
                     static const char* views[3] = {"lax2ch", "lax3ch", "lax4ch"};
                     for (int k = 0; k < 3; ++k) {
                       detail::write_plane(dir + "/" + views[k], s.lax[static_cast<std::size_t>(k)]);
                       files.push_back(std::string(views[k]) + ".raw");
                       files.push_back(std::string(views[k]) + ".json");
                     }
                     if (kind == TemplateKind::surface) {
                       write_ply(dir + "/gt.ply", tmpl.topology, s.gt);
                       files.push_back("gt.ply");
                     } else {
                       write_tetra_mesh(dir + "/gt", tmpl.topology, s.gt);
                       files.insert(files.end(), {"gt.node", "gt.ele"});
                     }
                     detail::write_transform(dir + "/transform.json", s.transform);
                     files.push_back("transform.json");

                     for (const auto& f : files) {
                       const std::string bytes = detail::file_bytes(dir + "/" + f);
                       entries.emplace_back(rel + "/" + f,
                                            fnv1a64(bytes.data(), bytes.size()));
                     }
                   }
                 }
               });

  for (const auto& entries : per_subject)
    for (const auto& [path, hash] : entries) manifest.hashes[path] = hash;

  nlohmann::json j{{"seed", manifest.seed},
                   {"count", manifest.count},
                   {"template", template_kind_name(kind)},
                   {"splits",
                    {{"train", manifest.train}, {"val", manifest.val}, {"test", manifest.test}}}};
  nlohmann::json hashes = nlohmann::json::object();
  for (const auto& [path, hash] : manifest.hashes) hashes[path] = detail::hash_hex(hash);
  j["hashes"] = std::move(hashes);
  detail::write_json_file(root + "/manifest.json", j);
  return manifest;
}

inline DatasetManifest load_manifest(const std::string& root) {
  const nlohmann::json j = detail::read_json_file(root + "/manifest.json");
  DatasetManifest m;
  m.seed = j.at("seed").get<std::uint64_t>();
  m.count = j.at("count").get<int>();
  m.kind = parse_template_kind(j.at("template").get<std::string>());
  m.train = j.at("splits").at("train").get<std::vector<std::string>>();
  m.val = j.at("splits").at("val").get<std::vector<std::string>>();
  m.test = j.at("splits").at("test").get<std::vector<std::string>>();
  for (const auto& [path, hex] : j.at("hashes").items())
    m.hashes[path] = detail::parse_hash_hex(hex.get<std::string>());

  auto overlaps = [](const std::vector<std::string>& a, const std::vector<std::string>& b) {
    for (const auto& x : a)
      for (const auto& y : b)
        if (x == y) return true;
    return false;
  };
  check(!overlaps(m.train, m.val) && !overlaps(m.train, m.test) && !overlaps(m.val, m.test),
        "manifest splits are not disjoint");
  return m;
}

inline DatasetManifest verify_dataset(const std::string& root) {
  DatasetManifest m = load_manifest(root);
  for (const auto& [rel, expected] : m.hashes) {
    const std::string bytes = detail::file_bytes(root + "/" + rel);
    const std::uint64_t actual = fnv1a64(bytes.data(), bytes.size());
    check(actual == expected, "dataset file " + rel + " does not match its manifest hash");
  }
  return m;
}

inline MultiViewSample load_sample(const std::string& root, TemplateKind kind,
                                   const std::string& subject, CardiacPhase phase) {
  const std::string dir = dataset_sample_dir(root, subject, phase);
  MultiViewSample s;
  s.subject = subject;
  s.phase = phase;
  s.sax = detail::read_image3d(dir + "/sax");
  static const char* views[3] = {"lax2ch", "lax3ch", "lax4ch"};
  for (int k = 0; k < 3; ++k)
    s.lax[static_cast<std::size_t>(k)] = detail::read_plane(dir + "/" + views[k]);
  if (kind == TemplateKind::surface) {
    s.gt = read_ply(dir + "/gt.ply").coords;
  } else {
    s.gt = read_tetra_mesh(dir + "/gt").coords;
  }
  s.transform = detail::read_transform(dir + "/transform.json");
  validate_sample(s);
  return s;
}

}  // namespace hybridmesh
