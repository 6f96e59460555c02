#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>

#include "hybridmesh/optim.hpp"

namespace hybridmesh {

// Checkpoint container, all fields little-endian:
//   magic "HMCKPT\n\0" | u32 version | u64 meta count | meta (string,string) pairs
//   | u64 param count | per parameter:
//       name | u32 rank | i32 dims[rank] | f64 data[numel]
//       | u8 has_adam | if set: i64 step, f64 lr/beta1/beta2/epsilon/weight_decay,
//         f64 m[numel], f64 v[numel]
// Strings are u64 byte length + bytes. Parameters are written in name order.
static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

struct Checkpoint {
  std::map<std::string, Tensor> params;
  std::map<std::string, AdamState> states;  // entries only for params with moments
  std::map<std::string, std::string> meta;
};

namespace detail {

constexpr char kCheckpointMagic[8] = {'H', 'M', 'C', 'K', 'P', 'T', '\n', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& is, T& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  check(static_cast<bool>(is), "checkpoint truncated");
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_pod(os, static_cast<std::uint64_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is) {
  std::uint64_t n = 0;
  read_pod(is, n);
  check(n <= (1u << 20), "checkpoint string length implausible");
  std::string s(static_cast<std::size_t>(n), '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  check(static_cast<bool>(is), "checkpoint truncated");
  return s;
}

inline void write_doubles(std::ostream& os, const double* p, std::int64_t n) {
  os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * 8));
}

inline void read_doubles(std::istream& is, double* p, std::int64_t n) {
  is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * 8));
  check(static_cast<bool>(is), "checkpoint truncated");
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  check(static_cast<bool>(os), "cannot open checkpoint for writing: " + path);
  os.write(detail::kCheckpointMagic, 8);
  detail::write_pod(os, detail::kCheckpointVersion);
  detail::write_pod(os, static_cast<std::uint64_t>(ckpt.meta.size()));
  for (const auto& [k, v] : ckpt.meta) {
    detail::write_string(os, k);
    detail::write_string(os, v);
  }
  detail::write_pod(os, static_cast<std::uint64_t>(ckpt.params.size()));
  for (const auto& [name, t] : ckpt.params) {
    detail::write_string(os, name);
    detail::write_pod(os, static_cast<std::uint32_t>(t.rank()));
    for (int d = 0; d < t.rank(); ++d) detail::write_pod(os, static_cast<std::int32_t>(t.dim(d)));
    detail::write_doubles(os, t.ptr(), t.size());
    const auto it = ckpt.states.find(name);
    detail::write_pod(os, static_cast<std::uint8_t>(it != ckpt.states.end() ? 1 : 0));
    if (it != ckpt.states.end()) {
      const AdamState& st = it->second;
      check(st.m.same_shape(t) && st.v.same_shape(t),
            "adam moment shape mismatch for '" + name + "'");
      detail::write_pod(os, static_cast<std::int64_t>(st.step));
      detail::write_pod(os, st.lr);
      detail::write_pod(os, st.beta1);
      detail::write_pod(os, st.beta2);
      detail::write_pod(os, st.epsilon);
      detail::write_pod(os, st.weight_decay);
      detail::write_doubles(os, st.m.ptr(), st.m.size());
      detail::write_doubles(os, st.v.ptr(), st.v.size());
    }
  }
  check(static_cast<bool>(os), "write failed for checkpoint: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  check(static_cast<bool>(is), "cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, 8);
  check(static_cast<bool>(is) && std::equal(magic, magic + 8, detail::kCheckpointMagic),
        "not a checkpoint file: " + path);
  std::uint32_t version = 0;
  detail::read_pod(is, version);
  check(version == detail::kCheckpointVersion,
        "unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  std::uint64_t meta_count = 0;
  detail::read_pod(is, meta_count);
  for (std::uint64_t i = 0; i < meta_count; ++i) {
    std::string k = detail::read_string(is);
    ckpt.meta[k] = detail::read_string(is);
  }
  std::uint64_t param_count = 0;
  detail::read_pod(is, param_count);
  for (std::uint64_t i = 0; i < param_count; ++i) {
    std::string name = detail::read_string(is);
    std::uint32_t rank = 0;
    detail::read_pod(is, rank);
    check(rank <= 8, "checkpoint tensor rank implausible");
    Shape shape(rank);
    for (std::uint32_t d = 0; d < rank; ++d) {
      std::int32_t dim = 0;
      detail::read_pod(is, dim);
      check(dim > 0, "checkpoint tensor dim must be positive");
      shape[d] = dim;
    }
    Tensor t(shape);
    detail::read_doubles(is, t.ptr(), t.size());
    std::uint8_t has_adam = 0;
    detail::read_pod(is, has_adam);
    if (has_adam) {
      AdamState st;
      std::int64_t step = 0;
      detail::read_pod(is, step);
      st.step = step;
      detail::read_pod(is, st.lr);
      detail::read_pod(is, st.beta1);
      detail::read_pod(is, st.beta2);
      detail::read_pod(is, st.epsilon);
      detail::read_pod(is, st.weight_decay);
      st.m = Tensor(shape);
      st.v = Tensor(shape);
      detail::read_doubles(is, st.m.ptr(), st.m.size());
      detail::read_doubles(is, st.v.ptr(), st.v.size());
      ckpt.states[name] = std::move(st);
    }
    ckpt.params[name] = std::move(t);
  }
  return ckpt;
}

// Copies checkpoint tensors into live parameters; every name must match and
// shapes must agree, so stale checkpoints fail loudly.
inline void restore_params(const Checkpoint& ckpt, std::map<std::string, ValuePtr>& params) {
  check(ckpt.params.size() == params.size(),
        "checkpoint holds " + std::to_string(ckpt.params.size()) + " parameters, model has " +
            std::to_string(params.size()));
  for (auto& [name, p] : params) {
    const auto it = ckpt.params.find(name);
    check(it != ckpt.params.end(), "checkpoint missing parameter '" + name + "'");
    check(it->second.same_shape(p->data),
          "checkpoint shape mismatch for '" + name + "': " + shape_string(it->second.shape) +
              " vs " + shape_string(p->data.shape));
    p->data = it->second;
  }
}

}  // namespace hybridmesh
