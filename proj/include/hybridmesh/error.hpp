#pragma once

#include <stdexcept>
#include <string>

namespace hybridmesh {

// Data or contract violation: the CLI maps this to exit code 2,
// usage errors (bad flags) to exit code 1.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

inline void check(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

}  // namespace hybridmesh
