#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "hybridmesh/autodiff.hpp"

namespace hybridmesh {

// Per-parameter Adam moments. lr carries any schedule: the trainer rewrites
// it before each step, so adam_step never applies decay factors itself.
struct AdamState {
  Tensor m;
  Tensor v;
  std::int64_t step = 0;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
};

// AdamW update: weight decay is decoupled and applied to the parameter
// before the moment update, p -= lr * wd * p, then p -= lr * mhat / (sqrt(vhat) + eps).
inline void adam_step(std::map<std::string, ValuePtr>& params,
                      std::map<std::string, AdamState>& states) {
  for (auto& [name, p] : params) {
    check(p->has_grad, "adam_step: parameter '" + name + "' has no gradient");
    AdamState& st = states[name];
    if (st.m.size() == 0) {
      st.m = Tensor(p->data.shape);
      st.v = Tensor(p->data.shape);
    }
    check(st.m.same_shape(p->data), "adam_step: state shape mismatch for '" + name + "'");
    st.step += 1;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    double* w = p->data.ptr();
    const double* g = p->grad.ptr();
    double* m = st.m.ptr();
    double* v = st.v.ptr();
    const std::int64_t n = p->data.size();
    for (std::int64_t i = 0; i < n; ++i) {
      w[i] -= st.lr * st.weight_decay * w[i];
      m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * g[i];
      v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= st.lr * mhat / (std::sqrt(vhat) + st.epsilon);
    }
  }
}

inline void zero_grads(std::map<std::string, ValuePtr>& params) {
  for (auto& [name, p] : params) p->zero_grad();
}

}  // namespace hybridmesh
