#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "hybridmesh/sparse.hpp"
#include "hybridmesh/tensor.hpp"

namespace hybridmesh {

// Node in the reverse-mode differentiation graph. Values are created by the
// op constructors below; every op records its parents and a closure that
// scatters the node's gradient back to them. backward() walks the graph in
// reverse topological order, so gradients accumulate additively and a second
// backward() call without zeroing accumulates again.
struct DiffValue {
  Tensor data;
  Tensor grad;  // allocated on first accumulation
  bool requires_grad = false;
  bool has_grad = false;
  const char* op = "leaf";
  std::string name;  // non-empty for named parameters
  std::vector<std::shared_ptr<DiffValue>> parents;
  std::function<void(const DiffValue&)> backward_fn;

  void accumulate(const Tensor& g) {
    check(g.same_shape(data), std::string("gradient shape mismatch on op ") + op);
    if (!has_grad) {
      grad = Tensor(data.shape);
      has_grad = true;
    }
    const double* src = g.ptr();
    double* dst = grad.ptr();
    const std::int64_t n = g.size();
    for (std::int64_t i = 0; i < n; ++i) dst[i] += src[i];
  }

  void zero_grad() {
    has_grad = false;
    grad = Tensor();
  }

  double scalar() const {
    check(data.size() == 1, std::string("scalar() on non-scalar op ") + op);
    return data.data[0];
  }
};

using ValuePtr = std::shared_ptr<DiffValue>;

inline void debug_check_finite(const Tensor& t, const char* op) {
#ifdef HYBRIDMESH_DEBUG_CHECKS
  for (double v : t.data)
    check(std::isfinite(v), std::string("non-finite input to op ") + op);
#else
  (void)t;
  (void)op;
#endif
}

inline ValuePtr constant(Tensor t) {
  auto v = std::make_shared<DiffValue>();
  v->data = std::move(t);
  return v;
}

inline ValuePtr variable(Tensor t, std::string name = {}) {
  auto v = std::make_shared<DiffValue>();
  v->data = std::move(t);
  v->requires_grad = true;
  v->name = std::move(name);
  return v;
}

namespace detail {

inline ValuePtr make_node(const char* op, Tensor data, std::vector<ValuePtr> parents,
                          std::function<void(const DiffValue&)> backward_fn) {
  auto v = std::make_shared<DiffValue>();
  v->data = std::move(data);
  v->op = op;
  for (const auto& p : parents)
    if (p->requires_grad) v->requires_grad = true;
  if (v->requires_grad) {
    v->parents = std::move(parents);
    v->backward_fn = std::move(backward_fn);
  }
  return v;
}

inline void require_same_shape(const char* op, const ValuePtr& a, const ValuePtr& b) {
  check(a->data.same_shape(b->data), std::string(op) + " shape mismatch " +
                                         shape_string(a->data.shape) + " vs " +
                                         shape_string(b->data.shape));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra ops
// ---------------------------------------------------------------------------

inline ValuePtr matmul(const ValuePtr& a, const ValuePtr& b) {
  check(a->data.rank() == 2 && b->data.rank() == 2 && a->data.dim(1) == b->data.dim(0),
        "matmul shape mismatch " + shape_string(a->data.shape) + " x " +
            shape_string(b->data.shape));
  debug_check_finite(a->data, "matmul");
  debug_check_finite(b->data, "matmul");
  const int M = a->data.dim(0), K = a->data.dim(1), N = b->data.dim(1);
  Tensor out(Shape{M, N});
  gemm_nn(a->data.ptr(), b->data.ptr(), out.ptr(), M, K, N);
  return detail::make_node("matmul", std::move(out), {a, b}, [a, b, M, K, N](const DiffValue& y) {
    if (a->requires_grad) {
      Tensor bt(Shape{N, K});
      transpose(b->data.ptr(), bt.ptr(), K, N);
      Tensor da(Shape{M, K});
      gemm_nn(y.grad.ptr(), bt.ptr(), da.ptr(), M, N, K);
      a->accumulate(da);
    }
    if (b->requires_grad) {
      Tensor db(Shape{K, N});
      gemm_tn(a->data.ptr(), y.grad.ptr(), db.ptr(), K, M, N);
      b->accumulate(db);
    }
  });
}

// y = S · x with a constant sparse matrix; the transpose is captured for the
// backward pass. S is copied into the node, callers keep ownership.
inline ValuePtr sparse_matmul(const CsrMatrix& S, const ValuePtr& x) {
  check(x->data.rank() == 2 && x->data.dim(0) == S.cols,
        "sparse_matmul shape mismatch: matrix cols " + std::to_string(S.cols) + " vs " +
            shape_string(x->data.shape));
  debug_check_finite(x->data, "sparse_matmul");
  Tensor out = S.multiply(x->data);
  auto st = std::make_shared<CsrMatrix>(S.transposed());
  return detail::make_node("sparse_matmul", std::move(out), {x}, [x, st](const DiffValue& y) {
    if (x->requires_grad) x->accumulate(st->multiply(y.grad));
  });
}

inline ValuePtr gather_rows(const ValuePtr& x, std::vector<int> rows) {
  check(x->data.rank() == 2, "gather_rows needs a rank-2 input");
  const int C = x->data.dim(1), M = x->data.dim(0);
  for (int r : rows) check(r >= 0 && r < M, "gather_rows index out of range");
  Tensor out(Shape{static_cast<int>(rows.size()), C});
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < C; ++j)
      out[static_cast<std::int64_t>(i) * C + j] =
          x->data[static_cast<std::int64_t>(rows[i]) * C + j];
  auto idx = std::make_shared<std::vector<int>>(std::move(rows));
  return detail::make_node("gather_rows", std::move(out), {x}, [x, idx, C](const DiffValue& y) {
    if (!x->requires_grad) return;
    Tensor dx(x->data.shape);
    for (std::size_t i = 0; i < idx->size(); ++i)
      for (int j = 0; j < C; ++j)
        dx[static_cast<std::int64_t>((*idx)[i]) * C + j] +=
            y.grad[static_cast<std::int64_t>(i) * C + j];
    x->accumulate(dx);
  });
}

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

inline ValuePtr relu(const ValuePtr& x) {
  debug_check_finite(x->data, "relu");
  Tensor out(x->data.shape);
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = x->data[i] > 0.0 ? x->data[i] : 0.0;
  return detail::make_node("relu", std::move(out), {x}, [x](const DiffValue& y) {
    if (!x->requires_grad) return;
    Tensor dx(x->data.shape);
    // subgradient at 0 is 0
    for (std::int64_t i = 0; i < dx.size(); ++i)
      dx[i] = x->data[i] > 0.0 ? y.grad[i] : 0.0;
    x->accumulate(dx);
  });
}

inline ValuePtr exp(const ValuePtr& x) {
  debug_check_finite(x->data, "exp");
  Tensor out(x->data.shape);
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::exp(x->data[i]);
  return detail::make_node("exp", std::move(out), {x}, [x](const DiffValue& y) {
    if (!x->requires_grad) return;
    Tensor dx(x->data.shape);
    for (std::int64_t i = 0; i < dx.size(); ++i) dx[i] = y.grad[i] * y.data[i];
    x->accumulate(dx);
  });
}

inline ValuePtr log(const ValuePtr& x) {
  debug_check_finite(x->data, "log");
  Tensor out(x->data.shape);
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::log(x->data[i]);
  return detail::make_node("log", std::move(out), {x}, [x](const DiffValue& y) {
    if (!x->requires_grad) return;
    Tensor dx(x->data.shape);
    for (std::int64_t i = 0; i < dx.size(); ++i) dx[i] = y.grad[i] / x->data[i];
    x->accumulate(dx);
  });
}

inline ValuePtr sqrt(const ValuePtr& x) {
  debug_check_finite(x->data, "sqrt");
  Tensor out(x->data.shape);
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(x->data[i]);
  return detail::make_node("sqrt", std::move(out), {x}, [x](const DiffValue& y) {
    if (!x->requires_grad) return;
    Tensor dx(x->data.shape);
    for (std::int64_t i = 0; i < dx.size(); ++i) dx[i] = 0.5 * y.grad[i] / y.data[i];
    x->accumulate(dx);
  });
}

inline ValuePtr mul(const ValuePtr& a, const ValuePtr& b) {
  detail::require_same_shape("mul", a, b);
  debug_check_finite(a->data, "mul");
  debug_check_finite(b->data, "mul");
  Tensor out(a->data.shape);
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a->data[i] * b->data[i];
  return detail::make_node("mul", std::move(out), {a, b}, [a, b](const DiffValue& y) {
    if (a->requires_grad) {
      Tensor da(a->data.shape);
      for (std::int64_t i = 0; i < da.size(); ++i) da[i] = y.grad[i] * b->data[i];
      a->accumulate(da);
    }
    if (b->requires_grad) {
      Tensor db(b->data.shape);
      for (std::int64_t i = 0; i < db.size(); ++i) db[i] = y.grad[i] * a->data[i];
      b->accumulate(db);
    }
  });
}

inline ValuePtr sub(const ValuePtr& a, const ValuePtr& b) {
  detail::require_same_shape("sub", a, b);
  Tensor out(a->data.shape);
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a->data[i] - b->data[i];
  return detail::make_node("sub", std::move(out), {a, b}, [a, b](const DiffValue& y) {
    if (a->requires_grad) a->accumulate(y.grad);
    if (b->requires_grad) {
      Tensor db(b->data.shape);
      for (std::int64_t i = 0; i < db.size(); ++i) db[i] = -y.grad[i];
      b->accumulate(db);
    }
  });
}

// add accepts equal shapes, or a rank-1 b broadcast over the last axis.
inline ValuePtr add(const ValuePtr& a, const ValuePtr& b) {
  const bool broadcast = !a->data.same_shape(b->data);
  if (broadcast) {
    check(b->data.rank() == 1 && a->data.rank() >= 1 &&
              a->data.dim(a->data.rank() - 1) == b->data.dim(0),
          "add shape mismatch " + shape_string(a->data.shape) + " vs " +
              shape_string(b->data.shape));
  }
  Tensor out(a->data.shape);
  if (broadcast) {
    const std::int64_t C = b->data.size();
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a->data[i] + b->data[i % C];
  } else {
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a->data[i] + b->data[i];
  }
  return detail::make_node("add", std::move(out), {a, b}, [a, b, broadcast](const DiffValue& y) {
    if (a->requires_grad) a->accumulate(y.grad);
    if (b->requires_grad) {
      if (broadcast) {
        Tensor db(b->data.shape);
        const std::int64_t C = b->data.size();
        for (std::int64_t i = 0; i < y.grad.size(); ++i) db[i % C] += y.grad[i];
        b->accumulate(db);
      } else {
        b->accumulate(y.grad);
      }
    }
  });
}

inline ValuePtr scale(const ValuePtr& x, double s) {
  Tensor out(x->data.shape);
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = s * x->data[i];
  return detail::make_node("scale", std::move(out), {x}, [x, s](const DiffValue& y) {
    if (!x->requires_grad) return;
    Tensor dx(x->data.shape);
    for (std::int64_t i = 0; i < dx.size(); ++i) dx[i] = s * y.grad[i];
    x->accumulate(dx);
  });
}

inline ValuePtr shift(const ValuePtr& x, double c) {
  Tensor out(x->data.shape);
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = x->data[i] + c;
  return detail::make_node("shift", std::move(out), {x}, [x](const DiffValue& y) {
    if (x->requires_grad) x->accumulate(y.grad);
  });
}

// clamp(x) = lo + relu(x−lo) − relu(x−hi), a composition of listed ops.
inline ValuePtr clamp(const ValuePtr& x, double lo, double hi) {
  return shift(sub(relu(shift(x, -lo)), relu(shift(x, -hi))), lo);
}

// 1/x for strictly positive x, as exp(−log(x)).
inline ValuePtr reciprocal(const ValuePtr& x) { return exp(scale(log(x), -1.0)); }

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

inline ValuePtr reshape(const ValuePtr& x, Shape target) {
  check(shape_numel(target) == x->data.size(),
        "reshape element count mismatch " + shape_string(x->data.shape) + " -> " +
            shape_string(target));
  Tensor out(std::move(target), x->data.data);
  return detail::make_node("reshape", std::move(out), {x}, [x](const DiffValue& y) {
    if (!x->requires_grad) return;
    x->accumulate(Tensor(x->data.shape, y.grad.data));
  });
}

inline ValuePtr concat(const std::vector<ValuePtr>& parts, int axis) {
  check(!parts.empty(), "concat of zero tensors");
  const int rank = parts[0]->data.rank();
  check(axis >= 0 && axis < rank, "concat axis out of range");
  Shape out_shape = parts[0]->data.shape;
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const Shape& s = parts[i]->data.shape;
    check(static_cast<int>(s.size()) == rank, "concat rank mismatch");
    for (int d = 0; d < rank; ++d)
      if (d != axis)
        check(s[static_cast<std::size_t>(d)] == out_shape[static_cast<std::size_t>(d)],
              "concat shape mismatch on axis " + std::to_string(d));
    out_shape[static_cast<std::size_t>(axis)] += s[static_cast<std::size_t>(axis)];
  }
  std::int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= out_shape[static_cast<std::size_t>(d)];
  for (int d = axis + 1; d < rank; ++d) inner *= out_shape[static_cast<std::size_t>(d)];

  Tensor out(out_shape);
  const std::int64_t out_axis = out_shape[static_cast<std::size_t>(axis)];
  std::int64_t offset = 0;
  for (const auto& p : parts) {
    const std::int64_t ax = p->data.dim(axis);
    for (std::int64_t o = 0; o < outer; ++o) {
      const double* src = p->data.ptr() + o * ax * inner;
      double* dst = out.ptr() + (o * out_axis + offset) * inner;
      std::copy(src, src + ax * inner, dst);
    }
    offset += ax;
  }
  return detail::make_node(
      "concat", std::move(out), parts, [parts, axis, outer, inner, out_axis](const DiffValue& y) {
        std::int64_t offset = 0;
        for (const auto& p : parts) {
          const std::int64_t ax = p->data.dim(axis);
          if (p->requires_grad) {
            Tensor dp(p->data.shape);
            for (std::int64_t o = 0; o < outer; ++o) {
              const double* src = y.grad.ptr() + (o * out_axis + offset) * inner;
              std::copy(src, src + ax * inner, dp.ptr() + o * ax * inner);
            }
            p->accumulate(dp);
          }
          offset += ax;
        }
      });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

inline ValuePtr sum(const ValuePtr& x) {
  double s = 0.0;
  for (std::int64_t i = 0; i < x->data.size(); ++i) s += x->data[i];
  return detail::make_node("sum", Tensor::scalar(s), {x}, [x](const DiffValue& y) {
    if (!x->requires_grad) return;
    x->accumulate(Tensor::full(x->data.shape, y.grad.data[0]));
  });
}

inline ValuePtr mean(const ValuePtr& x) {
  check(x->data.size() > 0, "mean of an empty tensor");
  double s = 0.0;
  for (std::int64_t i = 0; i < x->data.size(); ++i) s += x->data[i];
  const double inv = 1.0 / static_cast<double>(x->data.size());
  return detail::make_node("mean", Tensor::scalar(s * inv), {x}, [x, inv](const DiffValue& y) {
    if (!x->requires_grad) return;
    x->accumulate(Tensor::full(x->data.shape, y.grad.data[0] * inv));
  });
}

// ---------------------------------------------------------------------------
// Layer normalization over the last axis with learnable per-channel affine.
// ---------------------------------------------------------------------------

inline ValuePtr layer_norm(const ValuePtr& x, const ValuePtr& gamma, const ValuePtr& beta,
                           double eps = 1e-5) {
  check(x->data.rank() >= 1, "layer_norm needs rank >= 1");
  const int C = x->data.dim(x->data.rank() - 1);
  check(gamma->data.rank() == 1 && gamma->data.dim(0) == C, "layer_norm gamma size mismatch");
  check(beta->data.rank() == 1 && beta->data.dim(0) == C, "layer_norm beta size mismatch");
  debug_check_finite(x->data, "layer_norm");
  const std::int64_t R = x->data.size() / C;

  Tensor out(x->data.shape);
  auto mean_v = std::make_shared<std::vector<double>>(static_cast<std::size_t>(R));
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(R));
  for (std::int64_t r = 0; r < R; ++r) {
    const double* xr = x->data.ptr() + r * C;
    double m = 0.0;
    for (int j = 0; j < C; ++j) m += xr[j];
    m /= C;
    double var = 0.0;
    for (int j = 0; j < C; ++j) var += (xr[j] - m) * (xr[j] - m);
    var /= C;
    const double is = 1.0 / std::sqrt(var + eps);
    (*mean_v)[static_cast<std::size_t>(r)] = m;
    (*inv_std)[static_cast<std::size_t>(r)] = is;
    double* yr = out.ptr() + r * C;
    for (int j = 0; j < C; ++j)
      yr[j] = (xr[j] - m) * is * gamma->data[j] + beta->data[j];
  }
  return detail::make_node(
      "layer_norm", std::move(out), {x, gamma, beta},
      [x, gamma, beta, mean_v, inv_std, R, C](const DiffValue& y) {
        Tensor dgamma(gamma->data.shape), dbeta(beta->data.shape);
        Tensor dx(x->data.shape);
        for (std::int64_t r = 0; r < R; ++r) {
          const double m = (*mean_v)[static_cast<std::size_t>(r)];
          const double is = (*inv_std)[static_cast<std::size_t>(r)];
          const double* xr = x->data.ptr() + r * C;
          const double* gy = y.grad.ptr() + r * C;
          double sum_g = 0.0, sum_gx = 0.0;
          for (int j = 0; j < C; ++j) {
            const double xhat = (xr[j] - m) * is;
            const double g = gy[j] * gamma->data[j];
            sum_g += g;
            sum_gx += g * xhat;
            dgamma[j] += gy[j] * xhat;
            dbeta[j] += gy[j];
          }
          double* dxr = dx.ptr() + r * C;
          for (int j = 0; j < C; ++j) {
            const double xhat = (xr[j] - m) * is;
            const double g = gy[j] * gamma->data[j];
            dxr[j] = is * (g - sum_g / C - xhat * sum_gx / C);
          }
        }
        if (x->requires_grad) x->accumulate(dx);
        if (gamma->requires_grad) gamma->accumulate(dgamma);
        if (beta->requires_grad) beta->accumulate(dbeta);
      });
}

// ---------------------------------------------------------------------------
// Convolutions. Feature maps are channel-last: [H,W,C] and [D,H,W,C].
// Weights are [kh,kw,Cin,Cout] / [kd,kh,kw,Cin,Cout], bias optional [Cout].
// Stride is 1; pad is symmetric zero padding. The forward pass runs one GEMM
// per kernel offset per output row, accumulating into the output panel.
// ---------------------------------------------------------------------------

namespace detail {

struct ConvSpec {
  int D = 1, H = 0, W = 0, Cin = 0;   // input dims (D=1 for 2d)
  int kd = 1, kh = 0, kw = 0, Cout = 0;
  int pad = 0;
  int OD = 1, OH = 0, OW = 0;
};

inline void conv_forward(const ConvSpec& s, const double* x, const double* w, double* y) {
  for (int kz = 0; kz < s.kd; ++kz)
    for (int ky = 0; ky < s.kh; ++ky)
      for (int kx = 0; kx < s.kw; ++kx) {
        const double* panel =
            w + ((static_cast<std::size_t>(kz) * s.kh + ky) * s.kw + kx) * s.Cin * s.Cout;
        const int dz = kz - (s.kd > 1 ? s.pad : 0);
        const int dy = ky - s.pad, dx = kx - s.pad;
        const int oz_lo = std::max(0, -dz), oz_hi = std::min(s.OD, s.D - dz);
        const int oy_lo = std::max(0, -dy), oy_hi = std::min(s.OH, s.H - dy);
        const int ox_lo = std::max(0, -dx), ox_hi = std::min(s.OW, s.W - dx);
        if (ox_hi <= ox_lo) continue;
        const int run = ox_hi - ox_lo;
        for (int oz = oz_lo; oz < oz_hi; ++oz)
          for (int oy = oy_lo; oy < oy_hi; ++oy) {
            const double* a =
                x + ((static_cast<std::size_t>(oz + dz) * s.H + (oy + dy)) * s.W + (ox_lo + dx)) *
                        s.Cin;
            double* c =
                y + ((static_cast<std::size_t>(oz) * s.OH + oy) * s.OW + ox_lo) * s.Cout;
            gemm_nn(a, panel, c, run, s.Cin, s.Cout);
          }
      }
}

inline void conv_backward_data(const ConvSpec& s, const double* gy, const double* w, double* gx) {
  std::vector<double> panel_t(static_cast<std::size_t>(s.Cout) * s.Cin);
  for (int kz = 0; kz < s.kd; ++kz)
    for (int ky = 0; ky < s.kh; ++ky)
      for (int kx = 0; kx < s.kw; ++kx) {
        const double* panel =
            w + ((static_cast<std::size_t>(kz) * s.kh + ky) * s.kw + kx) * s.Cin * s.Cout;
        transpose(panel, panel_t.data(), s.Cin, s.Cout);
        const int dz = kz - (s.kd > 1 ? s.pad : 0);
        const int dy = ky - s.pad, dx = kx - s.pad;
        const int oz_lo = std::max(0, -dz), oz_hi = std::min(s.OD, s.D - dz);
        const int oy_lo = std::max(0, -dy), oy_hi = std::min(s.OH, s.H - dy);
        const int ox_lo = std::max(0, -dx), ox_hi = std::min(s.OW, s.W - dx);
        if (ox_hi <= ox_lo) continue;
        const int run = ox_hi - ox_lo;
        for (int oz = oz_lo; oz < oz_hi; ++oz)
          for (int oy = oy_lo; oy < oy_hi; ++oy) {
            const double* a =
                gy + ((static_cast<std::size_t>(oz) * s.OH + oy) * s.OW + ox_lo) * s.Cout;
            double* c =
                gx + ((static_cast<std::size_t>(oz + dz) * s.H + (oy + dy)) * s.W + (ox_lo + dx)) *
                         s.Cin;
            gemm_nn(a, panel_t.data(), c, run, s.Cout, s.Cin);
          }
      }
}

inline void conv_backward_weights(const ConvSpec& s, const double* x, const double* gy,
                                  double* gw) {
  for (int kz = 0; kz < s.kd; ++kz)
    for (int ky = 0; ky < s.kh; ++ky)
      for (int kx = 0; kx < s.kw; ++kx) {
        double* panel =
            gw + ((static_cast<std::size_t>(kz) * s.kh + ky) * s.kw + kx) * s.Cin * s.Cout;
        const int dz = kz - (s.kd > 1 ? s.pad : 0);
        const int dy = ky - s.pad, dx = kx - s.pad;
        const int oz_lo = std::max(0, -dz), oz_hi = std::min(s.OD, s.D - dz);
        const int oy_lo = std::max(0, -dy), oy_hi = std::min(s.OH, s.H - dy);
        const int ox_lo = std::max(0, -dx), ox_hi = std::min(s.OW, s.W - dx);
        if (ox_hi <= ox_lo) continue;
        const int run = ox_hi - ox_lo;
        for (int oz = oz_lo; oz < oz_hi; ++oz)
          for (int oy = oy_lo; oy < oy_hi; ++oy) {
            const double* a =
                x + ((static_cast<std::size_t>(oz + dz) * s.H + (oy + dy)) * s.W + (ox_lo + dx)) *
                        s.Cin;
            const double* b =
                gy + ((static_cast<std::size_t>(oz) * s.OH + oy) * s.OW + ox_lo) * s.Cout;
            gemm_tn(a, b, panel, s.Cin, run, s.Cout);
          }
      }
}

inline ValuePtr conv_node(const char* op, const ConvSpec& s, const ValuePtr& x, const ValuePtr& w,
                          const ValuePtr& bias, Shape out_shape) {
  debug_check_finite(x->data, op);
  debug_check_finite(w->data, op);
  Tensor out(std::move(out_shape));
  conv_forward(s, x->data.ptr(), w->data.ptr(), out.ptr());
  if (bias) {
    const std::int64_t positions = out.size() / s.Cout;
    for (std::int64_t p = 0; p < positions; ++p) {
      double* row = out.ptr() + p * s.Cout;
      for (int j = 0; j < s.Cout; ++j) row[j] += bias->data[j];
    }
  }
  std::vector<ValuePtr> parents = bias ? std::vector<ValuePtr>{x, w, bias}
                                       : std::vector<ValuePtr>{x, w};
  return detail::make_node(op, std::move(out), std::move(parents),
                           [s, x, w, bias](const DiffValue& y) {
                             if (x->requires_grad) {
                               Tensor dx(x->data.shape);
                               conv_backward_data(s, y.grad.ptr(), w->data.ptr(), dx.ptr());
                               x->accumulate(dx);
                             }
                             if (w->requires_grad) {
                               Tensor dw(w->data.shape);
                               conv_backward_weights(s, x->data.ptr(), y.grad.ptr(), dw.ptr());
                               w->accumulate(dw);
                             }
                             if (bias && bias->requires_grad) {
                               Tensor db(bias->data.shape);
                               const std::int64_t positions = y.grad.size() / s.Cout;
                               for (std::int64_t p = 0; p < positions; ++p) {
                                 const double* row = y.grad.ptr() + p * s.Cout;
                                 for (int j = 0; j < s.Cout; ++j) db[j] += row[j];
                               }
                               bias->accumulate(db);
                             }
                           });
}

}  // namespace detail

inline ValuePtr conv2d(const ValuePtr& x, const ValuePtr& w, const ValuePtr& bias, int pad) {
  check(x->data.rank() == 3 && w->data.rank() == 4,
        "conv2d expects x [H,W,Cin], w [kh,kw,Cin,Cout]");
  detail::ConvSpec s;
  s.H = x->data.dim(0);
  s.W = x->data.dim(1);
  s.Cin = x->data.dim(2);
  s.kh = w->data.dim(0);
  s.kw = w->data.dim(1);
  s.Cout = w->data.dim(3);
  s.pad = pad;
  check(w->data.dim(2) == s.Cin, "conv2d channel mismatch " + shape_string(x->data.shape) +
                                     " vs " + shape_string(w->data.shape));
  if (bias)
    check(bias->data.rank() == 1 && bias->data.dim(0) == s.Cout, "conv2d bias size mismatch");
  s.OH = s.H + 2 * pad - s.kh + 1;
  s.OW = s.W + 2 * pad - s.kw + 1;
  check(s.OH > 0 && s.OW > 0, "conv2d output would be empty");
  return detail::conv_node("conv2d", s, x, w, bias, Shape{s.OH, s.OW, s.Cout});
}

inline ValuePtr conv3d(const ValuePtr& x, const ValuePtr& w, const ValuePtr& bias, int pad) {
  check(x->data.rank() == 4 && w->data.rank() == 5,
        "conv3d expects x [D,H,W,Cin], w [kd,kh,kw,Cin,Cout]");
  detail::ConvSpec s;
  s.D = x->data.dim(0);
  s.H = x->data.dim(1);
  s.W = x->data.dim(2);
  s.Cin = x->data.dim(3);
  s.kd = w->data.dim(0);
  s.kh = w->data.dim(1);
  s.kw = w->data.dim(2);
  s.Cout = w->data.dim(4);
  s.pad = pad;
  check(w->data.dim(3) == s.Cin, "conv3d channel mismatch " + shape_string(x->data.shape) +
                                     " vs " + shape_string(w->data.shape));
  if (bias)
    check(bias->data.rank() == 1 && bias->data.dim(0) == s.Cout, "conv3d bias size mismatch");
  s.OD = s.D + 2 * (s.kd > 1 ? pad : 0) - s.kd + 1;
  s.OH = s.H + 2 * pad - s.kh + 1;
  s.OW = s.W + 2 * pad - s.kw + 1;
  check(s.OD > 0 && s.OH > 0 && s.OW > 0, "conv3d output would be empty");
  return detail::conv_node("conv3d", s, x, w, bias, Shape{s.OD, s.OH, s.OW, s.Cout});
}

// ---------------------------------------------------------------------------
// Max pooling, kernel = stride, floor output size, ties to the lowest index.
// maxpool3d takes an anisotropic (kd,kh,kw) kernel.
// ---------------------------------------------------------------------------

namespace detail {

inline ValuePtr maxpool_node(const char* op, const ValuePtr& x, int D, int H, int W, int C,
                             int kd, int kh, int kw, bool rank3) {
  const int OD = D / kd, OH = H / kh, OW = W / kw;
  check(OD > 0 && OH > 0 && OW > 0,
        std::string(op) + " output would be empty for input " + shape_string(x->data.shape));
  Shape out_shape = rank3 ? Shape{OH, OW, C} : Shape{OD, OH, OW, C};
  Tensor out(out_shape);
  auto argmax = std::make_shared<std::vector<std::int64_t>>(static_cast<std::size_t>(out.size()));
  std::int64_t o = 0;
  for (int oz = 0; oz < OD; ++oz)
    for (int oy = 0; oy < OH; ++oy)
      for (int ox = 0; ox < OW; ++ox)
        for (int c = 0; c < C; ++c, ++o) {
          double best = -1e308;
          std::int64_t best_idx = -1;
          for (int iz = oz * kd; iz < oz * kd + kd; ++iz)
            for (int iy = oy * kh; iy < oy * kh + kh; ++iy)
              for (int ix = ox * kw; ix < ox * kw + kw; ++ix) {
                const std::int64_t idx =
                    ((static_cast<std::int64_t>(iz) * H + iy) * W + ix) * C + c;
                if (x->data[idx] > best) {
                  best = x->data[idx];
                  best_idx = idx;
                }
              }
          out[o] = best;
          (*argmax)[static_cast<std::size_t>(o)] = best_idx;
        }
  return detail::make_node(op, std::move(out), {x}, [x, argmax](const DiffValue& y) {
    if (!x->requires_grad) return;
    Tensor dx(x->data.shape);
    for (std::int64_t i = 0; i < y.grad.size(); ++i)
      dx[(*argmax)[static_cast<std::size_t>(i)]] += y.grad[i];
    x->accumulate(dx);
  });
}

}  // namespace detail

inline ValuePtr maxpool2d(const ValuePtr& x, int kh, int kw) {
  check(x->data.rank() == 3, "maxpool2d expects [H,W,C]");
  return detail::maxpool_node("maxpool2d", x, 1, x->data.dim(0), x->data.dim(1), x->data.dim(2),
                              1, kh, kw, true);
}

inline ValuePtr maxpool3d(const ValuePtr& x, int kd, int kh, int kw) {
  check(x->data.rank() == 4, "maxpool3d expects [D,H,W,C]");
  return detail::maxpool_node("maxpool3d", x, x->data.dim(0), x->data.dim(1), x->data.dim(2),
                              x->data.dim(3), kd, kh, kw, false);
}

// ---------------------------------------------------------------------------
// Backward pass and gradient checking
// ---------------------------------------------------------------------------

inline void backward(const ValuePtr& root) {
  check(root->data.size() == 1, "backward needs a scalar root, got " +
                                    shape_string(root->data.shape));
  // iterative post-order DFS; reverse post-order is a topological order
  std::vector<DiffValue*> order;
  std::unordered_set<DiffValue*> visited;
  std::vector<std::pair<DiffValue*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      DiffValue* parent = node->parents[next++].get();
      if (visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root->accumulate(Tensor::full(root->data.shape, 1.0));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    DiffValue* node = *it;
    if (node->has_grad && node->backward_fn) node->backward_fn(*node);
  }
}

// Max over coordinates of |analytic − central difference| / max(1, |analytic|).
inline double grad_check(const std::function<ValuePtr(const ValuePtr&)>& f, const Tensor& x,
                         double eps = 1e-5) {
  check(eps > 0.0 && eps <= 1e-2, "grad_check eps out of range");
  auto leaf = variable(x);
  auto out = f(leaf);
  check(out->data.size() == 1, "grad_check function must be scalar-valued");
  backward(out);
  const Tensor analytic = leaf->has_grad ? leaf->grad : Tensor(x.shape);

  double max_err = 0.0;
  for (std::int64_t i = 0; i < x.size(); ++i) {
    Tensor xp = x, xm = x;
    xp[i] += eps;
    xm[i] -= eps;
    const double fp = f(constant(std::move(xp)))->scalar();
    const double fm = f(constant(std::move(xm)))->scalar();
    const double numeric = (fp - fm) / (2.0 * eps);
    const double err = std::fabs(analytic[i] - numeric) / std::max(1.0, std::fabs(analytic[i]));
    if (err > max_err) max_err = err;
  }
  return max_err;
}

}  // namespace hybridmesh
