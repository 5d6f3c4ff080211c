#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "duo/numerics/kernels.hpp"
#include "duo/numerics/tape.hpp"

namespace duo {

enum class Activation { linear, relu, tanh, leaky_relu };

struct ActivationSpec {
  Activation kind = Activation::relu;
  double slope = 0.2;  // leaky_relu only
};

inline const char* activation_name(Activation a) {
  switch (a) {
  case Activation::linear: return "linear";
  case Activation::relu: return "relu";
  case Activation::tanh: return "tanh";
  case Activation::leaky_relu: return "leaky_relu";
  }
  return "?";
}

inline Activation parse_activation(const std::string& s) {
  if (s == "linear") return Activation::linear;
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "leaky_relu") return Activation::leaky_relu;
  throw ArgumentError("unknown activation '" + s + "'");
}

} // namespace duo

// Differentiable operator set recorded on a Tape. Each op computes its value
// eagerly and registers the matching backward rule.
namespace duo::ops {

namespace detail {

inline Tape& tape_of(Var a) {
  if (!a.tape) throw ContractError("operation on an unbound Var");
  return *a.tape;
}

inline Tape& tape_of(Var a, Var b) {
  if (a.tape != b.tape) throw ContractError("operands recorded on different tapes");
  return tape_of(a);
}

inline void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

struct MatmulDims {
  std::size_t ba, bb, batch, m, k, n;
};

inline MatmulDims matmul_dims(const Shape& a, const Shape& b) {
  auto fail = [&] {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a) + " and " + shape_str(b));
  };
  if (a.size() < 2 || a.size() > 3 || b.size() < 2 || b.size() > 3) fail();
  MatmulDims d{};
  d.ba = a.size() == 3 ? a[0] : 1;
  d.bb = b.size() == 3 ? b[0] : 1;
  d.m = a[a.size() - 2];
  d.k = a[a.size() - 1];
  if (b[b.size() - 2] != d.k) fail();
  d.n = b[b.size() - 1];
  if (d.ba != d.bb && d.ba != 1 && d.bb != 1) fail();
  d.batch = std::max(d.ba, d.bb);
  return d;
}

// Split a shape around `axis` into (outer, mid, inner) element counts.
inline void split_axis(const Shape& s, std::size_t axis, std::size_t& outer, std::size_t& mid, std::size_t& inner) {
  outer = 1;
  inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  mid = s[axis];
}

// out = in with axes reordered (out axis i is in axis perm[i]); if
// accumulate, adds into out instead of overwriting.
inline void permute_into(const Tensor& in, const std::vector<std::size_t>& perm, Tensor& out, bool accumulate) {
  const Shape& is = in.shape();
  const std::size_t r = is.size();
  std::vector<std::size_t> in_stride(r, 1);
  for (std::size_t i = r; i-- > 1;) in_stride[i - 1] = in_stride[i] * is[i];
  std::vector<std::size_t> os(r), ostride(r);
  for (std::size_t i = 0; i < r; ++i) {
    os[i] = is[perm[i]];
    ostride[i] = in_stride[perm[i]];
  }
  const std::size_t last = os[r - 1];
  const std::size_t step = ostride[r - 1];
  std::vector<std::size_t> idx(r, 0);
  const double* src = in.data().data();
  double* dst = out.data().data();
  std::size_t off = 0;
  const std::size_t total = in.size();
  for (std::size_t o = 0; o < total; o += last) {
    const double* s = src + off;
    if (accumulate)
      for (std::size_t j = 0; j < last; ++j) dst[o + j] += s[j * step];
    else
      for (std::size_t j = 0; j < last; ++j) dst[o + j] = s[j * step];
    // advance the multi-index over all axes but the last
    for (std::size_t a = r - 1; a-- > 0;) {
      off += ostride[a];
      if (++idx[a] < os[a]) break;
      off -= ostride[a] * os[a];
      idx[a] = 0;
    }
  }
}

} // namespace detail

// out[b] = a[b] * b[b]; rank-2 operands and batch extent 1 broadcast.
inline Var matmul(Var a, Var b) {
  Tape& tape = detail::tape_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const auto d = detail::matmul_dims(av.shape(), bv.shape());
  Shape out_shape = (av.rank() == 2 && bv.rank() == 2) ? Shape{d.m, d.n} : Shape{d.batch, d.m, d.n};
  Tensor out(out_shape);
  const double* A = av.data().data();
  const double* B = bv.data().data();
  double* C = out.data().data();
  for (std::size_t i = 0; i < d.batch; ++i)
    kernels::gemm_acc(A + (d.ba == 1 ? 0 : i * d.m * d.k), B + (d.bb == 1 ? 0 : i * d.k * d.n),
                      C + i * d.m * d.n, d.m, d.k, d.n);
  return tape.push(std::move(out), {a.id, b.id}, [d](const Tensor& g, Tape::Grads& gr) {
    const double* G = g.data().data();
    const double* A = gr.in(0).data().data();
    const double* B = gr.in(1).data().data();
    if (gr.needs(0)) {
      double* dA = gr.at(0).data().data();
      std::vector<double> bt(d.k * d.n);
      for (std::size_t i = 0; i < d.batch; ++i) {
        if (d.bb != 1 || i == 0) kernels::transpose(B + (d.bb == 1 ? 0 : i * d.k * d.n), bt.data(), d.k, d.n);
        kernels::gemm_acc(G + i * d.m * d.n, bt.data(), dA + (d.ba == 1 ? 0 : i * d.m * d.k), d.m, d.n, d.k);
      }
    }
    if (gr.needs(1)) {
      double* dB = gr.at(1).data().data();
      for (std::size_t i = 0; i < d.batch; ++i)
        kernels::gemm_tn_acc(A + (d.ba == 1 ? 0 : i * d.m * d.k), G + i * d.m * d.n,
                             dB + (d.bb == 1 ? 0 : i * d.k * d.n), d.m, d.k, d.n);
    }
  });
}

inline Var add(Var a, Var b) {
  Tape& tape = detail::tape_of(a, b);
  detail::require_same_shape("add", a.value(), b.value());
  Tensor out = a.value();
  kernels::axpy(1.0, b.value().data(), out.data());
  return tape.push(std::move(out), {a.id, b.id}, [](const Tensor& g, Tape::Grads& gr) {
    for (std::size_t s = 0; s < 2; ++s)
      if (gr.needs(s)) kernels::axpy(1.0, g.data(), gr.at(s).data());
  });
}

inline Var sub(Var a, Var b) {
  Tape& tape = detail::tape_of(a, b);
  detail::require_same_shape("sub", a.value(), b.value());
  Tensor out = a.value();
  auto o = out.data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  return tape.push(std::move(out), {a.id, b.id}, [](const Tensor& g, Tape::Grads& gr) {
    if (gr.needs(0)) kernels::axpy(1.0, g.data(), gr.at(0).data());
    if (gr.needs(1)) kernels::axpy(-1.0, g.data(), gr.at(1).data());
  });
}

// Elementwise product.
inline Var mul(Var a, Var b) {
  Tape& tape = detail::tape_of(a, b);
  detail::require_same_shape("mul", a.value(), b.value());
  Tensor out = a.value();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return tape.push(std::move(out), {a.id, b.id}, [](const Tensor& g, Tape::Grads& gr) {
    for (std::size_t s = 0; s < 2; ++s) {
      if (!gr.needs(s)) continue;
      auto d = gr.at(s).data();
      const auto other = gr.in(1 - s).data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * other[i];
    }
  });
}

inline Var scale(Var a, double s) {
  Tensor out = a.value();
  for (auto& v : out.data()) v *= s;
  return detail::tape_of(a).push(std::move(out), {a.id}, [s](const Tensor& g, Tape::Grads& gr) {
    kernels::axpy(s, g.data(), gr.at(0).data());
  });
}

// x + bias broadcast along `axis` (bias holds extent(axis) values).
inline Var add_bias(Var x, Var bias, std::size_t axis) {
  Tape& tape = detail::tape_of(x, bias);
  const Tensor& xv = x.value();
  if (axis >= xv.rank() || bias.value().size() != xv.extent(axis))
    throw DimensionError("add_bias: bias " + shape_str(bias.value().shape()) + " vs " + shape_str(xv.shape()) +
                         " on axis " + std::to_string(axis));
  std::size_t outer, mid, inner;
  detail::split_axis(xv.shape(), axis, outer, mid, inner);
  Tensor out = xv;
  const auto bv = bias.value().data();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t m = 0; m < mid; ++m)
      for (std::size_t i = 0; i < inner; ++i) out[(o * mid + m) * inner + i] += bv[m];
  return tape.push(std::move(out), {x.id, bias.id}, [outer, mid, inner](const Tensor& g, Tape::Grads& gr) {
    if (gr.needs(0)) kernels::axpy(1.0, g.data(), gr.at(0).data());
    if (gr.needs(1)) {
      auto db = gr.at(1).data();
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t m = 0; m < mid; ++m) {
          double s = 0.0;
          for (std::size_t i = 0; i < inner; ++i) s += g[(o * mid + m) * inner + i];
          db[m] += s;
        }
    }
  });
}

inline double activate(double v, const ActivationSpec& a) {
  switch (a.kind) {
  case Activation::linear: return v;
  case Activation::relu: return v > 0.0 ? v : 0.0;
  case Activation::tanh: return std::tanh(v);
  case Activation::leaky_relu: return v >= 0.0 ? v : a.slope * v;
  }
  return v;
}

inline Var activation(Var x, ActivationSpec a) {
  if (a.kind == Activation::leaky_relu && !(a.slope > 0.0 && a.slope < 1.0))
    throw ArgumentError("leaky_relu slope must lie in (0,1)");
  if (a.kind == Activation::linear) return x;
  Tensor out = x.value();
  for (auto& v : out.data()) v = activate(v, a);
  return detail::tape_of(x).push(std::move(out), {x.id}, [a](const Tensor& g, Tape::Grads& gr) {
    auto d = gr.at(0).data();
    const auto xin = gr.in(0).data();
    const auto y = gr.out().data();
    switch (a.kind) {
    case Activation::relu:
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += xin[i] > 0.0 ? g[i] : 0.0;
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * (1.0 - y[i] * y[i]);
      break;
    case Activation::leaky_relu:
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += xin[i] >= 0.0 ? g[i] : a.slope * g[i];
      break;
    case Activation::linear: break;
    }
  });
}

inline Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return detail::tape_of(x).push(std::move(out), {x.id}, [](const Tensor& g, Tape::Grads& gr) {
    kernels::axpy(1.0, g.data(), gr.at(0).data());
  });
}

// Axis reordering: output axis i is input axis perm[i].
inline Var permute(Var x, std::vector<std::size_t> perm) {
  const Tensor& xv = x.value();
  if (perm.size() != xv.rank()) throw DimensionError("permute: rank mismatch for " + shape_str(xv.shape()));
  std::vector<bool> seen(perm.size(), false);
  for (auto p : perm) {
    if (p >= perm.size() || seen[p]) throw ArgumentError("permute: not a permutation");
    seen[p] = true;
  }
  Shape os(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) os[i] = xv.extent(perm[i]);
  Tensor out(os);
  detail::permute_into(xv, perm, out, false);
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
  return detail::tape_of(x).push(std::move(out), {x.id}, [inv](const Tensor& g, Tape::Grads& gr) {
    detail::permute_into(g, inv, gr.at(0), true);
  });
}

inline Var transpose(Var x) {
  if (x.value().rank() != 2) throw DimensionError("transpose: expected a matrix, got " + shape_str(x.shape()));
  return permute(x, {1, 0});
}

// Softmax over the last axis.
inline Var softmax_last(Var x) {
  const Tensor& xv = x.value();
  const std::size_t n = xv.extent(xv.rank() - 1);
  const std::size_t rows = xv.size() / n;
  Tensor out(xv.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data().data() + r * n;
    double* o = out.data().data() + r * n;
    const double mx = *std::max_element(in, in + n);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += (o[j] = std::exp(in[j] - mx));
    for (std::size_t j = 0; j < n; ++j) o[j] /= s;
  }
  return detail::tape_of(x).push(std::move(out), {x.id}, [n, rows](const Tensor& g, Tape::Grads& gr) {
    auto d = gr.at(0).data();
    const auto y = gr.out().data();
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g[r * n + j] * y[r * n + j];
      for (std::size_t j = 0; j < n; ++j) d[r * n + j] += y[r * n + j] * (g[r * n + j] - dot);
    }
  });
}

// Euclidean norm over the last axis; the last axis is dropped.
inline Var norm_last(Var x) {
  const Tensor& xv = x.value();
  const std::size_t n = xv.extent(xv.rank() - 1);
  const std::size_t rows = xv.size() / n;
  Shape os(xv.shape().begin(), xv.shape().end() - 1);
  Tensor out(os);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += xv[r * n + j] * xv[r * n + j];
    out[r] = std::sqrt(s);
  }
  return detail::tape_of(x).push(std::move(out), {x.id}, [n, rows](const Tensor& g, Tape::Grads& gr) {
    auto d = gr.at(0).data();
    const auto xin = gr.in(0).data();
    const auto y = gr.out().data();
    for (std::size_t r = 0; r < rows; ++r) {
      if (y[r] == 0.0) continue;  // subgradient 0 at the origin
      const double f = g[r] / y[r];
      for (std::size_t j = 0; j < n; ++j) d[r * n + j] += f * xin[r * n + j];
    }
  });
}

inline Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return detail::tape_of(x).push(Tensor(Shape{}, s), {x.id}, [](const Tensor& g, Tape::Grads& gr) {
    const double gv = g[0];
    for (auto& v : gr.at(0).data()) v += gv;
  });
}

inline Var mean(Var x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

// Elements [begin, end) along `axis`.
inline Var slice(Var x, std::size_t axis, std::size_t begin, std::size_t end) {
  const Tensor& xv = x.value();
  if (axis >= xv.rank() || begin >= end || end > xv.extent(axis))
    throw DimensionError("slice: [" + std::to_string(begin) + "," + std::to_string(end) + ") on axis " +
                         std::to_string(axis) + " of " + shape_str(xv.shape()));
  std::size_t outer, mid, inner;
  detail::split_axis(xv.shape(), axis, outer, mid, inner);
  Shape os = xv.shape();
  os[axis] = end - begin;
  Tensor out(os);
  const std::size_t w = (end - begin) * inner;
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(xv.data().data() + (o * mid + begin) * inner, w, out.data().data() + o * w);
  return detail::tape_of(x).push(std::move(out), {x.id}, [outer, mid, inner, begin, w](const Tensor& g, Tape::Grads& gr) {
    auto d = gr.at(0).data();
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < w; ++i) d[(o * mid + begin) * inner + i] += g[o * w + i];
  });
}

// Concatenation along `axis`; other extents must agree.
inline Var concat(Var a, Var b, std::size_t axis) {
  Tape& tape = detail::tape_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  bool ok = av.rank() == bv.rank() && axis < av.rank();
  for (std::size_t i = 0; ok && i < av.rank(); ++i) ok = i == axis || av.extent(i) == bv.extent(i);
  if (!ok) throw DimensionError("concat: " + shape_str(av.shape()) + " and " + shape_str(bv.shape()));
  std::size_t outer, ma, inner, mb;
  detail::split_axis(av.shape(), axis, outer, ma, inner);
  mb = bv.extent(axis);
  Shape os = av.shape();
  os[axis] = ma + mb;
  Tensor out(os);
  const std::size_t wa = ma * inner, wb = mb * inner;
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(av.data().data() + o * wa, wa, out.data().data() + o * (wa + wb));
    std::copy_n(bv.data().data() + o * wb, wb, out.data().data() + o * (wa + wb) + wa);
  }
  return tape.push(std::move(out), {a.id, b.id}, [outer, wa, wb](const Tensor& g, Tape::Grads& gr) {
    if (gr.needs(0)) {
      auto d = gr.at(0).data();
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < wa; ++i) d[o * wa + i] += g[o * (wa + wb) + i];
    }
    if (gr.needs(1)) {
      auto d = gr.at(1).data();
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < wb; ++i) d[o * wb + i] += g[o * (wa + wb) + wa + i];
    }
  });
}

// out[..., i, ...] = x[..., i - offset, ...] along `axis`, zero outside.
inline Var shift(Var x, std::size_t axis, long offset) {
  const Tensor& xv = x.value();
  if (axis >= xv.rank()) throw DimensionError("shift: axis out of range for " + shape_str(xv.shape()));
  std::size_t outer, mid, inner;
  detail::split_axis(xv.shape(), axis, outer, mid, inner);
  Tensor out(xv.shape());
  const long m = static_cast<long>(mid);
  for (std::size_t o = 0; o < outer; ++o)
    for (long i = 0; i < m; ++i) {
      const long s = i - offset;
      if (s < 0 || s >= m) continue;
      std::copy_n(xv.data().data() + (o * mid + static_cast<std::size_t>(s)) * inner, inner,
                  out.data().data() + (o * mid + static_cast<std::size_t>(i)) * inner);
    }
  return detail::tape_of(x).push(std::move(out), {x.id}, [outer, mid, inner, offset](const Tensor& g, Tape::Grads& gr) {
    auto d = gr.at(0).data();
    const long m = static_cast<long>(mid);
    for (std::size_t o = 0; o < outer; ++o)
      for (long i = 0; i < m; ++i) {
        const long s = i - offset;
        if (s < 0 || s >= m) continue;
        for (std::size_t k = 0; k < inner; ++k)
          d[(o * mid + static_cast<std::size_t>(s)) * inner + k] += g[(o * mid + static_cast<std::size_t>(i)) * inner + k];
      }
  });
}

} // namespace duo::ops
