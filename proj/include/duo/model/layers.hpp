#pragma once

#include <cstddef>
#include <utility>

#include "duo/model/params.hpp"
#include "duo/numerics/ops.hpp"

// Building blocks of the forecaster, on tape variables with a leading batch
// axis: activations are [B, F, V, C] (batch, frames, nodes, channels).
namespace duo::ops {

namespace detail {

inline void expect_rank(const char* op, Var x, std::size_t rank) {
  if (x.value().rank() != rank)
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " + shape_str(x.shape()));
}

} // namespace detail

// Mixes axis 1 (frames) with A_t: [F,F] shared or [V,F,F] per node.
inline Var temporal_mix(Var x, Var a_t) {
  detail::expect_rank("temporal_mix", x, 4);
  const auto& s = x.shape();
  const std::size_t B = s[0], F = s[1], V = s[2], C = s[3];
  const auto& as = a_t.shape();
  if (as.size() == 2) {
    if (as[0] != F || as[1] != F) throw DimensionError("temporal adjacency " + shape_str(as) + " vs input " + shape_str(s));
    return reshape(matmul(a_t, reshape(x, {B, F, V * C})), {B, F, V, C});
  }
  if (as.size() != 3 || as[0] != V || as[1] != F || as[2] != F)
    throw DimensionError("temporal adjacency " + shape_str(as) + " vs input " + shape_str(s));
  Var xp = reshape(permute(x, {2, 1, 0, 3}), {V, F, B * C});
  return permute(reshape(matmul(a_t, xp), {V, F, B, C}), {2, 1, 0, 3});
}

// Mixes axis 2 (nodes) with A_s: [V,V] shared or [F,V,V] per frame.
inline Var spatial_mix(Var x, Var a_s) {
  detail::expect_rank("spatial_mix", x, 4);
  const auto& s = x.shape();
  const std::size_t B = s[0], F = s[1], V = s[2], C = s[3];
  const auto& as = a_s.shape();
  if (as.size() == 2) {
    if (as[0] != V || as[1] != V) throw DimensionError("spatial adjacency " + shape_str(as) + " vs input " + shape_str(s));
    return reshape(matmul(a_s, reshape(x, {B * F, V, C})), {B, F, V, C});
  }
  if (as.size() != 3 || as[0] != F || as[1] != V || as[2] != V)
    throw DimensionError("spatial adjacency " + shape_str(as) + " vs input " + shape_str(s));
  Var xp = reshape(permute(x, {1, 2, 0, 3}), {F, V, B * C});
  return permute(reshape(matmul(a_s, xp), {F, V, B, C}), {2, 0, 1, 3});
}

// Channel map x W on the last axis.
inline Var channel_map(Var x, Var w) {
  const auto& s = x.shape();
  const auto& ws = w.shape();
  if (ws.size() != 2 || s.empty() || s.back() != ws[0])
    throw DimensionError("channel weight " + shape_str(ws) + " vs input " + shape_str(s));
  const std::size_t rows = x.value().size() / ws[0];
  Shape os = s;
  os.back() = ws[1];
  return reshape(matmul(reshape(x, {rows, ws[0]}), w), os);
}

// sigma(A_s A_t X W): temporal mixing first, then spatial, then channels.
inline Var separable_layer(Var x, Var a_s, Var a_t, Var w, ActivationSpec act) {
  return activation(channel_map(spatial_mix(temporal_mix(x, a_t), a_s), w), act);
}

// sigma(A X W) over the flattened (frame, node) axis; A is [F*V, F*V] with
// row index f*V + v.
inline Var nonseparable_layer(Var x, Var a_st, Var w, ActivationSpec act) {
  detail::expect_rank("nonseparable_layer", x, 4);
  const auto& s = x.shape();
  const std::size_t B = s[0], F = s[1], V = s[2], C = s[3];
  const auto& as = a_st.shape();
  if (as.size() != 2 || as[0] != F * V || as[1] != F * V)
    throw DimensionError("space-time adjacency " + shape_str(as) + " vs input " + shape_str(s));
  Var mixed = reshape(matmul(a_st, reshape(x, {B, F * V, C})), {B, F, V, C});
  return activation(channel_map(mixed, w), act);
}

inline Var gcn_layer(Var x, const LayerSlots<Var>& p, ActivationSpec act) {
  if (p.joint.valid()) return nonseparable_layer(x, p.joint, p.weight, act);
  return separable_layer(x, p.spatial, p.temporal, p.weight, act);
}

// Linear map over the node axis: x'[.., p, c] = sum_v M[v,p] x[.., v, c].
inline Var node_map(Var x, Var m) {
  detail::expect_rank("node_map", x, 4);
  const auto& s = x.shape();
  const auto& ms = m.shape();
  if (ms.size() != 2 || ms[0] != s[2]) throw DimensionError("node map " + shape_str(ms) + " vs input " + shape_str(s));
  const std::size_t B = s[0], F = s[1], C = s[3];
  return reshape(matmul(transpose(m), reshape(x, {B * F, s[2], C})), {B, F, ms[1], C});
}

struct AttentionOut {
  Var body1;    // [B*F, n, C]
  Var body2;    // [B*F, m, C]
  Var weights;  // eta: [B*F, n, m], softmax over m
  Var weights_t;  // [B*F, m, n], softmax over n
};

// Cross-person attention between two node groups b1 [B,F,n,C], b2 [B,F,m,C].
// Scores are leaky_relu(s1[j] + s2[k]) with s1 = (b1 W1) W3, s2 = (b2 W2) W4;
// body 1 aggregates body-2 features with eta and body 2 aggregates body-1
// features with the transposed weights (softmax over body-1 joints).
inline AttentionOut cross_attention(Var b1, Var b2, const AttentionSlots<Var>& p, double slope = 0.2) {
  detail::expect_rank("cross_attention", b1, 4);
  detail::expect_rank("cross_attention", b2, 4);
  const auto& s1 = b1.shape();
  const auto& s2 = b2.shape();
  if (s1[0] != s2[0] || s1[1] != s2[1] || s1[3] != s2[3])
    throw DimensionError("cross_attention: " + shape_str(s1) + " vs " + shape_str(s2));
  const std::size_t BF = s1[0] * s1[1], n = s1[2], m = s2[2], C = s1[3];
  Tape& tape = *b1.tape;
  Var h1 = reshape(channel_map(b1, p.w1), {BF, n, C});
  Var h2 = reshape(channel_map(b2, p.w2), {BF, m, C});
  Var e1 = matmul(h1, p.w3);                    // [BF, n, 1]
  Var e2 = reshape(matmul(h2, p.w4), {BF, 1, m});  // [BF, 1, m]
  Var rows = matmul(e1, tape.constant(Tensor::ones({1, m})));  // e1[j] broadcast over k
  Var cols = matmul(tape.constant(Tensor::ones({n, 1})), e2);  // e2[k] broadcast over j
  Var scores = activation(add(rows, cols), ActivationSpec{Activation::leaky_relu, slope});
  Var eta = softmax_last(scores);
  Var eta_t = softmax_last(permute(scores, {0, 2, 1}));
  return {matmul(eta, h2), matmul(eta_t, h1), eta, eta_t};
}

// Splits the node axis in two halves, attends across them, and returns the
// re-joined [B,F,V,C] attention output.
inline Var pair_attention(Var x, const AttentionSlots<Var>& p) {
  detail::expect_rank("pair_attention", x, 4);
  const auto& s = x.shape();
  const std::size_t V = s[2];
  if (V % 2 != 0) throw DimensionError("pair_attention: odd node count " + std::to_string(V));
  auto out = cross_attention(slice(x, 2, 0, V / 2), slice(x, 2, V / 2, V), p);
  return reshape(concat(out.body1, out.body2, 1), s);
}

// out[b,n,v,c] = sum_k D[k,n] h[b,k,v,c] (+ bias[n]).
inline Var frame_map(Var h, Var d) {
  detail::expect_rank("frame_map", h, 4);
  const auto& s = h.shape();
  const auto& ds = d.shape();
  if (ds.size() != 2 || ds[0] != s[1]) throw DimensionError("decoder weight " + shape_str(ds) + " vs input " + shape_str(s));
  const std::size_t B = s[0], V = s[2], C = s[3];
  return reshape(matmul(transpose(d), reshape(h, {B, s[1], V * C})), {B, ds[1], V, C});
}

inline Var fc_decode(Var h, Var weight, Var bias) {
  Var y = frame_map(h, weight);
  if (bias.value().size() != y.shape()[1])
    throw DimensionError("decoder bias " + shape_str(bias.shape()) + " vs output " + shape_str(y.shape()));
  return add_bias(y, bias, 1);
}

// Same-padded 1-D convolution along the frame axis; w is [kernel, C_in, C_out].
inline Var temporal_conv(Var x, Var w, Var bias) {
  detail::expect_rank("temporal_conv", x, 4);
  const auto& ws = w.shape();
  if (ws.size() != 3 || ws[1] != x.shape()[3]) throw DimensionError("conv weight " + shape_str(ws) + " vs input " + shape_str(x.shape()));
  if (ws[0] % 2 == 0) throw ArgumentError("temporal_conv: kernel must be odd");
  const long r = static_cast<long>(ws[0] / 2);
  Var acc;
  for (std::size_t o = 0; o < ws[0]; ++o) {
    // tap o reads frame k + (o - r)
    Var shifted = shift(x, 1, r - static_cast<long>(o));
    Var tap = reshape(slice(w, 0, o, o + 1), {ws[1], ws[2]});
    Var term = channel_map(shifted, tap);
    acc = acc.valid() ? add(acc, term) : term;
  }
  return add_bias(acc, bias, 3);
}

// Conv stack (activation between layers, none after the last) followed by a
// linear frame resampling K -> N.
inline Var tcn_decode(Var h, const DecoderSlots<Var>& p, ActivationSpec act) {
  if (p.conv.empty()) throw ArgumentError("tcn_decode: at least one conv layer required");
  Var x = h;
  for (std::size_t i = 0; i < p.conv.size(); ++i) {
    x = temporal_conv(x, p.conv[i], p.conv_bias[i]);
    if (i + 1 < p.conv.size()) x = activation(x, act);
  }
  return frame_map(x, p.resample);
}

} // namespace duo::ops
