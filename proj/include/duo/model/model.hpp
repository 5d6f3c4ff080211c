#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "duo/frequency.hpp"
#include "duo/model/layers.hpp"

namespace duo {

namespace ops {

// Encoder stack on [B, F, V, C_0] -> [B, F, V, C_L]. Per layer: attention
// (once, in front of layer L/2), the GCN layer, an identity skip when the
// channel count is unchanged, and the hierarchy projections after the first
// and before the last layer.
inline Var encode(Var x, const ModelConfig& cfg, const ModelSlots<Var>& p, std::vector<Var>* taps = nullptr) {
  const std::size_t L = cfg.depth();
  if (p.layers.size() != L)
    throw ContractError("encoder: config has " + std::to_string(L) + " layers, parameters " + std::to_string(p.layers.size()));
  if (cfg.attention != p.attention.has_value() || cfg.hierarchy.has_value() != p.hierarchy.has_value())
    throw ContractError("encoder: parameter set does not match the variant flags");
  if (taps) taps->push_back(x);
  for (std::size_t l = 0; l < L; ++l) {
    if (cfg.attention && l == cfg.attention_index()) x = add(x, pair_attention(x, *p.attention));
    Var y = gcn_layer(x, p.layers[l], cfg.activation);
    if (cfg.layer_residual && y.shape() == x.shape()) y = add(y, x);
    x = y;
    if (taps) taps->push_back(x);
    if (cfg.hierarchy && l == 0) x = node_map(x, p.hierarchy->down);
    if (cfg.hierarchy && l + 2 == L) x = node_map(x, p.hierarchy->up);
  }
  return x;
}

inline Var decode(Var h, const ModelConfig& cfg, const ModelSlots<Var>& p) {
  if (cfg.decoder.kind == DecoderKind::fc) return fc_decode(h, p.decoder.weight, p.decoder.bias);
  return tcn_decode(h, p.decoder, cfg.activation);
}

// Full pipeline on a batch x_in [B, T_obs, V, 3] -> [B, N, V, 3].
inline Var forecast(Var x_in, const ModelConfig& cfg, const ModelSlots<Var>& p) {
  const auto& s = x_in.shape();
  if (s.size() != 4 || s[1] != cfg.T_obs || s[2] != cfg.nodes() || s[3] != cfg.channels.front())
    throw DimensionError("forecast: input " + shape_str(s) + " does not match T_obs=" + std::to_string(cfg.T_obs) +
                         ", nodes=" + std::to_string(cfg.nodes()));
  Var z = cfg.frequency_encoding ? dct(x_in, cfg.encoder_frames()) : x_in;
  Var y = decode(encode(z, cfg, p), cfg, p);
  if (cfg.frequency_encoding) y = idct(y, cfg.N_fut);
  if (cfg.global_residual) {
    const Tensor& xv = x_in.value();
    const std::size_t B = s[0], T = s[1], VC = s[2] * s[3], N = cfg.N_fut;
    Tensor last({B, N, s[2], s[3]});
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t n = 0; n < N; ++n)
        std::copy_n(xv.data().data() + (b * T + T - 1) * VC, VC, last.data().data() + (b * N + n) * VC);
    y = add(y, x_in.tape->constant(std::move(last)));
  }
  return y;
}

} // namespace ops

namespace detail {

inline Tensor with_batch(const Tensor& x) {
  Shape s = x.shape();
  s.insert(s.begin(), 1);
  return x.reshaped(std::move(s));
}

inline Tensor drop_batch(const Tensor& x) {
  Shape s(x.shape().begin() + 1, x.shape().end());
  return x.reshaped(std::move(s));
}

inline LayerSlots<Var> bind_layer(Tape& t, const LayerParams& p) {
  LayerSlots<Var> v;
  if (!p.spatial.empty()) v.spatial = t.constant(p.spatial);
  if (!p.temporal.empty()) v.temporal = t.constant(p.temporal);
  if (!p.joint.empty()) v.joint = t.constant(p.joint);
  v.weight = t.constant(p.weight);
  return v;
}

} // namespace detail

// Single separable layer on x [T, V, C_in] -> [T, V, C_out].
inline Tensor layer_forward(const Tensor& x, const LayerParams& p, ActivationSpec act) {
  Tape t;
  auto v = detail::bind_layer(t, p);
  return detail::drop_batch(ops::separable_layer(t.constant(detail::with_batch(x)), v.spatial, v.temporal, v.weight, act).value());
}

// Single non-separable layer with A_st [T*V, T*V] on x [T, V, C].
inline Tensor nonseparable_layer_forward(const Tensor& x, const Tensor& a_st, const Tensor& w, ActivationSpec act) {
  Tape t;
  return detail::drop_batch(
      ops::nonseparable_layer(t.constant(detail::with_batch(x)), t.constant(a_st), t.constant(w), act).value());
}

// Encoder on frequency-domain input [K, V, C_0] -> [K, V, C_L].
inline Tensor encoder_forward(const Tensor& x, const ModelConfig& cfg, const ModelParams& p) {
  Tape t;
  auto v = bind_constant(t, p);
  return detail::drop_batch(ops::encode(t.constant(detail::with_batch(x)), cfg, v).value());
}

inline std::pair<Tensor, Tensor> cross_attention(const Tensor& b1, const Tensor& b2, const AttentionParams& p) {
  Tape t;
  AttentionSlots<Var> v{t.constant(p.w1), t.constant(p.w2), t.constant(p.w3), t.constant(p.w4)};
  auto out = ops::cross_attention(t.constant(detail::with_batch(b1)), t.constant(detail::with_batch(b2)), v);
  Shape s1 = b1.shape(), s2 = b2.shape();
  s1.back() = p.w1.extent(1);
  s2.back() = p.w2.extent(1);
  return {out.body1.value().reshaped(s1), out.body2.value().reshaped(s2)};
}

// Attention weights eta [T, n, m] for inspection.
inline Tensor attention_weights(const Tensor& b1, const Tensor& b2, const AttentionParams& p) {
  Tape t;
  AttentionSlots<Var> v{t.constant(p.w1), t.constant(p.w2), t.constant(p.w3), t.constant(p.w4)};
  auto out = ops::cross_attention(t.constant(detail::with_batch(b1)), t.constant(detail::with_batch(b2)), v);
  return out.weights.value();
}

enum class HierarchyDirection { down, up };

// Node-axis map on x [K, V, C] with the down [V,P] or up [P,V] matrix.
inline Tensor hierarchy_apply(const Tensor& x, const HierarchyParams& p, HierarchyDirection dir) {
  Tape t;
  const Tensor& m = dir == HierarchyDirection::down ? p.down : p.up;
  return detail::drop_batch(ops::node_map(t.constant(detail::with_batch(x)), t.constant(m)).value());
}

// h [K, V, C] -> [N, V, C] with weight [K, N] and bias [N].
inline Tensor fc_decode(const Tensor& h, const Tensor& weight, const Tensor& bias) {
  Tape t;
  return detail::drop_batch(ops::fc_decode(t.constant(detail::with_batch(h)), t.constant(weight), t.constant(bias)).value());
}

inline Tensor tcn_decode(const Tensor& h, const DecoderParams& p, ActivationSpec act) {
  Tape t;
  DecoderSlots<Var> v;
  for (std::size_t i = 0; i < p.conv.size(); ++i) {
    v.conv.push_back(t.constant(p.conv[i]));
    v.conv_bias.push_back(t.constant(p.conv_bias[i]));
  }
  v.resample = t.constant(p.resample);
  return detail::drop_batch(ops::tcn_decode(t.constant(detail::with_batch(h)), v, act).value());
}

// One window x_in [T_obs, V, 3] -> prediction [N, V, 3].
inline Tensor model_forward(const Tensor& x_in, const ModelConfig& cfg, const ModelParams& p) {
  Tape t;
  auto v = bind_constant(t, p);
  return detail::drop_batch(ops::forecast(t.constant(detail::with_batch(x_in)), cfg, v).value());
}

// Batched inference on x [B, T_obs, V, 3].
inline Tensor model_forward_batch(const Tensor& x, const ModelConfig& cfg, const ModelParams& p) {
  Tape t;
  auto v = bind_constant(t, p);
  return ops::forecast(t.constant(x), cfg, v).value();
}

} // namespace duo
