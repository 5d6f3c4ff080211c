#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "duo/model/config.hpp"
#include "duo/skeleton.hpp"

namespace duo {

// The slot structs are instantiated with Tensor (stored parameters) and Var
// (parameters bound on a tape). Absent slots are empty / unbound.

template <class T>
struct LayerSlots {
  T spatial;   // A_s: [V,V] or [F,V,V]
  T temporal;  // A_t: [F,F] or [V,F,F]
  T joint;     // A_st: [F*V, F*V], non-separable layers only
  T weight;    // W: [C_in, C_out]
};

template <class T>
struct AttentionSlots {
  T w1, w2;  // [C,C]
  T w3, w4;  // [C,1]
};

template <class T>
struct HierarchySlots {
  T down;  // [V,P]
  T up;    // [P,V]
};

template <class T>
struct DecoderSlots {
  T weight;               // fc: [K,N]
  T bias;                 // fc: [N]
  std::vector<T> conv;    // tcn: [kernel, C, C] per layer
  std::vector<T> conv_bias;  // tcn: [C] per layer
  T resample;             // tcn: [K,N]
};

template <class T>
struct ModelSlots {
  std::vector<LayerSlots<T>> layers;
  std::optional<AttentionSlots<T>> attention;
  std::optional<HierarchySlots<T>> hierarchy;
  DecoderSlots<T> decoder;
};

using LayerParams = LayerSlots<Tensor>;
using AttentionParams = AttentionSlots<Tensor>;
using HierarchyParams = HierarchySlots<Tensor>;
using DecoderParams = DecoderSlots<Tensor>;
using ModelParams = ModelSlots<Tensor>;

namespace detail {
inline bool present(const Tensor& t) { return !t.empty(); }
} // namespace detail

// Visits present slots of `a` in a fixed order together with the matching
// slot of `b` (which must have the same outer structure).
template <class A, class B, class F>
void walk_slots(A& a, B& b, F&& f) {
  auto one = [&](const std::string& name, auto& x, auto& y) {
    if (detail::present(x)) f(name, x, y);
  };
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    one(p + "spatial", a.layers[l].spatial, b.layers[l].spatial);
    one(p + "temporal", a.layers[l].temporal, b.layers[l].temporal);
    one(p + "joint", a.layers[l].joint, b.layers[l].joint);
    one(p + "weight", a.layers[l].weight, b.layers[l].weight);
  }
  if (a.attention) {
    one("attention.w1", a.attention->w1, b.attention->w1);
    one("attention.w2", a.attention->w2, b.attention->w2);
    one("attention.w3", a.attention->w3, b.attention->w3);
    one("attention.w4", a.attention->w4, b.attention->w4);
  }
  if (a.hierarchy) {
    one("hierarchy.down", a.hierarchy->down, b.hierarchy->down);
    one("hierarchy.up", a.hierarchy->up, b.hierarchy->up);
  }
  one("decoder.weight", a.decoder.weight, b.decoder.weight);
  one("decoder.bias", a.decoder.bias, b.decoder.bias);
  for (std::size_t i = 0; i < a.decoder.conv.size(); ++i) {
    one("decoder.conv" + std::to_string(i), a.decoder.conv[i], b.decoder.conv[i]);
    one("decoder.conv_bias" + std::to_string(i), a.decoder.conv_bias[i], b.decoder.conv_bias[i]);
  }
  one("decoder.resample", a.decoder.resample, b.decoder.resample);
}

template <class P, class F>
void for_each_param(P& params, F&& f) {
  walk_slots(params, params, [&](const std::string& name, auto& x, auto&) { f(name, x); });
}

// Same outer structure as `p`, every slot unbound.
template <class T>
ModelSlots<T> like(const ModelParams& p) {
  ModelSlots<T> s;
  s.layers.resize(p.layers.size());
  if (p.attention) s.attention.emplace();
  if (p.hierarchy) s.hierarchy.emplace();
  s.decoder.conv.resize(p.decoder.conv.size());
  s.decoder.conv_bias.resize(p.decoder.conv_bias.size());
  return s;
}

// Flattened list of parameter tensors in slot order.
inline std::vector<Tensor> flatten(const ModelParams& p) {
  std::vector<Tensor> out;
  for_each_param(p, [&](const std::string&, const Tensor& t) { out.push_back(t); });
  return out;
}

inline std::vector<std::string> param_names(const ModelParams& p) {
  std::vector<std::string> out;
  for_each_param(p, [&](const std::string& n, const Tensor&) { out.push_back(n); });
  return out;
}

inline void unflatten(ModelParams& p, const std::vector<Tensor>& flat) {
  std::size_t i = 0;
  for_each_param(p, [&](const std::string& name, Tensor& t) {
    if (i >= flat.size() || flat[i].shape() != t.shape())
      throw DimensionError("unflatten: mismatch at " + name);
    t = flat[i++];
  });
  if (i != flat.size()) throw DimensionError("unflatten: too many tensors");
}

// Binds every parameter as a tape leaf; slot i is the i-th tensor in walk order.
inline ModelSlots<Var> bind(Tape& tape, const ModelParams& p) {
  auto v = like<Var>(p);
  std::size_t slot = 0;
  walk_slots(p, v, [&](const std::string&, const Tensor& t, Var& x) { x = tape.parameter(t, slot++); });
  return v;
}

// Same as bind, but as constants (no gradients).
inline ModelSlots<Var> bind_constant(Tape& tape, const ModelParams& p) {
  auto v = like<Var>(p);
  walk_slots(p, v, [&](const std::string&, const Tensor& t, Var& x) { x = tape.constant(t); });
  return v;
}

// Shapes of every parameter for a configuration, in slot order, with zeros.
inline ModelParams zero_params(const ModelConfig& cfg) {
  cfg.validate();
  ModelParams p;
  const std::size_t L = cfg.depth();
  const std::size_t F = cfg.encoder_frames();
  p.layers.resize(L);
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t V = cfg.layer_nodes(l);
    auto& lp = p.layers[l];
    if (cfg.separable) {
      if (cfg.sharing == AdjacencySharing::shared) {
        lp.spatial = Tensor({V, V});
        lp.temporal = Tensor({F, F});
      } else {
        lp.spatial = Tensor({F, V, V});
        lp.temporal = Tensor({V, F, F});
      }
    } else {
      lp.joint = Tensor({F * V, F * V});
    }
    lp.weight = Tensor({cfg.channels[l], cfg.channels[l + 1]});
  }
  if (cfg.attention) {
    const std::size_t C = cfg.attention_channels();
    p.attention = AttentionParams{Tensor({C, C}), Tensor({C, C}), Tensor({C, 1}), Tensor({C, 1})};
  }
  if (cfg.hierarchy) {
    const std::size_t V = cfg.nodes(), P = *cfg.hierarchy;
    p.hierarchy = HierarchyParams{Tensor({V, P}), Tensor({P, V})};
  }
  const std::size_t N = cfg.N_fut;
  const std::size_t C = cfg.channels.back();
  if (cfg.decoder.kind == DecoderKind::fc) {
    p.decoder.weight = Tensor({F, N});
    p.decoder.bias = Tensor({N});
  } else {
    for (std::size_t i = 0; i < cfg.decoder.layers; ++i) {
      p.decoder.conv.emplace_back(Shape{cfg.decoder.kernel, C, C});
      p.decoder.conv_bias.emplace_back(Shape{C});
    }
    p.decoder.resample = Tensor({F, N});
  }
  return p;
}

// Whether layer l's spatial adjacency is subject to the kinematic mask.
inline bool layer_is_masked(const ModelConfig& cfg, std::size_t l) {
  return cfg.connectivity == Connectivity::kinematic_tree && cfg.layer_nodes(l) == cfg.nodes();
}

// Zeroes adjacency entries outside the kinematic tree (no-op for learnable
// connectivity). Per-frame adjacencies are masked frame by frame.
inline void apply_kinematic_mask(const ModelConfig& cfg, const Tensor& mask, ModelParams& p) {
  if (cfg.connectivity != Connectivity::kinematic_tree) return;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    if (!layer_is_masked(cfg, l)) continue;
    auto& a = p.layers[l].spatial;
    const std::size_t m = mask.size();
    if (a.size() % m != 0) throw DimensionError("kinematic mask " + shape_str(mask.shape()) + " vs " + shape_str(a.shape()));
    for (std::size_t i = 0; i < a.size(); ++i) a[i] *= mask[i % m];
  }
}

// Number of learnable scalars. Under kinematic-tree connectivity, masked
// adjacency entries are fixed at zero and not counted.
inline std::size_t param_count(const ModelConfig& cfg, const SkeletonSpec* skeleton = nullptr) {
  const ModelParams p = zero_params(cfg);
  std::size_t n = 0;
  for_each_param(p, [&](const std::string&, const Tensor& t) { n += t.size(); });
  if (cfg.connectivity == Connectivity::kinematic_tree) {
    const SkeletonSpec sk = skeleton ? *skeleton : SkeletonSpec::binary_tree(cfg.joints, cfg.bodies);
    const Tensor mask = kinematic_mask(sk);
    std::size_t ones = 0;
    for (double v : mask.data()) ones += v != 0.0;
    const std::size_t masked_per_matrix = mask.size() - ones;
    const std::size_t frames = cfg.sharing == AdjacencySharing::per_frame ? cfg.encoder_frames() : 1;
    for (std::size_t l = 0; l < cfg.depth(); ++l)
      if (layer_is_masked(cfg, l)) n -= masked_per_matrix * frames;
  }
  return n;
}

} // namespace duo
