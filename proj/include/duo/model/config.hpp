#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "duo/numerics/ops.hpp"

namespace duo {

enum class AdjacencySharing { shared, per_frame };
enum class Connectivity { learnable, kinematic_tree };
enum class DecoderKind { fc, tcn };
enum class InitScheme { paper, paper_strict, glorot, he, naive_uniform };

inline const char* to_string(InitScheme s) {
  switch (s) {
  case InitScheme::paper: return "paper";
  case InitScheme::paper_strict: return "paper_strict";
  case InitScheme::glorot: return "glorot";
  case InitScheme::he: return "he";
  case InitScheme::naive_uniform: return "naive_uniform";
  }
  return "?";
}

inline InitScheme parse_init_scheme(const std::string& s) {
  if (s == "paper") return InitScheme::paper;
  if (s == "paper_strict") return InitScheme::paper_strict;
  if (s == "glorot") return InitScheme::glorot;
  if (s == "he") return InitScheme::he;
  if (s == "naive_uniform" || s == "uniform") return InitScheme::naive_uniform;
  throw ArgumentError("unknown init scheme '" + s + "'");
}

struct InitSpec {
  InitScheme scheme = InitScheme::paper;
  double bound = 1.0;  // naive_uniform only
};

struct DecoderConfig {
  DecoderKind kind = DecoderKind::fc;
  std::size_t kernel = 3;  // tcn only
  std::size_t layers = 2;  // tcn only
};

// Architecture hyperparameters. Depth is channels.size() - 1.
struct ModelConfig {
  std::size_t T_obs = 50;
  std::size_t N_fut = 25;
  std::size_t joints = 18;
  std::size_t bodies = 2;
  std::vector<std::size_t> channels = {3, 16, 16, 16, 16, 16, 16, 16, 3};
  AdjacencySharing sharing = AdjacencySharing::shared;
  Connectivity connectivity = Connectivity::learnable;
  bool separable = true;
  DecoderConfig decoder;
  bool attention = false;
  std::optional<std::size_t> hierarchy;  // node count P of the coarse level
  ActivationSpec activation{Activation::relu};
  std::optional<std::size_t> retain;  // DCT coefficients kept; all when unset
  bool frequency_encoding = true;
  bool global_residual = true;
  bool layer_residual = true;
  InitSpec init;

  std::size_t depth() const noexcept { return channels.empty() ? 0 : channels.size() - 1; }
  std::size_t nodes() const noexcept { return joints * bodies; }

  // Frames seen by the encoder: K coefficients under DCT, T_obs otherwise.
  std::size_t encoder_frames() const noexcept {
    return frequency_encoding ? retain.value_or(T_obs) : T_obs;
  }

  // Node count layer l (0-based) operates on; inner layers run at the coarse
  // level when the hierarchy is enabled.
  std::size_t layer_nodes(std::size_t l) const noexcept {
    if (hierarchy && l >= 1 && l + 1 < depth()) return *hierarchy;
    return nodes();
  }

  // Attention sits in front of layer index depth()/2, i.e. after layer
  // floor(L/2) counted from one.
  std::size_t attention_index() const noexcept { return depth() / 2; }
  std::size_t attention_nodes() const noexcept { return layer_nodes(attention_index()); }
  std::size_t attention_channels() const noexcept { return channels[attention_index()]; }

  // k of the variance-preserving bounds: 2 for ReLU, 1 otherwise.
  double init_gain() const noexcept { return activation.kind == Activation::relu ? 2.0 : 1.0; }

  void validate() const {
    auto bad = [](const std::string& m) { throw ArgumentError("model config: " + m); };
    if (channels.size() < 2) bad("channels must list at least two entries");
    for (auto c : channels)
      if (c == 0) bad("channel counts must be positive");
    if (channels.front() != 3 || channels.back() != 3) bad("first and last channel counts must be 3");
    if (T_obs == 0 || N_fut == 0 || joints == 0) bad("T_obs, N_fut and joints must be positive");
    if (bodies != 1 && bodies != 2) bad("bodies must be 1 or 2");
    if (retain && (*retain == 0 || *retain > T_obs)) bad("retain must lie in [1, T_obs]");
    if (retain && !frequency_encoding) bad("retain requires frequency_encoding");
    if (connectivity == Connectivity::kinematic_tree && !separable) bad("kinematic_tree connectivity requires separable layers");
    if (hierarchy) {
      if (*hierarchy == 0 || *hierarchy >= nodes()) bad("hierarchy node count must lie in [1, nodes)");
      if (depth() < 2) bad("hierarchy needs at least two layers");
    }
    if (attention) {
      if (bodies != 2) bad("attention needs two bodies");
      if (attention_nodes() % 2 != 0) bad("attention needs an even node count at its insertion point");
    }
    if (decoder.kind == DecoderKind::tcn) {
      if (decoder.kernel % 2 == 0) bad("tcn kernel must be odd");
      if (decoder.layers == 0) bad("tcn needs at least one layer");
    }
    if (activation.kind == Activation::leaky_relu && !(activation.slope > 0.0 && activation.slope < 1.0))
      bad("leaky_relu slope must lie in (0,1)");
  }
};

} // namespace duo
