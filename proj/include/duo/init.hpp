#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "duo/model/model.hpp"
#include "duo/numerics/rng.hpp"

namespace duo {

// Variance-preserving bound sqrt(k / n) for a fan of n under gain k.
inline double paper_bound(double k, double n) { return std::sqrt(k / n); }

// Half-width of the zero-mean uniform distribution for one matrix.
inline double init_bound(const InitSpec& spec, double k, double fan_in, double fan_out) {
  switch (spec.scheme) {
  case InitScheme::paper: return paper_bound(k, fan_in);
  case InitScheme::paper_strict: return std::sqrt(3.0) * paper_bound(k, fan_in);
  case InitScheme::glorot: return std::sqrt(6.0 / (fan_in + fan_out));
  case InitScheme::he: return std::sqrt(6.0 / fan_in);
  case InitScheme::naive_uniform:
    if (!(spec.bound > 0.0)) throw ArgumentError("naive_uniform bound must be positive");
    return spec.bound;
  }
  throw ArgumentError("unknown init scheme");
}

inline void fill_uniform(Tensor& t, Rng& rng, double bound) {
  for (auto& v : t.data()) v = rng.uniform(-bound, bound);
}

// Samples a separable layer: A_s over n_v = node count, A_t over n_t = frame
// count, W over its fan-in. A_st of a non-separable layer uses n = F*V.
inline void init_layer(LayerParams& p, const InitSpec& spec, double k, Rng& rng) {
  if (!p.spatial.empty()) {
    const double v = static_cast<double>(p.spatial.extent(p.spatial.rank() - 1));
    fill_uniform(p.spatial, rng, init_bound(spec, k, v, v));
  }
  if (!p.temporal.empty()) {
    const double f = static_cast<double>(p.temporal.extent(p.temporal.rank() - 1));
    fill_uniform(p.temporal, rng, init_bound(spec, k, f, f));
  }
  if (!p.joint.empty()) {
    const double n = static_cast<double>(p.joint.extent(1));
    fill_uniform(p.joint, rng, init_bound(spec, k, n, n));
  }
  fill_uniform(p.weight, rng, init_bound(spec, k, static_cast<double>(p.weight.extent(0)),
                                         static_cast<double>(p.weight.extent(1))));
}

// Fresh parameters for `cfg` under `spec`. Decoder, attention and hierarchy
// matrices use the same scheme with fan = input extent; biases start at 0.
// Kinematic-tree configurations get their spatial adjacencies masked.
inline ModelParams init_model(const ModelConfig& cfg, const InitSpec& spec, Rng& rng,
                              const SkeletonSpec* skeleton = nullptr) {
  ModelParams p = zero_params(cfg);
  const double k = cfg.init_gain();
  for (auto& l : p.layers) init_layer(l, spec, k, rng);
  auto matrix = [&](Tensor& t) {
    const double in = static_cast<double>(t.extent(0)), out = static_cast<double>(t.extent(1));
    fill_uniform(t, rng, init_bound(spec, k, in, out));
  };
  if (p.attention) {
    matrix(p.attention->w1);
    matrix(p.attention->w2);
    matrix(p.attention->w3);
    matrix(p.attention->w4);
  }
  if (p.hierarchy) {
    matrix(p.hierarchy->down);
    matrix(p.hierarchy->up);
  }
  if (!p.decoder.weight.empty()) matrix(p.decoder.weight);
  for (auto& c : p.decoder.conv) {
    const double in = static_cast<double>(c.extent(0) * c.extent(1)), out = static_cast<double>(c.extent(0) * c.extent(2));
    fill_uniform(c, rng, init_bound(spec, k, in, out));
  }
  if (!p.decoder.resample.empty()) matrix(p.decoder.resample);
  if (cfg.connectivity == Connectivity::kinematic_tree) {
    const SkeletonSpec sk = skeleton ? *skeleton : SkeletonSpec::binary_tree(cfg.joints, cfg.bodies);
    apply_kinematic_mask(cfg, kinematic_mask(sk), p);
  }
  return p;
}

struct ProbeLayerStats {
  std::size_t layer = 0;  // 0 = encoder input
  double ratio_mean = 0.0;
  double ratio_std = 0.0;
};

inline double population_std(const Tensor& t) {
  double m = 0.0;
  for (double v : t.data()) m += v;
  m /= static_cast<double>(t.size());
  double s = 0.0;
  for (double v : t.data()) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(t.size()));
}

// Pushes zero-mean Gaussian input of std `input_std` through freshly
// initialised encoders and reports, per layer, the mean and spread of the
// activation-std / input-std ratio across trials. Layer 0 is the input.
inline std::vector<ProbeLayerStats> variance_probe(const ModelConfig& cfg, const InitSpec& spec, std::size_t trials,
                                                   double input_std, std::uint64_t seed) {
  if (trials == 0) throw ArgumentError("variance_probe: trials must be at least 1");
  const std::size_t L = cfg.depth();
  const std::size_t F = cfg.encoder_frames();
  std::vector<std::vector<double>> ratios(L + 1);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    Rng rng = Rng(seed).split(trial);
    Rng init_rng = rng.split(1), data_rng = rng.split(2);
    std::vector<Var> taps;
    Tape tape;
    Tensor x = normal(data_rng, 0.0, input_std, {1, F, cfg.nodes(), cfg.channels.front()});
    const double in_std = population_std(x);
    if (L > 0) {
      ModelParams p = init_model(cfg, spec, init_rng);
      auto v = bind_constant(tape, p);
      ops::encode(tape.constant(x), cfg, v, &taps);
    } else {
      taps.push_back(tape.constant(x));
    }
    for (std::size_t l = 0; l <= L; ++l) ratios[l].push_back(population_std(taps[l].value()) / in_std);
  }
  std::vector<ProbeLayerStats> out;
  for (std::size_t l = 0; l <= L; ++l) {
    double m = 0.0;
    for (double r : ratios[l]) m += r;
    m /= static_cast<double>(trials);
    double s = 0.0;
    for (double r : ratios[l]) s += (r - m) * (r - m);
    s = trials > 1 ? std::sqrt(s / static_cast<double>(trials - 1)) : 0.0;
    out.push_back({l, m, s});
  }
  return out;
}

} // namespace duo
