#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "duo/data.hpp"
#include "duo/training.hpp"

// JSON run configuration. Every object is fail-closed: keys outside the
// documented set raise ConfigError, so typos never silently fall back to a
// default.
namespace duo::io {

using nlohmann::json;

inline constexpr int kConfigVersion = 1;

namespace detail {

inline void check_keys(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <class T>
void read_opt(const json& j, const char* key, std::optional<T>& out, const std::string& where) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) {
    out.reset();
    return;
  }
  T v{};
  read(j, key, v, where);
  out = v;
}

inline json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Model

inline ModelConfig model_from_json(const json& j, ModelConfig c = {}) {
  const std::string w = "model";
  detail::check_keys(j, {"T_obs", "N_fut", "joints", "bodies", "channels", "sharing", "connectivity", "separable", "decoder",
                         "attention", "hierarchy", "activation", "leaky_slope", "retain", "frequency_encoding",
                         "global_residual", "layer_residual", "init"},
                     w);
  detail::read(j, "T_obs", c.T_obs, w);
  detail::read(j, "N_fut", c.N_fut, w);
  detail::read(j, "joints", c.joints, w);
  detail::read(j, "bodies", c.bodies, w);
  detail::read(j, "channels", c.channels, w);
  detail::read(j, "separable", c.separable, w);
  detail::read(j, "attention", c.attention, w);
  detail::read_opt(j, "hierarchy", c.hierarchy, w);
  detail::read_opt(j, "retain", c.retain, w);
  detail::read(j, "frequency_encoding", c.frequency_encoding, w);
  detail::read(j, "global_residual", c.global_residual, w);
  detail::read(j, "layer_residual", c.layer_residual, w);
  if (j.contains("sharing")) {
    std::string s;
    detail::read(j, "sharing", s, w);
    if (s == "shared") c.sharing = AdjacencySharing::shared;
    else if (s == "per_frame") c.sharing = AdjacencySharing::per_frame;
    else throw ConfigError("model.sharing: expected shared or per_frame, got '" + s + "'");
  }
  if (j.contains("connectivity")) {
    std::string s;
    detail::read(j, "connectivity", s, w);
    if (s == "learnable") c.connectivity = Connectivity::learnable;
    else if (s == "kinematic_tree") c.connectivity = Connectivity::kinematic_tree;
    else throw ConfigError("model.connectivity: expected learnable or kinematic_tree, got '" + s + "'");
  }
  if (j.contains("activation")) {
    std::string s;
    detail::read(j, "activation", s, w);
    try {
      c.activation.kind = parse_activation(s);
    } catch (const ArgumentError& e) {
      throw ConfigError(std::string("model.activation: ") + e.what());
    }
  }
  detail::read(j, "leaky_slope", c.activation.slope, w);
  if (j.contains("decoder")) {
    const json& d = j.at("decoder");
    detail::check_keys(d, {"kind", "kernel", "layers"}, "model.decoder");
    if (d.contains("kind")) {
      std::string s;
      detail::read(d, "kind", s, "model.decoder");
      if (s == "fc") c.decoder.kind = DecoderKind::fc;
      else if (s == "tcn") c.decoder.kind = DecoderKind::tcn;
      else throw ConfigError("model.decoder.kind: expected fc or tcn, got '" + s + "'");
    }
    detail::read(d, "kernel", c.decoder.kernel, "model.decoder");
    detail::read(d, "layers", c.decoder.layers, "model.decoder");
  }
  if (j.contains("init")) {
    const json& i = j.at("init");
    detail::check_keys(i, {"scheme", "bound"}, "model.init");
    if (i.contains("scheme")) {
      std::string s;
      detail::read(i, "scheme", s, "model.init");
      try {
        c.init.scheme = parse_init_scheme(s);
      } catch (const ArgumentError& e) {
        throw ConfigError(std::string("model.init.scheme: ") + e.what());
      }
    }
    detail::read(i, "bound", c.init.bound, "model.init");
  }
  try {
    c.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

inline json model_to_json(const ModelConfig& c) {
  json j{{"T_obs", c.T_obs},
         {"N_fut", c.N_fut},
         {"joints", c.joints},
         {"bodies", c.bodies},
         {"channels", c.channels},
         {"sharing", c.sharing == AdjacencySharing::shared ? "shared" : "per_frame"},
         {"connectivity", c.connectivity == Connectivity::learnable ? "learnable" : "kinematic_tree"},
         {"separable", c.separable},
         {"decoder",
          {{"kind", c.decoder.kind == DecoderKind::fc ? "fc" : "tcn"}, {"kernel", c.decoder.kernel}, {"layers", c.decoder.layers}}},
         {"attention", c.attention},
         {"activation", activation_name(c.activation.kind)},
         {"leaky_slope", c.activation.slope},
         {"frequency_encoding", c.frequency_encoding},
         {"global_residual", c.global_residual},
         {"layer_residual", c.layer_residual},
         {"init", {{"scheme", to_string(c.init.scheme)}, {"bound", c.init.bound}}}};
  j["hierarchy"] = c.hierarchy ? json(*c.hierarchy) : json(nullptr);
  j["retain"] = c.retain ? json(*c.retain) : json(nullptr);
  return j;
}

// ---------------------------------------------------------------------------
// Training

inline TrainConfig train_from_json(const json& j, TrainConfig c = {}) {
  const std::string w = "train";
  detail::check_keys(j, {"optimizer", "lr", "beta1", "beta2", "eps", "momentum", "batch", "steps", "decay_every",
                         "decay_factor", "clip_norm"},
                     w);
  if (j.contains("optimizer")) {
    std::string s;
    detail::read(j, "optimizer", s, w);
    if (s == "adam") c.optimizer = OptimizerKind::adam;
    else if (s == "sgd") c.optimizer = OptimizerKind::sgd;
    else throw ConfigError("train.optimizer: expected adam or sgd, got '" + s + "'");
  }
  detail::read(j, "lr", c.lr, w);
  detail::read(j, "beta1", c.beta1, w);
  detail::read(j, "beta2", c.beta2, w);
  detail::read(j, "eps", c.eps, w);
  detail::read(j, "momentum", c.momentum, w);
  detail::read(j, "batch", c.batch, w);
  detail::read(j, "steps", c.steps, w);
  detail::read(j, "decay_every", c.decay_every, w);
  detail::read(j, "decay_factor", c.decay_factor, w);
  detail::read_opt(j, "clip_norm", c.clip_norm, w);
  try {
    c.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

inline json train_to_json(const TrainConfig& c) {
  json j{{"optimizer", c.optimizer == OptimizerKind::adam ? "adam" : "sgd"},
         {"lr", c.lr},
         {"beta1", c.beta1},
         {"beta2", c.beta2},
         {"eps", c.eps},
         {"momentum", c.momentum},
         {"batch", c.batch},
         {"steps", c.steps},
         {"decay_every", c.decay_every},
         {"decay_factor", c.decay_factor}};
  j["clip_norm"] = c.clip_norm ? json(*c.clip_norm) : json(nullptr);
  return j;
}

// ---------------------------------------------------------------------------
// Data

struct SyntheticSource {
  std::size_t sequences = 8;
  std::size_t frames = 100;
  std::uint64_t seed = 0;
  SynthStyle style;
};

struct DataConfig {
  std::string sequences;                  // CSV file or directory; empty when synthetic
  std::optional<SyntheticSource> synthetic;
  std::string skeleton;                   // empty: heap-ordered tree over model.joints
  std::optional<SplitConfig> split;       // absent: every sequence trains and tests
  Normalization normalization = Normalization::center_last;
  std::size_t stride = 1;
  std::size_t test_stride = 1;
};

inline std::string resolve(const std::string& base_dir, const std::string& p) {
  if (p.empty() || std::filesystem::path(p).is_absolute() || base_dir.empty()) return p;
  return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

inline DataConfig data_from_json(const json& j, const std::string& base_dir) {
  const std::string w = "data";
  detail::check_keys(j, {"sequences", "synthetic", "skeleton", "split", "normalization", "stride", "test_stride"}, w);
  DataConfig d;
  detail::read(j, "sequences", d.sequences, w);
  d.sequences = resolve(base_dir, d.sequences);
  detail::read(j, "skeleton", d.skeleton, w);
  d.skeleton = resolve(base_dir, d.skeleton);
  detail::read(j, "stride", d.stride, w);
  detail::read(j, "test_stride", d.test_stride, w);
  if (d.stride == 0 || d.test_stride == 0) throw ConfigError("data: strides must be at least 1");
  if (j.contains("normalization")) {
    std::string s;
    detail::read(j, "normalization", s, w);
    d.normalization = parse_normalization(s);
  }
  if (j.contains("split")) {
    const json& s = j.at("split");
    d.split = s.is_string() ? SplitConfig::from_json(detail::load_json(resolve(base_dir, s.get<std::string>())))
                            : SplitConfig::from_json(s);
  }
  if (j.contains("synthetic")) {
    const json& s = j.at("synthetic");
    detail::check_keys(s, {"sequences", "frames", "seed", "style"}, "data.synthetic");
    SyntheticSource src;
    detail::read(s, "sequences", src.sequences, "data.synthetic");
    detail::read(s, "frames", src.frames, "data.synthetic");
    detail::read(s, "seed", src.seed, "data.synthetic");
    if (s.contains("style")) {
      const json& st = s.at("style");
      src.style = SynthStyle::from_json(st.is_string() ? detail::load_json(resolve(base_dir, st.get<std::string>())) : st);
    }
    d.synthetic = src;
  }
  if (d.sequences.empty() == !d.synthetic) throw ConfigError("data: give exactly one of 'sequences' and 'synthetic'");
  return d;
}

// ---------------------------------------------------------------------------
// Run

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  std::vector<double> horizons_ms = default_horizons();
  std::uint64_t seed = 0;
  std::string output;
  std::string source;  // path the config was read from
};

inline RunConfig run_from_json(const json& j, const std::string& base_dir) {
  detail::check_keys(j, {"version", "seed", "model", "train", "data", "horizons_ms", "output"}, "config");
  if (!j.contains("version")) throw ConfigError("config: missing 'version'");
  int version = 0;
  detail::read(j, "version", version, "config");
  if (version != kConfigVersion) throw ConfigError("config: unsupported version " + std::to_string(version));
  RunConfig r;
  detail::read(j, "seed", r.seed, "config");
  if (j.contains("model")) r.model = model_from_json(j.at("model"));
  if (j.contains("train")) r.train = train_from_json(j.at("train"));
  if (!j.contains("data")) throw ConfigError("config: missing 'data'");
  r.data = data_from_json(j.at("data"), base_dir);
  detail::read(j, "horizons_ms", r.horizons_ms, "config");
  detail::read(j, "output", r.output, "config");
  r.output = resolve(base_dir, r.output);
  r.train.seed = r.seed;
  return r;
}

inline RunConfig load_run_config(const std::string& path) {
  RunConfig r = run_from_json(detail::load_json(path), std::filesystem::path(path).parent_path().string());
  r.source = path;
  return r;
}

// Fully resolved snapshot, written next to the outputs of a run.
inline json run_to_json(const RunConfig& r) {
  json d{{"normalization", to_string(r.data.normalization)}, {"stride", r.data.stride}, {"test_stride", r.data.test_stride}};
  if (!r.data.sequences.empty()) d["sequences"] = r.data.sequences;
  if (!r.data.skeleton.empty()) d["skeleton"] = r.data.skeleton;
  if (r.data.synthetic)
    d["synthetic"] = {{"sequences", r.data.synthetic->sequences},
                      {"frames", r.data.synthetic->frames},
                      {"seed", r.data.synthetic->seed},
                      {"style", r.data.synthetic->style.to_json()}};
  if (r.data.split)
    d["split"] = {{"train_actions", r.data.split->train_actions},
                  {"test_actions", r.data.split->test_actions},
                  {"train_couples", r.data.split->train_couples},
                  {"test_couples", r.data.split->test_couples}};
  return {{"version", kConfigVersion}, {"seed", r.seed},           {"model", model_to_json(r.model)},
          {"train", train_to_json(r.train)}, {"data", d}, {"horizons_ms", r.horizons_ms}};
}

// ---------------------------------------------------------------------------
// Materialized data

struct Dataset {
  SkeletonSpec skeleton;
  std::vector<SequenceRecord> train, test;
  WindowSet train_windows, test_windows;
};

inline SkeletonSpec load_skeleton(const DataConfig& d, const ModelConfig& m) {
  SkeletonSpec sk = d.skeleton.empty() ? SkeletonSpec::binary_tree(m.joints, m.bodies) : SkeletonSpec::load(d.skeleton, m.bodies);
  if (sk.joints() != m.joints)
    throw ConfigError("skeleton has " + std::to_string(sk.joints()) + " joints, model expects " + std::to_string(m.joints));
  return sk;
}

inline Dataset load_dataset(const RunConfig& r) {
  Dataset ds;
  ds.skeleton = load_skeleton(r.data, r.model);
  std::vector<SequenceRecord> all;
  if (r.data.synthetic) {
    const auto& s = *r.data.synthetic;
    all = synth_generate(Rng(s.seed), s.sequences, s.frames, ds.skeleton, s.style);
  } else {
    all = load_sequences(r.data.sequences, ds.skeleton);
  }
  for (const auto& s : all)
    if (std::abs(s.fps - 1000.0 / kFrameMs) > 1e-9)
      throw IngestionError("sequence " + s.id + " is at " + std::to_string(s.fps) + " fps; resample to 25 fps first");
  if (r.data.split) {
    std::tie(ds.train, ds.test) = split(all, *r.data.split);
  } else {
    ds.train = all;
    ds.test = all;
  }
  ds.train_windows = window(ds.train, r.model.T_obs, r.model.N_fut, r.data.stride, r.data.normalization, &ds.skeleton);
  ds.test_windows = window(ds.test, r.model.T_obs, r.model.N_fut, r.data.test_stride, r.data.normalization, &ds.skeleton);
  return ds;
}

} // namespace duo::io
