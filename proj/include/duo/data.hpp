#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "duo/numerics/rng.hpp"
#include "duo/skeleton.hpp"

namespace duo {

// One recorded sequence; frames is [F, bodies*J, 3] in millimeters.
struct SequenceRecord {
  std::string id;
  std::string action;
  std::string couple;
  double fps = 25.0;
  Tensor frames;

  std::size_t length() const { return frames.extent(0); }
  std::size_t nodes() const { return frames.extent(1); }
};

inline constexpr const char* kSequenceHeader = "seq_id,action,couple,fps,frame,body,joint,x,y,z";

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

template <class T>
T parse_field(const std::string& s, const std::string& where) {
  std::istringstream in(s);
  T v{};
  in >> v;
  if (!in || !(in >> std::ws).eof()) throw IngestionError(where + ": cannot parse '" + s + "'");
  return v;
}

// Rows of one sequence while it is being read.
struct PendingSequence {
  SequenceRecord head;
  std::vector<std::vector<double>> frames;  // per frame, nodes*3 values
  std::vector<std::vector<char>> seen;
};

} // namespace detail

// Parses the sequence CSV from a stream. Sequences are returned in order of
// first appearance; frames must be 0-based, consecutive and non-decreasing
// within each seq_id, and every frame must carry all bodies*J joints once.
inline std::vector<SequenceRecord> read_sequences(std::istream& in, const SkeletonSpec& skeleton,
                                                  const std::string& source = "<stream>") {
  const std::size_t J = skeleton.joints(), bodies = skeleton.bodies, V = skeleton.nodes();
  std::vector<SequenceRecord> out;
  std::string line;
  if (!std::getline(in, line)) return out;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kSequenceHeader) throw IngestionError(source + ": expected header '" + kSequenceHeader + "'");

  std::vector<detail::PendingSequence> pending;
  std::map<std::string, std::size_t> index;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const std::string where = source + ":" + std::to_string(lineno);
    auto f = detail::split_csv(line);
    if (f.size() != 10) throw IngestionError(where + ": expected 10 fields, got " + std::to_string(f.size()));
    auto [it, fresh] = index.try_emplace(f[0], pending.size());
    if (fresh) {
      detail::PendingSequence p;
      p.head.id = f[0];
      p.head.action = f[1];
      p.head.couple = f[2];
      p.head.fps = detail::parse_field<double>(f[3], where);
      if (!(p.head.fps > 0.0)) throw IngestionError(where + ": fps must be positive");
      pending.push_back(std::move(p));
    }
    auto& seq = pending[it->second];
    if (f[1] != seq.head.action || f[2] != seq.head.couple || detail::parse_field<double>(f[3], where) != seq.head.fps)
      throw IngestionError(where + ": sequence " + f[0] + " changes action, couple or fps");
    const auto frame = detail::parse_field<long long>(f[4], where);
    const auto body = detail::parse_field<long long>(f[5], where);
    const auto joint = detail::parse_field<long long>(f[6], where);
    if (body < 0 || static_cast<std::size_t>(body) >= bodies) throw IngestionError(where + ": body index out of range");
    if (joint < 0 || static_cast<std::size_t>(joint) >= J) throw IngestionError(where + ": joint index out of range");
    const std::size_t cur = seq.frames.size();
    if (frame < 0 || (cur == 0 && frame != 0) || (cur > 0 && static_cast<std::size_t>(frame) + 1 < cur) ||
        static_cast<std::size_t>(frame) > cur)
      throw IngestionError(where + ": sequence " + f[0] + " frame index " + std::to_string(frame) +
                           " is not monotone and consecutive from 0");
    if (static_cast<std::size_t>(frame) == cur) {
      if (cur > 0 && std::count(seq.seen.back().begin(), seq.seen.back().end(), 1) != static_cast<long>(V))
        throw IngestionError(where + ": sequence " + f[0] + " frame " + std::to_string(cur - 1) + " is missing joints");
      seq.frames.emplace_back(V * 3, 0.0);
      seq.seen.emplace_back(V, 0);
    }
    const std::size_t node = static_cast<std::size_t>(body) * J + static_cast<std::size_t>(joint);
    auto& seen = seq.seen[static_cast<std::size_t>(frame)][node];
    if (seen) throw IngestionError(where + ": duplicate joint in sequence " + f[0] + " frame " + std::to_string(frame));
    seen = 1;
    for (std::size_t a = 0; a < 3; ++a)
      seq.frames[static_cast<std::size_t>(frame)][node * 3 + a] = detail::parse_field<double>(f[7 + a], where);
  }

  for (auto& p : pending) {
    for (std::size_t fr = 0; fr < p.seen.size(); ++fr)
      if (std::count(p.seen[fr].begin(), p.seen[fr].end(), 1) != static_cast<long>(V))
        throw IngestionError(source + ": sequence " + p.head.id + " frame " + std::to_string(fr) + " is missing joints");
    std::vector<double> flat;
    flat.reserve(p.frames.size() * V * 3);
    for (auto& fr : p.frames) flat.insert(flat.end(), fr.begin(), fr.end());
    p.head.frames = Tensor({p.frames.size(), V, 3}, std::move(flat));
    out.push_back(std::move(p.head));
  }
  return out;
}

// Loads one CSV file, or every *.csv in a directory in path-sorted order.
inline std::vector<SequenceRecord> load_sequences(const std::string& path, const SkeletonSpec& skeleton) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  if (fs::is_directory(path)) {
    for (const auto& e : fs::directory_iterator(path))
      if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
    std::sort(files.begin(), files.end());
  } else {
    files.emplace_back(path);
  }
  std::vector<SequenceRecord> out;
  for (const auto& f : files) {
    std::ifstream in(f);
    if (!in) throw IngestionError("cannot open sequence file " + f.string());
    auto part = read_sequences(in, skeleton, f.string());
    for (auto& s : part) out.push_back(std::move(s));
  }
  return out;
}

inline void write_sequences(std::ostream& out, const std::vector<SequenceRecord>& seqs, std::size_t joints) {
  out << kSequenceHeader << '\n';
  char buf[160];
  for (const auto& s : seqs) {
    const std::size_t F = s.length(), V = s.nodes();
    if (V % joints != 0) throw DimensionError("write_sequences: node count not a multiple of the joint count");
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t v = 0; v < V; ++v) {
        const double* p = s.frames.data().data() + (f * V + v) * 3;
        std::snprintf(buf, sizeof buf, ",%zu,%zu,%zu,%.6f,%.6f,%.6f\n", f, v / joints, v % joints, p[0] + 0.0,
                      p[1] + 0.0, p[2] + 0.0);
        out << s.id << ',' << s.action << ',' << s.couple << ',' << s.fps << buf;
      }
  }
}

inline void save_sequences(const std::string& path, const std::vector<SequenceRecord>& seqs, std::size_t joints) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write " + path);
  write_sequences(out, seqs, joints);
}

// ---------------------------------------------------------------------------
// Normalization and windowing

enum class Normalization { none, center_last, center_mean };

inline Normalization parse_normalization(const std::string& s) {
  if (s == "none") return Normalization::none;
  if (s == "center_last") return Normalization::center_last;
  if (s == "center_mean") return Normalization::center_mean;
  throw ConfigError("unknown normalization mode '" + s + "'");
}

inline const char* to_string(Normalization n) {
  switch (n) {
  case Normalization::none: return "none";
  case Normalization::center_last: return "center_last";
  case Normalization::center_mean: return "center_mean";
  }
  return "?";
}

// Midpoint of the bodies' root joints at one frame of a [F, V, 3] block.
inline std::array<double, 3> root_midpoint(const Tensor& frames, std::size_t frame, const SkeletonSpec& sk) {
  const std::size_t V = frames.extent(1), J = sk.joints();
  std::array<double, 3> c{0.0, 0.0, 0.0};
  for (std::size_t b = 0; b < sk.bodies; ++b)
    for (std::size_t a = 0; a < 3; ++a) c[a] += frames[(frame * V + b * J + sk.root) * 3 + a];
  for (auto& v : c) v /= static_cast<double>(sk.bodies);
  return c;
}

// Translation removed from an observed block [T_obs, V, 3].
inline std::array<double, 3> normalization_offset(const Tensor& observed, Normalization mode, const SkeletonSpec& sk) {
  const std::size_t T = observed.extent(0);
  switch (mode) {
  case Normalization::none: return {0.0, 0.0, 0.0};
  case Normalization::center_last: return root_midpoint(observed, T - 1, sk);
  case Normalization::center_mean: {
    std::array<double, 3> c{0.0, 0.0, 0.0};
    for (std::size_t t = 0; t < T; ++t) {
      const auto m = root_midpoint(observed, t, sk);
      for (std::size_t a = 0; a < 3; ++a) c[a] += m[a];
    }
    for (auto& v : c) v /= static_cast<double>(T);
    return c;
  }
  }
  return {0.0, 0.0, 0.0};
}

inline void translate(Tensor& frames, const std::array<double, 3>& by, double sign = -1.0) {
  auto d = frames.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += sign * by[i % 3];
}

// Whole-sequence form: subtracts the offset computed from frames
// [0, T_obs) of the sequence from every frame.
inline SequenceRecord normalize_pair(SequenceRecord seq, Normalization mode, const SkeletonSpec& sk, std::size_t T_obs) {
  if (mode == Normalization::none) return seq;
  const std::size_t V = seq.nodes();
  T_obs = std::min(T_obs, seq.length());
  Tensor head({T_obs, V, 3}, std::vector<double>(seq.frames.data().begin(), seq.frames.data().begin() + static_cast<long>(T_obs * V * 3)));
  translate(seq.frames, normalization_offset(head, mode, sk));
  return seq;
}

struct Window {
  Tensor x_in;   // [T_obs, V, 3]
  Tensor x_out;  // [N, V, 3]
  std::string action;
  std::size_t sequence = 0;  // index into the source list
  std::size_t start = 0;     // first frame in the source sequence
};

using WindowSet = std::vector<Window>;

inline std::size_t window_count(std::size_t F, std::size_t T_obs, std::size_t N, std::size_t stride) {
  return F < T_obs + N ? 0 : (F - T_obs - N) / stride + 1;
}

// All contiguous (T_obs + N)-frame windows at `stride`, normalized per window
// from its observed part.
inline WindowSet window(const std::vector<SequenceRecord>& seqs, std::size_t T_obs, std::size_t N, std::size_t stride,
                        Normalization mode = Normalization::none, const SkeletonSpec* sk = nullptr) {
  if (stride == 0) throw ArgumentError("window: stride must be at least 1");
  if (T_obs == 0 || N == 0) throw ArgumentError("window: T_obs and N must be positive");
  if (mode != Normalization::none && !sk) throw ArgumentError("window: normalization needs a skeleton");
  WindowSet out;
  for (std::size_t s = 0; s < seqs.size(); ++s) {
    const auto& seq = seqs[s];
    const std::size_t V = seq.nodes(), row = V * 3;
    const std::size_t count = window_count(seq.length(), T_obs, N, stride);
    for (std::size_t w = 0; w < count; ++w) {
      const std::size_t start = w * stride;
      const auto base = seq.frames.data().begin() + static_cast<long>(start * row);
      Window win;
      win.x_in = Tensor({T_obs, V, 3}, std::vector<double>(base, base + static_cast<long>(T_obs * row)));
      win.x_out = Tensor({N, V, 3}, std::vector<double>(base + static_cast<long>(T_obs * row),
                                                        base + static_cast<long>((T_obs + N) * row)));
      if (mode != Normalization::none) {
        const auto off = normalization_offset(win.x_in, mode, *sk);
        translate(win.x_in, off);
        translate(win.x_out, off);
      }
      win.action = seq.action;
      win.sequence = s;
      win.start = start;
      out.push_back(std::move(win));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splits

// Action lists select sequences by label; the optional couple lists further
// restrict each side. An action may appear on both sides only when both
// couple lists are given and disjoint (couple-specific test actions).
struct SplitConfig {
  std::vector<std::string> train_actions;
  std::vector<std::string> test_actions;
  std::vector<std::string> train_couples;
  std::vector<std::string> test_couples;

  void validate() const {
    const std::set<std::string> tc(train_couples.begin(), train_couples.end());
    bool couples_disjoint = !train_couples.empty() && !test_couples.empty();
    for (const auto& c : test_couples)
      if (tc.count(c)) couples_disjoint = false;
    for (const auto& a : test_actions)
      if (std::find(train_actions.begin(), train_actions.end(), a) != train_actions.end() && !couples_disjoint)
        throw ConfigError("split: action '" + a + "' is listed for both train and test");
    if (train_actions.empty() && test_actions.empty() && !couples_disjoint)
      throw ConfigError("split: needs action lists or two disjoint couple lists");
  }

  static SplitConfig from_json(const nlohmann::json& j) {
    static const std::set<std::string> known{"version", "train_actions", "test_actions", "train_couples", "test_couples"};
    SplitConfig c;
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!known.count(it.key())) throw ConfigError("split config: unknown key '" + it.key() + "'");
    try {
      if (j.contains("train_actions")) c.train_actions = j["train_actions"].get<std::vector<std::string>>();
      if (j.contains("test_actions")) c.test_actions = j["test_actions"].get<std::vector<std::string>>();
      if (j.contains("train_couples")) c.train_couples = j["train_couples"].get<std::vector<std::string>>();
      if (j.contains("test_couples")) c.test_couples = j["test_couples"].get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("split config: ") + e.what());
    }
    c.validate();
    return c;
  }
};

// (train, test); sequences matching neither side are dropped.
inline std::pair<std::vector<SequenceRecord>, std::vector<SequenceRecord>> split(const std::vector<SequenceRecord>& seqs,
                                                                                  const SplitConfig& cfg) {
  cfg.validate();
  auto in = [](const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
  };
  auto side = [&](const SequenceRecord& s, const std::vector<std::string>& actions, const std::vector<std::string>& couples) {
    const bool action_ok = actions.empty() ? !couples.empty() : in(actions, s.action);
    const bool couple_ok = couples.empty() || in(couples, s.couple);
    return action_ok && couple_ok;
  };
  std::pair<std::vector<SequenceRecord>, std::vector<SequenceRecord>> out;
  for (const auto& s : seqs) {
    const bool tr = side(s, cfg.train_actions, cfg.train_couples);
    const bool te = side(s, cfg.test_actions, cfg.test_couples);
    if (tr && te) throw ConfigError("split: sequence " + s.id + " matches both sides");
    if (tr) out.first.push_back(s);
    if (te) out.second.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic two-body motion

struct SynthStyle {
  double fps = 25.0;
  double max_freq_hz = 2.0;
  double min_freq_hz = 0.2;
  std::size_t min_components = 2;
  std::size_t max_components = 4;
  double min_amplitude_mm = 50.0;
  double max_amplitude_mm = 300.0;
  double bone_length_mm = 250.0;
  double separation_mm = 1000.0;   // body-1 root sits at x = -separation/2
  double max_offset_mm = 100.0;    // extra seeded body-2 offset per axis
  std::size_t min_lag_frames = 2;
  std::size_t max_lag_frames = 8;
  std::size_t actions = 4;         // labels "S1".."S<actions>"
  std::size_t couples = 2;         // labels "1".."<couples>"

  void validate() const {
    if (!(fps > 0.0)) throw ConfigError("synth: fps must be positive");
    if (!(min_freq_hz > 0.0 && min_freq_hz <= max_freq_hz)) throw ConfigError("synth: need 0 < min_freq_hz <= max_freq_hz");
    if (min_components == 0 || min_components > max_components) throw ConfigError("synth: bad component range");
    if (!(min_amplitude_mm > 0.0 && min_amplitude_mm <= max_amplitude_mm)) throw ConfigError("synth: bad amplitude range");
    if (min_lag_frames > max_lag_frames) throw ConfigError("synth: bad lag range");
    if (actions == 0 || couples == 0) throw ConfigError("synth: actions and couples must be positive");
  }

  static SynthStyle from_json(const nlohmann::json& j) {
    SynthStyle s;
    const std::map<std::string, double*> reals{{"fps", &s.fps},
                                               {"max_freq_hz", &s.max_freq_hz},
                                               {"min_freq_hz", &s.min_freq_hz},
                                               {"min_amplitude_mm", &s.min_amplitude_mm},
                                               {"max_amplitude_mm", &s.max_amplitude_mm},
                                               {"bone_length_mm", &s.bone_length_mm},
                                               {"separation_mm", &s.separation_mm},
                                               {"max_offset_mm", &s.max_offset_mm}};
    const std::map<std::string, std::size_t*> counts{{"min_components", &s.min_components},
                                                     {"max_components", &s.max_components},
                                                     {"min_lag_frames", &s.min_lag_frames},
                                                     {"max_lag_frames", &s.max_lag_frames},
                                                     {"actions", &s.actions},
                                                     {"couples", &s.couples}};
    for (auto it = j.begin(); it != j.end(); ++it) {
      try {
        if (auto r = reals.find(it.key()); r != reals.end()) *r->second = it.value().get<double>();
        else if (auto c = counts.find(it.key()); c != counts.end()) *c->second = it.value().get<std::size_t>();
        else if (it.key() != "version") throw ConfigError("synth style: unknown key '" + it.key() + "'");
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError("synth style: " + it.key() + ": " + e.what());
      }
    }
    s.validate();
    return s;
  }

  nlohmann::json to_json() const {
    return {{"fps", fps},
            {"max_freq_hz", max_freq_hz},
            {"min_freq_hz", min_freq_hz},
            {"min_components", min_components},
            {"max_components", max_components},
            {"min_amplitude_mm", min_amplitude_mm},
            {"max_amplitude_mm", max_amplitude_mm},
            {"bone_length_mm", bone_length_mm},
            {"separation_mm", separation_mm},
            {"max_offset_mm", max_offset_mm},
            {"min_lag_frames", min_lag_frames},
            {"max_lag_frames", max_lag_frames},
            {"actions", actions},
            {"couples", couples}};
  }
};

// Closed-form motion of one synthetic sequence. Body 1 joint j, axis a:
//   rest[j][a] + sum_c amp[j][a][c] * sin(2 pi freq[c] t / fps + phase[j][a][c]).
// Body 2 is body 1 mirrored in x, delayed by `lag` frames, plus `offset`.
struct SynthMotion {
  double fps = 25.0;
  std::vector<double> freq;                     // Hz, shared by all joints
  std::vector<std::array<double, 3>> rest;      // per joint
  std::vector<double> amp, phase;               // [J][3][components]
  std::size_t lag = 0;
  std::array<double, 3> offset{0.0, 0.0, 0.0};

  std::size_t joints() const { return rest.size(); }

  double body1(std::size_t joint, std::size_t axis, double t) const {
    const std::size_t C = freq.size();
    double v = rest[joint][axis];
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t i = (joint * 3 + axis) * C + c;
      v += amp[i] * std::sin(2.0 * std::numbers::pi * freq[c] * t / fps + phase[i]);
    }
    return v;
  }

  double body2(std::size_t joint, std::size_t axis, double t) const {
    const double b = body1(joint, axis, t - static_cast<double>(lag));
    return (axis == 0 ? -b : b) + offset[axis];
  }
};

inline SynthMotion synth_motion(Rng rng, const SkeletonSpec& sk, const SynthStyle& style) {
  style.validate();
  const std::size_t J = sk.joints();
  SynthMotion m;
  m.fps = style.fps;
  const std::size_t C = style.min_components + rng.below(style.max_components - style.min_components + 1);
  for (std::size_t c = 0; c < C; ++c) m.freq.push_back(rng.uniform(style.min_freq_hz, style.max_freq_hz));

  // rest pose: root in front of the partner, children offset along seeded unit directions
  m.rest.assign(J, {0.0, 0.0, 0.0});
  m.rest[sk.root] = {-0.5 * style.separation_mm, 0.0, 1000.0};
  std::vector<std::vector<std::size_t>> children(J);
  std::vector<std::vector<std::size_t>> adj(J);
  for (auto [a, b] : sk.tree_edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<char> done(J, 0);
  std::vector<std::size_t> order{sk.root};
  done[sk.root] = 1;
  for (std::size_t i = 0; i < order.size(); ++i)
    for (auto c : adj[order[i]])
      if (!done[c]) {
        done[c] = 1;
        const std::array<double, 3> d{rng.normal(), rng.normal(), rng.normal()};
        const double n = std::max(1e-9, std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]));
        for (std::size_t a = 0; a < 3; ++a) m.rest[c][a] = m.rest[order[i]][a] + style.bone_length_mm * d[a] / n;
        order.push_back(c);
      }

  m.amp.resize(J * 3 * C);
  m.phase.resize(J * 3 * C);
  for (std::size_t i = 0; i < J * 3 * C; ++i) {
    // total amplitude per coordinate lies in [min, max]; components share it
    m.amp[i] = rng.uniform(style.min_amplitude_mm, style.max_amplitude_mm) / static_cast<double>(C);
    m.phase[i] = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }
  m.lag = style.min_lag_frames + rng.below(style.max_lag_frames - style.min_lag_frames + 1);
  for (auto& o : m.offset) o = rng.uniform(-style.max_offset_mm, style.max_offset_mm);
  return m;
}

// Deterministic coupled two-body sequences; sequence i uses stream i of rng.
inline std::vector<SequenceRecord> synth_generate(const Rng& rng, std::size_t n_sequences, std::size_t F,
                                                  const SkeletonSpec& sk, const SynthStyle& style = {}) {
  if (F < 2) throw ArgumentError("synth_generate: F must be at least 2");
  style.validate();
  const std::size_t J = sk.joints(), V = sk.nodes();
  std::vector<SequenceRecord> out;
  for (std::size_t s = 0; s < n_sequences; ++s) {
    const SynthMotion m = synth_motion(rng.split(s), sk, style);
    SequenceRecord r;
    r.id = "syn" + std::to_string(s);
    r.action = "S" + std::to_string(s % style.actions + 1);
    r.couple = std::to_string(s / style.actions % style.couples + 1);
    r.fps = style.fps;
    r.frames = Tensor({F, V, 3});
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t b = 0; b < sk.bodies; ++b)
        for (std::size_t j = 0; j < J; ++j)
          for (std::size_t a = 0; a < 3; ++a)
            r.frames[((f * V) + b * J + j) * 3 + a] =
                b == 0 ? m.body1(j, a, static_cast<double>(f)) : m.body2(j, a, static_cast<double>(f));
    out.push_back(std::move(r));
  }
  return out;
}

// Convenience overload on a heap-ordered tree of J joints.
inline std::vector<SequenceRecord> synth_generate(const Rng& rng, std::size_t n_sequences, std::size_t F, std::size_t J,
                                                  std::size_t bodies = 2, const SynthStyle& style = {}) {
  return synth_generate(rng, n_sequences, F, SkeletonSpec::binary_tree(J, bodies), style);
}

} // namespace duo
