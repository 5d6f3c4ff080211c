#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "duo/io/checkpoint.hpp"
#include "duo/io/config.hpp"
#include "duo/study.hpp"

namespace duo::cli {

// Process exit codes, one per error class.
enum Exit : int {
  kOk = 0,
  kDctBreach = 1,
  kConfig = 2,
  kData = 3,
  kDivergence = 4,
  kCheckpoint = 5,
  kArgument = 6,
  kInternal = 7,
};

struct GlobalOptions {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
  bool emit_gnuplot = false;
};

// Runs `body`, mapping exceptions to exit codes with one diagnostic line.
template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "error: config: " << e.what() << '\n';
    return kConfig;
  } catch (const IngestionError& e) {
    err << "error: data: " << e.what() << '\n';
    return kData;
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << '\n';
    return kDivergence;
  } catch (const CheckpointError& e) {
    err << "error: checkpoint: " << e.what() << '\n';
    return kCheckpoint;
  } catch (const std::invalid_argument& e) {
    err << "error: argument: " << e.what() << '\n';
    return kArgument;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInternal;
  }
}

namespace detail {

inline std::string out_dir(const GlobalOptions& g, const std::string& from_config, const std::string& fallback) {
  std::string d = !g.out.empty() ? g.out : !from_config.empty() ? from_config : fallback;
  std::error_code ec;
  std::filesystem::create_directories(d, ec);
  if (ec) throw ConfigError("cannot create output directory " + d + ": " + ec.message());
  return d;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path);
  return f;
}

inline std::string fmt(double v, const char* spec = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

inline io::RunConfig load(const GlobalOptions& g) {
  if (g.config.empty()) throw ConfigError("--config is required");
  io::RunConfig r = io::load_run_config(g.config);
  if (g.seed) {
    r.seed = *g.seed;
    r.train.seed = *g.seed;
  }
  return r;
}

inline void write_curve(const std::string& path, const std::vector<LossPoint>& curve) {
  auto f = open_out(path);
  f << "step,lr,loss\n";
  for (const auto& p : curve) f << p.step << ',' << fmt(p.lr, "%.9g") << ',' << fmt(p.loss, "%.9g") << '\n';
}

inline void write_eval(const std::string& path, const EvalReport& r) {
  auto f = open_out(path);
  f << "action,horizon_ms,frame,mpjpe_mm\n";
  for (std::size_t h = 0; h < r.horizons_ms.size(); ++h)
    f << "all," << fmt(r.horizons_ms[h], "%g") << ',' << r.frames[h] << ',' << fmt(r.mpjpe[h]) << '\n';
  for (const auto& [action, v] : r.by_action)
    for (std::size_t h = 0; h < r.horizons_ms.size(); ++h)
      f << action << ',' << fmt(r.horizons_ms[h], "%g") << ',' << r.frames[h] << ',' << fmt(v[h]) << '\n';
}

inline void print_eval(std::ostream& out, const EvalReport& r, const EvalReport* baseline = nullptr) {
  out << "MPJPE (mm) over " << r.windows << " windows\n";
  out << "  horizon_ms  frame      model" << (baseline ? "  zero_vel" : "") << '\n';
  for (std::size_t h = 0; h < r.horizons_ms.size(); ++h) {
    char line[128];
    std::snprintf(line, sizeof line, "  %10g  %5zu  %9.2f", r.horizons_ms[h], r.frames[h], r.mpjpe[h]);
    out << line;
    if (baseline) out << fmt(baseline->mpjpe[h], "  %8.2f");
    out << '\n';
  }
  for (const auto& [action, v] : r.by_action) {
    out << "  " << action << ':';
    for (double x : v) out << fmt(x, " %.2f");
    out << '\n';
  }
}

inline void write_gnuplot(const std::string& path, const std::string& csv, const std::string& title, const std::string& using_) {
  auto f = open_out(path);
  f << "set datafile separator ','\nset key autotitle columnhead\nset title '" << title << "'\n"
    << "plot '" << std::filesystem::path(csv).filename().string() << "' using " << using_ << " with lines\n";
}

} // namespace detail

// ---------------------------------------------------------------------------

// Trains per config; writes checkpoint.txt, loss_curve.csv, eval.csv (test
// windows) and config.resolved.json into the output directory.
inline int cmd_train(const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    io::RunConfig r = detail::load(g);
    io::Dataset ds = io::load_dataset(r);
    if (ds.train_windows.empty()) throw IngestionError("no training windows (sequences shorter than T_obs + N_fut?)");
    const std::string dir = detail::out_dir(g, r.output, "run");
    Rng rng = Rng(r.seed).split(1);
    ModelParams p0 = init_model(r.model, r.model.init, rng, &ds.skeleton);
    std::vector<LossPoint> curve;
    ModelParams trained;
    try {
      auto res = train(r.model, std::move(p0), ds.train_windows, r.train, &ds.skeleton);
      curve = std::move(res.curve);
      trained = std::move(res.params);
    } catch (const TrainingDiverged& e) {
      detail::write_curve(dir + "/loss_curve.csv", e.curve);
      throw;
    }
    detail::write_curve(dir + "/loss_curve.csv", curve);
    io::save_checkpoint(dir + "/checkpoint.txt", r.model, trained);
    detail::open_out(dir + "/config.resolved.json") << io::run_to_json(r).dump(2) << '\n';
    if (g.emit_gnuplot) detail::write_gnuplot(dir + "/loss_curve.gp", "loss_curve.csv", "training loss", "1:3");
    out << "trained " << r.train.steps << " steps on " << ds.train_windows.size() << " windows";
    if (!curve.empty()) out << ", loss " << detail::fmt(curve.front().loss, "%.3f") << " -> " << detail::fmt(curve.back().loss, "%.3f");
    out << '\n';
    if (!ds.test_windows.empty()) {
      EvalReport rep = evaluate(r.model, trained, ds.test_windows, r.horizons_ms);
      EvalReport zv = zero_velocity(ds.test_windows, r.horizons_ms);
      detail::write_eval(dir + "/eval.csv", rep);
      detail::print_eval(out, rep, &zv);
    }
    out << "outputs in " << dir << '\n';
    return int{kOk};
  });
}

struct EvalOptions {
  std::string checkpoint;
  std::vector<double> horizons_ms;  // empty: config value
};

// Evaluates a checkpoint on the test windows of the config's data section.
inline int cmd_eval(const GlobalOptions& g, const EvalOptions& e, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    io::RunConfig r = detail::load(g);
    io::Checkpoint ck = io::load_checkpoint(e.checkpoint);
    if (io::model_to_json(ck.model) != io::model_to_json(r.model))
      throw CheckpointError(e.checkpoint + " was trained with a different model configuration than " + g.config);
    const auto horizons = e.horizons_ms.empty() ? r.horizons_ms : e.horizons_ms;
    for (double h : horizons) horizon_frame(h, r.model.N_fut);
    io::Dataset ds = io::load_dataset(r);
    if (ds.test_windows.empty()) throw IngestionError("no evaluation windows");
    EvalReport rep = evaluate(ck.model, ck.params, ds.test_windows, horizons);
    EvalReport zv = zero_velocity(ds.test_windows, horizons);
    const std::string dir = detail::out_dir(g, "", "eval");
    detail::write_eval(dir + "/eval.csv", rep);
    if (g.emit_gnuplot) detail::write_gnuplot(dir + "/eval.gp", "eval.csv", "MPJPE by horizon", "2:4");
    detail::print_eval(out, rep, &zv);
    return int{kOk};
  });
}

// ---------------------------------------------------------------------------
// Ablation matrix

// One row of the matrix: the seven practice flags of a variant.
struct AblationRow {
  std::string name;
  bool freq_enc = true;
  bool learnable = true;
  bool separable = true;
  bool init = true;  // paper init; otherwise the uniform baseline
  bool attention = false;
  bool hierarchy = false;
  bool fc = true;  // FC decoder; otherwise TCN
};

struct AblationConfig {
  io::RunConfig base;
  std::vector<AblationRow> rows;
  std::size_t hierarchy_nodes = 12;
  double uniform_bound = 0.1;
};

inline AblationConfig load_ablation(const std::string& path) {
  const auto j = io::detail::load_json(path);
  const std::string dir = std::filesystem::path(path).parent_path().string();
  io::detail::check_keys(j, {"version", "base", "rows", "hierarchy_nodes", "uniform_bound"}, "ablation");
  int version = 0;
  io::detail::read(j, "version", version, "ablation");
  if (version != io::kConfigVersion) throw ConfigError("ablation: unsupported version " + std::to_string(version));
  AblationConfig a;
  if (!j.contains("base")) throw ConfigError("ablation: missing 'base'");
  const auto& b = j.at("base");
  a.base = b.is_string() ? io::load_run_config(io::resolve(dir, b.get<std::string>())) : io::run_from_json(b, dir);
  io::detail::read(j, "hierarchy_nodes", a.hierarchy_nodes, "ablation");
  io::detail::read(j, "uniform_bound", a.uniform_bound, "ablation");
  if (!j.contains("rows") || !j.at("rows").is_array()) throw ConfigError("ablation: 'rows' must be an array");
  for (const auto& rj : j.at("rows")) {
    io::detail::check_keys(rj, {"name", "freq_enc", "learnable", "separable", "init", "attention", "hierarchy", "fc"},
                           "ablation.rows");
    AblationRow r;
    io::detail::read(rj, "name", r.name, "ablation.rows");
    io::detail::read(rj, "freq_enc", r.freq_enc, "ablation.rows");
    io::detail::read(rj, "learnable", r.learnable, "ablation.rows");
    io::detail::read(rj, "separable", r.separable, "ablation.rows");
    io::detail::read(rj, "init", r.init, "ablation.rows");
    io::detail::read(rj, "attention", r.attention, "ablation.rows");
    io::detail::read(rj, "hierarchy", r.hierarchy, "ablation.rows");
    io::detail::read(rj, "fc", r.fc, "ablation.rows");
    a.rows.push_back(std::move(r));
  }
  if (a.rows.empty()) throw ConfigError("ablation: no rows");
  return a;
}

// Model of one row on top of the base configuration. A row that is neither
// learnable nor separable has no counterpart and is rejected.
inline ModelConfig ablation_model(const AblationConfig& a, const AblationRow& r) {
  ModelConfig m = a.base.model;
  m.frequency_encoding = r.freq_enc;
  if (!r.freq_enc) m.retain.reset();
  m.separable = r.separable;
  m.connectivity = r.learnable ? Connectivity::learnable : Connectivity::kinematic_tree;
  m.init = r.init ? InitSpec{InitScheme::paper, 1.0} : InitSpec{InitScheme::naive_uniform, a.uniform_bound};
  m.attention = r.attention;
  m.hierarchy = r.hierarchy ? std::optional<std::size_t>(a.hierarchy_nodes) : std::nullopt;
  m.decoder.kind = r.fc ? DecoderKind::fc : DecoderKind::tcn;
  try {
    m.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError("ablation row '" + r.name + "': " + e.what());
  }
  return m;
}

inline int cmd_ablate(const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (g.config.empty()) throw ConfigError("--config is required");
    AblationConfig a = load_ablation(g.config);
    if (g.seed) {
      a.base.seed = *g.seed;
      a.base.train.seed = *g.seed;
    }
    std::vector<ModelConfig> models;
    for (const auto& r : a.rows) models.push_back(ablation_model(a, r));
    io::Dataset ds = io::load_dataset(a.base);
    if (ds.train_windows.empty() || ds.test_windows.empty()) throw IngestionError("ablation needs train and test windows");
    const auto& H = a.base.horizons_ms;
    for (double h : H) horizon_frame(h, a.base.model.N_fut);
    struct Outcome {
      std::vector<double> mpjpe;
      std::string status = "ok";
    };
    std::vector<Outcome> res(a.rows.size());
    parallel_for(a.rows.size(), g.threads, [&](std::size_t i) {
      try {
        Rng rng = Rng(a.base.seed).split(1);
        auto p = init_model(models[i], models[i].init, rng, &ds.skeleton);
        auto t = train(models[i], std::move(p), ds.train_windows, a.base.train, &ds.skeleton);
        res[i].mpjpe = evaluate(models[i], t.params, ds.test_windows, H).mpjpe;
      } catch (const DivergenceError& e) {
        res[i].status = "diverged";
      }
    });
    const std::string dir = detail::out_dir(g, a.base.output, "ablation");
    auto f = detail::open_out(dir + "/ablation.csv");
    f << "row,name,freq_enc,learnable,separable,init,attention,hierarchy,fc,param_count";
    for (double h : H) f << ",mpjpe_" << detail::fmt(h, "%g");
    f << ",status\n";
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
      const auto& r = a.rows[i];
      f << i + 1 << ',' << r.name << ',' << r.freq_enc << ',' << r.learnable << ',' << r.separable << ',' << r.init << ','
        << r.attention << ',' << r.hierarchy << ',' << r.fc << ',' << param_count(models[i], &ds.skeleton);
      for (std::size_t h = 0; h < H.size(); ++h) f << ',' << (res[i].mpjpe.empty() ? std::string("nan") : detail::fmt(res[i].mpjpe[h]));
      f << ',' << res[i].status << '\n';
      out << detail::fmt(static_cast<double>(i + 1), "%2.0f") << "  " << r.name << "  params " << param_count(models[i], &ds.skeleton);
      for (double v : res[i].mpjpe) out << detail::fmt(v, "  %.2f");
      out << "  " << res[i].status << '\n';
    }
    if (g.emit_gnuplot) detail::write_gnuplot(dir + "/ablation.gp", "ablation.csv", "MPJPE per variant", "1:" + std::to_string(11 + H.size() - 1));
    return int{kOk};
  });
}

// ---------------------------------------------------------------------------
// Initialization study

struct InitStudyConfig {
  io::RunConfig base;
  std::vector<InitSpec> schemes;
  std::vector<std::uint64_t> seeds;
  std::size_t probe_trials = 100;
  double probe_input_std = 1.0;
};

inline InitStudyConfig load_init_study(const std::string& path) {
  const auto j = io::detail::load_json(path);
  const std::string dir = std::filesystem::path(path).parent_path().string();
  io::detail::check_keys(j, {"version", "base", "schemes", "seeds", "uniform_bound", "probe_trials", "probe_input_std"}, "init_study");
  int version = 0;
  io::detail::read(j, "version", version, "init_study");
  if (version != io::kConfigVersion) throw ConfigError("init_study: unsupported version " + std::to_string(version));
  InitStudyConfig c;
  if (!j.contains("base")) throw ConfigError("init_study: missing 'base'");
  const auto& b = j.at("base");
  c.base = b.is_string() ? io::load_run_config(io::resolve(dir, b.get<std::string>())) : io::run_from_json(b, dir);
  double bound = 0.1;
  io::detail::read(j, "uniform_bound", bound, "init_study");
  std::vector<std::string> names{"uniform", "glorot", "he", "paper"};
  io::detail::read(j, "schemes", names, "init_study");
  for (const auto& n : names) {
    try {
      c.schemes.push_back({parse_init_scheme(n), bound});
    } catch (const ArgumentError& e) {
      throw ConfigError(std::string("init_study.schemes: ") + e.what());
    }
  }
  io::detail::read(j, "seeds", c.seeds, "init_study");
  if (c.seeds.size() < 3) throw ConfigError("init_study: at least 3 seeds required");
  io::detail::read(j, "probe_trials", c.probe_trials, "init_study");
  io::detail::read(j, "probe_input_std", c.probe_input_std, "init_study");
  if (c.probe_trials == 0) throw ConfigError("init_study: probe_trials must be at least 1");
  return c;
}

// Writes init_study.csv (per run), init_summary.csv (mean/std per scheme and
// horizon) and variance_probe.csv (per scheme and layer).
inline int cmd_init_study(const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (g.config.empty()) throw ConfigError("--config is required");
    InitStudyConfig c = load_init_study(g.config);
    if (g.seed) c.base.seed = *g.seed;
    io::Dataset ds = io::load_dataset(c.base);
    if (ds.train_windows.empty() || ds.test_windows.empty()) throw IngestionError("init study needs train and test windows");
    StudyResult res = seed_stability_study(c.base.model, c.schemes, c.seeds, c.base.train, ds.train_windows,
                                           ds.test_windows, c.base.horizons_ms, g.threads, &ds.skeleton);
    const std::string dir = detail::out_dir(g, c.base.output, "init_study");
    const auto& H = res.horizons_ms;
    {
      auto f = detail::open_out(dir + "/init_study.csv");
      f << "scheme,seed,horizon_ms,mpjpe\n";
      for (const auto& r : res.runs)
        for (std::size_t h = 0; h < H.size(); ++h)
          f << r.scheme << ',' << r.seed << ',' << detail::fmt(H[h], "%g") << ','
            << (r.mpjpe.empty() ? std::string("nan") : detail::fmt(r.mpjpe[h])) << '\n';
    }
    {
      auto f = detail::open_out(dir + "/init_summary.csv");
      f << "scheme,horizon_ms,mean,std,runs,diverged\n";
      out << "scheme        ";
      for (double h : H) out << detail::fmt(h, "%16g");
      out << '\n';
      for (const auto& s : res.summary) {
        out << s.scheme << std::string(s.scheme.size() < 14 ? 14 - s.scheme.size() : 1, ' ');
        for (std::size_t h = 0; h < H.size(); ++h) {
          f << s.scheme << ',' << detail::fmt(H[h], "%g") << ',' << detail::fmt(s.mean[h]) << ',' << detail::fmt(s.std[h]) << ','
            << s.runs << ',' << s.diverged << '\n';
          out << detail::fmt(s.mean[h], "%9.2f") << " +-" << detail::fmt(s.std[h], "%4.1f");
        }
        out << '\n';
      }
    }
    {
      auto f = detail::open_out(dir + "/variance_probe.csv");
      f << "scheme,layer,ratio_mean,ratio_std\n";
      for (const auto& spec : c.schemes) {
        auto probe = variance_probe(c.base.model, spec, c.probe_trials, c.probe_input_std, c.base.seed);
        for (const auto& l : probe)
          f << scheme_label(spec) << ',' << l.layer << ',' << detail::fmt(l.ratio_mean, "%.9g") << ','
            << detail::fmt(l.ratio_std, "%.9g") << '\n';
      }
    }
    if (g.emit_gnuplot) detail::write_gnuplot(dir + "/variance_probe.gp", "variance_probe.csv", "std ratio per layer", "2:3");
    return int{kOk};
  });
}

// ---------------------------------------------------------------------------

struct DctCheckResult {
  double max_orthonormality = 0.0;
  double max_round_trip = 0.0;
  std::vector<std::size_t> failing;
};

// ||B B^T - I||_max and the worst round-trip error over `signals` random
// signals for every T in [1, max_t].
inline DctCheckResult dct_check(std::size_t max_t, std::size_t signals = 100, double tol = 1e-10, std::uint64_t seed = 0) {
  if (max_t == 0) throw ArgumentError("dct-check: --max-t must be at least 1");
  DctCheckResult res;
  for (std::size_t T = 1; T <= max_t; ++T) {
    const DCTBasis b = make_dct_basis(T);
    double ortho = 0.0;
    for (std::size_t i = 0; i < T; ++i)
      for (std::size_t j = 0; j < T; ++j) {
        double s = 0.0;
        for (std::size_t t = 0; t < T; ++t) s += b.matrix[i * T + t] * b.matrix[j * T + t];
        ortho = std::max(ortho, std::abs(s - (i == j ? 1.0 : 0.0)));
      }
    Rng rng = Rng(seed).split(T);
    const Tensor x = uniform(rng, -1.0, 1.0, {T, signals});
    const double rt = max_abs_diff(idct_apply(dct_apply(x, b, T), T), x);
    res.max_orthonormality = std::max(res.max_orthonormality, ortho);
    res.max_round_trip = std::max(res.max_round_trip, rt);
    if (!(ortho < tol && rt < tol)) res.failing.push_back(T);
  }
  return res;
}

inline int cmd_dct_check(std::size_t max_t, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto r = dct_check(max_t);
    out << "dct-check T=1.." << max_t << ": max |B B^T - I| = " << detail::fmt(r.max_orthonormality, "%.3e")
        << ", max round-trip error = " << detail::fmt(r.max_round_trip, "%.3e") << '\n';
    if (!r.failing.empty()) {
      err << "error: residual above 1e-10 for T =";
      for (auto T : r.failing) err << ' ' << T;
      err << '\n';
      return int{kDctBreach};
    }
    return int{kOk};
  });
}

struct SynthOptions {
  std::size_t sequences = 8;
  std::size_t frames = 100;
  std::size_t joints = 9;
  std::size_t bodies = 2;
  std::uint64_t seed = 0;
  std::string style;     // JSON style file; empty: built-in defaults
  std::string skeleton;  // JSON skeleton; empty: heap-ordered tree
  std::string output;    // CSV path; empty: <out>/sequences.csv
};

inline int cmd_synth(const GlobalOptions& g, const SynthOptions& s, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    SynthStyle style = s.style.empty() ? SynthStyle{} : SynthStyle::from_json(io::detail::load_json(s.style));
    SkeletonSpec sk = s.skeleton.empty() ? SkeletonSpec::binary_tree(s.joints, s.bodies) : SkeletonSpec::load(s.skeleton, s.bodies);
    if (sk.joints() != s.joints) throw ConfigError("skeleton has " + std::to_string(sk.joints()) + " joints, --joints says " + std::to_string(s.joints));
    if (s.frames < 2) throw ArgumentError("synth: --frames must be at least 2");
    const std::uint64_t seed = g.seed.value_or(s.seed);
    auto seqs = synth_generate(Rng(seed), s.sequences, s.frames, sk, style);
    std::string path = s.output;
    if (path.empty()) path = detail::out_dir(g, "", "synth") + "/sequences.csv";
    save_sequences(path, seqs, sk.joints());
    out << "wrote " << seqs.size() << " sequences of " << s.frames << " frames to " << path << '\n';
    return int{kOk};
  });
}

} // namespace duo::cli
