#pragma once

#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "duo/training.hpp"

namespace duo {

// Runs fn(0..n-1) on up to `threads` workers. Each index is independent, so
// results do not depend on the worker count. The first exception is rethrown.
inline void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct StudyRun {
  std::string scheme;
  std::uint64_t seed = 0;
  std::vector<double> mpjpe;  // per horizon; empty when the run diverged
  std::string error;
};

struct StudySummary {
  std::string scheme;
  std::vector<double> mean, std;  // per horizon over finished runs
  std::size_t runs = 0;
  std::size_t diverged = 0;
};

struct StudyResult {
  std::vector<double> horizons_ms;
  std::vector<StudyRun> runs;  // scheme-major, seeds in the given order
  std::vector<StudySummary> summary;
};

inline std::string scheme_label(const InitSpec& s) {
  return s.scheme == InitScheme::naive_uniform ? "uniform" : to_string(s.scheme);
}

// Trains `cfg` once per (scheme, seed) and reports per-horizon MPJPE on the
// test windows. Seed s initializes from Rng(s).split(1) and shuffles with s.
// A diverging run is recorded and excluded from the summary.
inline StudyResult seed_stability_study(ModelConfig cfg, const std::vector<InitSpec>& schemes,
                                        const std::vector<std::uint64_t>& seeds, TrainConfig budget,
                                        const WindowSet& train_w, const WindowSet& test_w,
                                        const std::vector<double>& horizons_ms = default_horizons(),
                                        std::size_t threads = 1, const SkeletonSpec* skeleton = nullptr) {
  if (seeds.size() < 3) throw ArgumentError("seed_stability_study: needs at least 3 seeds");
  if (schemes.empty()) throw ArgumentError("seed_stability_study: no schemes");
  for (double h : horizons_ms) horizon_frame(h, cfg.N_fut);
  StudyResult res;
  res.horizons_ms = horizons_ms;
  const std::size_t S = seeds.size();
  res.runs.resize(schemes.size() * S);
  parallel_for(res.runs.size(), threads, [&](std::size_t i) {
    const InitSpec& spec = schemes[i / S];
    StudyRun& run = res.runs[i];
    run.scheme = scheme_label(spec);
    run.seed = seeds[i % S];
    ModelConfig c = cfg;
    c.init = spec;
    TrainConfig tc = budget;
    tc.seed = run.seed;
    try {
      Rng rng = Rng(run.seed).split(1);
      auto trained = train(c, init_model(c, spec, rng, skeleton), train_w, tc, skeleton);
      auto rep = evaluate(c, trained.params, test_w, horizons_ms);
      for (double v : rep.mpjpe)
        if (!std::isfinite(v)) throw DivergenceError(tc.steps, "non-finite evaluation error");
      run.mpjpe = rep.mpjpe;
    } catch (const DivergenceError& e) {
      run.error = e.what();
    }
  });
  const std::size_t H = horizons_ms.size();
  for (std::size_t s = 0; s < schemes.size(); ++s) {
    StudySummary sum;
    sum.scheme = scheme_label(schemes[s]);
    sum.mean.assign(H, 0.0);
    sum.std.assign(H, 0.0);
    for (std::size_t k = 0; k < S; ++k) {
      const auto& r = res.runs[s * S + k];
      if (r.mpjpe.empty()) {
        ++sum.diverged;
        continue;
      }
      ++sum.runs;
      for (std::size_t h = 0; h < H; ++h) sum.mean[h] += r.mpjpe[h];
    }
    if (sum.runs == 0) {
      sum.mean.assign(H, std::nan(""));
      sum.std.assign(H, std::nan(""));
    } else {
      for (auto& m : sum.mean) m /= static_cast<double>(sum.runs);
      for (std::size_t k = 0; k < S; ++k) {
        const auto& r = res.runs[s * S + k];
        if (r.mpjpe.empty()) continue;
        for (std::size_t h = 0; h < H; ++h) sum.std[h] += (r.mpjpe[h] - sum.mean[h]) * (r.mpjpe[h] - sum.mean[h]);
      }
      for (auto& v : sum.std) v = sum.runs > 1 ? std::sqrt(v / static_cast<double>(sum.runs - 1)) : std::nan("");
    }
    res.summary.push_back(std::move(sum));
  }
  return res;
}

} // namespace duo
