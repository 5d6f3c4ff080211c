#pragma once

#include <cmath>
#include <cstdio>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "duo/data.hpp"
#include "duo/init.hpp"

namespace duo {

// Mean over nodes of the Euclidean joint error; pred, gt are [V, 3].
inline double mpjpe(const Tensor& pred, const Tensor& gt) {
  if (pred.shape() != gt.shape() || pred.rank() != 2 || pred.extent(1) != 3)
    throw DimensionError("mpjpe: expected matching [V,3], got " + shape_str(pred.shape()) + " and " + shape_str(gt.shape()));
  const std::size_t V = pred.extent(0);
  double s = 0.0;
  for (std::size_t v = 0; v < V; ++v) {
    const double dx = pred[v * 3] - gt[v * 3], dy = pred[v * 3 + 1] - gt[v * 3 + 1], dz = pred[v * 3 + 2] - gt[v * 3 + 2];
    s += std::sqrt(dx * dx + dy * dy + dz * dz);
  }
  return s / static_cast<double>(V);
}

// Frame-averaged mpjpe over [N, V, 3].
inline double sequence_loss(const Tensor& pred, const Tensor& gt) {
  if (pred.shape() != gt.shape() || pred.rank() != 3 || pred.extent(2) != 3)
    throw DimensionError("sequence_loss: expected matching [N,V,3], got " + shape_str(pred.shape()) + " and " + shape_str(gt.shape()));
  const std::size_t N = pred.extent(0), V = pred.extent(1);
  double s = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    Tensor p({V, 3}, std::vector<double>(pred.data().begin() + static_cast<long>(n * V * 3), pred.data().begin() + static_cast<long>((n + 1) * V * 3)));
    Tensor g({V, 3}, std::vector<double>(gt.data().begin() + static_cast<long>(n * V * 3), gt.data().begin() + static_cast<long>((n + 1) * V * 3)));
    s += mpjpe(p, g);
  }
  return s / static_cast<double>(N);
}

namespace ops {

// Mean joint error over every (batch, frame, node) of [..., 3] operands.
inline Var sequence_loss(Var pred, Var gt) {
  if (pred.shape() != gt.shape() || pred.shape().empty() || pred.shape().back() != 3)
    throw DimensionError("sequence_loss: " + shape_str(pred.shape()) + " vs " + shape_str(gt.shape()));
  return mean(norm_last(sub(pred, gt)));
}

} // namespace ops

// ---------------------------------------------------------------------------
// Optimizers

enum class OptimizerKind { adam, sgd };

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double momentum = 0.9;          // sgd only
  std::size_t batch = 32;
  std::size_t steps = 2000;
  std::size_t decay_every = 0;    // 0: a quarter of `steps`
  double decay_factor = 0.5;
  std::optional<double> clip_norm;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw ArgumentError("train config: lr must be finite and nonnegative");
    if (batch == 0) throw ArgumentError("train config: batch must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ArgumentError("train config: betas must lie in [0,1)");
    if (!(eps > 0.0)) throw ArgumentError("train config: eps must be positive");
    if (!(decay_factor > 0.0)) throw ArgumentError("train config: decay_factor must be positive");
    if (clip_norm && !(*clip_norm > 0.0)) throw ArgumentError("train config: clip_norm must be positive");
  }

  double lr_at(std::size_t step) const {
    const std::size_t every = decay_every ? decay_every : std::max<std::size_t>(1, steps / 4);
    return lr * std::pow(decay_factor, static_cast<double>(step / every));
  }
};

struct AdamState {
  std::vector<Tensor> m, v;
  std::size_t step = 0;

  static AdamState zeros_like(const std::vector<Tensor>& params) {
    AdamState s;
    for (const auto& p : params) {
      s.m.emplace_back(p.shape().empty() ? Shape{1} : p.shape(), 0.0);
      s.v.push_back(s.m.back());
    }
    return s;
  }
};

inline void check_finite_grads(const std::vector<Tensor>& grads, std::size_t step) {
  for (std::size_t i = 0; i < grads.size(); ++i)
    if (!grads[i].all_finite()) throw DivergenceError(step, "non-finite gradient in tensor " + std::to_string(i));
}

// One bias-corrected Adam update at learning rate `lr`.
inline void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& st, const TrainConfig& cfg,
                      double lr) {
  if (grads.size() != params.size() || st.m.size() != params.size())
    throw DimensionError("adam_step: parameter, gradient and state counts differ");
  check_finite_grads(grads, st.step);
  ++st.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].data();
    auto g = grads[i].data();
    auto m = st.m[i].data();
    auto v = st.v[i].data();
    if (g.size() != p.size()) throw DimensionError("adam_step: gradient shape mismatch");
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      p[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg.eps);
    }
  }
}

inline void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& st, const TrainConfig& cfg) {
  adam_step(params, grads, st, cfg, cfg.lr);
}

// Heavy-ball SGD; the velocity buffers reuse AdamState::m.
inline void sgd_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& st, const TrainConfig& cfg,
                     double lr) {
  check_finite_grads(grads, st.step);
  ++st.step;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].data();
    auto g = grads[i].data();
    auto m = st.m[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = cfg.momentum * m[j] + g[j];
      p[j] -= lr * m[j];
    }
  }
}

inline double global_norm(const std::vector<Tensor>& ts) {
  double s = 0.0;
  for (const auto& t : ts)
    for (double v : t.data()) s += v * v;
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Training loop

struct LossPoint {
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<LossPoint> curve;
};

// Divergence raised by train(); carries the curve recorded so far.
class TrainingDiverged : public DivergenceError {
public:
  TrainingDiverged(std::size_t step, const std::string& what, std::vector<LossPoint> partial)
      : DivergenceError(step, what), curve(std::move(partial)) {}
  std::vector<LossPoint> curve;
};

// Stacks windows [idx...] into ([B,T_obs,V,3], [B,N,V,3]).
inline std::pair<Tensor, Tensor> make_batch(const WindowSet& w, const std::vector<std::size_t>& idx) {
  if (idx.empty()) throw ArgumentError("make_batch: empty batch");
  const Shape& si = w[idx[0]].x_in.shape();
  const Shape& so = w[idx[0]].x_out.shape();
  std::vector<double> in, out;
  in.reserve(idx.size() * w[idx[0]].x_in.size());
  out.reserve(idx.size() * w[idx[0]].x_out.size());
  for (auto i : idx) {
    if (w[i].x_in.shape() != si || w[i].x_out.shape() != so) throw DimensionError("make_batch: windows differ in shape");
    in.insert(in.end(), w[i].x_in.data().begin(), w[i].x_in.data().end());
    out.insert(out.end(), w[i].x_out.data().begin(), w[i].x_out.data().end());
  }
  return {Tensor({idx.size(), si[0], si[1], si[2]}, std::move(in)), Tensor({idx.size(), so[0], so[1], so[2]}, std::move(out))};
}

// Loss and per-parameter gradients on one batch.
inline std::pair<double, std::vector<Tensor>> loss_and_grad(const ModelConfig& cfg, const ModelParams& p, const Tensor& x,
                                                            const Tensor& y) {
  Tape tape;
  auto v = bind(tape, p);
  Var loss = ops::sequence_loss(ops::forecast(tape.constant(x), cfg, v), tape.constant(y));
  const std::size_t n = flatten(p).size();
  auto g = tape.backward(loss, n);
  return {loss.value()[0], std::move(g)};
}

// Mean sequence loss over a window set, in fixed chunks of `chunk` windows.
inline double dataset_loss(const ModelConfig& cfg, const ModelParams& p, const WindowSet& w, std::size_t chunk = 64) {
  if (w.empty()) throw ArgumentError("dataset_loss: no windows");
  double total = 0.0;
  for (std::size_t b = 0; b < w.size(); b += chunk) {
    std::vector<std::size_t> idx;
    for (std::size_t i = b; i < std::min(w.size(), b + chunk); ++i) idx.push_back(i);
    auto [x, y] = make_batch(w, idx);
    Tape tape;
    auto v = bind_constant(tape, p);
    total += ops::sequence_loss(ops::forecast(tape.constant(x), cfg, v), tape.constant(y)).value()[0] *
             static_cast<double>(idx.size());
  }
  return total / static_cast<double>(w.size());
}

// Minibatch training over epoch-wise seeded permutations of the windows.
// Each curve point is the batch loss before that step's update. Under
// kinematic-tree connectivity the spatial adjacencies are re-masked after
// every update.
inline TrainResult train(const ModelConfig& cfg, ModelParams params, const WindowSet& windows, const TrainConfig& tc,
                         const SkeletonSpec* skeleton = nullptr) {
  tc.validate();
  if (windows.empty()) throw ArgumentError("train: no training windows");
  TrainResult res;
  std::optional<Tensor> mask;
  if (cfg.connectivity == Connectivity::kinematic_tree)
    mask = kinematic_mask(skeleton ? *skeleton : SkeletonSpec::binary_tree(cfg.joints, cfg.bodies));
  std::vector<Tensor> flat = flatten(params);
  AdamState st = AdamState::zeros_like(flat);
  const Rng shuffle_rng = Rng(tc.seed).split(0x5eed);
  std::vector<std::size_t> order;
  std::size_t cursor = 0, epoch = 0;
  const std::size_t B = std::min(tc.batch, windows.size());
  for (std::size_t step = 0; step < tc.steps; ++step) {
    std::vector<std::size_t> idx;
    while (idx.size() < B) {
      if (cursor == order.size()) {
        order.resize(windows.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng r = shuffle_rng.split(epoch++);
        r.shuffle(order);
        cursor = 0;
      }
      idx.push_back(order[cursor++]);
    }
    auto [x, y] = make_batch(windows, idx);
    const double lr = tc.lr_at(step);
    double loss = 0.0;
    std::vector<Tensor> grads;
    try {
      std::tie(loss, grads) = loss_and_grad(cfg, params, x, y);
      if (!std::isfinite(loss)) throw DivergenceError(step, "non-finite loss");
      res.curve.push_back({step, lr, loss});
      if (tc.clip_norm) {
        const double n = global_norm(grads);
        if (n > *tc.clip_norm)
          for (auto& g : grads)
            for (auto& v : g.data()) v *= *tc.clip_norm / n;
      }
      if (tc.optimizer == OptimizerKind::adam) adam_step(flat, grads, st, tc, lr);
      else sgd_step(flat, grads, st, tc, lr);
    } catch (const DivergenceError& e) {
      throw TrainingDiverged(step, e.what(), res.curve);
    }
    unflatten(params, flat);
    if (mask) {
      apply_kinematic_mask(cfg, *mask, params);
      flat = flatten(params);
    }
  }
  res.params = std::move(params);
  return res;
}

// ---------------------------------------------------------------------------
// Evaluation

inline constexpr double kFrameMs = 40.0;  // one frame at 25 fps

// 1-based prediction frame of a horizon in milliseconds.
inline std::size_t horizon_frame(double horizon_ms, std::size_t N) {
  char ms[32];
  std::snprintf(ms, sizeof ms, "%g", horizon_ms);
  const double f = horizon_ms / kFrameMs;
  if (!(horizon_ms > 0.0) || f != std::floor(f))
    throw ArgumentError(std::string("horizon ") + ms + " ms is not a positive multiple of 40 ms");
  if (f > static_cast<double>(N))
    throw ArgumentError(std::string("horizon ") + ms + " ms exceeds the " + std::to_string(N) + "-frame prediction (" +
                        std::to_string(static_cast<long>(static_cast<double>(N) * kFrameMs)) + " ms)");
  return static_cast<std::size_t>(f);
}

struct EvalReport {
  std::vector<double> horizons_ms;
  std::vector<std::size_t> frames;           // 1-based
  std::vector<double> mpjpe;                 // per horizon, all windows
  std::map<std::string, std::vector<double>> by_action;
  std::size_t windows = 0;
};

inline const std::vector<double>& default_horizons() {
  static const std::vector<double> h{200.0, 400.0, 600.0, 1000.0};
  return h;
}

// Scores predictions [W, N, V, 3] against the windows' futures.
inline EvalReport score(const Tensor& preds, const WindowSet& w, const std::vector<double>& horizons_ms) {
  if (w.empty()) throw ArgumentError("evaluate: no windows");
  const std::size_t N = w[0].x_out.extent(0), V = w[0].x_out.extent(1);
  EvalReport r;
  r.horizons_ms = horizons_ms;
  r.windows = w.size();
  for (double h : horizons_ms) r.frames.push_back(horizon_frame(h, N));
  const std::size_t H = horizons_ms.size();
  r.mpjpe.assign(H, 0.0);
  std::map<std::string, std::pair<std::vector<double>, std::size_t>> acc;
  for (std::size_t i = 0; i < w.size(); ++i) {
    auto& a = acc[w[i].action];
    if (a.first.empty()) a.first.assign(H, 0.0);
    ++a.second;
    for (std::size_t h = 0; h < H; ++h) {
      const std::size_t f = r.frames[h] - 1;
      const auto pb = preds.data().begin() + static_cast<long>((i * N + f) * V * 3);
      const auto gb = w[i].x_out.data().begin() + static_cast<long>(f * V * 3);
      const double e = mpjpe(Tensor({V, 3}, std::vector<double>(pb, pb + static_cast<long>(V * 3))),
                             Tensor({V, 3}, std::vector<double>(gb, gb + static_cast<long>(V * 3))));
      r.mpjpe[h] += e;
      a.first[h] += e;
    }
  }
  for (auto& v : r.mpjpe) v /= static_cast<double>(w.size());
  for (auto& [name, a] : acc) {
    for (auto& v : a.first) v /= static_cast<double>(a.second);
    r.by_action[name] = a.first;
  }
  return r;
}

// Model predictions for every window, batched in a fixed order.
inline Tensor predict(const ModelConfig& cfg, const ModelParams& p, const WindowSet& w, std::size_t chunk = 64) {
  std::vector<double> all;
  Shape s;
  for (std::size_t b = 0; b < w.size(); b += chunk) {
    std::vector<std::size_t> idx;
    for (std::size_t i = b; i < std::min(w.size(), b + chunk); ++i) idx.push_back(i);
    Tensor y = model_forward_batch(make_batch(w, idx).first, cfg, p);
    all.insert(all.end(), y.data().begin(), y.data().end());
    s = y.shape();
  }
  s[0] = w.size();
  return Tensor(s, std::move(all));
}

inline EvalReport evaluate(const ModelConfig& cfg, const ModelParams& p, const WindowSet& w,
                           const std::vector<double>& horizons_ms = default_horizons()) {
  if (w.empty()) throw ArgumentError("evaluate: no windows");
  for (double h : horizons_ms) horizon_frame(h, cfg.N_fut);
  return score(predict(cfg, p, w), w, horizons_ms);
}

// Repeats the last observed pose for every future frame.
inline EvalReport zero_velocity(const WindowSet& w, const std::vector<double>& horizons_ms = default_horizons()) {
  if (w.empty()) throw ArgumentError("evaluate: no windows");
  const std::size_t T = w[0].x_in.extent(0), N = w[0].x_out.extent(0), V = w[0].x_out.extent(1);
  Tensor preds({w.size(), N, V, 3});
  for (std::size_t i = 0; i < w.size(); ++i)
    for (std::size_t n = 0; n < N; ++n)
      std::copy_n(w[i].x_in.data().data() + (T - 1) * V * 3, V * 3, preds.data().data() + (i * N + n) * V * 3);
  return score(preds, w, horizons_ms);
}

} // namespace duo
