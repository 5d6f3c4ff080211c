#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "duo/data.hpp"
#include "duo/init.hpp"
#include "duo/numerics/gradcheck.hpp"
#include "duo/training.hpp"

using namespace duo;

namespace {

ModelConfig micro() {
  ModelConfig c;
  c.T_obs = 8;
  c.N_fut = 4;
  c.joints = 3;
  c.bodies = 2;
  c.channels = {3, 8, 8, 3};
  return c;
}

WindowSet micro_windows(std::size_t sequences = 1, std::size_t frames = 15) {
  const auto sk = SkeletonSpec::binary_tree(3, 2);
  return window(synth_generate(Rng(4), sequences, frames, sk), 8, 4, 1, Normalization::center_last, &sk);
}

double loop_mpjpe(const Tensor& a, const Tensor& b, std::size_t offset, std::size_t V) {
  double s = 0.0;
  for (std::size_t v = 0; v < V; ++v) {
    double q = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      const double d = a[offset + v * 3 + c] - b[offset + v * 3 + c];
      q += d * d;
    }
    s += std::sqrt(q);
  }
  return s / static_cast<double>(V);
}

} // namespace

TEST(Mpjpe, Examples) {
  Rng rng(1);
  const Tensor a = normal(rng, 0, 1, {5, 3});
  EXPECT_EQ(mpjpe(a, a), 0.0);
  EXPECT_DOUBLE_EQ(mpjpe(Tensor::matrix({{3, 4, 0}, {0, 0, 0}}), Tensor::zeros({2, 3})), 2.5);
  EXPECT_THROW(mpjpe(Tensor::zeros({2, 3}), Tensor::zeros({3, 3})), DimensionError);
}

TEST(Mpjpe, LoopOracleAndProperties) {
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    const Tensor a = normal(rng, 0, 100, {36, 3}), b = normal(rng, 0, 100, {36, 3});
    const double e = mpjpe(a, b);
    EXPECT_NEAR(e, loop_mpjpe(a, b, 0, 36), 1e-12);
    EXPECT_GT(e, 0.0);
    EXPECT_EQ(e, mpjpe(b, a));
  }
}

TEST(SequenceLoss, Examples) {
  Rng rng(3);
  const Tensor a = normal(rng, 0, 1, {4, 6, 3});
  EXPECT_EQ(sequence_loss(a, a), 0.0);
  Tensor b = a;
  for (std::size_t i = 0; i < b.size(); i += 3) b[i] += 2.5;
  EXPECT_NEAR(sequence_loss(a, b), 2.5, 1e-14);
  const Tensor c = normal(rng, 0, 1, {4, 6, 3});
  double s = 0.0;
  for (std::size_t n = 0; n < 4; ++n) s += loop_mpjpe(a, c, n * 18, 6);
  EXPECT_NEAR(sequence_loss(a, c), s / 4.0, 1e-12);
  Tape t;
  EXPECT_NEAR(ops::sequence_loss(t.constant(a), t.constant(c)).value()[0], s / 4.0, 1e-12);
}

TEST(SequenceLoss, FullModelGradientCheck) {
  ModelConfig c = micro();
  c.attention = true;
  Rng rng(4);
  ModelParams p = init_model(c, c.init, rng);
  for (auto& v : p.decoder.bias.data()) v = rng.normal(0.0, 0.1);
  const Tensor x = normal(rng, 0, 1, {2, 8, 6, 3}), y = normal(rng, 0, 1, {2, 4, 6, 3});
  const ModelParams shape = p;
  ScalarFn f = [&](Tape& t, const std::vector<Var>& v) {
    auto slots = like<Var>(shape);
    std::size_t i = 0;
    walk_slots(shape, slots, [&](const std::string&, const Tensor&, Var& s) { s = v[i++]; });
    return ops::sequence_loss(ops::forecast(t.constant(x), c, slots), t.constant(y));
  };
  EXPECT_LT(finite_difference_check(f, flatten(p), 1e-7, 400, 1).max_rel_error, 1e-5);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Rng rng(5);
  std::vector<Tensor> p{normal(rng, 0, 1, {3, 2})};
  const auto before = p;
  AdamState st = AdamState::zeros_like(p);
  adam_step(p, {Tensor::zeros({3, 2})}, st, TrainConfig{});
  EXPECT_EQ(p, before);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<Tensor> p{Tensor::vector({0.0})};
  AdamState st = AdamState::zeros_like(p);
  TrainConfig tc;
  tc.lr = 0.1;
  adam_step(p, {Tensor::vector({1.0})}, st, tc);
  EXPECT_NEAR(p[0][0], -0.1, 1e-8);
}

TEST(Adam, NonFiniteGradientRaises) {
  std::vector<Tensor> p{Tensor::vector({0.0})};
  AdamState st = AdamState::zeros_like(p);
  EXPECT_THROW(adam_step(p, {Tensor::vector({std::nan("")})}, st, TrainConfig{}), DivergenceError);
}

TEST(Schedule, StepDecay) {
  TrainConfig tc;
  tc.lr = 0.01;
  tc.steps = 100;
  EXPECT_EQ(tc.lr_at(0), 0.01);
  EXPECT_EQ(tc.lr_at(24), 0.01);
  EXPECT_EQ(tc.lr_at(25), 0.005);
  EXPECT_EQ(tc.lr_at(99), 0.01 * 0.125);
  tc.decay_every = 10;
  EXPECT_EQ(tc.lr_at(10), 0.005);
}

TEST(Train, ZeroStepsAndZeroLrLeaveParameters) {
  const ModelConfig c = micro();
  Rng rng(6);
  const ModelParams p = init_model(c, c.init, rng);
  const auto w = micro_windows();
  TrainConfig tc;
  tc.steps = 0;
  EXPECT_EQ(flatten(train(c, p, w, tc).params), flatten(p));
  tc.steps = 5;
  tc.lr = 0.0;
  const auto r = train(c, p, w, tc);
  EXPECT_EQ(flatten(r.params), flatten(p));
  EXPECT_EQ(r.curve.size(), 5u);
}

TEST(Train, DeterministicTrajectories) {
  const ModelConfig c = micro();
  Rng rng(7);
  const ModelParams p = init_model(c, c.init, rng);
  const auto w = micro_windows(2);
  TrainConfig tc;
  tc.steps = 20;
  tc.batch = 3;
  tc.seed = 11;
  const auto a = train(c, p, w, tc), b = train(c, p, w, tc);
  EXPECT_EQ(flatten(a.params), flatten(b.params));
  for (std::size_t i = 0; i < a.curve.size(); ++i) EXPECT_EQ(a.curve[i].loss, b.curve[i].loss);
}

TEST(Train, OverfitsFourWindows) {
  const ModelConfig c = micro();
  Rng rng(8);
  const ModelParams p = init_model(c, c.init, rng);
  const auto all = micro_windows(1, 15);
  const WindowSet w(all.begin(), all.begin() + 4);
  TrainConfig tc;
  tc.steps = 2000;
  tc.batch = 4;
  tc.lr = 1e-2;
  const double l0 = dataset_loss(c, p, w);
  const auto r = train(c, p, w, tc);
  EXPECT_LT(dataset_loss(c, r.params, w), 0.05 * l0);
}

TEST(Train, DefaultConfigCurveIsFinite) {
  const ModelConfig c;  // 18 joints, two bodies, eight layers
  const auto sk = SkeletonSpec::binary_tree(18, 2);
  const auto w = window(synth_generate(Rng(9), 1, 80, sk), 50, 25, 1, Normalization::center_last, &sk);
  Rng rng(10);
  TrainConfig tc;
  tc.steps = 5;
  tc.batch = 2;
  const auto r = train(c, init_model(c, c.init, rng), w, tc);
  ASSERT_EQ(r.curve.size(), 5u);
  for (const auto& pt : r.curve) EXPECT_TRUE(std::isfinite(pt.loss));
}

TEST(Train, KinematicMaskSurvivesUpdates) {
  ModelConfig c = micro();
  c.connectivity = Connectivity::kinematic_tree;
  Rng rng(11);
  const auto w = micro_windows();
  TrainConfig tc;
  tc.steps = 10;
  const auto r = train(c, init_model(c, c.init, rng), w, tc);
  const Tensor m = kinematic_mask(SkeletonSpec::binary_tree(3, 2));
  for (const auto& l : r.params.layers)
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (m[i] == 0.0) {
        EXPECT_EQ(l.spatial[i], 0.0);
      }
    }
}

TEST(Train, NonFiniteDataRaisesWithPartialCurve) {
  const ModelConfig c = micro();
  Rng rng(12);
  auto w = micro_windows();
  for (auto& win : w) win.x_out[0] = std::numeric_limits<double>::infinity();
  TrainConfig tc;
  tc.steps = 3;
  try {
    train(c, init_model(c, c.init, rng), w, tc);
    FAIL() << "expected divergence";
  } catch (const TrainingDiverged& e) {
    EXPECT_EQ(e.curve.size(), 0u);
  }
}

TEST(Horizon, FrameMapping) {
  EXPECT_EQ(horizon_frame(1000, 25), 25u);
  EXPECT_EQ(horizon_frame(200, 25), 5u);
  EXPECT_EQ(horizon_frame(40, 25), 1u);
  EXPECT_THROW(horizon_frame(1040, 25), std::invalid_argument);
  EXPECT_THROW(horizon_frame(30, 25), std::invalid_argument);
  EXPECT_THROW(horizon_frame(0, 25), std::invalid_argument);
  EXPECT_EQ(default_horizons(), (std::vector<double>{200, 400, 600, 1000}));
}

TEST(Evaluate, PerfectPredictorScoresZero) {
  const auto w = micro_windows(2);
  Tensor preds({w.size(), 4, 6, 3});
  for (std::size_t i = 0; i < w.size(); ++i)
    std::copy(w[i].x_out.data().begin(), w[i].x_out.data().end(), preds.data().begin() + static_cast<long>(i * 72));
  const auto r = score(preds, w, {40, 80, 160});
  for (double e : r.mpjpe) EXPECT_EQ(e, 0.0);
  for (const auto& [action, v] : r.by_action)
    for (double e : v) EXPECT_EQ(e, 0.0);
}

TEST(Evaluate, ZeroVelocityMatchesHandComputation) {
  const auto w = micro_windows(1);
  const auto r = zero_velocity(w, {160});
  double s = 0.0;
  for (const auto& win : w) {
    Tensor last({6, 3}), gt({6, 3});
    for (std::size_t i = 0; i < 18; ++i) {
      last[i] = win.x_in[7 * 18 + i];
      gt[i] = win.x_out[3 * 18 + i];
    }
    s += mpjpe(last, gt);
  }
  EXPECT_NEAR(r.mpjpe[0], s / static_cast<double>(w.size()), 1e-12);
  EXPECT_EQ(r.frames, (std::vector<std::size_t>{4}));
}

TEST(Evaluate, ModelEvaluationMatchesPerWindowForward) {
  const ModelConfig c = micro();
  Rng rng(13);
  const ModelParams p = init_model(c, c.init, rng);
  const auto w = micro_windows(1);
  const auto r = evaluate(c, p, w, {80});
  double s = 0.0;
  for (const auto& win : w) {
    const Tensor y = model_forward(win.x_in, c, p);
    s += loop_mpjpe(y, win.x_out, 18, 6);
  }
  EXPECT_NEAR(r.mpjpe[0], s / static_cast<double>(w.size()), 1e-9);
  EXPECT_THROW(evaluate(c, p, w, {200}), std::invalid_argument);
}
