#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "duo/frequency.hpp"
#include "duo/init.hpp"

using namespace duo;

namespace {

ModelConfig micro(std::vector<std::size_t> channels = {3, 8, 3}) {
  ModelConfig c;
  c.T_obs = 8;
  c.N_fut = 4;
  c.joints = 3;
  c.bodies = 2;
  c.channels = std::move(channels);
  return c;
}

Tensor nested_layer(const Tensor& x, const Tensor& As, const Tensor& At, const Tensor& W) {
  const std::size_t T = x.extent(0), V = x.extent(1), Ci = x.extent(2), Co = W.extent(1);
  Tensor y({T, V, Co});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t v = 0; v < V; ++v)
      for (std::size_t co = 0; co < Co; ++co)
        for (std::size_t t0 = 0; t0 < T; ++t0)
          for (std::size_t v0 = 0; v0 < V; ++v0)
            for (std::size_t ci = 0; ci < Ci; ++ci)
              y.at({t, v, co}) += At.at({t, t0}) * As.at({v, v0}) * x.at({t0, v0, ci}) * W.at({ci, co});
  return y;
}

// Nodes [lo, hi) of a [T, V, C] tensor.
Tensor node_range(const Tensor& x, std::size_t lo, std::size_t hi) {
  const std::size_t T = x.extent(0), C = x.extent(2);
  Tensor out({T, hi - lo, C});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t v = lo; v < hi; ++v)
      for (std::size_t c = 0; c < C; ++c) out.at({t, v - lo, c}) = x.at({t, v, c});
  return out;
}

// P x P inverse by Gauss-Jordan with partial pivoting.
std::vector<double> invert(std::vector<double> a, std::size_t n) {
  std::vector<double> inv(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) inv[i * n + i] = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r * n + c]) > std::abs(a[piv * n + c])) piv = r;
    for (std::size_t k = 0; k < n; ++k) {
      std::swap(a[c * n + k], a[piv * n + k]);
      std::swap(inv[c * n + k], inv[piv * n + k]);
    }
    const double d = a[c * n + c];
    for (std::size_t k = 0; k < n; ++k) {
      a[c * n + k] /= d;
      inv[c * n + k] /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a[r * n + c];
      for (std::size_t k = 0; k < n; ++k) {
        a[r * n + k] -= f * a[c * n + k];
        inv[r * n + k] -= f * inv[c * n + k];
      }
    }
  }
  return inv;
}

} // namespace

// --- layers ---------------------------------------------------------------

TEST(Layer, IdentityParametersAreExact) {
  Rng rng(1);
  const Tensor x = normal(rng, 0, 1, {5, 6, 3});
  LayerParams p{Tensor::identity(6), Tensor::identity(5), Tensor(), Tensor::identity(3)};
  EXPECT_EQ(layer_forward(x, p, {Activation::linear}), x);
  EXPECT_EQ(nonseparable_layer_forward(x, Tensor::identity(30), Tensor::identity(3), {Activation::linear}), x);
}

TEST(Layer, OutputShape) {
  Rng rng(2);
  LayerParams p{normal(rng, 0, 1, {6, 6}), normal(rng, 0, 1, {4, 4}), Tensor(), normal(rng, 0, 1, {3, 5})};
  EXPECT_EQ(layer_forward(normal(rng, 0, 1, {4, 6, 3}), p, {Activation::relu}).shape(), (Shape{4, 6, 5}));
}

TEST(Layer, NestedLoopOracle) {
  Rng rng(3);
  const Tensor x = normal(rng, 0, 1, {3, 4, 2});
  LayerParams p{normal(rng, 0, 1, {4, 4}), normal(rng, 0, 1, {3, 3}), Tensor(), normal(rng, 0, 1, {2, 2})};
  EXPECT_LT(max_abs_diff(layer_forward(x, p, {Activation::linear}), nested_layer(x, p.spatial, p.temporal, p.weight)), 1e-12);
}

TEST(Layer, NonseparableFlattenedOracle) {
  Rng rng(4);
  const std::size_t T = 2, V = 2, C = 3;
  const Tensor x = normal(rng, 0, 1, {T, V, C}), ast = normal(rng, 0, 1, {T * V, T * V}), w = normal(rng, 0, 1, {C, 2});
  Tensor expect({T, V, 2});
  for (std::size_t r = 0; r < T * V; ++r)
    for (std::size_t co = 0; co < 2; ++co)
      for (std::size_t q = 0; q < T * V; ++q)
        for (std::size_t ci = 0; ci < C; ++ci) expect[r * 2 + co] += ast.at({r, q}) * x[q * C + ci] * w.at({ci, co});
  EXPECT_LT(max_abs_diff(nonseparable_layer_forward(x, ast, w, {Activation::linear}), expect), 1e-12);
}

TEST(Layer, KroneckerEquivalenceAllMicroShapes) {
  Rng rng(5);
  for (std::size_t T = 1; T <= 4; ++T)
    for (std::size_t V = 1; V <= 4; ++V) {
      const Tensor x = normal(rng, 0, 1, {T, V, 2});
      LayerParams p{normal(rng, 0, 1, {V, V}), normal(rng, 0, 1, {T, T}), Tensor(), normal(rng, 0, 1, {2, 3})};
      Tensor ast({T * V, T * V});
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t v = 0; v < V; ++v)
          for (std::size_t t0 = 0; t0 < T; ++t0)
            for (std::size_t v0 = 0; v0 < V; ++v0) ast.at({t * V + v, t0 * V + v0}) = p.temporal.at({t, t0}) * p.spatial.at({v, v0});
      for (auto act : {Activation::linear, Activation::relu})
        EXPECT_LT(max_abs_diff(layer_forward(x, p, {act}), nonseparable_layer_forward(x, ast, p.weight, {act})), 1e-12)
            << "T=" << T << " V=" << V;
    }
}

TEST(Layer, ShapeMismatchThrows) {
  Rng rng(6);
  LayerParams p{normal(rng, 0, 1, {5, 5}), normal(rng, 0, 1, {4, 4}), Tensor(), normal(rng, 0, 1, {3, 3})};
  EXPECT_THROW(layer_forward(normal(rng, 0, 1, {4, 6, 3}), p, {Activation::relu}), DimensionError);
}

// --- kinematic mask -------------------------------------------------------

TEST(KinematicMask, TwoNodeChain) {
  SkeletonSpec s;
  s.joint_names = {"a", "b"};
  s.tree_edges = {{0, 1}};
  s.bodies = 1;
  EXPECT_EQ(kinematic_mask(s), Tensor::matrix({{1, 1}, {1, 1}}));
}

TEST(KinematicMask, TwoBodiesBlockDiagonal) {
  SkeletonSpec s;
  s.joint_names = {"a", "b"};
  s.tree_edges = {{0, 1}};
  s.bodies = 2;
  EXPECT_EQ(kinematic_mask(s), Tensor::matrix({{1, 1, 0, 0}, {1, 1, 0, 0}, {0, 0, 1, 1}, {0, 0, 1, 1}}));
}

TEST(KinematicMask, Expi18RowSumsAreDegreePlusOne) {
  const SkeletonSpec s = SkeletonSpec::load(std::string(DUO_SOURCE_DIR) + "/data/expi18.json", 2);
  ASSERT_EQ(s.joints(), 18u);
  std::vector<int> degree(18, 0);
  for (auto [a, b] : s.tree_edges) {
    ++degree[a];
    ++degree[b];
  }
  const Tensor m = kinematic_mask(s);
  for (std::size_t v = 0; v < 36; ++v) {
    double row = 0.0, cross = 0.0;
    for (std::size_t u = 0; u < 36; ++u) {
      row += m.at({v, u});
      if ((u < 18) != (v < 18)) cross += m.at({v, u});
    }
    EXPECT_EQ(row, degree[v % 18] + 1) << "node " << v;
    EXPECT_EQ(cross, 0.0);
  }
}

TEST(KinematicMask, SkeletonValidation) {
  SkeletonSpec s;
  s.joint_names = {"a", "b", "c"};
  s.tree_edges = {{0, 1}, {1, 0}};
  EXPECT_THROW(s.validate(), IngestionError);
  s.tree_edges = {{0, 1}};
  EXPECT_THROW(s.validate(), IngestionError);
}

// --- encoder --------------------------------------------------------------

TEST(Encoder, IdentityLayerPassesInput) {
  ModelConfig c = micro({3, 3});
  c.activation = {Activation::linear};
  c.layer_residual = false;
  ModelParams p = zero_params(c);
  p.layers[0] = {Tensor::identity(6), Tensor::identity(8), Tensor(), Tensor::identity(3)};
  Rng rng(7);
  const Tensor x = normal(rng, 0, 1, {8, 6, 3});
  EXPECT_EQ(encoder_forward(x, c, p), x);
}

TEST(Encoder, ShapeChain) {
  ModelConfig c = micro({3, 64, 64, 3});
  Rng rng(8);
  const ModelParams p = init_model(c, c.init, rng);
  EXPECT_EQ(encoder_forward(normal(rng, 0, 1, {8, 6, 3}), c, p).shape(), (Shape{8, 6, 3}));
}

TEST(Encoder, TwoLayersEqualManualComposition) {
  ModelConfig c = micro({3, 8, 3});
  Rng rng(9);
  const ModelParams p = init_model(c, c.init, rng);
  const Tensor x = normal(rng, 0, 1, {8, 6, 3});
  const Tensor manual = layer_forward(layer_forward(x, p.layers[0], c.activation), p.layers[1], c.activation);
  EXPECT_EQ(encoder_forward(x, c, p), manual);
}

TEST(Encoder, ResidualAddedWhenChannelsMatch) {
  ModelConfig c = micro({3, 3});
  Rng rng(10);
  const ModelParams p = init_model(c, c.init, rng);
  const Tensor x = normal(rng, 0, 1, {8, 6, 3});
  const Tensor y = layer_forward(x, p.layers[0], c.activation);
  const Tensor e = encoder_forward(x, c, p);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(e[i], y[i] + x[i]);
}

// --- attention ------------------------------------------------------------

TEST(Attention, RowsAreProbabilityVectors) {
  Rng rng(11);
  const AttentionParams p{normal(rng, 0, 1, {4, 4}), normal(rng, 0, 1, {4, 4}), normal(rng, 0, 1, {4, 1}), normal(rng, 0, 1, {4, 1})};
  const Tensor eta = attention_weights(normal(rng, 0, 3, {5, 6, 4}), normal(rng, 0, 3, {5, 7, 4}), p);
  ASSERT_EQ(eta.shape(), (Shape{5, 6, 7}));
  for (std::size_t r = 0; r < 30; ++r) {
    double s = 0.0;
    for (std::size_t k = 0; k < 7; ++k) {
      EXPECT_GE(eta[r * 7 + k], 0.0);
      s += eta[r * 7 + k];
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Attention, SingleJointPartnerIsCopied) {
  Rng rng(12);
  const AttentionParams p{normal(rng, 0, 1, {2, 2}), normal(rng, 0, 1, {2, 2}), normal(rng, 0, 1, {2, 1}), normal(rng, 0, 1, {2, 1})};
  const Tensor b1 = normal(rng, 0, 1, {3, 4, 2}), b2 = normal(rng, 0, 1, {3, 1, 2});
  const auto [o1, o2] = cross_attention(b1, b2, p);
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t c = 0; c < 2; ++c) {
        double h2 = 0.0;
        for (std::size_t ci = 0; ci < 2; ++ci) h2 += b2.at({t, 0, ci}) * p.w2.at({ci, c});
        EXPECT_NEAR(o1.at({t, j, c}), h2, 1e-14);
      }
}

TEST(Attention, ScalarLoopOracle) {
  Rng rng(13);
  const std::size_t T = 2, J = 3, C = 2;
  const AttentionParams p{normal(rng, 0, 1, {C, C}), normal(rng, 0, 1, {C, C}), normal(rng, 0, 1, {C, 1}), normal(rng, 0, 1, {C, 1})};
  const Tensor b1 = normal(rng, 0, 1, {T, J, C}), b2 = normal(rng, 0, 1, {T, J, C});
  const auto [o1, o2] = cross_attention(b1, b2, p);
  auto leaky = [](double v) { return v > 0 ? v : 0.2 * v; };
  for (std::size_t t = 0; t < T; ++t) {
    double h1[J][C] = {}, h2[J][C] = {}, e1[J] = {}, e2[J] = {};
    for (std::size_t j = 0; j < J; ++j)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t ci = 0; ci < C; ++ci) {
          h1[j][c] += b1.at({t, j, ci}) * p.w1.at({ci, c});
          h2[j][c] += b2.at({t, j, ci}) * p.w2.at({ci, c});
        }
    for (std::size_t j = 0; j < J; ++j)
      for (std::size_t c = 0; c < C; ++c) {
        e1[j] += h1[j][c] * p.w3[c];
        e2[j] += h2[j][c] * p.w4[c];
      }
    for (std::size_t j = 0; j < J; ++j) {
      double z = 0.0, z_t = 0.0;
      for (std::size_t k = 0; k < J; ++k) {
        z += std::exp(leaky(e1[j] + e2[k]));
        z_t += std::exp(leaky(e1[k] + e2[j]));
      }
      for (std::size_t c = 0; c < C; ++c) {
        double a = 0.0, b = 0.0;
        for (std::size_t k = 0; k < J; ++k) {
          a += std::exp(leaky(e1[j] + e2[k])) / z * h2[k][c];
          b += std::exp(leaky(e1[k] + e2[j])) / z_t * h1[k][c];
        }
        EXPECT_NEAR(o1.at({t, j, c}), a, 1e-12);
        EXPECT_NEAR(o2.at({t, j, c}), b, 1e-12);
      }
    }
  }
}

// --- hierarchy ------------------------------------------------------------

TEST(Hierarchy, PseudoInverseRoundTripOnColumnSpace) {
  Rng rng(14);
  const std::size_t V = 12, P = 5, K = 3, C = 2;
  const Tensor down = normal(rng, 0, 1, {V, P});
  // up = (M^T M)^{-1} M^T, so that up^T down^T is the projector onto col(M)
  std::vector<double> mtm(P * P, 0.0);
  for (std::size_t a = 0; a < P; ++a)
    for (std::size_t b = 0; b < P; ++b)
      for (std::size_t v = 0; v < V; ++v) mtm[a * P + b] += down.at({v, a}) * down.at({v, b});
  const auto inv = invert(mtm, P);
  Tensor up({P, V});
  for (std::size_t a = 0; a < P; ++a)
    for (std::size_t v = 0; v < V; ++v)
      for (std::size_t b = 0; b < P; ++b) up.at({a, v}) += inv[a * P + b] * down.at({v, b});
  // x[k,:,c] = M z for random z
  const Tensor z = normal(rng, 0, 1, {K, P, C});
  Tensor x({K, V, C});
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t v = 0; v < V; ++v)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t a = 0; a < P; ++a) x.at({k, v, c}) += down.at({v, a}) * z.at({k, a, c});
  const HierarchyParams h{down, up};
  const Tensor back = hierarchy_apply(hierarchy_apply(x, h, HierarchyDirection::down), h, HierarchyDirection::up);
  EXPECT_LT(max_abs_diff(back, x), 1e-8);
}

TEST(Hierarchy, IdentityDownAndShape) {
  Rng rng(15);
  const Tensor x = normal(rng, 0, 1, {4, 6, 3});
  EXPECT_EQ(hierarchy_apply(x, {Tensor::identity(6), Tensor::identity(6)}, HierarchyDirection::down), x);
  const HierarchyParams h{normal(rng, 0, 1, {36, 12}), normal(rng, 0, 1, {12, 36})};
  EXPECT_EQ(hierarchy_apply(normal(rng, 0, 1, {50, 36, 3}), h, HierarchyDirection::down).shape(), (Shape{50, 12, 3}));
}

// --- decoders -------------------------------------------------------------

TEST(FcDecoder, IdentityAndShape) {
  Rng rng(16);
  const Tensor h = normal(rng, 0, 1, {5, 6, 3});
  EXPECT_EQ(fc_decode(h, Tensor::identity(5), Tensor::zeros({5})), h);
  EXPECT_EQ(fc_decode(normal(rng, 0, 1, {50, 36, 3}), normal(rng, 0, 1, {50, 25}), Tensor::zeros({25})).shape(),
            (Shape{25, 36, 3}));
}

TEST(FcDecoder, LoopOracle) {
  Rng rng(17);
  const Tensor h = normal(rng, 0, 1, {4, 3, 2}), w = normal(rng, 0, 1, {4, 3}), b = normal(rng, 0, 1, {3});
  const Tensor y = fc_decode(h, w, b);
  for (std::size_t n = 0; n < 3; ++n)
    for (std::size_t v = 0; v < 3; ++v)
      for (std::size_t c = 0; c < 2; ++c) {
        double s = b[n];
        for (std::size_t k = 0; k < 4; ++k) s += w.at({k, n}) * h.at({k, v, c});
        EXPECT_NEAR(y.at({n, v, c}), s, 1e-13);
      }
}

TEST(TcnDecoder, KernelOneIdentity) {
  Rng rng(18);
  const Tensor h = normal(rng, 0, 1, {5, 4, 3});
  DecoderParams p;
  p.conv = {Tensor::identity(3).reshaped({1, 3, 3})};
  p.conv_bias = {Tensor::zeros({3})};
  p.resample = Tensor::identity(5);
  EXPECT_EQ(tcn_decode(h, p, {Activation::relu}), h);
}

TEST(TcnDecoder, ImpulseSupportGrowsOneFramePerLayer) {
  const std::size_t K = 11, center = 5;
  Tensor h({K, 1, 1});
  h[center] = 1.0;
  for (std::size_t layers = 1; layers <= 3; ++layers) {
    DecoderParams p;
    for (std::size_t l = 0; l < layers; ++l) {
      p.conv.push_back(Tensor::ones({3, 1, 1}));
      p.conv_bias.push_back(Tensor::zeros({1}));
    }
    p.resample = Tensor::identity(K);
    const Tensor y = tcn_decode(h, p, {Activation::linear});
    for (std::size_t k = 0; k < K; ++k) {
      const bool inside = k + layers >= center && k <= center + layers;
      EXPECT_EQ(y[k] != 0.0, inside) << "layers=" << layers << " k=" << k;
    }
  }
}

TEST(TcnDecoder, ConvolutionSumOracle) {
  Rng rng(19);
  const std::size_t K = 6, V = 2, C = 3, N = 4, R = 1;
  const Tensor h = normal(rng, 0, 1, {K, V, C});
  DecoderParams p;
  for (int l = 0; l < 2; ++l) {
    p.conv.push_back(normal(rng, 0, 1, {3, C, C}));
    p.conv_bias.push_back(normal(rng, 0, 1, {C}));
  }
  p.resample = normal(rng, 0, 1, {K, N});
  auto conv = [&](const Tensor& x, const Tensor& w, const Tensor& b) {
    Tensor y({K, V, C});
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t v = 0; v < V; ++v)
        for (std::size_t co = 0; co < C; ++co) {
          double s = b[co];
          for (std::size_t o = 0; o < 3; ++o) {
            const long src = static_cast<long>(k + o) - static_cast<long>(R);
            if (src < 0 || src >= static_cast<long>(K)) continue;
            for (std::size_t ci = 0; ci < C; ++ci) s += w.at({o, ci, co}) * x.at({static_cast<std::size_t>(src), v, ci});
          }
          y.at({k, v, co}) = s;
        }
    return y;
  };
  Tensor a = conv(h, p.conv[0], p.conv_bias[0]);
  for (auto& v : a.data()) v = std::tanh(v);
  const Tensor b = conv(a, p.conv[1], p.conv_bias[1]);
  Tensor expect({N, V, C});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t i = 0; i < V * C; ++i)
      for (std::size_t k = 0; k < K; ++k) expect[n * V * C + i] += p.resample.at({k, n}) * b[k * V * C + i];
  EXPECT_LT(max_abs_diff(tcn_decode(h, p, {Activation::tanh}), expect), 1e-12);
}

// --- full model -----------------------------------------------------------

TEST(Model, StaticPoseWithZeroDecoderIsPassedThrough) {
  ModelConfig c = micro();
  Rng rng(20);
  ModelParams p = init_model(c, c.init, rng);
  for (auto& v : p.decoder.weight.data()) v = 0.0;
  const Tensor pose = normal(rng, 0, 500, {6, 3});
  Tensor x({8, 6, 3});
  for (std::size_t t = 0; t < 8; ++t)
    for (std::size_t i = 0; i < 18; ++i) x[t * 18 + i] = pose[i];
  const Tensor y = model_forward(x, c, p);
  for (std::size_t n = 0; n < 4; ++n)
    for (std::size_t i = 0; i < 18; ++i) EXPECT_EQ(y[n * 18 + i], pose[i]);
}

TEST(Model, DefaultOutputShape) {
  ModelConfig c;
  Rng rng(21);
  const ModelParams p = init_model(c, c.init, rng);
  EXPECT_EQ(model_forward(normal(rng, 0, 1, {50, 36, 3}), c, p).shape(), (Shape{25, 36, 3}));
}

TEST(Model, StagedCompositionIsBitwiseEqual) {
  ModelConfig c = micro({3, 8, 3});
  c.attention = true;
  c.hierarchy = 4;
  Rng rng(22);
  const ModelParams p = init_model(c, c.init, rng);
  const Tensor x = normal(rng, 0, 100, {8, 6, 3});

  Tensor h = dct_apply(x, dct_basis(8), 8);
  h = layer_forward(h, p.layers[0], c.activation);
  h = hierarchy_apply(h, *p.hierarchy, HierarchyDirection::down);
  h = hierarchy_apply(h, *p.hierarchy, HierarchyDirection::up);
  const auto [a1, a2] = cross_attention(node_range(h, 0, 3), node_range(h, 3, 6), *p.attention);
  for (std::size_t k = 0; k < 8; ++k)
    for (std::size_t v = 0; v < 6; ++v)
      for (std::size_t ch = 0; ch < 8; ++ch)
        h.at({k, v, ch}) = h.at({k, v, ch}) + (v < 3 ? a1.at({k, v, ch}) : a2.at({k, v - 3, ch}));
  h = layer_forward(h, p.layers[1], c.activation);
  Tensor y = idct_apply(fc_decode(h, p.decoder.weight, p.decoder.bias), 4);
  for (std::size_t n = 0; n < 4; ++n)
    for (std::size_t i = 0; i < 18; ++i) y[n * 18 + i] = y[n * 18 + i] + x[7 * 18 + i];

  EXPECT_EQ(model_forward(x, c, p), y);
}

TEST(Model, DeterministicAcrossCalls) {
  ModelConfig c = micro({3, 8, 8, 3});
  c.attention = true;
  c.decoder.kind = DecoderKind::tcn;
  Rng rng(23);
  const ModelParams p = init_model(c, c.init, rng);
  const Tensor x = normal(rng, 0, 1, {8, 6, 3});
  EXPECT_EQ(model_forward(x, c, p), model_forward(x, c, p));
}

TEST(Model, RejectsWrongInputShape) {
  ModelConfig c = micro();
  Rng rng(24);
  const ModelParams p = init_model(c, c.init, rng);
  EXPECT_THROW(model_forward(normal(rng, 0, 1, {7, 6, 3}), c, p), DimensionError);
}

TEST(Model, ConfigValidation) {
  ModelConfig c = micro();
  c.channels = {4, 8, 3};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = micro();
  c.bodies = 3;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = micro();
  c.retain = 9;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

// --- parameter counting ---------------------------------------------------

TEST(ParamCount, HandCountedExample) {
  ModelConfig c;
  c.T_obs = 4;
  c.N_fut = 2;
  c.joints = 3;
  c.bodies = 2;
  c.channels = {3, 3};
  EXPECT_EQ(param_count(c), 71u);
}

TEST(ParamCount, AttentionAddsTwoCSquaredPlusTwoC) {
  ModelConfig c = micro({3, 8, 8, 3});
  const std::size_t base = param_count(c);
  c.attention = true;
  const std::size_t C = c.attention_channels();
  EXPECT_EQ(param_count(c) - base, 2 * C * C + 2 * C);
}

TEST(ParamCount, MonotoneInDepth) {
  std::size_t prev = 0;
  for (std::size_t L = 1; L <= 8; ++L) {
    std::vector<std::size_t> ch(L + 1, 16);
    ch.front() = ch.back() = 3;
    ModelConfig c = micro(ch);
    EXPECT_GT(param_count(c), prev);
    prev = param_count(c);
  }
}

TEST(ParamCount, KinematicTreeDropsMaskedEntries) {
  ModelConfig c = micro({3, 8, 8, 3});
  const std::size_t learnable = param_count(c);
  c.connectivity = Connectivity::kinematic_tree;
  const SkeletonSpec sk = SkeletonSpec::binary_tree(3, 2);
  const Tensor m = kinematic_mask(sk);
  std::size_t zeros = 0;
  for (double v : m.data()) zeros += v == 0.0;
  EXPECT_EQ(learnable - param_count(c, &sk), 3 * zeros);
}

TEST(ParamCount, MatchesParameterTensors) {
  ModelConfig c = micro({3, 8, 8, 3});
  c.attention = true;
  c.hierarchy = 4;
  c.decoder.kind = DecoderKind::tcn;
  std::size_t n = 0;
  for (const auto& t : flatten(zero_params(c))) n += t.size();
  EXPECT_EQ(param_count(c), n);
}
