#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "duo/frequency.hpp"
#include "duo/numerics/rng.hpp"

using namespace duo;

namespace {

// Coefficient i (1-based) of x by direct summation of the cosine terms.
double direct_coeff(const std::vector<double>& x, std::size_t i) {
  const double T = static_cast<double>(x.size());
  double s = 0.0;
  for (std::size_t t = 1; t <= x.size(); ++t)
    s += x[t - 1] * std::cos(std::numbers::pi * (2.0 * static_cast<double>(t) - 1.0) * (static_cast<double>(i) - 1.0) / (2.0 * T));
  return std::sqrt(2.0 / T) * (i == 1 ? 1.0 / std::sqrt(2.0) : 1.0) * s;
}

} // namespace

TEST(DctBasis, T1IsOne) { EXPECT_NEAR(dct_basis(1).matrix[0], 1.0, 1e-15); }

TEST(DctBasis, FirstRowIsConstant) {
  const auto& b = dct_basis(4).matrix;
  for (std::size_t t = 0; t < 4; ++t) EXPECT_NEAR(b[t], 0.5, 1e-15);
}

TEST(DctBasis, T4MatchesDirectCosines) {
  const auto& b = dct_basis(4).matrix;
  for (std::size_t i = 1; i <= 4; ++i)
    for (std::size_t t = 1; t <= 4; ++t) {
      std::vector<double> e(4, 0.0);
      e[t - 1] = 1.0;
      EXPECT_NEAR(b[(i - 1) * 4 + t - 1], direct_coeff(e, i), 1e-15);
    }
}

TEST(DctBasis, ZeroLengthRejected) { EXPECT_THROW(dct_basis(0), std::invalid_argument); }

TEST(DctApply, ConstantSignal) {
  const Tensor c = dct_apply(Tensor::vector({1, 1, 1, 1}), dct_basis(4), 4);
  EXPECT_NEAR(c[0], 2.0, 1e-14);
  for (std::size_t i = 1; i < 4; ++i) EXPECT_NEAR(c[i], 0.0, 1e-14);
}

TEST(DctApply, RampMatchesDoubleLoop) {
  const std::vector<double> x{1, 2, 3, 4};
  const Tensor c = dct_apply(Tensor::vector({1, 2, 3, 4}), dct_basis(4), 4);
  for (std::size_t i = 1; i <= 4; ++i) EXPECT_NEAR(c[i - 1], direct_coeff(x, i), 1e-13);
}

TEST(DctApply, RetainTruncates) {
  const Tensor c = dct_apply(Tensor::vector({1, 2, 3, 4}), dct_basis(4), 2);
  EXPECT_EQ(c.shape(), (Shape{2}));
  EXPECT_THROW(dct_apply(Tensor::vector({1, 2, 3, 4}), dct_basis(4), 5), std::invalid_argument);
  EXPECT_THROW(dct_apply(Tensor::vector({1, 2, 3}), dct_basis(4), 2), DimensionError);
}

TEST(IdctApply, InverseOfConstant) {
  const Tensor x = idct_apply(Tensor::vector({2, 0, 0, 0}), 4);
  for (std::size_t t = 0; t < 4; ++t) EXPECT_NEAR(x[t], 1.0, 1e-14);
}

TEST(IdctApply, SingleCoefficientIsConstant) {
  const Tensor x = idct_apply(Tensor::vector({3.0}), 4);
  for (std::size_t t = 0; t < 4; ++t) EXPECT_NEAR(x[t], 3.0 / 2.0, 1e-14);
}

TEST(Dct, RoundTripOnMultiAxisInput) {
  Rng rng(1);
  const Tensor x = normal(rng, 0, 100, {50, 6, 3});
  EXPECT_LT(max_abs_diff(idct_apply(dct_apply(x, dct_basis(50), 50), 50), x), 1e-10);
}

TEST(Dct, OrthonormalityAllLengths) {
  for (std::size_t T = 1; T <= 128; ++T) {
    const auto& b = dct_basis(T).matrix;
    double worst = 0.0;
    for (std::size_t i = 0; i < T; ++i)
      for (std::size_t j = 0; j < T; ++j) {
        double s = 0.0;
        for (std::size_t t = 0; t < T; ++t) s += b[i * T + t] * b[j * T + t];
        worst = std::max(worst, std::abs(s - (i == j ? 1.0 : 0.0)));
      }
    ASSERT_LT(worst, 1e-10) << "T=" << T;
  }
}

TEST(Dct, Parseval) {
  Rng rng(2);
  for (std::size_t T : {1u, 7u, 50u, 128u}) {
    const Tensor x = normal(rng, 0, 1, {T});
    const Tensor c = dct_apply(x, dct_basis(T), T);
    double nx = 0.0, nc = 0.0;
    for (std::size_t i = 0; i < T; ++i) {
      nx += x[i] * x[i];
      nc += c[i] * c[i];
    }
    EXPECT_NEAR(std::sqrt(nc), std::sqrt(nx), 1e-10);
  }
}

TEST(Dct, TruncationIsProjectionOntoLeadingRows) {
  Rng rng(3);
  const std::size_t T = 20, K = 6;
  const Tensor x = normal(rng, 0, 1, {T});
  const Tensor rec = idct_apply(dct_apply(x, dct_basis(T), K), T);
  // explicit projection sum_k <x, b_k> b_k with the closed-form rows
  std::vector<double> xs(x.data().begin(), x.data().end());
  for (std::size_t t = 0; t < T; ++t) {
    double v = 0.0;
    for (std::size_t k = 1; k <= K; ++k) {
      std::vector<double> e(T, 0.0);
      e[t] = 1.0;
      v += direct_coeff(xs, k) * direct_coeff(e, k);
    }
    EXPECT_NEAR(rec[t], v, 1e-12);
  }
}

TEST(Dct, TapeOpsMatchTensorForm) {
  Rng rng(4);
  const Tensor x = normal(rng, 0, 1, {2, 10, 4, 3});
  Tape t;
  const Tensor c = ops::dct(t.constant(x), 10).value();
  for (std::size_t b = 0; b < 2; ++b) {
    Tensor xb({10, 4, 3}, std::vector<double>(x.data().begin() + static_cast<long>(b * 120), x.data().begin() + static_cast<long>((b + 1) * 120)));
    const Tensor cb = dct_apply(xb, dct_basis(10), 10);
    for (std::size_t i = 0; i < 120; ++i) EXPECT_NEAR(c[b * 120 + i], cb[i], 1e-13);
  }
  EXPECT_LT(max_abs_diff(ops::idct(ops::dct(t.constant(x), 10), 10).value(), x), 1e-12);
}
