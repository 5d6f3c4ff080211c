#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "duo/numerics/ops.hpp"
#include "duo/numerics/rng.hpp"

namespace duo {

// Builds a scalar loss on `tape` from parameter leaves bound in slot order.
using ScalarFn = std::function<Var(Tape& tape, const std::vector<Var>& params)>;

inline std::vector<Var> bind_parameters(Tape& tape, const std::vector<Tensor>& params) {
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) vars.push_back(tape.parameter(params[i], i));
  return vars;
}

inline double evaluate_scalar(const ScalarFn& f, const std::vector<Tensor>& params) {
  Tape tape;
  const double v = tape.value(f(tape, bind_parameters(tape, params)))[0];
  if (!std::isfinite(v)) throw EvaluationError("finite_difference_check: non-finite function value");
  return v;
}

inline std::vector<Tensor> gradient(const ScalarFn& f, const std::vector<Tensor>& params) {
  Tape tape;
  Var loss = f(tape, bind_parameters(tape, params));
  return tape.backward(loss, params.size());
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
};

// Central differences against backward(). Checks every coordinate when the
// total is at most `max_coords`, otherwise a seeded random subsample of that
// size. Error per coordinate is |analytic - numeric| / max(1, |numeric|).
inline GradCheckResult finite_difference_check(const ScalarFn& f, std::vector<Tensor> params, double eps,
                                               std::size_t max_coords = 400, std::uint64_t seed = 0) {
  if (!(eps > 0.0)) throw ArgumentError("finite_difference_check: eps must be positive");
  const auto analytic = gradient(f, params);
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t p = 0; p < params.size(); ++p)
    for (std::size_t i = 0; i < params[p].size(); ++i) coords.emplace_back(p, i);
  if (coords.size() > max_coords) {
    Rng rng(seed, 0xfd);
    rng.shuffle(coords);
    coords.resize(max_coords);
    std::sort(coords.begin(), coords.end());
  }
  GradCheckResult r;
  for (auto [p, i] : coords) {
    const double orig = params[p][i];
    params[p][i] = orig + eps;
    const double fp = evaluate_scalar(f, params);
    params[p][i] = orig - eps;
    const double fm = evaluate_scalar(f, params);
    params[p][i] = orig;
    const double numeric = (fp - fm) / (2.0 * eps);
    const double err = std::abs(analytic[p][i] - numeric) / std::max(1.0, std::abs(numeric));
    r.max_rel_error = std::max(r.max_rel_error, err);
    ++r.coordinates;
  }
  return r;
}

// Tensor-level conveniences that run a single op on a throwaway tape.
inline Tensor matmul_batched(const Tensor& a, const Tensor& b) {
  Tape t;
  return ops::matmul(t.constant(a), t.constant(b)).value();
}

inline Tensor apply_activation(const Tensor& x, ActivationSpec a) {
  Tape t;
  return ops::activation(t.constant(x), a).value();
}

} // namespace duo
