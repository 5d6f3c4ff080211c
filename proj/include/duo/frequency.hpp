#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "duo/numerics/ops.hpp"

namespace duo {

// Orthonormal DCT-II basis of length T. Row i (0-based) is
//   sqrt(2/T) * (i == 0 ? 1/sqrt(2) : 1) * cos(pi * (2t + 1) * i / (2T)),
// i.e. the 1-based form with the Kronecker factor folded into row 0.
struct DCTBasis {
  std::size_t length = 0;
  Tensor matrix;  // [T, T]
};

inline DCTBasis make_dct_basis(std::size_t T) {
  if (T == 0) throw ArgumentError("dct_basis: T must be at least 1");
  Tensor m({T, T});
  const double n = static_cast<double>(T);
  for (std::size_t i = 0; i < T; ++i) {
    const double norm = std::sqrt(2.0 / n) * (i == 0 ? 1.0 / std::sqrt(2.0) : 1.0);
    for (std::size_t t = 0; t < T; ++t)
      m[i * T + t] = norm * std::cos(std::numbers::pi * (2.0 * static_cast<double>(t) + 1.0) *
                                     static_cast<double>(i) / (2.0 * n));
  }
  return DCTBasis{T, std::move(m)};
}

// Cached per length; safe to call from several threads.
inline const DCTBasis& dct_basis(std::size_t T) {
  static std::mutex mu;
  static std::map<std::size_t, std::unique_ptr<DCTBasis>> cache;
  if (T == 0) throw ArgumentError("dct_basis: T must be at least 1");
  std::lock_guard lock(mu);
  auto& slot = cache[T];
  if (!slot) slot = std::make_unique<DCTBasis>(make_dct_basis(T));
  return *slot;
}

// First K rows of the basis, [K, T].
inline Tensor dct_rows(std::size_t T, std::size_t K) {
  if (K == 0 || K > T) throw ArgumentError("dct: retain K=" + std::to_string(K) + " outside [1," + std::to_string(T) + "]");
  const auto& b = dct_basis(T);
  return Tensor({K, T}, std::vector<double>(b.matrix.data().begin(), b.matrix.data().begin() + static_cast<long>(K * T)));
}

// Transposed basis restricted to its first K rows, [T, K]; maps K
// coefficients back to T frames (missing rows act as zero padding).
inline Tensor idct_columns(std::size_t T, std::size_t K) {
  if (K == 0 || K > T) throw ArgumentError("idct: K=" + std::to_string(K) + " exceeds T_out=" + std::to_string(T));
  const auto& b = dct_basis(T);
  Tensor out({T, K});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t k = 0; k < K; ++k) out[t * K + k] = b.matrix[k * T + t];
  return out;
}

namespace ops {

// Along axis 1 of x [B, T, ...] -> [B, K, ...].
inline Var dct(Var x, std::size_t K) {
  const Shape& s = x.shape();
  if (s.size() < 2) throw DimensionError("dct: expected [B, T, ...], got " + shape_str(s));
  const std::size_t B = s[0], T = s[1];
  const std::size_t rest = x.value().size() / (B * T);
  Var basis = x.tape->constant(dct_rows(T, K));
  Var y = matmul(basis, reshape(x, {B, T, rest}));
  Shape os = s;
  os[1] = K;
  return reshape(y, os);
}

// Along axis 1 of c [B, K, ...] -> [B, T_out, ...].
inline Var idct(Var c, std::size_t T_out) {
  const Shape& s = c.shape();
  if (s.size() < 2) throw DimensionError("idct: expected [B, K, ...], got " + shape_str(s));
  const std::size_t B = s[0], K = s[1];
  const std::size_t rest = c.value().size() / (B * K);
  Var basis = c.tape->constant(idct_columns(T_out, K));
  Var y = matmul(basis, reshape(c, {B, K, rest}));
  Shape os = s;
  os[1] = T_out;
  return reshape(y, os);
}

} // namespace ops

// Transform along axis 0 of x [T, ...], keeping the first K coefficients.
inline Tensor dct_apply(const Tensor& x, const DCTBasis& basis, std::size_t K) {
  if (x.rank() == 0 || x.extent(0) != basis.length)
    throw DimensionError("dct_apply: leading extent of " + shape_str(x.shape()) + " vs basis length " +
                         std::to_string(basis.length));
  Shape bs = x.shape();
  bs.insert(bs.begin(), 1);
  Tape t;
  Tensor y = ops::dct(t.constant(x.reshaped(bs)), K).value();
  Shape os = x.shape();
  os[0] = K;
  return y.reshaped(os);
}

// Inverse along axis 0 of coeffs [K, ...], zero-padding to T_out rows.
inline Tensor idct_apply(const Tensor& coeffs, std::size_t T_out) {
  if (coeffs.rank() == 0) throw DimensionError("idct_apply: scalar input");
  if (coeffs.extent(0) > T_out)
    throw ArgumentError("idct_apply: K=" + std::to_string(coeffs.extent(0)) + " exceeds T_out=" + std::to_string(T_out));
  Shape bs = coeffs.shape();
  bs.insert(bs.begin(), 1);
  Tape t;
  Tensor y = ops::idct(t.constant(coeffs.reshaped(bs)), T_out).value();
  Shape os = coeffs.shape();
  os[0] = T_out;
  return y.reshaped(os);
}

} // namespace duo
