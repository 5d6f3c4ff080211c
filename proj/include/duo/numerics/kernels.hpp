#pragma once

#include <cstddef>
#include <span>

// Raw row-major loops behind the tape operations. The inner loops run over
// contiguous memory so the compiler can vectorize them; summation order is
// fixed, which keeps every result bit-reproducible.
namespace duo::kernels {

// C[m,n] += sum_k A[m,k] * B[k,n]. Four k-terms are folded per pass over a
// C row; the grouping depends only on the shapes.
inline void gemm_acc(const double* A, const double* B, double* C, std::size_t M, std::size_t K, std::size_t N) {
  for (std::size_t m = 0; m < M; ++m) {
    double* c = C + m * N;
    const double* a = A + m * K;
    std::size_t k = 0;
    for (; k + 4 <= K; k += 4) {
      const double a0 = a[k], a1 = a[k + 1], a2 = a[k + 2], a3 = a[k + 3];
      const double* b0 = B + k * N;
      const double* b1 = b0 + N;
      const double* b2 = b1 + N;
      const double* b3 = b2 + N;
      for (std::size_t n = 0; n < N; ++n) c[n] += a0 * b0[n] + a1 * b1[n] + a2 * b2[n] + a3 * b3[n];
    }
    for (; k < K; ++k) {
      const double av = a[k];
      const double* b = B + k * N;
      for (std::size_t n = 0; n < N; ++n) c[n] += av * b[n];
    }
  }
}

// C[k,n] += sum_m A[m,k] * B[m,n]   (A is M x K)
inline void gemm_tn_acc(const double* A, const double* B, double* C, std::size_t M, std::size_t K, std::size_t N) {
  std::size_t m = 0;
  for (; m + 4 <= M; m += 4) {
    const double* a = A + m * K;
    const double* b0 = B + m * N;
    const double* b1 = b0 + N;
    const double* b2 = b1 + N;
    const double* b3 = b2 + N;
    for (std::size_t k = 0; k < K; ++k) {
      const double a0 = a[k], a1 = a[K + k], a2 = a[2 * K + k], a3 = a[3 * K + k];
      double* c = C + k * N;
      for (std::size_t n = 0; n < N; ++n) c[n] += a0 * b0[n] + a1 * b1[n] + a2 * b2[n] + a3 * b3[n];
    }
  }
  for (; m < M; ++m) {
    const double* a = A + m * K;
    const double* b = B + m * N;
    for (std::size_t k = 0; k < K; ++k) {
      const double av = a[k];
      double* c = C + k * N;
      for (std::size_t n = 0; n < N; ++n) c[n] += av * b[n];
    }
  }
}

// out (C x R) = in (R x C) transposed
inline void transpose(const double* in, double* out, std::size_t R, std::size_t C) {
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c) out[c * R + r] = in[r * C + c];
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

} // namespace duo::kernels
