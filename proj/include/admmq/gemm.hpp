// Small dense matrix kernels for the layer forward/backward passes. All
// row-major. Accumulation order inside each output element is fixed, so
// results are reproducible run to run.
#pragma once

#include <cstddef>

namespace admmq {

// C[m,n] (+)= sum_k A[m,k] * B[k,n];  A: MxK, B: KxN, C: MxN
inline void gemm_nn(std::size_t M, std::size_t K, std::size_t N,
                    const double* A, const double* B, double* C,
                    bool accumulate = false) {
  for (std::size_t m = 0; m < M; ++m) {
    double* crow = C + m * N;
    if (!accumulate)
      for (std::size_t n = 0; n < N; ++n) crow[n] = 0.0;
    const double* arow = A + m * K;
    for (std::size_t k = 0; k < K; ++k) {
      double a = arow[k];
      const double* brow = B + k * N;
      for (std::size_t n = 0; n < N; ++n) crow[n] += a * brow[n];
    }
  }
}

// C[m,n] (+)= sum_k A[m,k] * B[n,k];  A: MxK, B: NxK, C: MxN
inline void gemm_nt(std::size_t M, std::size_t K, std::size_t N,
                    const double* A, const double* B, double* C,
                    bool accumulate = false) {
  for (std::size_t m = 0; m < M; ++m) {
    const double* arow = A + m * K;
    double* crow = C + m * N;
    for (std::size_t n = 0; n < N; ++n) {
      const double* brow = B + n * K;
      double acc = 0.0;
      for (std::size_t k = 0; k < K; ++k) acc += arow[k] * brow[k];
      if (accumulate)
        crow[n] += acc;
      else
        crow[n] = acc;
    }
  }
}

// C[k,n] (+)= sum_m A[m,k] * B[m,n];  A: MxK, B: MxN, C: KxN
inline void gemm_tn(std::size_t M, std::size_t K, std::size_t N,
                    const double* A, const double* B, double* C,
                    bool accumulate = false) {
  if (!accumulate)
    for (std::size_t i = 0; i < K * N; ++i) C[i] = 0.0;
  for (std::size_t m = 0; m < M; ++m) {
    const double* arow = A + m * K;
    const double* brow = B + m * N;
    for (std::size_t k = 0; k < K; ++k) {
      double a = arow[k];
      if (a == 0.0) continue;
      double* crow = C + k * N;
      for (std::size_t n = 0; n < N; ++n) crow[n] += a * brow[n];
    }
  }
}

}  // namespace admmq
