#pragma once

/**
 * @file gemm.hpp
 * @brief Small dense matrix kernels used by the convolution layers.
 *
 * Every output element is accumulated by exactly one thread in a fixed order,
 * so results are bit-identical across runs and thread counts. Inner loops are
 * written to auto-vectorize; lane-group accumulation order is fixed by the
 * simd pragmas, not by -ffast-math.
 */

#include <algorithm>
#include <cstddef>

namespace voxuad::nn {

namespace detail {

/// Shared kernel for C = op(A) * B with op(A)[M,K] accessed through `a(m,k)`.
/// Tiles 8 rows of op(A) against column blocks of B so B is streamed at most
/// ceil(M/8) times.
template <typename T, typename AGet>
void gemm_rows(AGet a, const T* B, T* C, int M, int K, int N, bool accumulate) {
  constexpr int NB = 128;
  constexpr int MR = 8;
#pragma omp parallel for schedule(static)
  for (int n0 = 0; n0 < N; n0 += NB) {
    const int nb = std::min(NB, N - n0);
    T acc[MR][NB];
    for (int m0 = 0; m0 < M; m0 += MR) {
      const int mr = std::min(MR, M - m0);
      for (int r = 0; r < mr; ++r)
        for (int j = 0; j < nb; ++j) acc[r][j] = T(0);
      for (int k = 0; k < K; ++k) {
        const T* Brow = B + size_t(k) * N + n0;
        T av[MR];
        for (int r = 0; r < mr; ++r) av[r] = a(m0 + r, k);
        if (mr == MR) {
#pragma omp simd
          for (int j = 0; j < nb; ++j) {
            const T b = Brow[j];
            acc[0][j] += av[0] * b;
            acc[1][j] += av[1] * b;
            acc[2][j] += av[2] * b;
            acc[3][j] += av[3] * b;
            acc[4][j] += av[4] * b;
            acc[5][j] += av[5] * b;
            acc[6][j] += av[6] * b;
            acc[7][j] += av[7] * b;
          }
        } else {
          for (int r = 0; r < mr; ++r) {
            const T ar = av[r];
#pragma omp simd
            for (int j = 0; j < nb; ++j) acc[r][j] += ar * Brow[j];
          }
        }
      }
      for (int r = 0; r < mr; ++r) {
        T* Crow = C + size_t(m0 + r) * N + n0;
        if (accumulate)
          for (int j = 0; j < nb; ++j) Crow[j] += acc[r][j];
        else
          for (int j = 0; j < nb; ++j) Crow[j] = acc[r][j];
      }
    }
  }
}

}  // namespace detail

/// C[M,N] = A[M,K] * B[K,N]  (or += when accumulate)
template <typename T>
void gemm_nn(const T* A, const T* B, T* C, int M, int K, int N, bool accumulate = false) {
  detail::gemm_rows<T>([A, K](int m, int k) { return A[size_t(m) * K + k]; }, B, C, M, K, N,
                       accumulate);
}

/// C[M,N] = A^T * B with A stored as [K,M]  (or += when accumulate)
template <typename T>
void gemm_tn(const T* A, const T* B, T* C, int K, int M, int N, bool accumulate = false) {
  detail::gemm_rows<T>([A, M](int m, int k) { return A[size_t(k) * M + m]; }, B, C, M, K, N,
                       accumulate);
}

/// C[M,N] = A * B^T with A[M,K], B[N,K]  (or += when accumulate)
/// Row blocks of A are held hot while B is streamed, so B is read at most
/// ceil(M/8) times.
template <typename T>
void gemm_nt(const T* A, const T* B, T* C, int M, int K, int N, bool accumulate = false) {
  constexpr int MR = 8;
  for (int m0 = 0; m0 < M; m0 += MR) {
    const int mr = std::min(MR, M - m0);
#pragma omp parallel for schedule(static)
    for (int n = 0; n < N; ++n) {
      const T* Brow = B + size_t(n) * K;
      T s[MR];
      for (int r = 0; r < mr; ++r) s[r] = T(0);
      if (mr == MR) {
        const T* A0 = A + size_t(m0 + 0) * K;
        const T* A1 = A + size_t(m0 + 1) * K;
        const T* A2 = A + size_t(m0 + 2) * K;
        const T* A3 = A + size_t(m0 + 3) * K;
        const T* A4 = A + size_t(m0 + 4) * K;
        const T* A5 = A + size_t(m0 + 5) * K;
        const T* A6 = A + size_t(m0 + 6) * K;
        const T* A7 = A + size_t(m0 + 7) * K;
        T s0 = T(0), s1 = T(0), s2 = T(0), s3 = T(0);
        T s4 = T(0), s5 = T(0), s6 = T(0), s7 = T(0);
#pragma omp simd reduction(+ : s0, s1, s2, s3, s4, s5, s6, s7)
        for (int k = 0; k < K; ++k) {
          const T b = Brow[k];
          s0 += A0[k] * b;
          s1 += A1[k] * b;
          s2 += A2[k] * b;
          s3 += A3[k] * b;
          s4 += A4[k] * b;
          s5 += A5[k] * b;
          s6 += A6[k] * b;
          s7 += A7[k] * b;
        }
        s[0] = s0; s[1] = s1; s[2] = s2; s[3] = s3;
        s[4] = s4; s[5] = s5; s[6] = s6; s[7] = s7;
      } else {
        for (int r = 0; r < mr; ++r) {
          const T* Arow = A + size_t(m0 + r) * K;
          T sr = T(0);
#pragma omp simd reduction(+ : sr)
          for (int k = 0; k < K; ++k) sr += Arow[k] * Brow[k];
          s[r] = sr;
        }
      }
      for (int r = 0; r < mr; ++r) {
        T& c = C[size_t(m0 + r) * N + n];
        c = accumulate ? c + s[r] : s[r];
      }
    }
  }
}

}  // namespace voxuad::nn
