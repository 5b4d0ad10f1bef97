#pragma once

/**
 * @file conv.hpp
 * @brief Strided convolution, transposed convolution and dense primitives
 *        with analytic gradients, via im2col/col2im plus the gemm kernels.
 *
 * Feature maps are stored flat as [C][X][Y][Z] with z fastest. A 2D layer is
 * the degenerate case kz = sz = 1, nz = 1, so both dimensionalities share one
 * code path. Transposed convolution is expressed through the geometry of the
 * matching forward convolution (big side -> small side).
 */

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "voxuad/nn/gemm.hpp"
#include "voxuad/rng.hpp"

namespace voxuad::nn {

/// Resolved geometry of a convolution from the "big" spatial side (extent
/// ix,iy,iz with ci channels) to the "small" side (ox,oy,oz with co channels).
struct ConvGeom {
  int ci = 1, co = 1;
  int ix = 1, iy = 1, iz = 1;
  int ox = 1, oy = 1, oz = 1;
  int kx = 1, ky = 1, kz = 1;
  int sx = 1, sy = 1, sz = 1;
  int px = 0, py = 0, pz = 0;

  size_t in_size() const { return size_t(ci) * ix * iy * iz; }
  size_t out_size() const { return size_t(co) * ox * oy * oz; }
  size_t kcol() const { return size_t(ci) * kx * ky * kz; }
  size_t patches() const { return size_t(ox) * oy * oz; }
  size_t weight_size() const { return size_t(co) * kcol(); }
  size_t col_size() const { return kcol() * patches(); }
};

/// Halving convolution stage: kernel 5, stride 2, padding 2 on active axes.
/// For dims == 2 the z axis degenerates to extent 1 with a 1x1 kernel.
inline ConvGeom halving_conv(int dims, int extent, int ci, int co) {
  ConvGeom g;
  g.ci = ci;
  g.co = co;
  g.ix = g.iy = extent;
  g.ox = g.oy = extent / 2;
  g.kx = g.ky = 5;
  g.sx = g.sy = 2;
  g.px = g.py = 2;
  if (dims == 3) {
    g.iz = extent;
    g.oz = extent / 2;
    g.kz = 5;
    g.sz = 2;
    g.pz = 2;
  }
  return g;
}

template <typename T>
void im2col(const ConvGeom& g, const T* in, T* col) {
  const size_t P = g.patches();
#pragma omp parallel for schedule(static)
  for (int r = 0; r < (int)g.kcol(); ++r) {
    int rest = r;
    const int az = rest % g.kz;
    rest /= g.kz;
    const int ay = rest % g.ky;
    rest /= g.ky;
    const int ax = rest % g.kx;
    const int c = rest / g.kx;
    const T* plane = in + size_t(c) * g.ix * g.iy * g.iz;
    T* dst = col + size_t(r) * P;
    for (int oxi = 0; oxi < g.ox; ++oxi) {
      const int x = oxi * g.sx - g.px + ax;
      for (int oyi = 0; oyi < g.oy; ++oyi) {
        const int y = oyi * g.sy - g.py + ay;
        T* run = dst + (size_t(oxi) * g.oy + oyi) * g.oz;
        if (x < 0 || x >= g.ix || y < 0 || y >= g.iy) {
          for (int ozi = 0; ozi < g.oz; ++ozi) run[ozi] = T(0);
          continue;
        }
        const T* src = plane + (size_t(x) * g.iy + y) * g.iz;
        for (int ozi = 0; ozi < g.oz; ++ozi) {
          const int z = ozi * g.sz - g.pz + az;
          run[ozi] = (z >= 0 && z < g.iz) ? src[z] : T(0);
        }
      }
    }
  }
}

/// Scatter-add inverse of im2col. `out` is overwritten. Parallel over input
/// channels; within a channel the accumulation order is fixed.
template <typename T>
void col2im(const ConvGeom& g, const T* col, T* out) {
  const size_t P = g.patches();
  const size_t plane_size = size_t(g.ix) * g.iy * g.iz;
  const int ktotal = g.kx * g.ky * g.kz;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < g.ci; ++c) {
    T* plane = out + size_t(c) * plane_size;
    for (size_t i = 0; i < plane_size; ++i) plane[i] = T(0);
    for (int kk = 0; kk < ktotal; ++kk) {
      const int az = kk % g.kz;
      const int ay = (kk / g.kz) % g.ky;
      const int ax = kk / (g.kz * g.ky);
      const T* src = col + (size_t(c) * ktotal + kk) * P;
      for (int oxi = 0; oxi < g.ox; ++oxi) {
        const int x = oxi * g.sx - g.px + ax;
        if (x < 0 || x >= g.ix) continue;
        for (int oyi = 0; oyi < g.oy; ++oyi) {
          const int y = oyi * g.sy - g.py + ay;
          if (y < 0 || y >= g.iy) continue;
          const T* run = src + (size_t(oxi) * g.oy + oyi) * g.oz;
          T* dstrow = plane + (size_t(x) * g.iy + y) * g.iz;
          for (int ozi = 0; ozi < g.oz; ++ozi) {
            const int z = ozi * g.sz - g.pz + az;
            if (z >= 0 && z < g.iz) dstrow[z] += run[ozi];
          }
        }
      }
    }
  }
}

// --- forward convolution (big -> small) ------------------------------------

template <typename T>
void conv_forward(const ConvGeom& g, const T* W, const T* bias, const T* in, T* out,
                  std::vector<T>& colbuf) {
  colbuf.resize(g.col_size());
  im2col(g, in, colbuf.data());
  gemm_nn(W, colbuf.data(), out, g.co, (int)g.kcol(), (int)g.patches());
  const size_t P = g.patches();
#pragma omp parallel for schedule(static)
  for (int c = 0; c < g.co; ++c) {
    T* row = out + size_t(c) * P;
    const T b = bias[c];
    for (size_t p = 0; p < P; ++p) row[p] += b;
  }
}

/// Gradients for conv_forward. dW/db are accumulated (+=), din (optional)
/// is overwritten.
template <typename T>
void conv_backward(const ConvGeom& g, const T* W, const T* in, const T* dout, T* dW, T* db,
                   T* din, std::vector<T>& colbuf) {
  const size_t P = g.patches();
  colbuf.resize(g.col_size());
  im2col(g, in, colbuf.data());
  gemm_nt(dout, colbuf.data(), dW, g.co, (int)P, (int)g.kcol(), /*accumulate=*/true);
  for (int c = 0; c < g.co; ++c) {
    const T* row = dout + size_t(c) * P;
    T s = T(0);
#pragma omp simd reduction(+ : s)
    for (size_t p = 0; p < P; ++p) s += row[p];
    db[c] += s;
  }
  if (din) {
    gemm_tn(W, dout, colbuf.data(), g.co, (int)g.kcol(), (int)P);
    col2im(g, colbuf.data(), din);
  }
}

// --- transposed convolution (small -> big) ----------------------------------
// Uses the geometry of the matching conv: tconv input has g.co channels on the
// small side, tconv output has g.ci channels on the big side. Weights have the
// conv layout [co, kcol]. Bias is per big-side channel (g.ci entries).

template <typename T>
void tconv_forward(const ConvGeom& g, const T* W, const T* bias, const T* in, T* out,
                   std::vector<T>& colbuf) {
  colbuf.resize(g.col_size());
  gemm_tn(W, in, colbuf.data(), g.co, (int)g.kcol(), (int)g.patches());
  col2im(g, colbuf.data(), out);
  const size_t plane = size_t(g.ix) * g.iy * g.iz;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < g.ci; ++c) {
    T* row = out + size_t(c) * plane;
    const T b = bias[c];
    for (size_t p = 0; p < plane; ++p) row[p] += b;
  }
}

template <typename T>
void tconv_backward(const ConvGeom& g, const T* W, const T* in, const T* dout, T* dW, T* db,
                    T* din, std::vector<T>& colbuf) {
  const size_t P = g.patches();
  colbuf.resize(g.col_size());
  im2col(g, dout, colbuf.data());
  gemm_nt(in, colbuf.data(), dW, g.co, (int)P, (int)g.kcol(), /*accumulate=*/true);
  const size_t plane = size_t(g.ix) * g.iy * g.iz;
  for (int c = 0; c < g.ci; ++c) {
    const T* row = dout + size_t(c) * plane;
    T s = T(0);
#pragma omp simd reduction(+ : s)
    for (size_t p = 0; p < plane; ++p) s += row[p];
    db[c] += s;
  }
  if (din) gemm_nn(W, colbuf.data(), din, g.co, (int)g.kcol(), (int)P);
}

// --- dense ------------------------------------------------------------------

template <typename T>
void dense_forward(const T* W, const T* bias, const T* in, T* out, int n_out, int n_in) {
#pragma omp parallel for schedule(static)
  for (int o = 0; o < n_out; ++o) {
    const T* row = W + size_t(o) * n_in;
    T s = T(0);
#pragma omp simd reduction(+ : s)
    for (int i = 0; i < n_in; ++i) s += row[i] * in[i];
    out[o] = s + bias[o];
  }
}

/// dW/db accumulated; din (optional) overwritten unless accumulate_din.
template <typename T>
void dense_backward(const T* W, const T* in, const T* dout, T* dW, T* db, T* din, int n_out,
                    int n_in, bool accumulate_din = false) {
#pragma omp parallel for schedule(static)
  for (int o = 0; o < n_out; ++o) {
    T* row = dW + size_t(o) * n_in;
    const T d = dout[o];
#pragma omp simd
    for (int i = 0; i < n_in; ++i) row[i] += d * in[i];
    db[o] += d;
  }
  if (din) {
    constexpr int IB = 512;
#pragma omp parallel for schedule(static)
    for (int i0 = 0; i0 < n_in; i0 += IB) {
      const int ib = std::min(IB, n_in - i0);
      T* dst = din + i0;
      if (!accumulate_din)
        for (int j = 0; j < ib; ++j) dst[j] = T(0);
      for (int o = 0; o < n_out; ++o) {
        const T d = dout[o];
        const T* row = W + size_t(o) * n_in + i0;
#pragma omp simd
        for (int j = 0; j < ib; ++j) dst[j] += d * row[j];
      }
    }
  }
}

// --- activations -------------------------------------------------------------

template <typename T>
void elu_forward(const T* in, T* out, size_t n) {
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < (long long)n; ++i)
    out[i] = in[i] > T(0) ? in[i] : std::expm1(in[i]);
}

/// din = dout * elu'(pre), using the stored output (elu' = out + 1 for x <= 0).
template <typename T>
void elu_backward(const T* out, const T* dout, T* din, size_t n) {
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < (long long)n; ++i)
    din[i] = out[i] > T(0) ? dout[i] : dout[i] * (out[i] + T(1));
}

template <typename T>
T sigmoid_scalar(T x) {
  if (x >= T(0)) {
    T e = std::exp(-x);
    return T(1) / (T(1) + e);
  }
  T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
void sigmoid_forward(const T* in, T* out, size_t n) {
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < (long long)n; ++i) out[i] = sigmoid_scalar(in[i]);
}

template <typename T>
void sigmoid_backward(const T* out, const T* dout, T* din, size_t n) {
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < (long long)n; ++i) din[i] = dout[i] * out[i] * (T(1) - out[i]);
}

/// Fan-in scaled uniform initialization: U(-sqrt(3/fan_in), sqrt(3/fan_in)).
template <typename T>
void init_uniform(T* w, size_t n, size_t fan_in, RngStream& rng) {
  const double a = std::sqrt(3.0 / double(fan_in ? fan_in : 1));
  for (size_t i = 0; i < n; ++i) w[i] = (T)rng.uniform(-a, a);
}

}  // namespace voxuad::nn
