#include "ganomaly/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

namespace ganomaly::kernels {

namespace {

// Register-tile sizes for the NN/TN gemm core. 4x32 keeps the accumulators in
// registers with AVX and was the fastest variant of the ones tried on this
// machine (~50-70 GF/s single thread for the shapes conv produces).
constexpr int64_t kIR = 4;
constexpr int64_t kJR = 32;

template <typename T, bool TA>
inline T aval(const T* a, int64_t lda, int64_t i, int64_t k) {
  if constexpr (TA)
    return a[k * lda + i];
  else
    return a[i * lda + k];
}

// Full 4x32 tile, compile-time bounds so the compiler unrolls cleanly.
template <typename T, bool TA>
inline void tile_full(int64_t k, T alpha, const T* a, int64_t lda, const T* b, int64_t ldb, T* c,
                      int64_t ldc, int64_t i0, int64_t j0) {
  T acc0[kJR] = {}, acc1[kJR] = {}, acc2[kJR] = {}, acc3[kJR] = {};
  for (int64_t kk = 0; kk < k; ++kk) {
    const T* brow = b + kk * ldb + j0;
    const T a0 = aval<T, TA>(a, lda, i0 + 0, kk);
    const T a1 = aval<T, TA>(a, lda, i0 + 1, kk);
    const T a2 = aval<T, TA>(a, lda, i0 + 2, kk);
    const T a3 = aval<T, TA>(a, lda, i0 + 3, kk);
#pragma omp simd
    for (int64_t j = 0; j < kJR; ++j) {
      const T bv = brow[j];
      acc0[j] += a0 * bv;
      acc1[j] += a1 * bv;
      acc2[j] += a2 * bv;
      acc3[j] += a3 * bv;
    }
  }
  T* c0 = c + (i0 + 0) * ldc + j0;
  T* c1 = c + (i0 + 1) * ldc + j0;
  T* c2 = c + (i0 + 2) * ldc + j0;
  T* c3 = c + (i0 + 3) * ldc + j0;
  for (int64_t j = 0; j < kJR; ++j) {
    c0[j] += alpha * acc0[j];
    c1[j] += alpha * acc1[j];
    c2[j] += alpha * acc2[j];
    c3[j] += alpha * acc3[j];
  }
}

// Ragged edge tile with runtime bounds (ir <= 4, jr <= 32).
template <typename T, bool TA>
inline void tile_edge(int64_t k, T alpha, const T* a, int64_t lda, const T* b, int64_t ldb, T* c,
                      int64_t ldc, int64_t i0, int64_t ir, int64_t j0, int64_t jr) {
  T acc[kIR][kJR] = {};
  for (int64_t kk = 0; kk < k; ++kk) {
    const T* brow = b + kk * ldb + j0;
    for (int64_t ii = 0; ii < ir; ++ii) {
      const T av = aval<T, TA>(a, lda, i0 + ii, kk);
      T* arow = acc[ii];
#pragma omp simd
      for (int64_t j = 0; j < jr; ++j) arow[j] += av * brow[j];
    }
  }
  for (int64_t ii = 0; ii < ir; ++ii) {
    T* crow = c + (i0 + ii) * ldc + j0;
    for (int64_t j = 0; j < jr; ++j) crow[j] += alpha * acc[ii][j];
  }
}

// C += alpha * op(A) @ B over row-blocks of C. Threads split the row blocks;
// every C element is owned by exactly one thread and its k-loop runs in
// ascending order, so the result does not depend on the thread count.
template <typename T, bool TA>
void tile_core(int64_t m, int64_t n, int64_t k, T alpha, const T* a, int64_t lda, const T* b,
               int64_t ldb, T* c, int64_t ldc) {
  const int64_t iblocks = (m + kIR - 1) / kIR;
#pragma omp parallel for schedule(static)
  for (int64_t ib = 0; ib < iblocks; ++ib) {
    const int64_t i0 = ib * kIR;
    const int64_t ir = std::min(kIR, m - i0);
    int64_t j0 = 0;
    if (ir == kIR) {
      for (; j0 + kJR <= n; j0 += kJR) tile_full<T, TA>(k, alpha, a, lda, b, ldb, c, ldc, i0, j0);
    }
    for (; j0 < n; j0 += kJR) {
      tile_edge<T, TA>(k, alpha, a, lda, b, ldb, c, ldc, i0, ir, j0, std::min(kJR, n - j0));
    }
  }
}

// C += alpha * A @ B^T where rows of both A and B are contiguous. Used
// directly for NT and, after transposing B into scratch, for narrow NN.
template <typename T>
void dot_core(int64_t m, int64_t n, int64_t k, T alpha, const T* a, int64_t lda, const T* b,
              int64_t ldb, T* c, int64_t ldc) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    const T* ai = a + i * lda;
    for (int64_t j = 0; j < n; ++j) {
      const T* bj = b + j * ldb;
      T s = 0;
#pragma omp simd reduction(+ : s)
      for (int64_t kk = 0; kk < k; ++kk) s += ai[kk] * bj[kk];
      c[i * ldc + j] += alpha * s;
    }
  }
}

template <typename T>
void scale_c(int64_t m, int64_t n, T beta, T* c, int64_t ldc) {
  if (beta == T(1)) return;
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i) {
    T* row = c + i * ldc;
    if (beta == T(0)) {
      std::fill(row, row + n, T(0));
    } else {
      for (int64_t j = 0; j < n; ++j) row[j] *= beta;
    }
  }
}

// Below this column count the tile core wastes most of its 32-wide stripe,
// so narrow products go through transposed scratch + dot_core instead.
constexpr int64_t kNarrowN = 16;

}  // namespace

template <typename T>
void gemm(Trans ta, Trans tb, int64_t m, int64_t n, int64_t k, T alpha, const T* a, int64_t lda,
          const T* b, int64_t ldb, T beta, T* c, int64_t ldc) {
  if (m <= 0 || n <= 0) return;
  scale_c(m, n, beta, c, ldc);
  if (k <= 0 || alpha == T(0)) return;

  if (ta == Trans::No && tb == Trans::No) {
    if (n >= kNarrowN) {
      tile_core<T, false>(m, n, k, alpha, a, lda, b, ldb, c, ldc);
    } else {
      // B^T scratch is k*n elements, tiny when n is narrow.
      std::vector<T> bt(static_cast<size_t>(n * k));
      for (int64_t kk = 0; kk < k; ++kk)
        for (int64_t j = 0; j < n; ++j) bt[static_cast<size_t>(j * k + kk)] = b[kk * ldb + j];
      dot_core(m, n, k, alpha, a, lda, bt.data(), k, c, ldc);
    }
  } else if (ta == Trans::Yes && tb == Trans::No) {
    if (n >= kNarrowN) {
      tile_core<T, true>(m, n, k, alpha, a, lda, b, ldb, c, ldc);
    } else {
      // Narrow TN: per output column j accumulate alpha * sum_k A[k,i]*B[k,j]
      // with the i-loop innermost so the A reads stay contiguous.
      for (int64_t j = 0; j < n; ++j) {
        std::vector<T> colacc(static_cast<size_t>(m), T(0));
        T* acc = colacc.data();
        for (int64_t kk = 0; kk < k; ++kk) {
          const T bv = b[kk * ldb + j];
          const T* arow = a + kk * lda;
#pragma omp simd
          for (int64_t i = 0; i < m; ++i) acc[i] += bv * arow[i];
        }
        for (int64_t i = 0; i < m; ++i) c[i * ldc + j] += alpha * acc[i];
      }
    }
  } else if (ta == Trans::No && tb == Trans::Yes) {
    dot_core(m, n, k, alpha, a, lda, b, ldb, c, ldc);
  } else {
    // TT never occurs in this stack.
    std::vector<T> at(static_cast<size_t>(m * k));
    for (int64_t kk = 0; kk < k; ++kk)
      for (int64_t i = 0; i < m; ++i) at[static_cast<size_t>(i * k + kk)] = a[kk * lda + i];
    dot_core(m, n, k, alpha, at.data(), k, b, ldb, c, ldc);
  }
}

template <typename T>
void im2col(const T* im, int64_t c, int64_t h, int64_t w, int64_t kh, int64_t kw, int64_t stride,
            int64_t pad, T* col) {
  const int64_t ho = (h + 2 * pad - kh) / stride + 1;
  const int64_t wo = (w + 2 * pad - kw) / stride + 1;
  const int64_t rows = c * kh * kw;
#pragma omp parallel for schedule(static)
  for (int64_t row = 0; row < rows; ++row) {
    const int64_t cc = row / (kh * kw);
    const int64_t ki = (row / kw) % kh;
    const int64_t kj = row % kw;
    const T* src = im + cc * h * w;
    T* dst = col + row * ho * wo;
    for (int64_t oh = 0; oh < ho; ++oh) {
      const int64_t ih = oh * stride - pad + ki;
      if (ih < 0 || ih >= h) {
        std::fill(dst, dst + wo, T(0));
        dst += wo;
        continue;
      }
      const int64_t iw0 = -pad + kj;
      for (int64_t ow = 0; ow < wo; ++ow) {
        const int64_t iw = ow * stride + iw0;
        dst[ow] = (iw >= 0 && iw < w) ? src[ih * w + iw] : T(0);
      }
      dst += wo;
    }
  }
}

template <typename T>
void col2im(const T* col, int64_t c, int64_t h, int64_t w, int64_t kh, int64_t kw, int64_t stride,
            int64_t pad, T* im) {
  const int64_t ho = (h + 2 * pad - kh) / stride + 1;
  const int64_t wo = (w + 2 * pad - kw) / stride + 1;
  // Overlapping patches of one channel can hit the same pixel, so threads
  // split by channel; within a channel the accumulation order is fixed.
#pragma omp parallel for schedule(static)
  for (int64_t cc = 0; cc < c; ++cc) {
    T* dst = im + cc * h * w;
    std::fill(dst, dst + h * w, T(0));
    for (int64_t ki = 0; ki < kh; ++ki) {
      for (int64_t kj = 0; kj < kw; ++kj) {
        const T* src = col + ((cc * kh + ki) * kw + kj) * ho * wo;
        for (int64_t oh = 0; oh < ho; ++oh) {
          const int64_t ih = oh * stride - pad + ki;
          if (ih < 0 || ih >= h) continue;
          for (int64_t ow = 0; ow < wo; ++ow) {
            const int64_t iw = ow * stride - pad + kj;
            if (iw >= 0 && iw < w) dst[ih * w + iw] += src[oh * wo + ow];
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_forward(const T* x, const T* wgt, const T* bias, T* y, int64_t n, int64_t cin,
                    int64_t h, int64_t w, int64_t cout, int64_t k, int64_t stride, int64_t pad) {
  const int64_t ho = (h + 2 * pad - k) / stride + 1;
  const int64_t wo = (w + 2 * pad - k) / stride + 1;
  const int64_t ckk = cin * k * k;
  const int64_t howo = ho * wo;
  std::vector<T> col(static_cast<size_t>(ckk * howo));
  for (int64_t i = 0; i < n; ++i) {
    im2col(x + i * cin * h * w, cin, h, w, k, k, stride, pad, col.data());
    T* yi = y + i * cout * howo;
    gemm(Trans::No, Trans::No, cout, howo, ckk, T(1), wgt, ckk, col.data(), howo, T(0), yi, howo);
    if (bias) {
#pragma omp parallel for schedule(static)
      for (int64_t co = 0; co < cout; ++co) {
        T* row = yi + co * howo;
        const T bv = bias[co];
        for (int64_t p = 0; p < howo; ++p) row[p] += bv;
      }
    }
  }
}

template <typename T>
void conv2d_backward_input(const T* dy, const T* wgt, T* dx, int64_t n, int64_t cin, int64_t h,
                           int64_t w, int64_t cout, int64_t k, int64_t stride, int64_t pad) {
  const int64_t ho = (h + 2 * pad - k) / stride + 1;
  const int64_t wo = (w + 2 * pad - k) / stride + 1;
  const int64_t ckk = cin * k * k;
  const int64_t howo = ho * wo;
  std::vector<T> dcol(static_cast<size_t>(ckk * howo));
  for (int64_t i = 0; i < n; ++i) {
    gemm(Trans::Yes, Trans::No, ckk, howo, cout, T(1), wgt, ckk, dy + i * cout * howo, howo, T(0),
         dcol.data(), howo);
    col2im(dcol.data(), cin, h, w, k, k, stride, pad, dx + i * cin * h * w);
  }
}

template <typename T>
void conv2d_backward_params(const T* dy, const T* x, T* dwgt, T* dbias, int64_t n, int64_t cin,
                            int64_t h, int64_t w, int64_t cout, int64_t k, int64_t stride,
                            int64_t pad) {
  const int64_t ho = (h + 2 * pad - k) / stride + 1;
  const int64_t wo = (w + 2 * pad - k) / stride + 1;
  const int64_t ckk = cin * k * k;
  const int64_t howo = ho * wo;
  std::vector<T> col(static_cast<size_t>(ckk * howo));
  for (int64_t i = 0; i < n; ++i) {
    const T* dyi = dy + i * cout * howo;
    im2col(x + i * cin * h * w, cin, h, w, k, k, stride, pad, col.data());
    gemm(Trans::No, Trans::Yes, cout, ckk, howo, T(1), dyi, howo, col.data(), howo, T(1), dwgt,
         ckk);
    if (dbias) {
      for (int64_t co = 0; co < cout; ++co) {
        const T* row = dyi + co * howo;
        T s = 0;
#pragma omp simd reduction(+ : s)
        for (int64_t p = 0; p < howo; ++p) s += row[p];
        dbias[co] += s;
      }
    }
  }
}

template <typename T>
void convt2d_forward(const T* x, const T* wgt, const T* bias, T* y, int64_t n, int64_t cin,
                     int64_t h, int64_t w, int64_t cout, int64_t k, int64_t stride, int64_t pad) {
  const int64_t ho = (h - 1) * stride - 2 * pad + k;
  const int64_t wo = (w - 1) * stride - 2 * pad + k;
  const int64_t ckk = cout * k * k;
  const int64_t hw = h * w;
  std::vector<T> col(static_cast<size_t>(ckk * hw));
  for (int64_t i = 0; i < n; ++i) {
    // col = W^T @ x_i, then fold; the fold geometry is the conv that would
    // map [cout, ho, wo] back down to [cin, h, w].
    gemm(Trans::Yes, Trans::No, ckk, hw, cin, T(1), wgt, ckk, x + i * cin * hw, hw, T(0),
         col.data(), hw);
    T* yi = y + i * cout * ho * wo;
    col2im(col.data(), cout, ho, wo, k, k, stride, pad, yi);
    if (bias) {
#pragma omp parallel for schedule(static)
      for (int64_t co = 0; co < cout; ++co) {
        T* row = yi + co * ho * wo;
        const T bv = bias[co];
        for (int64_t p = 0; p < ho * wo; ++p) row[p] += bv;
      }
    }
  }
}

template <typename T>
void convt2d_backward_input(const T* dy, const T* wgt, T* dx, int64_t n, int64_t cin, int64_t h,
                            int64_t w, int64_t cout, int64_t k, int64_t stride, int64_t pad) {
  const int64_t ho = (h - 1) * stride - 2 * pad + k;
  const int64_t wo = (w - 1) * stride - 2 * pad + k;
  const int64_t ckk = cout * k * k;
  const int64_t hw = h * w;
  std::vector<T> dcol(static_cast<size_t>(ckk * hw));
  for (int64_t i = 0; i < n; ++i) {
    im2col(dy + i * cout * ho * wo, cout, ho, wo, k, k, stride, pad, dcol.data());
    gemm(Trans::No, Trans::No, cin, hw, ckk, T(1), wgt, ckk, dcol.data(), hw, T(0), dx + i * cin * hw,
         hw);
  }
}

template <typename T>
void convt2d_backward_params(const T* dy, const T* x, T* dwgt, T* dbias, int64_t n, int64_t cin,
                             int64_t h, int64_t w, int64_t cout, int64_t k, int64_t stride,
                             int64_t pad) {
  const int64_t ho = (h - 1) * stride - 2 * pad + k;
  const int64_t wo = (w - 1) * stride - 2 * pad + k;
  const int64_t ckk = cout * k * k;
  const int64_t hw = h * w;
  std::vector<T> dcol(static_cast<size_t>(ckk * hw));
  for (int64_t i = 0; i < n; ++i) {
    const T* dyi = dy + i * cout * ho * wo;
    im2col(dyi, cout, ho, wo, k, k, stride, pad, dcol.data());
    gemm(Trans::No, Trans::Yes, cin, ckk, hw, T(1), x + i * cin * hw, hw, dcol.data(), hw, T(1),
         dwgt, ckk);
    if (dbias) {
      for (int64_t co = 0; co < cout; ++co) {
        const T* row = dyi + co * ho * wo;
        T s = 0;
#pragma omp simd reduction(+ : s)
        for (int64_t p = 0; p < ho * wo; ++p) s += row[p];
        dbias[co] += s;
      }
    }
  }
}

template <typename T>
void batchnorm_forward_train(const T* x, T* y, T* xhat, const T* gamma, const T* beta,
                             T* running_mean, T* running_var, T* invstd, T momentum, T eps,
                             int64_t n, int64_t c, int64_t hw) {
  const int64_t cnt = n * hw;
#pragma omp parallel for schedule(static)
  for (int64_t cc = 0; cc < c; ++cc) {
    T sum = 0;
    for (int64_t i = 0; i < n; ++i) {
      const T* row = x + (i * c + cc) * hw;
      T s = 0;
#pragma omp simd reduction(+ : s)
      for (int64_t p = 0; p < hw; ++p) s += row[p];
      sum += s;
    }
    const T mean = sum / static_cast<T>(cnt);
    T sq = 0;
    for (int64_t i = 0; i < n; ++i) {
      const T* row = x + (i * c + cc) * hw;
      T s = 0;
#pragma omp simd reduction(+ : s)
      for (int64_t p = 0; p < hw; ++p) s += (row[p] - mean) * (row[p] - mean);
      sq += s;
    }
    const T var = sq / static_cast<T>(cnt);
    const T istd = T(1) / std::sqrt(var + eps);
    invstd[cc] = istd;
    const T unbiased = cnt > 1 ? sq / static_cast<T>(cnt - 1) : var;
    running_mean[cc] = (T(1) - momentum) * running_mean[cc] + momentum * mean;
    running_var[cc] = (T(1) - momentum) * running_var[cc] + momentum * unbiased;
    const T g = gamma[cc], bt = beta[cc];
    for (int64_t i = 0; i < n; ++i) {
      const T* row = x + (i * c + cc) * hw;
      T* xr = xhat + (i * c + cc) * hw;
      T* yr = y + (i * c + cc) * hw;
#pragma omp simd
      for (int64_t p = 0; p < hw; ++p) {
        const T xh = (row[p] - mean) * istd;
        xr[p] = xh;
        yr[p] = g * xh + bt;
      }
    }
  }
}

template <typename T>
void batchnorm_forward_eval(const T* x, T* y, const T* gamma, const T* beta, const T* running_mean,
                            const T* running_var, T eps, int64_t n, int64_t c, int64_t hw) {
#pragma omp parallel for schedule(static)
  for (int64_t cc = 0; cc < c; ++cc) {
    const T istd = T(1) / std::sqrt(running_var[cc] + eps);
    const T g = gamma[cc] * istd;
    const T bt = beta[cc] - gamma[cc] * running_mean[cc] * istd;
    for (int64_t i = 0; i < n; ++i) {
      const T* row = x + (i * c + cc) * hw;
      T* yr = y + (i * c + cc) * hw;
#pragma omp simd
      for (int64_t p = 0; p < hw; ++p) yr[p] = g * row[p] + bt;
    }
  }
}

template <typename T>
void batchnorm_backward(const T* xhat, const T* dy, const T* gamma, const T* invstd, T* dx,
                        T* dgamma, T* dbeta, int64_t n, int64_t c, int64_t hw) {
  const int64_t cnt = n * hw;
#pragma omp parallel for schedule(static)
  for (int64_t cc = 0; cc < c; ++cc) {
    T s1 = 0, s2 = 0;  // sum(dy), sum(dy * xhat) for this call only
    for (int64_t i = 0; i < n; ++i) {
      const T* dr = dy + (i * c + cc) * hw;
      const T* xr = xhat + (i * c + cc) * hw;
      T a = 0, b = 0;
#pragma omp simd reduction(+ : a, b)
      for (int64_t p = 0; p < hw; ++p) {
        a += dr[p];
        b += dr[p] * xr[p];
      }
      s1 += a;
      s2 += b;
    }
    dbeta[cc] += s1;
    dgamma[cc] += s2;
    const T g = gamma[cc] * invstd[cc];
    const T m1 = s1 / static_cast<T>(cnt);
    const T m2 = s2 / static_cast<T>(cnt);
    for (int64_t i = 0; i < n; ++i) {
      const T* dr = dy + (i * c + cc) * hw;
      const T* xr = xhat + (i * c + cc) * hw;
      T* dxr = dx + (i * c + cc) * hw;
#pragma omp simd
      for (int64_t p = 0; p < hw; ++p) dxr[p] = g * (dr[p] - m1 - xr[p] * m2);
    }
  }
}

template <typename T>
void leaky_relu_forward(const T* x, T* y, int64_t n, T slope) {
#pragma omp parallel for simd schedule(static)
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : slope * x[i];
}

template <typename T>
void leaky_relu_backward(const T* x, const T* dy, T* dx, int64_t n, T slope) {
#pragma omp parallel for simd schedule(static)
  for (int64_t i = 0; i < n; ++i) dx[i] = x[i] > T(0) ? dy[i] : slope * dy[i];
}

template <typename T>
void tanh_forward(const T* x, T* y, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

template <typename T>
void tanh_backward(const T* y, const T* dy, T* dx, int64_t n) {
#pragma omp parallel for simd schedule(static)
  for (int64_t i = 0; i < n; ++i) dx[i] = dy[i] * (T(1) - y[i] * y[i]);
}

template <typename T>
void sigmoid_forward(const T* x, T* y, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) y[i] = T(1) / (T(1) + std::exp(-x[i]));
}

template <typename T>
void sigmoid_backward(const T* y, const T* dy, T* dx, int64_t n) {
#pragma omp parallel for simd schedule(static)
  for (int64_t i = 0; i < n; ++i) dx[i] = dy[i] * y[i] * (T(1) - y[i]);
}

template <typename T>
void adam_step(T* param, const T* grad, T* m, T* v, int64_t n, T lr, T beta1, T beta2, T eps,
               int64_t t) {
  // Bias corrections in double so large step counts stay accurate in float.
  const T c1 = static_cast<T>(1.0 / (1.0 - std::pow(static_cast<double>(beta1), t)));
  const T c2 = static_cast<T>(1.0 / (1.0 - std::pow(static_cast<double>(beta2), t)));
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) {
    const T g = grad[i];
    m[i] = beta1 * m[i] + (T(1) - beta1) * g;
    v[i] = beta2 * v[i] + (T(1) - beta2) * g * g;
    param[i] -= lr * (m[i] * c1) / (std::sqrt(v[i] * c2) + eps);
  }
}

namespace serial {

template <typename T>
void gemm(Trans ta, Trans tb, int64_t m, int64_t n, int64_t k, T alpha, const T* a, int64_t lda,
          const T* b, int64_t ldb, T beta, T* c, int64_t ldc) {
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      T s = 0;
      for (int64_t kk = 0; kk < k; ++kk) {
        const T av = ta == Trans::Yes ? a[kk * lda + i] : a[i * lda + kk];
        const T bv = tb == Trans::Yes ? b[j * ldb + kk] : b[kk * ldb + j];
        s += av * bv;
      }
      T& out = c[i * ldc + j];
      out = alpha * s + (beta == T(0) ? T(0) : beta * out);
    }
  }
}

template <typename T>
void im2col(const T* im, int64_t c, int64_t h, int64_t w, int64_t kh, int64_t kw, int64_t stride,
            int64_t pad, T* col) {
  const int64_t ho = (h + 2 * pad - kh) / stride + 1;
  const int64_t wo = (w + 2 * pad - kw) / stride + 1;
  int64_t row = 0;
  for (int64_t cc = 0; cc < c; ++cc) {
    for (int64_t ki = 0; ki < kh; ++ki) {
      for (int64_t kj = 0; kj < kw; ++kj, ++row) {
        for (int64_t oh = 0; oh < ho; ++oh) {
          for (int64_t ow = 0; ow < wo; ++ow) {
            const int64_t ih = oh * stride - pad + ki;
            const int64_t iw = ow * stride - pad + kj;
            col[row * ho * wo + oh * wo + ow] =
                (ih >= 0 && ih < h && iw >= 0 && iw < w) ? im[(cc * h + ih) * w + iw] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, int64_t c, int64_t h, int64_t w, int64_t kh, int64_t kw, int64_t stride,
            int64_t pad, T* im) {
  const int64_t ho = (h + 2 * pad - kh) / stride + 1;
  const int64_t wo = (w + 2 * pad - kw) / stride + 1;
  std::fill(im, im + c * h * w, T(0));
  int64_t row = 0;
  for (int64_t cc = 0; cc < c; ++cc) {
    for (int64_t ki = 0; ki < kh; ++ki) {
      for (int64_t kj = 0; kj < kw; ++kj, ++row) {
        for (int64_t oh = 0; oh < ho; ++oh) {
          for (int64_t ow = 0; ow < wo; ++ow) {
            const int64_t ih = oh * stride - pad + ki;
            const int64_t iw = ow * stride - pad + kj;
            if (ih >= 0 && ih < h && iw >= 0 && iw < w)
              im[(cc * h + ih) * w + iw] += col[row * ho * wo + oh * wo + ow];
          }
        }
      }
    }
  }
}

// Direct convolution, no im2col. Intentionally a different algorithm from the
// parallel path so the equivalence tests compare independent implementations.
template <typename T>
void conv2d_forward(const T* x, const T* wgt, const T* bias, T* y, int64_t n, int64_t cin,
                    int64_t h, int64_t w, int64_t cout, int64_t k, int64_t stride, int64_t pad) {
  const int64_t ho = (h + 2 * pad - k) / stride + 1;
  const int64_t wo = (w + 2 * pad - k) / stride + 1;
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t co = 0; co < cout; ++co) {
      for (int64_t oh = 0; oh < ho; ++oh) {
        for (int64_t ow = 0; ow < wo; ++ow) {
          T s = bias ? bias[co] : T(0);
          for (int64_t ci = 0; ci < cin; ++ci) {
            for (int64_t ki = 0; ki < k; ++ki) {
              for (int64_t kj = 0; kj < k; ++kj) {
                const int64_t ih = oh * stride - pad + ki;
                const int64_t iw = ow * stride - pad + kj;
                if (ih < 0 || ih >= h || iw < 0 || iw >= w) continue;
                s += x[((i * cin + ci) * h + ih) * w + iw] * wgt[((co * cin + ci) * k + ki) * k + kj];
              }
            }
          }
          y[((i * cout + co) * ho + oh) * wo + ow] = s;
        }
      }
    }
  }
}

template <typename T>
void batchnorm_forward_train(const T* x, T* y, T* xhat, const T* gamma, const T* beta,
                             T* running_mean, T* running_var, T* invstd, T momentum, T eps,
                             int64_t n, int64_t c, int64_t hw) {
  const int64_t cnt = n * hw;
  for (int64_t cc = 0; cc < c; ++cc) {
    T sum = 0;
    for (int64_t i = 0; i < n; ++i)
      for (int64_t p = 0; p < hw; ++p) sum += x[(i * c + cc) * hw + p];
    const T mean = sum / static_cast<T>(cnt);
    T sq = 0;
    for (int64_t i = 0; i < n; ++i)
      for (int64_t p = 0; p < hw; ++p) {
        const T d = x[(i * c + cc) * hw + p] - mean;
        sq += d * d;
      }
    const T var = sq / static_cast<T>(cnt);
    const T istd = T(1) / std::sqrt(var + eps);
    invstd[cc] = istd;
    running_mean[cc] = (T(1) - momentum) * running_mean[cc] + momentum * mean;
    running_var[cc] =
        (T(1) - momentum) * running_var[cc] + momentum * (cnt > 1 ? sq / static_cast<T>(cnt - 1) : var);
    for (int64_t i = 0; i < n; ++i) {
      for (int64_t p = 0; p < hw; ++p) {
        const T xh = (x[(i * c + cc) * hw + p] - mean) * istd;
        xhat[(i * c + cc) * hw + p] = xh;
        y[(i * c + cc) * hw + p] = gamma[cc] * xh + beta[cc];
      }
    }
  }
}

template <typename T>
void adam_step(T* param, const T* grad, T* m, T* v, int64_t n, T lr, T beta1, T beta2, T eps,
               int64_t t) {
  const T c1 = static_cast<T>(1.0 / (1.0 - std::pow(static_cast<double>(beta1), t)));
  const T c2 = static_cast<T>(1.0 / (1.0 - std::pow(static_cast<double>(beta2), t)));
  for (int64_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (T(1) - beta1) * grad[i];
    v[i] = beta2 * v[i] + (T(1) - beta2) * grad[i] * grad[i];
    param[i] -= lr * (m[i] * c1) / (std::sqrt(v[i] * c2) + eps);
  }
}

}  // namespace serial

// Explicit instantiations: the whole stack runs in float, the gradient-check
// tests additionally exercise double.
#define GANOMALY_INSTANTIATE(T)                                                                    \
  template void gemm<T>(Trans, Trans, int64_t, int64_t, int64_t, T, const T*, int64_t, const T*,   \
                        int64_t, T, T*, int64_t);                                                  \
  template void im2col<T>(const T*, int64_t, int64_t, int64_t, int64_t, int64_t, int64_t, int64_t, \
                          T*);                                                                     \
  template void col2im<T>(const T*, int64_t, int64_t, int64_t, int64_t, int64_t, int64_t, int64_t, \
                          T*);                                                                     \
  template void conv2d_forward<T>(const T*, const T*, const T*, T*, int64_t, int64_t, int64_t,     \
                                  int64_t, int64_t, int64_t, int64_t, int64_t);                    \
  template void conv2d_backward_input<T>(const T*, const T*, T*, int64_t, int64_t, int64_t,        \
                                         int64_t, int64_t, int64_t, int64_t, int64_t);             \
  template void conv2d_backward_params<T>(const T*, const T*, T*, T*, int64_t, int64_t, int64_t,   \
                                          int64_t, int64_t, int64_t, int64_t, int64_t);            \
  template void convt2d_forward<T>(const T*, const T*, const T*, T*, int64_t, int64_t, int64_t,    \
                                   int64_t, int64_t, int64_t, int64_t, int64_t);                   \
  template void convt2d_backward_input<T>(const T*, const T*, T*, int64_t, int64_t, int64_t,       \
                                          int64_t, int64_t, int64_t, int64_t, int64_t);            \
  template void convt2d_backward_params<T>(const T*, const T*, T*, T*, int64_t, int64_t, int64_t,  \
                                           int64_t, int64_t, int64_t, int64_t, int64_t);           \
  template void batchnorm_forward_train<T>(const T*, T*, T*, const T*, const T*, T*, T*, T*, T, T, \
                                           int64_t, int64_t, int64_t);                             \
  template void batchnorm_forward_eval<T>(const T*, T*, const T*, const T*, const T*, const T*, T, \
                                          int64_t, int64_t, int64_t);                              \
  template void batchnorm_backward<T>(const T*, const T*, const T*, const T*, T*, T*, T*, int64_t, \
                                      int64_t, int64_t);                                           \
  template void leaky_relu_forward<T>(const T*, T*, int64_t, T);                                   \
  template void leaky_relu_backward<T>(const T*, const T*, T*, int64_t, T);                        \
  template void tanh_forward<T>(const T*, T*, int64_t);                                            \
  template void tanh_backward<T>(const T*, const T*, T*, int64_t);                                 \
  template void sigmoid_forward<T>(const T*, T*, int64_t);                                         \
  template void sigmoid_backward<T>(const T*, const T*, T*, int64_t);                              \
  template void adam_step<T>(T*, const T*, T*, T*, int64_t, T, T, T, T, int64_t);                  \
  template void serial::gemm<T>(Trans, Trans, int64_t, int64_t, int64_t, T, const T*, int64_t,     \
                                const T*, int64_t, T, T*, int64_t);                                \
  template void serial::im2col<T>(const T*, int64_t, int64_t, int64_t, int64_t, int64_t, int64_t,  \
                                  int64_t, T*);                                                    \
  template void serial::col2im<T>(const T*, int64_t, int64_t, int64_t, int64_t, int64_t, int64_t,  \
                                  int64_t, T*);                                                    \
  template void serial::conv2d_forward<T>(const T*, const T*, const T*, T*, int64_t, int64_t,      \
                                          int64_t, int64_t, int64_t, int64_t, int64_t, int64_t);   \
  template void serial::batchnorm_forward_train<T>(const T*, T*, T*, const T*, const T*, T*, T*,   \
                                                   T*, T, T, int64_t, int64_t, int64_t);           \
  template void serial::adam_step<T>(T*, const T*, T*, T*, int64_t, T, T, T, T, int64_t);

GANOMALY_INSTANTIATE(float)
GANOMALY_INSTANTIATE(double)
#undef GANOMALY_INSTANTIATE

}  // namespace ganomaly::kernels
