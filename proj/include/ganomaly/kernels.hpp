#pragma once

#include <cstdint>

namespace ganomaly::kernels {

// Math kernels shared by all layers. Everything is row-major and raw-pointer
// based; shape checking happens one level up in the layer code.
//
// Parallelism contract: OpenMP only ever splits loops over *independent*
// output elements. Any reduction that feeds a single output element runs in a
// fixed order, so results are bitwise reproducible for any OMP_NUM_THREADS.
// The ::serial namespace mirrors every kernel with a plain-loop reference
// used by the equivalence tests and the benchmark target.

enum class Trans { No, Yes };

/// C = alpha * op(A) @ op(B) + beta * C.
/// A is m x k after op, B is k x n after op, C is m x n.
/// Leading dimensions are the row strides of the *stored* matrices.
/// Supported combinations: NN, TN, NT (TT is not needed anywhere).
template <typename T>
void gemm(Trans ta, Trans tb, int64_t m, int64_t n, int64_t k, T alpha, const T* a, int64_t lda,
          const T* b, int64_t ldb, T beta, T* c, int64_t ldc);

/// Unfold a [c, h, w] image into a [c*kh*kw, ho*wo] patch matrix.
template <typename T>
void im2col(const T* im, int64_t c, int64_t h, int64_t w, int64_t kh, int64_t kw, int64_t stride,
            int64_t pad, T* col);

/// Fold a [c*kh*kw, ho*wo] patch matrix back into a [c, h, w] image,
/// accumulating overlaps. The output buffer is zeroed here.
template <typename T>
void col2im(const T* col, int64_t c, int64_t h, int64_t w, int64_t kh, int64_t kw, int64_t stride,
            int64_t pad, T* im);

// Convolution. x: [n, cin, h, w], w: [cout, cin, k, k], y: [n, cout, ho, wo]
// with ho = (h + 2*pad - k)/stride + 1. bias may be null.
template <typename T>
void conv2d_forward(const T* x, const T* wgt, const T* bias, T* y, int64_t n, int64_t cin,
                    int64_t h, int64_t w, int64_t cout, int64_t k, int64_t stride, int64_t pad);
template <typename T>
void conv2d_backward_input(const T* dy, const T* wgt, T* dx, int64_t n, int64_t cin, int64_t h,
                           int64_t w, int64_t cout, int64_t k, int64_t stride, int64_t pad);
/// Accumulates (+=) into dwgt / dbias so multi-branch nets can sum gradients.
template <typename T>
void conv2d_backward_params(const T* dy, const T* x, T* dwgt, T* dbias, int64_t n, int64_t cin,
                            int64_t h, int64_t w, int64_t cout, int64_t k, int64_t stride,
                            int64_t pad);

// Transposed convolution. x: [n, cin, h, w], w: [cin, cout, k, k],
// y: [n, cout, ho, wo] with ho = (h - 1)*stride - 2*pad + k.
template <typename T>
void convt2d_forward(const T* x, const T* wgt, const T* bias, T* y, int64_t n, int64_t cin,
                     int64_t h, int64_t w, int64_t cout, int64_t k, int64_t stride, int64_t pad);
template <typename T>
void convt2d_backward_input(const T* dy, const T* wgt, T* dx, int64_t n, int64_t cin, int64_t h,
                            int64_t w, int64_t cout, int64_t k, int64_t stride, int64_t pad);
template <typename T>
void convt2d_backward_params(const T* dy, const T* x, T* dwgt, T* dbias, int64_t n, int64_t cin,
                             int64_t h, int64_t w, int64_t cout, int64_t k, int64_t stride,
                             int64_t pad);

// Batch norm over NCHW, normalizing per channel across n*h*w.
// Train-mode forward also emits xhat and invstd (cached for backward) and
// updates the running stats in place:
//   running = (1 - momentum) * running + momentum * batch_stat
// running_var uses the unbiased batch variance, the normalization itself the
// biased one.
template <typename T>
void batchnorm_forward_train(const T* x, T* y, T* xhat, const T* gamma, const T* beta,
                             T* running_mean, T* running_var, T* invstd, T momentum, T eps,
                             int64_t n, int64_t c, int64_t hw);
template <typename T>
void batchnorm_forward_eval(const T* x, T* y, const T* gamma, const T* beta, const T* running_mean,
                            const T* running_var, T eps, int64_t n, int64_t c, int64_t hw);
/// dgamma/dbeta are accumulated (+=); dx is overwritten.
template <typename T>
void batchnorm_backward(const T* xhat, const T* dy, const T* gamma, const T* invstd, T* dx,
                        T* dgamma, T* dbeta, int64_t n, int64_t c, int64_t hw);

// Elementwise activations. Backward takes whichever side is cheapest to
// cache: x for the relu family, y for tanh/sigmoid.
template <typename T>
void leaky_relu_forward(const T* x, T* y, int64_t n, T slope);
template <typename T>
void leaky_relu_backward(const T* x, const T* dy, T* dx, int64_t n, T slope);
template <typename T>
void tanh_forward(const T* x, T* y, int64_t n);
template <typename T>
void tanh_backward(const T* y, const T* dy, T* dx, int64_t n);
template <typename T>
void sigmoid_forward(const T* x, T* y, int64_t n);
template <typename T>
void sigmoid_backward(const T* y, const T* dy, T* dx, int64_t n);

/// One Adam step with bias correction; t is the 1-based step count.
template <typename T>
void adam_step(T* param, const T* grad, T* m, T* v, int64_t n, T lr, T beta1, T beta2, T eps,
               int64_t t);

namespace serial {

template <typename T>
void gemm(Trans ta, Trans tb, int64_t m, int64_t n, int64_t k, T alpha, const T* a, int64_t lda,
          const T* b, int64_t ldb, T beta, T* c, int64_t ldc);
template <typename T>
void im2col(const T* im, int64_t c, int64_t h, int64_t w, int64_t kh, int64_t kw, int64_t stride,
            int64_t pad, T* col);
template <typename T>
void col2im(const T* col, int64_t c, int64_t h, int64_t w, int64_t kh, int64_t kw, int64_t stride,
            int64_t pad, T* im);
template <typename T>
void conv2d_forward(const T* x, const T* wgt, const T* bias, T* y, int64_t n, int64_t cin,
                    int64_t h, int64_t w, int64_t cout, int64_t k, int64_t stride, int64_t pad);
template <typename T>
void batchnorm_forward_train(const T* x, T* y, T* xhat, const T* gamma, const T* beta,
                             T* running_mean, T* running_var, T* invstd, T momentum, T eps,
                             int64_t n, int64_t c, int64_t hw);
template <typename T>
void adam_step(T* param, const T* grad, T* m, T* v, int64_t n, T lr, T beta1, T beta2, T eps,
               int64_t t);

}  // namespace serial

}  // namespace ganomaly::kernels
