#pragma once

#include "ganomaly/tensor.hpp"

namespace ganomaly {

/// Weights of the combined generator objective
///   l_g = w_adv * l_adv + w_con * l_con + w_enc * l_enc.
struct LossWeights {
  double adv = 1.0;
  double con = 20.0;
  double enc = 1.0;
};

/// Probabilities are clamped to [eps, 1-eps] inside the discriminator loss so
/// a saturated sigmoid cannot produce log(0).
inline constexpr double kProbEps = 1e-7;

// Each loss has a value-only form and a _grad form that additionally fills
// analytic gradients (overwriting them). Gradients are with respect to the
// exact expression the value form computes, which is what the
// finite-difference tests check.

/// Feature matching: || mean_rows(f_real) - mean_rows(f_fake) ||_2.
/// Both inputs are [n, f]; batch sizes may differ, feature dims may not.
template <typename T>
T adversarial_loss(const Tensor<T>& f_real, const Tensor<T>& f_fake);

/// d_fake gets dL/df_fake. The real branch is treated as a constant (the
/// generator never receives gradients through f_real).
template <typename T>
T adversarial_loss_grad(const Tensor<T>& f_real, const Tensor<T>& f_fake, Tensor<T>& d_fake);

/// Reconstruction: mean over every element of |x - xhat|.
template <typename T>
T contextual_loss(const Tensor<T>& x, const Tensor<T>& xhat);

template <typename T>
T contextual_loss_grad(const Tensor<T>& x, const Tensor<T>& xhat, Tensor<T>& d_xhat);

/// Latent mismatch: mean over the batch of ||z_i - zhat_i||_2, or of the
/// squared norm when squared=true. Inputs are [n, d].
template <typename T>
T encoder_loss(const Tensor<T>& z, const Tensor<T>& zhat, bool squared);

template <typename T>
T encoder_loss_grad(const Tensor<T>& z, const Tensor<T>& zhat, bool squared, Tensor<T>& dz,
                    Tensor<T>& dzhat);

template <typename T>
T generator_total_loss(T l_adv, T l_con, T l_enc, const LossWeights& w) {
  return static_cast<T>(w.adv) * l_adv + static_cast<T>(w.con) * l_con +
         static_cast<T>(w.enc) * l_enc;
}

/// Binary cross entropy on the discriminator outputs:
/// mean_i(-log p_real_i) + mean_j(-log(1 - p_fake_j)), probabilities clamped.
template <typename T>
T discriminator_loss(const Tensor<T>& p_real, const Tensor<T>& p_fake);

/// Gradients w.r.t. the (unclamped) probabilities, using the clamped value in
/// the denominator so saturated outputs still get a finite, bounded push.
template <typename T>
T discriminator_loss_grad(const Tensor<T>& p_real, const Tensor<T>& p_fake, Tensor<T>& d_real,
                          Tensor<T>& d_fake);

// The two BCE halves separately. The trainer needs them because each
// discriminator pass must backprop before the caches of the other pass
// overwrite it.
template <typename T>
void bce_real_grad(const Tensor<T>& p_real, Tensor<T>& d_real);
template <typename T>
void bce_fake_grad(const Tensor<T>& p_fake, Tensor<T>& d_fake);

}  // namespace ganomaly
