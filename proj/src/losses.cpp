#include "ganomaly/losses.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace ganomaly {

namespace {

template <typename T>
void check_2d_pair(const Tensor<T>& a, const Tensor<T>& b, bool same_rows, const char* what) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(1) || a.dim(0) == 0 || b.dim(0) == 0 ||
      (same_rows && a.dim(0) != b.dim(0))) {
    throw ShapeError(std::string(what) + ": incompatible shapes " +
                     Tensor<T>::shape_str(a.shape()) + " vs " + Tensor<T>::shape_str(b.shape()));
  }
}

// Column means of a [n, f] matrix, accumulated in double.
template <typename T>
std::vector<double> row_mean(const Tensor<T>& m) {
  const int64_t n = m.dim(0), f = m.dim(1);
  std::vector<double> mu(static_cast<size_t>(f), 0.0);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < f; ++j) mu[static_cast<size_t>(j)] += static_cast<double>(m.at(i, j));
  for (double& v : mu) v /= static_cast<double>(n);
  return mu;
}

}  // namespace

template <typename T>
T adversarial_loss(const Tensor<T>& f_real, const Tensor<T>& f_fake) {
  check_2d_pair(f_real, f_fake, false, "adversarial_loss");
  const auto mr = row_mean(f_real);
  const auto mf = row_mean(f_fake);
  double sq = 0.0;
  for (size_t j = 0; j < mr.size(); ++j) {
    const double d = mr[j] - mf[j];
    sq += d * d;
  }
  return static_cast<T>(std::sqrt(sq));
}

template <typename T>
T adversarial_loss_grad(const Tensor<T>& f_real, const Tensor<T>& f_fake, Tensor<T>& d_fake) {
  check_2d_pair(f_real, f_fake, false, "adversarial_loss");
  const auto mr = row_mean(f_real);
  const auto mf = row_mean(f_fake);
  double sq = 0.0;
  for (size_t j = 0; j < mr.size(); ++j) {
    const double d = mr[j] - mf[j];
    sq += d * d;
  }
  const double loss = std::sqrt(sq);
  const int64_t n = f_fake.dim(0), f = f_fake.dim(1);
  d_fake = Tensor<T>({n, f});
  if (loss > 0.0) {
    // dL/dmf_j = -(mr_j - mf_j)/L, and each fake row contributes 1/n to mf.
    for (int64_t j = 0; j < f; ++j) {
      const T g = static_cast<T>(-(mr[static_cast<size_t>(j)] - mf[static_cast<size_t>(j)]) /
                                 (loss * static_cast<double>(n)));
      for (int64_t i = 0; i < n; ++i) d_fake.at(i, j) = g;
    }
  }
  return static_cast<T>(loss);
}

template <typename T>
T contextual_loss(const Tensor<T>& x, const Tensor<T>& xhat) {
  if (!x.same_shape(xhat) || x.numel() == 0) {
    throw ShapeError("contextual_loss: shape mismatch " + Tensor<T>::shape_str(x.shape()) +
                     " vs " + Tensor<T>::shape_str(xhat.shape()));
  }
  double s = 0.0;
  for (int64_t i = 0; i < x.numel(); ++i) s += std::abs(static_cast<double>(x[i] - xhat[i]));
  return static_cast<T>(s / static_cast<double>(x.numel()));
}

template <typename T>
T contextual_loss_grad(const Tensor<T>& x, const Tensor<T>& xhat, Tensor<T>& d_xhat) {
  const T loss = contextual_loss(x, xhat);
  d_xhat = Tensor<T>(x.shape());
  const T inv = static_cast<T>(1.0 / static_cast<double>(x.numel()));
  for (int64_t i = 0; i < x.numel(); ++i) {
    const T d = x[i] - xhat[i];
    // subgradient 0 at d == 0
    d_xhat[i] = d > T(0) ? -inv : (d < T(0) ? inv : T(0));
  }
  return loss;
}

template <typename T>
T encoder_loss(const Tensor<T>& z, const Tensor<T>& zhat, bool squared) {
  check_2d_pair(z, zhat, true, "encoder_loss");
  const int64_t n = z.dim(0), d = z.dim(1);
  double total = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (int64_t j = 0; j < d; ++j) {
      const double df = static_cast<double>(z.at(i, j) - zhat.at(i, j));
      sq += df * df;
    }
    total += squared ? sq : std::sqrt(sq);
  }
  return static_cast<T>(total / static_cast<double>(n));
}

template <typename T>
T encoder_loss_grad(const Tensor<T>& z, const Tensor<T>& zhat, bool squared, Tensor<T>& dz,
                    Tensor<T>& dzhat) {
  check_2d_pair(z, zhat, true, "encoder_loss");
  const int64_t n = z.dim(0), d = z.dim(1);
  dz = Tensor<T>({n, d});
  dzhat = Tensor<T>({n, d});
  double total = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (int64_t j = 0; j < d; ++j) {
      const double df = static_cast<double>(z.at(i, j) - zhat.at(i, j));
      sq += df * df;
    }
    const double norm = std::sqrt(sq);
    total += squared ? sq : norm;
    for (int64_t j = 0; j < d; ++j) {
      const double df = static_cast<double>(z.at(i, j) - zhat.at(i, j));
      double g;
      if (squared) {
        g = 2.0 * df / static_cast<double>(n);
      } else {
        g = norm > 0.0 ? df / (norm * static_cast<double>(n)) : 0.0;
      }
      dz.at(i, j) = static_cast<T>(g);
      dzhat.at(i, j) = static_cast<T>(-g);
    }
  }
  return static_cast<T>(total / static_cast<double>(n));
}

template <typename T>
T discriminator_loss(const Tensor<T>& p_real, const Tensor<T>& p_fake) {
  if (p_real.numel() == 0 || p_fake.numel() == 0)
    throw ShapeError("discriminator_loss: empty batch");
  double s = 0.0;
  for (int64_t i = 0; i < p_real.numel(); ++i) {
    const double p = std::clamp(static_cast<double>(p_real[i]), kProbEps, 1.0 - kProbEps);
    s -= std::log(p) / static_cast<double>(p_real.numel());
  }
  for (int64_t i = 0; i < p_fake.numel(); ++i) {
    const double p = std::clamp(static_cast<double>(p_fake[i]), kProbEps, 1.0 - kProbEps);
    s -= std::log(1.0 - p) / static_cast<double>(p_fake.numel());
  }
  return static_cast<T>(s);
}

template <typename T>
void bce_real_grad(const Tensor<T>& p_real, Tensor<T>& d_real) {
  d_real = Tensor<T>(p_real.shape());
  const double nr = static_cast<double>(p_real.numel());
  for (int64_t i = 0; i < p_real.numel(); ++i) {
    const double p = std::clamp(static_cast<double>(p_real[i]), kProbEps, 1.0 - kProbEps);
    d_real[i] = static_cast<T>(-1.0 / (p * nr));
  }
}

template <typename T>
void bce_fake_grad(const Tensor<T>& p_fake, Tensor<T>& d_fake) {
  d_fake = Tensor<T>(p_fake.shape());
  const double nf = static_cast<double>(p_fake.numel());
  for (int64_t i = 0; i < p_fake.numel(); ++i) {
    const double p = std::clamp(static_cast<double>(p_fake[i]), kProbEps, 1.0 - kProbEps);
    d_fake[i] = static_cast<T>(1.0 / ((1.0 - p) * nf));
  }
}

template <typename T>
T discriminator_loss_grad(const Tensor<T>& p_real, const Tensor<T>& p_fake, Tensor<T>& d_real,
                          Tensor<T>& d_fake) {
  const T loss = discriminator_loss(p_real, p_fake);
  bce_real_grad(p_real, d_real);
  bce_fake_grad(p_fake, d_fake);
  return loss;
}

#define GANOMALY_LOSS_INSTANTIATE(T)                                                        \
  template T adversarial_loss<T>(const Tensor<T>&, const Tensor<T>&);                       \
  template T adversarial_loss_grad<T>(const Tensor<T>&, const Tensor<T>&, Tensor<T>&);      \
  template T contextual_loss<T>(const Tensor<T>&, const Tensor<T>&);                        \
  template T contextual_loss_grad<T>(const Tensor<T>&, const Tensor<T>&, Tensor<T>&);       \
  template T encoder_loss<T>(const Tensor<T>&, const Tensor<T>&, bool);                     \
  template T encoder_loss_grad<T>(const Tensor<T>&, const Tensor<T>&, bool, Tensor<T>&,     \
                                  Tensor<T>&);                                              \
  template T discriminator_loss<T>(const Tensor<T>&, const Tensor<T>&);                     \
  template T discriminator_loss_grad<T>(const Tensor<T>&, const Tensor<T>&, Tensor<T>&,     \
                                        Tensor<T>&);                                        \
  template void bce_real_grad<T>(const Tensor<T>&, Tensor<T>&);                             \
  template void bce_fake_grad<T>(const Tensor<T>&, Tensor<T>&);

GANOMALY_LOSS_INSTANTIATE(float)
GANOMALY_LOSS_INSTANTIATE(double)
#undef GANOMALY_LOSS_INSTANTIATE

}  // namespace ganomaly
