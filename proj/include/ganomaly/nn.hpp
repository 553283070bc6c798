#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ganomaly/kernels.hpp"
#include "ganomaly/rng.hpp"
#include "ganomaly/tensor.hpp"

namespace ganomaly::nn {

/// Handle to a trainable parameter and its gradient accumulator.
template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* value;
  Tensor<T>* grad;
};

/// Handle to any persistent tensor (parameters plus buffers such as the batch
/// norm running stats). This is what checkpoints serialize.
template <typename T>
struct StateRef {
  std::string name;
  Tensor<T>* value;
};

/// A layer owns its parameters, gradients and whatever it needs to cache
/// between forward and backward. Gradients *accumulate* (+=) across backward
/// calls until zeroed by the optimizer, which is what lets the discriminator
/// sum its real-batch and fake-batch passes.
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  /// train=true uses batch statistics (batch norm) and fills the caches
  /// backward needs. Eval-mode forwards are stateless apart from caches.
  virtual Tensor<T> forward(const Tensor<T>& x, bool train) = 0;

  /// dy matches the last forward output. Returns the gradient w.r.t. the
  /// input. param_grads=false skips the parameter gradients; the trainer uses
  /// that to freeze the discriminator while adversarial gradients flow
  /// through it into the generator.
  virtual Tensor<T> backward(const Tensor<T>& dy, bool param_grads) = 0;

  virtual void params(const std::string& prefix, std::vector<ParamRef<T>>& out) {}
  virtual void state(const std::string& prefix, std::vector<StateRef<T>>& out) {}

  /// DCGAN-style weight init; layers without parameters ignore this. Drawing
  /// order is fixed by construction order, which keeps seeding reproducible.
  virtual void init(Rng& rng) {}
};

template <typename T>
class Conv2d : public Layer<T> {
 public:
  Conv2d(int64_t cin, int64_t cout, int64_t k, int64_t stride, int64_t pad, bool bias = false)
      : cin_(cin), cout_(cout), k_(k), stride_(stride), pad_(pad) {
    w_ = Tensor<T>({cout, cin, k, k});
    gw_ = Tensor<T>({cout, cin, k, k});
    if (bias) {
      b_ = Tensor<T>({cout});
      gb_ = Tensor<T>({cout});
    }
  }

  void init(Rng& rng) override {
    rng.fill_normal(w_, 0.0, 0.02);
    if (!b_.empty()) b_.zero();
  }

  Tensor<T> forward(const Tensor<T>& x, bool /*train*/) override {
    check_input(x);
    x_ = x;
    const int64_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int64_t ho = (h + 2 * pad_ - k_) / stride_ + 1;
    const int64_t wo = (w + 2 * pad_ - k_) / stride_ + 1;
    Tensor<T> y({n, cout_, ho, wo});
    kernels::conv2d_forward(x.data(), w_.data(), b_.empty() ? nullptr : b_.data(), y.data(), n,
                            cin_, h, w, cout_, k_, stride_, pad_);
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, bool param_grads) override {
    const int64_t n = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
    Tensor<T> dx(x_.shape());
    kernels::conv2d_backward_input(dy.data(), w_.data(), dx.data(), n, cin_, h, w, cout_, k_,
                                   stride_, pad_);
    if (param_grads) {
      kernels::conv2d_backward_params(dy.data(), x_.data(), gw_.data(),
                                      b_.empty() ? nullptr : gb_.data(), n, cin_, h, w, cout_, k_,
                                      stride_, pad_);
    }
    return dx;
  }

  void params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    out.push_back({prefix + "weight", &w_, &gw_});
    if (!b_.empty()) out.push_back({prefix + "bias", &b_, &gb_});
  }

  void state(const std::string& prefix, std::vector<StateRef<T>>& out) override {
    out.push_back({prefix + "weight", &w_});
    if (!b_.empty()) out.push_back({prefix + "bias", &b_});
  }

 private:
  void check_input(const Tensor<T>& x) const {
    if (x.ndim() != 4 || x.dim(1) != cin_) {
      throw ShapeError("Conv2d: want [n," + std::to_string(cin_) + ",h,w], got " +
                       Tensor<T>::shape_str(x.shape()));
    }
    const int64_t span = x.dim(2) + 2 * pad_ - k_;
    if (span < 0 || span % stride_ != 0) {
      throw ShapeError("Conv2d: input " + std::to_string(x.dim(2)) + " incompatible with k=" +
                       std::to_string(k_) + " s=" + std::to_string(stride_) +
                       " p=" + std::to_string(pad_));
    }
  }

  int64_t cin_, cout_, k_, stride_, pad_;
  Tensor<T> w_, b_, gw_, gb_;
  Tensor<T> x_;
};

template <typename T>
class ConvTranspose2d : public Layer<T> {
 public:
  ConvTranspose2d(int64_t cin, int64_t cout, int64_t k, int64_t stride, int64_t pad,
                  bool bias = false)
      : cin_(cin), cout_(cout), k_(k), stride_(stride), pad_(pad) {
    w_ = Tensor<T>({cin, cout, k, k});
    gw_ = Tensor<T>({cin, cout, k, k});
    if (bias) {
      b_ = Tensor<T>({cout});
      gb_ = Tensor<T>({cout});
    }
  }

  void init(Rng& rng) override {
    rng.fill_normal(w_, 0.0, 0.02);
    if (!b_.empty()) b_.zero();
  }

  Tensor<T> forward(const Tensor<T>& x, bool /*train*/) override {
    if (x.ndim() != 4 || x.dim(1) != cin_) {
      throw ShapeError("ConvTranspose2d: want [n," + std::to_string(cin_) + ",h,w], got " +
                       Tensor<T>::shape_str(x.shape()));
    }
    x_ = x;
    const int64_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int64_t ho = (h - 1) * stride_ - 2 * pad_ + k_;
    const int64_t wo = (w - 1) * stride_ - 2 * pad_ + k_;
    if (ho <= 0 || wo <= 0) throw ShapeError("ConvTranspose2d: degenerate output size");
    Tensor<T> y({n, cout_, ho, wo});
    kernels::convt2d_forward(x.data(), w_.data(), b_.empty() ? nullptr : b_.data(), y.data(), n,
                             cin_, h, w, cout_, k_, stride_, pad_);
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, bool param_grads) override {
    const int64_t n = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
    Tensor<T> dx(x_.shape());
    kernels::convt2d_backward_input(dy.data(), w_.data(), dx.data(), n, cin_, h, w, cout_, k_,
                                    stride_, pad_);
    if (param_grads) {
      kernels::convt2d_backward_params(dy.data(), x_.data(), gw_.data(),
                                       b_.empty() ? nullptr : gb_.data(), n, cin_, h, w, cout_, k_,
                                       stride_, pad_);
    }
    return dx;
  }

  void params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    out.push_back({prefix + "weight", &w_, &gw_});
    if (!b_.empty()) out.push_back({prefix + "bias", &b_, &gb_});
  }

  void state(const std::string& prefix, std::vector<StateRef<T>>& out) override {
    out.push_back({prefix + "weight", &w_});
    if (!b_.empty()) out.push_back({prefix + "bias", &b_});
  }

 private:
  int64_t cin_, cout_, k_, stride_, pad_;
  Tensor<T> w_, b_, gw_, gb_;
  Tensor<T> x_;
};

template <typename T>
class BatchNorm2d : public Layer<T> {
 public:
  explicit BatchNorm2d(int64_t c, T momentum = T(0.1), T eps = T(1e-5))
      : c_(c), momentum_(momentum), eps_(eps) {
    gamma_ = Tensor<T>::full({c}, T(1));
    beta_ = Tensor<T>({c});
    ggamma_ = Tensor<T>({c});
    gbeta_ = Tensor<T>({c});
    running_mean_ = Tensor<T>({c});
    running_var_ = Tensor<T>::full({c}, T(1));
    invstd_ = Tensor<T>({c});
  }

  void init(Rng& rng) override {
    rng.fill_normal(gamma_, 1.0, 0.02);
    beta_.zero();
  }

  Tensor<T> forward(const Tensor<T>& x, bool train) override {
    if (x.ndim() != 4 || x.dim(1) != c_) {
      throw ShapeError("BatchNorm2d: want [n," + std::to_string(c_) + ",h,w], got " +
                       Tensor<T>::shape_str(x.shape()));
    }
    const int64_t n = x.dim(0), hw = x.dim(2) * x.dim(3);
    Tensor<T> y(x.shape());
    if (train) {
      xhat_ = Tensor<T>(x.shape());
      kernels::batchnorm_forward_train(x.data(), y.data(), xhat_.data(), gamma_.data(),
                                       beta_.data(), running_mean_.data(), running_var_.data(),
                                       invstd_.data(), momentum_, eps_, n, c_, hw);
      have_cache_ = true;
    } else {
      kernels::batchnorm_forward_eval(x.data(), y.data(), gamma_.data(), beta_.data(),
                                      running_mean_.data(), running_var_.data(), eps_, n, c_, hw);
      have_cache_ = false;
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, bool param_grads) override {
    if (!have_cache_) throw Error("BatchNorm2d: backward without a train-mode forward");
    const int64_t n = dy.dim(0), hw = dy.dim(2) * dy.dim(3);
    Tensor<T> dx(dy.shape());
    // dgamma/dbeta are cheap to compute either way; when param_grads is off
    // they go to scratch so the stored grads stay untouched.
    Tensor<T> sg({c_}), sb({c_});
    kernels::batchnorm_backward(xhat_.data(), dy.data(), gamma_.data(), invstd_.data(), dx.data(),
                                param_grads ? ggamma_.data() : sg.data(),
                                param_grads ? gbeta_.data() : sb.data(), n, c_, hw);
    return dx;
  }

  void params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    out.push_back({prefix + "gamma", &gamma_, &ggamma_});
    out.push_back({prefix + "beta", &beta_, &gbeta_});
  }

  void state(const std::string& prefix, std::vector<StateRef<T>>& out) override {
    out.push_back({prefix + "gamma", &gamma_});
    out.push_back({prefix + "beta", &beta_});
    out.push_back({prefix + "running_mean", &running_mean_});
    out.push_back({prefix + "running_var", &running_var_});
  }

 private:
  int64_t c_;
  T momentum_, eps_;
  Tensor<T> gamma_, beta_, ggamma_, gbeta_;
  Tensor<T> running_mean_, running_var_;
  Tensor<T> xhat_, invstd_;
  bool have_cache_ = false;
};

template <typename T>
class LeakyReLU : public Layer<T> {
 public:
  explicit LeakyReLU(T slope) : slope_(slope) {}

  Tensor<T> forward(const Tensor<T>& x, bool /*train*/) override {
    x_ = x;
    Tensor<T> y(x.shape());
    kernels::leaky_relu_forward(x.data(), y.data(), x.numel(), slope_);
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, bool /*param_grads*/) override {
    Tensor<T> dx(dy.shape());
    kernels::leaky_relu_backward(x_.data(), dy.data(), dx.data(), dy.numel(), slope_);
    return dx;
  }

 private:
  T slope_;
  Tensor<T> x_;
};

template <typename T>
class ReLU : public LeakyReLU<T> {
 public:
  ReLU() : LeakyReLU<T>(T(0)) {}
};

template <typename T>
class Tanh : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool /*train*/) override {
    Tensor<T> y(x.shape());
    kernels::tanh_forward(x.data(), y.data(), x.numel());
    y_ = y;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, bool /*param_grads*/) override {
    Tensor<T> dx(dy.shape());
    kernels::tanh_backward(y_.data(), dy.data(), dx.data(), dy.numel());
    return dx;
  }

 private:
  Tensor<T> y_;
};

template <typename T>
class Sigmoid : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool /*train*/) override {
    Tensor<T> y(x.shape());
    kernels::sigmoid_forward(x.data(), y.data(), x.numel());
    y_ = y;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, bool /*param_grads*/) override {
    Tensor<T> dx(dy.shape());
    kernels::sigmoid_backward(y_.data(), dy.data(), dx.data(), dy.numel());
    return dx;
  }

 private:
  Tensor<T> y_;
};

/// Plain layer pipeline. Backward must be called with the dy of the most
/// recent forward; each layer keeps only its latest cache.
template <typename T>
class Sequential {
 public:
  template <typename L, typename... Args>
  L& add(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  Tensor<T> forward(const Tensor<T>& x, bool train) {
    Tensor<T> cur = x;
    for (auto& l : layers_) cur = l->forward(cur, train);
    return cur;
  }

  Tensor<T> backward(const Tensor<T>& dy, bool param_grads) {
    Tensor<T> cur = dy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
      cur = (*it)->backward(cur, param_grads);
    return cur;
  }

  void params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
    for (size_t i = 0; i < layers_.size(); ++i)
      layers_[i]->params(prefix + std::to_string(i) + ".", out);
  }

  void state(const std::string& prefix, std::vector<StateRef<T>>& out) {
    for (size_t i = 0; i < layers_.size(); ++i)
      layers_[i]->state(prefix + std::to_string(i) + ".", out);
  }

  void init(Rng& rng) {
    for (auto& l : layers_) l->init(rng);
  }

  size_t size() const { return layers_.size(); }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

}  // namespace ganomaly::nn
