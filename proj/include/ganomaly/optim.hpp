#pragma once

#include <string>
#include <vector>

#include "ganomaly/kernels.hpp"
#include "ganomaly/nn.hpp"

namespace ganomaly {

/// Adam over a fixed parameter group. Moment buffers are created zeroed and
/// are part of the checkpointed state together with the step counter.
template <typename T>
class Adam {
 public:
  Adam(std::vector<nn::ParamRef<T>> params, T lr, T beta1, T beta2, T eps = T(1e-8))
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
      m_.emplace_back(p.value->shape());
      v_.emplace_back(p.value->shape());
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.grad->zero();
  }

  void step() {
    ++t_;
    for (size_t i = 0; i < params_.size(); ++i) {
      kernels::adam_step(params_[i].value->data(), params_[i].grad->data(), m_[i].data(),
                         v_[i].data(), params_[i].value->numel(), lr_, beta1_, beta2_, eps_, t_);
    }
  }

  int64_t step_count() const { return t_; }
  void set_step_count(int64_t t) { t_ = t; }

  /// Fresh optimizer state (used when a network is reinitialized mid-run).
  void reset_state() {
    for (auto& t : m_) t.zero();
    for (auto& t : v_) t.zero();
    t_ = 0;
  }

  /// Moment buffers for serialization, named after their parameters.
  std::vector<nn::StateRef<T>> moment_state() {
    std::vector<nn::StateRef<T>> out;
    for (size_t i = 0; i < params_.size(); ++i) {
      out.push_back({"m." + params_[i].name, &m_[i]});
      out.push_back({"v." + params_[i].name, &v_[i]});
    }
    return out;
  }

  const std::vector<nn::ParamRef<T>>& params() const { return params_; }

 private:
  std::vector<nn::ParamRef<T>> params_;
  std::vector<Tensor<T>> m_, v_;
  int64_t t_ = 0;
  T lr_, beta1_, beta2_, eps_;
};

}  // namespace ganomaly
