#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ganomaly/nn.hpp"

namespace ganomaly {

/// Network geometry. input_size must be a power of two >= 8; the conv stacks
/// downsample by 2 per stage until a 4x4 map remains, then a valid 4x4 conv
/// collapses it to the latent vector, so depth scales with log2(input_size).
struct ArchConfig {
  int64_t input_size = 32;
  int64_t channels = 1;
  int64_t latent_dim = 100;
  int64_t base_width = 64;

  int64_t stages() const;  // number of stride-2 stages before the 4x4 head
  void validate() const;   // throws ConfigError on bad geometry
  bool operator==(const ArchConfig&) const = default;
};

/// Encoder: conv + LeakyReLU(0.2) stages (batch norm on all but the first),
/// then a valid 4x4 conv to [n, latent, 1, 1]. Used for G_E and E.
template <typename T>
struct EncoderNet {
  nn::Sequential<T> stack;
  int64_t latent_dim = 0;

  /// x: [n, c, s, s] -> z: [n, latent]
  Tensor<T> forward(const Tensor<T>& x, bool train) {
    Tensor<T> z = stack.forward(x, train);
    return z.reshaped({z.dim(0), latent_dim});
  }

  Tensor<T> backward(const Tensor<T>& dz, bool param_grads) {
    return stack.backward(dz.reshaped({dz.dim(0), latent_dim, 1, 1}), param_grads);
  }
};

/// Decoder: 4x4 transposed conv from the latent, batch norm + ReLU stages
/// mirroring the encoder, final tanh into [-1, 1].
template <typename T>
struct DecoderNet {
  nn::Sequential<T> stack;
  int64_t latent_dim = 0;

  /// z: [n, latent] -> xhat: [n, c, s, s]
  Tensor<T> forward(const Tensor<T>& z, bool train) {
    return stack.forward(z.reshaped({z.dim(0), latent_dim, 1, 1}), train);
  }

  Tensor<T> backward(const Tensor<T>& dxhat, bool param_grads) {
    Tensor<T> dz = stack.backward(dxhat, param_grads);
    return dz.reshaped({dz.dim(0), latent_dim});
  }
};

/// Discriminator: encoder-shaped feature stack, then a valid 4x4 conv to one
/// logit plus sigmoid. forward exposes both the probability and the
/// flattened last feature map, which is the f(.) used by the adversarial
/// feature-matching loss.
template <typename T>
struct DiscriminatorNet {
  nn::Sequential<T> features;
  nn::Conv2d<T>* head = nullptr;  // owned by head_stack
  nn::Sequential<T> head_stack;   // head conv + sigmoid
  int64_t feat_channels = 0;      // channels of the 4x4 feature map

  struct Output {
    Tensor<T> prob;  // [n]
    Tensor<T> feat;  // [n, feat_channels*16]
  };

  Output forward(const Tensor<T>& x, bool train) {
    Tensor<T> f = features.forward(x, train);
    feat_shape_ = f.shape();
    Tensor<T> p = head_stack.forward(f, train);
    return {p.reshaped({p.dim(0)}), f.reshaped({f.dim(0), f.numel() / f.dim(0)})};
  }

  /// Either gradient may be empty (numel 0): the generator phase only feeds
  /// dfeat, the discriminator phase only dprob.
  Tensor<T> backward(const Tensor<T>& dprob, const Tensor<T>& dfeat, bool param_grads) {
    Tensor<T> dfeat_total(feat_shape_);
    if (!dprob.empty()) {
      dfeat_total = head_stack.backward(dprob.reshaped({dprob.dim(0), 1, 1, 1}), param_grads);
    }
    if (!dfeat.empty()) {
      Tensor<T> df = dfeat.reshaped(feat_shape_);
      for (int64_t i = 0; i < dfeat_total.numel(); ++i) dfeat_total[i] += df[i];
    }
    return features.backward(dfeat_total, param_grads);
  }

 private:
  std::vector<int64_t> feat_shape_;
};

/// The four networks trained together. G_E/G_D form the generator, E is the
/// second encoder whose latent mismatch drives the anomaly score, D is the
/// feature-matching discriminator.
template <typename T>
struct ModelBundle {
  ArchConfig arch;
  EncoderNet<T> gen_encoder;
  DecoderNet<T> gen_decoder;
  EncoderNet<T> encoder;
  DiscriminatorNet<T> discriminator;

  ModelBundle() = default;
  ModelBundle(ModelBundle&&) = default;
  ModelBundle& operator=(ModelBundle&&) = default;
  ModelBundle(const ModelBundle&) = delete;
  ModelBundle& operator=(const ModelBundle&) = delete;

  std::vector<nn::ParamRef<T>> generator_params() {
    std::vector<nn::ParamRef<T>> out;
    gen_encoder.stack.params("gen_encoder.", out);
    gen_decoder.stack.params("gen_decoder.", out);
    encoder.stack.params("encoder.", out);
    return out;
  }

  std::vector<nn::ParamRef<T>> discriminator_params() {
    std::vector<nn::ParamRef<T>> out;
    discriminator.features.params("discriminator.f.", out);
    discriminator.head_stack.params("discriminator.h.", out);
    return out;
  }

  /// Everything a checkpoint persists for one network, keyed by name.
  std::vector<nn::StateRef<T>> network_state(const std::string& which);
};

/// Builds the four networks and applies the DCGAN init (conv weights
/// N(0, 0.02), batch norm gain N(1, 0.02), shifts zero) from a single seeded
/// stream in a fixed order.
template <typename T = float>
ModelBundle<T> build_models(const ArchConfig& arch, uint64_t seed);

// Inference-mode conveniences used by scoring and the CLI. They run with
// train=false, i.e. batch norm uses running statistics.

/// x -> (xhat, z) where z = G_E(x), xhat = G_D(z).
template <typename T>
std::pair<Tensor<T>, Tensor<T>> generator_forward(ModelBundle<T>& m, const Tensor<T>& x);

/// zhat = E(xhat).
template <typename T>
Tensor<T> encode(ModelBundle<T>& m, const Tensor<T>& xhat);

/// (prob, features) = D(x).
template <typename T>
typename DiscriminatorNet<T>::Output discriminate(ModelBundle<T>& m, const Tensor<T>& x);

}  // namespace ganomaly
