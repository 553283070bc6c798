#include "ganomaly/model.hpp"

#include <cmath>

#include "ganomaly/errors.hpp"

namespace ganomaly {

int64_t ArchConfig::stages() const {
  // 32 -> 3 stages (32->16->8->4), 64 -> 4, and so on down to the 4x4 map.
  int64_t s = 0;
  for (int64_t sz = input_size; sz > 4; sz /= 2) ++s;
  return s;
}

void ArchConfig::validate() const {
  auto pow2 = [](int64_t v) { return v > 0 && (v & (v - 1)) == 0; };
  if (!pow2(input_size) || input_size < 8) {
    throw ConfigError("arch: input_size must be a power of two >= 8, got " +
                      std::to_string(input_size));
  }
  if (channels != 1 && channels != 3) {
    throw ConfigError("arch: channels must be 1 or 3, got " + std::to_string(channels));
  }
  if (latent_dim < 1) throw ConfigError("arch: latent_dim must be >= 1");
  if (base_width < 1) throw ConfigError("arch: base_width must be >= 1");
}

namespace {

// Shared topology for G_E, E and the discriminator feature stack:
//   conv(c -> w, 4, 2, 1) + LeakyReLU(0.2)            (no batch norm first)
//   conv(w*2^i -> w*2^(i+1), 4, 2, 1) + BN + LeakyReLU  per extra stage
// leaving a [w*2^(stages-1), 4, 4] map.
template <typename T>
int64_t build_feature_stack(nn::Sequential<T>& s, const ArchConfig& a) {
  const int64_t stages = a.stages();
  s.template add<nn::Conv2d<T>>(a.channels, a.base_width, 4, 2, 1);
  s.template add<nn::LeakyReLU<T>>(T(0.2));
  int64_t w = a.base_width;
  for (int64_t i = 1; i < stages; ++i) {
    s.template add<nn::Conv2d<T>>(w, w * 2, 4, 2, 1);
    s.template add<nn::BatchNorm2d<T>>(w * 2);
    s.template add<nn::LeakyReLU<T>>(T(0.2));
    w *= 2;
  }
  return w;  // channels of the final 4x4 map
}

template <typename T>
EncoderNet<T> build_encoder(const ArchConfig& a) {
  EncoderNet<T> e;
  const int64_t w = build_feature_stack(e.stack, a);
  // Valid 4x4 conv collapses the map to [latent, 1, 1]; no norm, no
  // activation, so the latent space stays unbounded.
  e.stack.template add<nn::Conv2d<T>>(w, a.latent_dim, 4, 1, 0);
  e.latent_dim = a.latent_dim;
  return e;
}

template <typename T>
DecoderNet<T> build_decoder(const ArchConfig& a) {
  DecoderNet<T> d;
  const int64_t stages = a.stages();
  const int64_t top = a.base_width << (stages - 1);
  d.stack.template add<nn::ConvTranspose2d<T>>(a.latent_dim, top, 4, 1, 0);
  d.stack.template add<nn::BatchNorm2d<T>>(top);
  d.stack.template add<nn::ReLU<T>>();
  int64_t w = top;
  for (int64_t i = 1; i < stages; ++i) {
    d.stack.template add<nn::ConvTranspose2d<T>>(w, w / 2, 4, 2, 1);
    d.stack.template add<nn::BatchNorm2d<T>>(w / 2);
    d.stack.template add<nn::ReLU<T>>();
    w /= 2;
  }
  d.stack.template add<nn::ConvTranspose2d<T>>(w, a.channels, 4, 2, 1);
  d.stack.template add<nn::Tanh<T>>();
  d.latent_dim = a.latent_dim;
  return d;
}

template <typename T>
DiscriminatorNet<T> build_discriminator(const ArchConfig& a) {
  DiscriminatorNet<T> d;
  d.feat_channels = build_feature_stack(d.features, a);
  d.head = &d.head_stack.template add<nn::Conv2d<T>>(d.feat_channels, 1, 4, 1, 0);
  d.head_stack.template add<nn::Sigmoid<T>>();
  return d;
}

}  // namespace

template <typename T>
std::vector<nn::StateRef<T>> ModelBundle<T>::network_state(const std::string& which) {
  std::vector<nn::StateRef<T>> out;
  if (which == "gen_encoder") {
    gen_encoder.stack.state("", out);
  } else if (which == "gen_decoder") {
    gen_decoder.stack.state("", out);
  } else if (which == "encoder") {
    encoder.stack.state("", out);
  } else if (which == "discriminator") {
    discriminator.features.state("f.", out);
    discriminator.head_stack.state("h.", out);
  } else {
    throw ConfigError("unknown network name: " + which);
  }
  return out;
}

template <typename T>
ModelBundle<T> build_models(const ArchConfig& arch, uint64_t seed) {
  arch.validate();
  ModelBundle<T> m;
  m.arch = arch;
  m.gen_encoder = build_encoder<T>(arch);
  m.gen_decoder = build_decoder<T>(arch);
  m.encoder = build_encoder<T>(arch);
  m.discriminator = build_discriminator<T>(arch);
  Rng rng(seed);
  m.gen_encoder.stack.init(rng);
  m.gen_decoder.stack.init(rng);
  m.encoder.stack.init(rng);
  m.discriminator.features.init(rng);
  m.discriminator.head_stack.init(rng);
  return m;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> generator_forward(ModelBundle<T>& m, const Tensor<T>& x) {
  Tensor<T> z = m.gen_encoder.forward(x, false);
  Tensor<T> xhat = m.gen_decoder.forward(z, false);
  return {std::move(xhat), std::move(z)};
}

template <typename T>
Tensor<T> encode(ModelBundle<T>& m, const Tensor<T>& xhat) {
  return m.encoder.forward(xhat, false);
}

template <typename T>
typename DiscriminatorNet<T>::Output discriminate(ModelBundle<T>& m, const Tensor<T>& x) {
  return m.discriminator.forward(x, false);
}

template struct ModelBundle<float>;
template struct ModelBundle<double>;
template ModelBundle<float> build_models<float>(const ArchConfig&, uint64_t);
template ModelBundle<double> build_models<double>(const ArchConfig&, uint64_t);
template std::pair<Tensor<float>, Tensor<float>> generator_forward<float>(ModelBundle<float>&,
                                                                          const Tensor<float>&);
template std::pair<Tensor<double>, Tensor<double>> generator_forward<double>(ModelBundle<double>&,
                                                                             const Tensor<double>&);
template Tensor<float> encode<float>(ModelBundle<float>&, const Tensor<float>&);
template Tensor<double> encode<double>(ModelBundle<double>&, const Tensor<double>&);
template DiscriminatorNet<float>::Output discriminate<float>(ModelBundle<float>&,
                                                             const Tensor<float>&);
template DiscriminatorNet<double>::Output discriminate<double>(ModelBundle<double>&,
                                                               const Tensor<double>&);

}  // namespace ganomaly
