#include "ganomaly/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "ganomaly/checkpoint.hpp"
#include "ganomaly/io.hpp"

namespace ganomaly {

namespace {

void axpy(Tensor<float>& y, const Tensor<float>& x) {
  for (int64_t i = 0; i < y.numel(); ++i) y[i] += x[i];
}

void scale(Tensor<float>& t, double a) {
  const float f = static_cast<float>(a);
  for (int64_t i = 0; i < t.numel(); ++i) t[i] *= f;
}

bool finite(double v) { return std::isfinite(v); }

// splitmix64-style mixing so per-epoch shuffles depend only on (seed, epoch),
// never on how many epochs ran in this process. That is what makes a resumed
// run replay the exact batch order of an uninterrupted one.
uint64_t mix_seed(uint64_t seed, uint64_t epoch) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (epoch + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

void TrainConfig::validate() const {
  std::vector<std::string> problems;
  if (epochs < 1) problems.push_back("train.epochs must be >= 1");
  if (batch_size < 2) problems.push_back("train.batch_size must be >= 2");
  if (!(learning_rate > 0)) problems.push_back("train.learning_rate must be > 0");
  if (!(beta1 >= 0 && beta1 < 1)) problems.push_back("train.beta1 must be in [0, 1)");
  if (!(beta2 >= 0 && beta2 < 1)) problems.push_back("train.beta2 must be in [0, 1)");
  if (weights.adv < 0 || weights.con < 0 || weights.enc < 0)
    problems.push_back("train loss weights must be >= 0");
  if (checkpoint_every < 0) problems.push_back("train.checkpoint_every must be >= 0");
  if (reinit_d_threshold < 0) problems.push_back("train.reinit_d_threshold must be >= 0");
  if (!problems.empty()) {
    std::string msg = "invalid train config:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
}

Trainer::Trainer(ModelBundle<float>& bundle, const TrainConfig& cfg)
    : bundle_(bundle),
      cfg_(cfg),
      gen_opt_(bundle.generator_params(), static_cast<float>(cfg.learning_rate),
               static_cast<float>(cfg.beta1), static_cast<float>(cfg.beta2)),
      disc_opt_(bundle.discriminator_params(), static_cast<float>(cfg.learning_rate),
                static_cast<float>(cfg.beta1), static_cast<float>(cfg.beta2)) {
  cfg.validate();
}

StepLosses Trainer::train_step(const Tensor<float>& batch) {
  ModelBundle<float>& m = bundle_;
  const LossWeights& w = cfg_.weights;

  // ---- generator phase: minimize l_g over G_E, G_D, E with D frozen ----
  gen_opt_.zero_grad();

  Tensor<float> z = m.gen_encoder.forward(batch, true);
  Tensor<float> xhat = m.gen_decoder.forward(z, true);
  Tensor<float> zhat = m.encoder.forward(xhat, true);
  // The real pass runs first: its features enter the loss as constants, so
  // only the fake pass (whose caches survive) ever needs a backward.
  auto d_real = m.discriminator.forward(batch, true);
  auto d_fake = m.discriminator.forward(xhat, true);

  Tensor<float> g_feat_fake;
  const double l_adv = adversarial_loss_grad(d_real.feat, d_fake.feat, g_feat_fake);
  Tensor<float> g_xhat_con;
  const double l_con = contextual_loss_grad(batch, xhat, g_xhat_con);
  Tensor<float> g_z_enc, g_zhat_enc;
  const double l_enc = encoder_loss_grad(z, zhat, cfg_.squared_latent_norms, g_z_enc, g_zhat_enc);
  const double l_g = w.adv * l_adv + w.con * l_con + w.enc * l_enc;

  if (!finite(l_adv) || !finite(l_con) || !finite(l_enc)) {
    std::ostringstream os;
    os << "non-finite generator loss (l_adv=" << l_adv << " l_con=" << l_con << " l_enc=" << l_enc
       << ")";
    throw NumericError(os.str());
  }

  // Seed gradients carry the loss weights.
  scale(g_feat_fake, w.adv);
  scale(g_xhat_con, w.con);
  scale(g_z_enc, w.enc);
  scale(g_zhat_enc, w.enc);

  Tensor<float> none;
  Tensor<float> dxhat = m.discriminator.backward(none, g_feat_fake, /*param_grads=*/false);
  axpy(dxhat, g_xhat_con);
  axpy(dxhat, m.encoder.backward(g_zhat_enc, /*param_grads=*/true));
  Tensor<float> dz = m.gen_decoder.backward(dxhat, /*param_grads=*/true);
  axpy(dz, g_z_enc);
  m.gen_encoder.backward(dz, /*param_grads=*/true);
  gen_opt_.step();

  // ---- discriminator phase: BCE on the batch vs the detached xhat ----
  // Each pass backprops before the next forward overwrites the caches; the
  // gradients accumulate in the parameter grads across both passes.
  disc_opt_.zero_grad();

  auto real2 = m.discriminator.forward(batch, true);
  Tensor<float> g_p_real;
  bce_real_grad(real2.prob, g_p_real);
  m.discriminator.backward(g_p_real, none, /*param_grads=*/true);

  auto fake2 = m.discriminator.forward(xhat, true);
  Tensor<float> g_p_fake;
  bce_fake_grad(fake2.prob, g_p_fake);
  m.discriminator.backward(g_p_fake, none, /*param_grads=*/true);

  const double l_d = discriminator_loss(real2.prob, fake2.prob);
  if (!finite(l_d)) throw NumericError("non-finite discriminator loss");
  disc_opt_.step();

  maybe_reinit_discriminator(l_d);

  return {l_adv, l_con, l_enc, l_g, l_d};
}

void Trainer::maybe_reinit_discriminator(double l_d) {
  if (cfg_.reinit_d_threshold <= 0 || l_d >= cfg_.reinit_d_threshold) return;
  ++d_reinits_;
  // Fresh weights from a stream derived from (seed, reinit index), fresh
  // optimizer moments. Deterministic given the config.
  Rng rng(mix_seed(cfg_.seed ^ 0xD15CULL, static_cast<uint64_t>(d_reinits_)));
  bundle_.discriminator.features.init(rng);
  bundle_.discriminator.head_stack.init(rng);
  disc_opt_.reset_state();
}

TrainOutput train_model(const ArchConfig& arch, const TrainConfig& cfg, const DatasetSplit& split,
                        const RunOptions& opts) {
  arch.validate();
  cfg.validate();
  check_split_contract(split);

  const int64_t n = static_cast<int64_t>(split.train_normal.size());
  if (n < 2) throw DataError("training needs at least 2 samples, got " + std::to_string(n));
  const std::vector<int64_t> want{arch.channels, arch.input_size, arch.input_size};
  for (const auto& s : split.train_normal) {
    if (s.image.shape() != want) {
      throw DataError("train sample '" + s.id + "' has shape " +
                      Tensor<float>::shape_str(s.image.shape()) + ", expected " +
                      Tensor<float>::shape_str(want));
    }
  }

  int64_t start_epoch = 0;
  ModelBundle<float> bundle;
  if (!opts.resume_from.empty()) {
    LoadedCheckpoint loaded = load_checkpoint(opts.resume_from);
    if (!(loaded.bundle.arch == arch))
      throw ConfigError("resume: checkpoint arch differs from the configured arch");
    bundle = std::move(loaded.bundle);
    start_epoch = loaded.epoch;
    if (start_epoch >= cfg.epochs) {
      throw ConfigError("resume: checkpoint is already at epoch " + std::to_string(start_epoch) +
                        " of " + std::to_string(cfg.epochs));
    }
  } else {
    bundle = build_models<float>(arch, cfg.seed);
  }

  Trainer trainer(bundle, cfg);
  if (!opts.resume_from.empty())
    restore_optimizers(opts.resume_from, trainer.gen_optimizer(), trainer.disc_optimizer());

  const int64_t bs = std::min<int64_t>(cfg.batch_size, n);
  const int64_t batches = n / bs;  // >= 1; the trailing partial batch is dropped
  const int64_t c = arch.channels, s = arch.input_size;
  const int64_t sample_elems = c * s * s;

  std::vector<int64_t> order(static_cast<size_t>(n));
  std::vector<EpochRecord> telemetry;
  Tensor<float> batch({bs, c, s, s});

  for (int64_t epoch = start_epoch + 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), int64_t{0});
    Rng shuffle_rng(mix_seed(cfg.seed, static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double a_adv = 0, a_con = 0, a_enc = 0, a_g = 0, a_d = 0;
    for (int64_t b = 0; b < batches; ++b) {
      for (int64_t i = 0; i < bs; ++i) {
        const auto& img = split.train_normal[static_cast<size_t>(order[static_cast<size_t>(b * bs + i)])].image;
        std::copy(img.data(), img.data() + sample_elems, batch.data() + i * sample_elems);
      }
      StepLosses sl;
      try {
        sl = trainer.train_step(batch);
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + " step " + std::to_string(b + 1) +
                           ": " + e.what());
      }
      a_adv += sl.adv;
      a_con += sl.con;
      a_enc += sl.enc;
      a_g += sl.g_total;
      a_d += sl.d;
    }
    const double nb = static_cast<double>(batches);
    EpochRecord rec{epoch, a_adv / nb, a_con / nb, a_enc / nb, a_g / nb, a_d / nb};
    telemetry.push_back(rec);
    if (opts.on_epoch) opts.on_epoch(rec);

    if (!opts.checkpoint_dir.empty() && cfg.checkpoint_every > 0 && epoch < cfg.epochs &&
        epoch % cfg.checkpoint_every == 0) {
      save_checkpoint(opts.checkpoint_dir + "/checkpoint-epoch-" + std::to_string(epoch), bundle,
                      &trainer.gen_optimizer(), &trainer.disc_optimizer(), epoch, cfg);
    }
  }

  if (!opts.checkpoint_dir.empty()) {
    save_checkpoint(opts.checkpoint_dir + "/checkpoint-final", bundle, &trainer.gen_optimizer(),
                    &trainer.disc_optimizer(), cfg.epochs, cfg);
  }
  return {std::move(bundle), std::move(telemetry), trainer.d_reinit_count()};
}

void write_telemetry_csv(const std::vector<EpochRecord>& records, const std::string& path) {
  std::string out = "epoch,l_adv,l_con,l_enc,l_g,l_d\n";
  char line[256];
  for (const auto& r : records) {
    std::snprintf(line, sizeof(line), "%lld,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                  static_cast<long long>(r.epoch), r.adv, r.con, r.enc, r.g_total, r.d);
    out += line;
  }
  io::write_text_file(path, out);
}

}  // namespace ganomaly
