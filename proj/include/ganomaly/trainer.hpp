#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ganomaly/datasets.hpp"
#include "ganomaly/losses.hpp"
#include "ganomaly/model.hpp"
#include "ganomaly/optim.hpp"

namespace ganomaly {

struct TrainConfig {
  int64_t epochs = 25;
  int64_t batch_size = 64;
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  LossWeights weights;
  uint64_t seed = 1;
  bool squared_latent_norms = false;

  /// When > 0: if the discriminator loss collapses below this value, D is
  /// reinitialized (the generator keeps training). Off by default.
  double reinit_d_threshold = 0.0;

  int64_t checkpoint_every = 0;  // epochs between checkpoints; 0 = final only

  void validate() const;
};

struct StepLosses {
  double adv = 0.0;
  double con = 0.0;
  double enc = 0.0;
  double g_total = 0.0;
  double d = 0.0;
};

struct EpochRecord {
  int64_t epoch = 0;  // 1-based
  double adv = 0.0;
  double con = 0.0;
  double enc = 0.0;
  double g_total = 0.0;
  double d = 0.0;
};

/// Owns the alternating optimization. One Adam instance covers G_E, G_D and
/// E jointly, a second covers D; both survive across epochs (and through
/// checkpoints).
class Trainer {
 public:
  Trainer(ModelBundle<float>& bundle, const TrainConfig& cfg);

  /// One optimization step on one batch [n, c, s, s]:
  /// generator phase (update G_E, G_D, E against l_g with D frozen), then
  /// discriminator phase (update D on the same batch and the detached
  /// reconstruction). Throws NumericError if any loss is non-finite.
  StepLosses train_step(const Tensor<float>& batch);

  Adam<float>& gen_optimizer() { return gen_opt_; }
  Adam<float>& disc_optimizer() { return disc_opt_; }
  ModelBundle<float>& bundle() { return bundle_; }
  const TrainConfig& config() const { return cfg_; }
  int64_t d_reinit_count() const { return d_reinits_; }

 private:
  void maybe_reinit_discriminator(double l_d);

  ModelBundle<float>& bundle_;
  TrainConfig cfg_;
  Adam<float> gen_opt_;
  Adam<float> disc_opt_;
  int64_t d_reinits_ = 0;
};

struct RunOptions {
  std::string checkpoint_dir;  // empty: no checkpoints written
  std::string resume_from;     // checkpoint directory to continue from
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainOutput {
  ModelBundle<float> bundle;
  std::vector<EpochRecord> telemetry;  // only epochs run by this call
  int64_t d_reinits = 0;
};

/// Full training loop: per-epoch seeded shuffle of train_normal, fixed-size
/// batches (the trailing partial batch is dropped unless it is the only
/// batch), telemetry as per-epoch mean losses, periodic checkpoints.
/// The split contract (no anomalies in training data) is enforced up front.
TrainOutput train_model(const ArchConfig& arch, const TrainConfig& cfg, const DatasetSplit& split,
                        const RunOptions& opts = {});

/// epoch,l_adv,l_con,l_enc,l_g,l_d rows.
void write_telemetry_csv(const std::vector<EpochRecord>& records, const std::string& path);

}  // namespace ganomaly
