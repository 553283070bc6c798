#pragma once

#include <string>

#include "ganomaly/model.hpp"
#include "ganomaly/optim.hpp"
#include "ganomaly/trainer.hpp"

namespace ganomaly {

/// Checkpoints are directories:
///   manifest.json          arch, train config, epoch, format version
///   gen_encoder.tensors    one binary tensor container per network
///   gen_decoder.tensors
///   encoder.tensors
///   discriminator.tensors
///   optimizer.tensors      Adam moments and step counters
/// Containers carry a CRC32 so torn or bit-flipped files are detected on
/// load. All tensor payloads are little-endian float32 written verbatim, so
/// a save/load round trip is bit-exact.

inline constexpr int kCheckpointFormatVersion = 1;

void save_checkpoint(const std::string& dir, ModelBundle<float>& bundle, Adam<float>* gen_opt,
                     Adam<float>* disc_opt, int64_t epoch, const TrainConfig& cfg);

struct LoadedCheckpoint {
  ModelBundle<float> bundle;
  TrainConfig cfg;
  int64_t epoch = 0;
};

/// Rebuilds the networks from the stored arch and restores every tensor.
/// Unsupported format versions raise ConfigError; checksum or structure
/// problems raise FormatError; missing files raise IoError.
LoadedCheckpoint load_checkpoint(const std::string& dir);

/// Restores Adam moments + step counters into freshly built optimizers whose
/// parameter lists match the saved ones.
void restore_optimizers(const std::string& dir, Adam<float>& gen_opt, Adam<float>& disc_opt);

}  // namespace ganomaly
