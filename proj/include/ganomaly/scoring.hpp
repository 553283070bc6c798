#pragma once

#include <string>
#include <vector>

#include "ganomaly/datasets.hpp"
#include "ganomaly/model.hpp"

namespace ganomaly {

/// V1 scores latent mismatch through the second encoder:
///   a(x) = || G_E(x) - E(G_D(G_E(x))) ||_2.
/// V2 re-encodes the reconstruction with the generator encoder instead:
///   a(x) = || G_E(x) - G_E(G_D(G_E(x))) ||_2.
enum class ScoreVariant { V1, V2 };

enum class ScalingMode { None, Global, Partitioned, ReferenceRange };

const char* to_string(ScoreVariant v);
const char* to_string(ScalingMode m);
ScoreVariant parse_variant(const std::string& s);     // ConfigError on unknown
ScalingMode parse_scaling(const std::string& s);      // ConfigError on unknown

struct ScoredSample {
  std::string id;
  double raw = 0.0;
  double scaled = 0.0;
  bool has_scaled = false;
  bool anomaly_label = false;
  std::string source_label;
};

struct RangeStats {
  double min = 0.0;
  double max = 0.0;
};

struct ScoreSet {
  ScoreVariant variant = ScoreVariant::V1;
  bool squared = false;
  ScalingMode scaling = ScalingMode::None;

  /// True once per-ground-truth-label statistics have touched the scores.
  /// Such numbers cannot be produced for unlabeled data, so deployment paths
  /// must refuse them (see require_label_free).
  bool label_dependent = false;

  std::vector<ScoredSample> samples;

  RangeStats global{};    // set by global / reference-range scaling
  RangeStats normal{};    // set by partitioned scaling
  RangeStats abnormal{};  // set by partitioned scaling
};

/// Score one preprocessed image [c, s, s]. Inference mode (running stats).
double anomaly_score(ModelBundle<float>& m, const Tensor<float>& image, ScoreVariant variant,
                     bool squared = false);

/// Scores a sample list in batches. Ordering of the output matches input.
ScoreSet score_samples(ModelBundle<float>& m, const std::vector<LabeledSample>& samples,
                       ScoreVariant variant, bool squared = false, int64_t batch_size = 64);

/// Min-max over the whole set: s' = (s - min) / (max - min).
/// Degenerate range (max == min) raises NumericError.
void apply_global_scaling(ScoreSet& s);

/// Min-max within the ground-truth normal and abnormal partitions
/// separately. Marks the set label_dependent. Requires both partitions
/// non-empty and non-degenerate.
void apply_partitioned_scaling(ScoreSet& s);

/// Deployment-style scaling against a stored range (for example the training
/// or validation score range); values are clamped into [0, 1].
void apply_reference_scaling(ScoreSet& s, RangeStats reference);

/// Guard for deployment paths: throws ConfigError when the set was scaled
/// with ground-truth-label statistics.
void require_label_free(const ScoreSet& s);

/// scores.csv: id,raw_score,scaled_score,label,variant,scaling
void write_scores_csv(const ScoreSet& s, const std::string& path);

}  // namespace ganomaly
