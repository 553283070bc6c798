#pragma once

#include <string>
#include <vector>

#include "ganomaly/scoring.hpp"

namespace ganomaly {

/// Confusion counts with the *normal* class as positive, matching the
/// convention of the result tables this project reproduces. A sample is
/// predicted novel iff its score exceeds the threshold.
struct ConfusionMatrix {
  int64_t tp = 0;  // normal, predicted normal
  int64_t fp = 0;  // novel, predicted normal
  int64_t fn = 0;  // normal, predicted novel
  int64_t tn = 0;  // novel, predicted novel

  int64_t total() const { return tp + fp + fn + tn; }
};

/// Uses scaled scores when present, raw otherwise.
ConfusionMatrix confusion_at(const ScoreSet& scores, double tau);

/// Swaps the positive class (novel becomes positive).
ConfusionMatrix flip_positive(const ConfusionMatrix& cm);

struct DerivedMetrics {
  double precision = 0.0;
  double sensitivity = 0.0;  // recall
  double f1 = 0.0;
  double accuracy = 0.0;
  // Zero-denominator cases report 0 and clear the matching flag instead of
  // dividing by zero.
  bool precision_defined = true;
  bool sensitivity_defined = true;
  bool f1_defined = true;
};

DerivedMetrics derived_metrics(const ConfusionMatrix& cm);

enum class SweepCriterion { Accuracy, F1 };

struct SweepPoint {
  double tau = 0.0;
  ConfusionMatrix cm;
  DerivedMetrics metrics;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  size_t best_index = 0;

  const SweepPoint& best() const { return points[best_index]; }
};

/// Evaluates the inclusive grid lo, lo+step, ..., hi. Ties on the criterion
/// resolve to the lowest threshold, so the result is deterministic.
SweepResult sweep_threshold(const ScoreSet& scores, double lo, double hi, double step,
                            SweepCriterion criterion);

/// Area under the ROC curve for "novel" as the positive class, computed from
/// raw scores with midranks (ties count half). Throws NumericError when only
/// one class is present.
double roc_auc(const ScoreSet& scores);
double roc_auc(const std::vector<double>& scores, const std::vector<bool>& is_novel);

}  // namespace ganomaly
