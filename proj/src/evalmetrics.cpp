#include "ganomaly/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ganomaly {

ConfusionMatrix confusion_at(const ScoreSet& scores, double tau) {
  if (scores.samples.empty()) throw DataError("confusion_at: empty score set");
  ConfusionMatrix cm;
  for (const auto& s : scores.samples) {
    const double v = s.has_scaled ? s.scaled : s.raw;
    const bool predicted_novel = v > tau;
    if (s.anomaly_label) {
      predicted_novel ? ++cm.tn : ++cm.fp;
    } else {
      predicted_novel ? ++cm.fn : ++cm.tp;
    }
  }
  return cm;
}

ConfusionMatrix flip_positive(const ConfusionMatrix& cm) { return {cm.tn, cm.fn, cm.fp, cm.tp}; }

DerivedMetrics derived_metrics(const ConfusionMatrix& cm) {
  DerivedMetrics m;
  const int64_t total = cm.total();
  if (total == 0) throw DataError("derived_metrics: empty confusion matrix");

  if (cm.tp + cm.fp == 0) {
    m.precision_defined = false;
  } else {
    m.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
  }
  if (cm.tp + cm.fn == 0) {
    m.sensitivity_defined = false;
  } else {
    m.sensitivity = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
  }
  if (!m.precision_defined || !m.sensitivity_defined || m.precision + m.sensitivity == 0.0) {
    m.f1_defined = false;
  } else {
    m.f1 = 2.0 * m.precision * m.sensitivity / (m.precision + m.sensitivity);
  }
  m.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(total);
  return m;
}

SweepResult sweep_threshold(const ScoreSet& scores, double lo, double hi, double step,
                            SweepCriterion criterion) {
  if (!(step > 0.0)) throw ConfigError("sweep: step must be > 0");
  if (hi < lo) throw ConfigError("sweep: hi must be >= lo");
  // Integer-stepped grid so accumulated float error cannot drop the endpoint.
  const int64_t count = static_cast<int64_t>(std::floor((hi - lo) / step + 1e-9)) + 1;

  SweepResult result;
  double best = -1.0;
  for (int64_t i = 0; i < count; ++i) {
    const double tau = lo + static_cast<double>(i) * step;
    SweepPoint p;
    p.tau = tau;
    p.cm = confusion_at(scores, tau);
    p.metrics = derived_metrics(p.cm);
    const double value =
        criterion == SweepCriterion::Accuracy
            ? p.metrics.accuracy
            : (p.metrics.f1_defined ? p.metrics.f1 : -1.0);
    result.points.push_back(p);
    // Strictly-greater keeps the lowest threshold on ties.
    if (value > best) {
      best = value;
      result.best_index = result.points.size() - 1;
    }
  }
  return result;
}

double roc_auc(const std::vector<double>& scores, const std::vector<bool>& is_novel) {
  if (scores.size() != is_novel.size()) throw ShapeError("roc_auc: size mismatch");
  const size_t n = scores.size();
  size_t pos = 0;
  for (bool b : is_novel) pos += b;
  const size_t neg = n - pos;
  if (pos == 0 || neg == 0)
    throw NumericError("roc_auc undefined: need both classes, got " + std::to_string(pos) +
                       " novel / " + std::to_string(neg) + " normal");

  // Mann-Whitney with midranks; ties contribute half.
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]]) ++j;
    // ranks i+1 .. j+1 share the midrank
    const double midrank = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (size_t k = i; k <= j; ++k)
      if (is_novel[idx[k]]) rank_sum_pos += midrank;
    i = j + 1;
  }
  const double p = static_cast<double>(pos), q = static_cast<double>(neg);
  return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * q);
}

double roc_auc(const ScoreSet& scores) {
  std::vector<double> v;
  std::vector<bool> labels;
  v.reserve(scores.samples.size());
  labels.reserve(scores.samples.size());
  for (const auto& s : scores.samples) {
    v.push_back(s.raw);
    labels.push_back(s.anomaly_label);
  }
  return roc_auc(v, labels);
}

}  // namespace ganomaly
