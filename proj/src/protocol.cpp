#include "ganomaly/protocol.hpp"

#include <cstdio>
#include <fstream>

#include "ganomaly/errors.hpp"
#include "ganomaly/evalmetrics.hpp"
#include "ganomaly/scoring.hpp"

namespace ganomaly {

DigitRunResult run_digit_experiment(const std::vector<IdxPair>& train_pairs,
                                    const std::vector<IdxPair>& test_pairs, int novel_digit,
                                    const ArchConfig& arch, const TrainConfig& cfg,
                                    const DigitRunHooks& hooks) {
  PreprocessOptions opts{arch.input_size, arch.channels};
  DatasetSplit split = make_idx_protocol_split(train_pairs, test_pairs, novel_digit, opts);

  RunOptions run;
  run.on_epoch = hooks.on_epoch;
  TrainOutput out = train_model(arch, cfg, split, run);

  DigitRunResult res;
  res.digit = novel_digit;
  res.train_count = static_cast<int64_t>(split.train_normal.size());
  res.test_count = static_cast<int64_t>(split.test.size());
  res.telemetry = std::move(out.telemetry);

  ScoreSet s1 = score_samples(out.bundle, split.test, ScoreVariant::V1,
                              cfg.squared_latent_norms, cfg.batch_size);
  ScoreSet s2 = score_samples(out.bundle, split.test, ScoreVariant::V2,
                              cfg.squared_latent_norms, cfg.batch_size);
  res.auc_v1 = roc_auc(s1);
  res.auc_v2 = roc_auc(s2);
  return res;
}

std::vector<DigitRunResult> run_digit_protocol(const IdxDataConfig& data, const ArchConfig& arch,
                                               const TrainConfig& cfg, std::vector<int> digits,
                                               const DigitRunHooks& hooks) {
  if (digits.empty()) {
    for (int d = 0; d <= 9; ++d) digits.push_back(d);
  }
  for (int d : digits) {
    if (d < 0 || d > 9) throw ConfigError("digit out of range: " + std::to_string(d));
  }

  // The pairs are shared across all runs; loading them once matters when all
  // ten experiments run back to back.
  auto train_pairs = load_idx_pairs(data.train_images, data.train_labels);
  auto test_pairs = load_idx_pairs(data.test_images, data.test_labels);

  std::vector<DigitRunResult> results;
  for (int d : digits) {
    DigitRunResult r = run_digit_experiment(train_pairs, test_pairs, d, arch, cfg, hooks);
    if (hooks.on_digit) hooks.on_digit(r);
    results.push_back(std::move(r));
  }
  return results;
}

void write_digit_results_csv(const std::vector<DigitRunResult>& rows, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write " + path);
  f << "digit,auc_v1,auc_v2,train_count,test_count\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%lld,%lld\n", r.digit, r.auc_v1, r.auc_v2,
                  static_cast<long long>(r.train_count), static_cast<long long>(r.test_count));
    f << buf;
  }
  if (!f) throw IoError("short write to " + path);
}

}  // namespace ganomaly
