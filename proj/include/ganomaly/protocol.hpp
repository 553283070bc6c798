#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ganomaly/config.hpp"
#include "ganomaly/trainer.hpp"

namespace ganomaly {

/// One leave-one-digit-out experiment: train on everything but the novel
/// digit, score the full test side with both variants.
struct DigitRunResult {
  int digit = 0;
  double auc_v1 = 0.0;
  double auc_v2 = 0.0;
  int64_t train_count = 0;
  int64_t test_count = 0;
  std::vector<EpochRecord> telemetry;
};

struct DigitRunHooks {
  std::function<void(const EpochRecord&)> on_epoch;
  std::function<void(const DigitRunResult&)> on_digit;
};

DigitRunResult run_digit_experiment(const std::vector<IdxPair>& train_pairs,
                                    const std::vector<IdxPair>& test_pairs, int novel_digit,
                                    const ArchConfig& arch, const TrainConfig& cfg,
                                    const DigitRunHooks& hooks = {});

/// Runs the protocol for each requested digit (all ten when empty).
std::vector<DigitRunResult> run_digit_protocol(const IdxDataConfig& data, const ArchConfig& arch,
                                               const TrainConfig& cfg, std::vector<int> digits,
                                               const DigitRunHooks& hooks = {});

/// digit,auc_v1,auc_v2,train_count,test_count rows.
void write_digit_results_csv(const std::vector<DigitRunResult>& rows, const std::string& path);

}  // namespace ganomaly
