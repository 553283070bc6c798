#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "ganomaly/datasets.hpp"
#include "ganomaly/rng.hpp"

namespace ganomaly {

namespace {

uint64_t mix_seed(uint64_t seed, uint64_t salt) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

void check_split_contract(const DatasetSplit& split) {
  std::vector<std::string> bad;
  for (const auto& s : split.train_normal)
    if (s.anomaly_label) bad.push_back(s.id);
  if (bad.empty()) return;
  std::string msg = "split contract violated: " + std::to_string(bad.size()) +
                    " anomalous sample(s) in train_normal:";
  for (size_t i = 0; i < bad.size() && i < 5; ++i) msg += " " + bad[i];
  if (bad.size() > 5) msg += " ...";
  throw DataError(msg);
}

DatasetSplit make_idx_protocol_split(const std::vector<IdxPair>& train,
                                     const std::vector<IdxPair>& test, int novel_digit,
                                     const PreprocessOptions& opts) {
  int64_t novel_seen = 0;
  for (const auto& p : train) novel_seen += p.label == novel_digit;
  for (const auto& p : test) novel_seen += p.label == novel_digit;
  if (novel_seen == 0) {
    throw DataError("novel digit " + std::to_string(novel_digit) +
                    " does not occur in the corpus");
  }

  DatasetSplit split;
  split.rule = {"idx-protocol", std::to_string(novel_digit),
                "train file minus digit " + std::to_string(novel_digit) +
                    " (those join the test side); test file kept whole"};
  for (size_t i = 0; i < train.size(); ++i) {
    const auto& p = train[i];
    LabeledSample s{"train-" + std::to_string(i), preprocess(p.image, opts),
                    p.label == novel_digit, std::to_string(p.label)};
    (s.anomaly_label ? split.test : split.train_normal).push_back(std::move(s));
  }
  for (size_t i = 0; i < test.size(); ++i) {
    const auto& p = test[i];
    split.test.push_back({"test-" + std::to_string(i), preprocess(p.image, opts),
                          p.label == novel_digit, std::to_string(p.label)});
  }
  return split;
}

DatasetSplit make_leave_one_out_split(const std::vector<IdxPair>& data, int novel_digit,
                                      double test_fraction, uint64_t seed,
                                      const PreprocessOptions& opts) {
  if (!(test_fraction >= 0.0 && test_fraction <= 1.0))
    throw ConfigError("test_fraction must be in [0, 1]");
  std::map<int, std::vector<size_t>> by_class;
  for (size_t i = 0; i < data.size(); ++i) by_class[data[i].label].push_back(i);
  if (by_class.find(novel_digit) == by_class.end())
    throw DataError("novel digit " + std::to_string(novel_digit) +
                    " does not occur in the corpus");

  DatasetSplit split;
  split.rule = {"leave-one-out", std::to_string(novel_digit),
                "digit " + std::to_string(novel_digit) + " all to test; " +
                    std::to_string(test_fraction) + " of each remaining class to test"};
  auto emit = [&](size_t idx, bool to_test) {
    const auto& p = data[idx];
    LabeledSample s{"sample-" + std::to_string(idx), preprocess(p.image, opts),
                    p.label == novel_digit, std::to_string(p.label)};
    (to_test ? split.test : split.train_normal).push_back(std::move(s));
  };
  for (auto& [label, idxs] : by_class) {
    if (label == novel_digit) {
      for (size_t i : idxs) emit(i, true);
      continue;
    }
    Rng rng(mix_seed(seed, static_cast<uint64_t>(label)));
    rng.shuffle(idxs);
    const size_t k = static_cast<size_t>(
        std::llround(test_fraction * static_cast<double>(idxs.size())));
    for (size_t j = 0; j < idxs.size(); ++j) emit(idxs[j], j < k);
  }
  return split;
}

}  // namespace ganomaly
