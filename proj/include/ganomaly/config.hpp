#pragma once

#include <string>
#include <vector>

#include "ganomaly/datasets.hpp"
#include "ganomaly/model.hpp"
#include "ganomaly/synthetic.hpp"
#include "ganomaly/trainer.hpp"

namespace ganomaly {

// JSON run configuration. Unknown keys anywhere are rejected, and validation
// reports *all* problems (unknown keys, bad values, missing input files) in
// one ConfigError rather than stopping at the first.

struct IdxDataConfig {
  std::string train_images, train_labels, test_images, test_labels;
  int novel_digit = 2;
};

struct ManifestDataConfig {
  std::string path;
  std::vector<std::string> novel_labels;
  double test_fraction = 0.5;
};

struct SplitPlanDataConfig {
  std::string path;  // split plan json written by `prepare`
  std::string root;  // image root directory
};

struct DataConfig {
  std::string kind = "synthetic";  // idx | manifest | synthetic | split-plan
  uint64_t split_seed = 1234;
  IdxDataConfig idx;
  ManifestDataConfig manifest;
  SceneConfig synthetic;
  SplitPlanDataConfig split_plan;
};

struct SweepConfig {
  bool enabled = false;
  double lo = 0.4;
  double hi = 0.55;
  double step = 0.01;
  std::string criterion = "accuracy";  // accuracy | f1
};

struct ScoringConfig {
  std::string variant = "v1";    // v1 | v2
  std::string scaling = "global";  // none | global | partitioned | reference-range
  double threshold = 0.5;
  SweepConfig sweep;
  double ref_min = 0.0;
  double ref_max = 1.0;
};

struct AppConfig {
  ArchConfig arch;
  TrainConfig train;
  DataConfig data;
  ScoringConfig scoring;
  std::string output_dir = "runs";
};

/// Parses and validates; relative paths are resolved against the config
/// file's directory.
AppConfig load_config(const std::string& path);

/// Same, from a JSON string (base_dir anchors relative paths). Used by tests.
AppConfig parse_config(const std::string& json_text, const std::string& base_dir);

/// Canonical serialization of the resolved config (stable key order).
std::string dump_config(const AppConfig& cfg);

/// FNV-1a over the canonical dump, 8 hex chars; names run directories.
std::string config_hash(const AppConfig& cfg);

/// Materializes the dataset the config describes.
DatasetSplit load_dataset(const AppConfig& cfg);

}  // namespace ganomaly
