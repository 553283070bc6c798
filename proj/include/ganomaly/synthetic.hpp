#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ganomaly/datasets.hpp"

namespace ganomaly {

/// Procedural scene corpus: colored geometric objects on a gradient
/// background with pixel noise. Entirely seeded, so two runs with the same
/// config produce byte-identical corpora.
struct SceneConfig {
  int64_t image_size = 32;
  int64_t channels = 3;
  uint64_t seed = 7;

  int64_t normal_count = 400;     // scenes containing only normal shapes
  int64_t abnormal_count = 100;   // scenes additionally containing the novel shape
  double test_normal_fraction = 0.5;

  std::vector<std::string> normal_shapes = {"circle", "square", "stripe"};
  std::string novel_shape = "cross";
  int64_t min_objects = 1;
  int64_t max_objects = 3;

  /// Novel object capped to roughly 2% of the pixels instead of the normal
  /// object size range, making the anomaly easy to miss in raw scores.
  bool subtle_novel = false;

  double background_noise = 0.04;  // uniform per-pixel noise amplitude in [0,1] units

  /// Extra *test* normals rendered as pure high-amplitude noise. They
  /// reconstruct terribly and stretch the top of the normal score range.
  int64_t hard_normal_outliers = 0;

  /// Extra abnormal scenes whose novel object is drawn with the background
  /// color on a flat background: still labeled novel, but nearly free to
  /// reconstruct, which drags the bottom of the abnormal score range down.
  int64_t masked_novel_outliers = 0;

  void validate() const;  // throws ConfigError
};

/// Renders the corpus into a ready DatasetSplit (images in memory).
DatasetSplit generate_scenes(const SceneConfig& cfg);

/// Renders the corpus to PNG files under dir plus a manifest.json compatible
/// with parse_manifest / make_manifest_split. Returns the manifest path.
std::string export_scenes(const SceneConfig& cfg, const std::string& dir);

}  // namespace ganomaly
