#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ganomaly/tensor.hpp"

namespace ganomaly {

/// Decoded 8-bit image, HWC interleaved. c is 1 or 3 (RGB order).
struct RawImage {
  int64_t h = 0;
  int64_t w = 0;
  int64_t c = 1;
  std::vector<uint8_t> pixels;

  uint8_t& px(int64_t y, int64_t x, int64_t ch) {
    return pixels[static_cast<size_t>((y * w + x) * c + ch)];
  }
  uint8_t px(int64_t y, int64_t x, int64_t ch) const {
    return pixels[static_cast<size_t>((y * w + x) * c + ch)];
  }
};

/// Preprocessed sample as the networks consume it.
struct LabeledSample {
  std::string id;
  Tensor<float> image;       // [c, s, s], values in [-1, 1]
  bool anomaly_label = false;
  std::string source_label;  // originating class (digit or shape/object name)
};

/// How a split was produced; carried along for logging and reports.
struct SplitRule {
  std::string kind;         // "idx-protocol", "leave-one-out", "manifest", "synthetic"
  std::string novel;        // novel class description
  std::string description;
};

/// The training contract: train_normal holds only anomaly_label == false
/// samples, everything else lives in test.
struct DatasetSplit {
  SplitRule rule;
  std::vector<LabeledSample> train_normal;
  std::vector<LabeledSample> test;
};

/// Throws DataError if any training sample carries an anomaly label. Called
/// by the trainer before touching the data.
void check_split_contract(const DatasetSplit& split);

// ---- preprocessing ----

struct PreprocessOptions {
  int64_t target_size = 32;
  int64_t channels = 1;
};

/// Channel conversion (luma for 3->1, replication for 1->3), bilinear resize
/// with pixel-center sampling, then linear map of 0..255 to [-1, 1].
Tensor<float> preprocess(const RawImage& img, const PreprocessOptions& opts);

/// Inverse of the value mapping only (for writing reconstructions): clamps to
/// [-1, 1] and maps back to 0..255.
RawImage to_raw_image(const Tensor<float>& chw);

// ---- IDX (two-file ubyte) datasets ----

struct IdxPair {
  RawImage image;
  int label = 0;
};

/// Reads an images/labels file pair (magics 0x803 and 0x801, big-endian
/// dimensions). Count mismatch between the files is a DataError, truncation
/// an IoError, a bad magic a FormatError.
std::vector<IdxPair> load_idx_pairs(const std::string& images_path,
                                    const std::string& labels_path);

/// Protocol for corpora that ship as separate train/test files: the novel
/// digit is removed from the train pool and appended to the test pool, so no
/// sample is lost and the training set contains no novel samples.
DatasetSplit make_idx_protocol_split(const std::vector<IdxPair>& train,
                                     const std::vector<IdxPair>& test, int novel_digit,
                                     const PreprocessOptions& opts);

/// Single-corpus variant: novel class goes entirely to test, each remaining
/// class contributes round(test_fraction * n) samples to test (chosen by a
/// seeded shuffle) and the rest to training.
DatasetSplit make_leave_one_out_split(const std::vector<IdxPair>& data, int novel_digit,
                                      double test_fraction, uint64_t seed,
                                      const PreprocessOptions& opts);

// ---- manifest-driven datasets (folder of images + JSON index) ----

struct ManifestEntry {
  std::string id;
  std::string file;                  // relative to the manifest directory
  std::vector<std::string> labels;   // object classes present in the image
  std::string split;                 // optional "train"/"test" pin, else empty
};

struct Manifest {
  std::string root;  // directory of the manifest file
  std::vector<ManifestEntry> entries;
};

Manifest parse_manifest(const std::string& path);

/// Planned (not yet materialized) sample assignment. cmd-prepare writes this
/// to disk; no image file is touched while planning.
struct PlannedSample {
  std::string id;
  std::string file;
  std::string source_label;
  bool anomaly_label = false;
};

struct SplitPlan {
  SplitRule rule;
  std::vector<PlannedSample> train_normal;
  std::vector<PlannedSample> test;
};

/// An image is anomalous iff its label set intersects novel_labels. Entries
/// pinned to "train" that carry a novel label are a DataError (all offenders
/// listed). Unpinned normals are assigned by seeded shuffle.
SplitPlan make_manifest_split(const Manifest& manifest,
                              const std::vector<std::string>& novel_labels, double test_fraction,
                              uint64_t seed);

void save_split_plan(const SplitPlan& plan, const std::string& path);
SplitPlan load_split_plan(const std::string& path);

/// Loads and preprocesses every planned file (relative to root). A missing or
/// undecodable file raises IoError naming the sample id.
DatasetSplit materialize_split(const SplitPlan& plan, const std::string& root,
                               const PreprocessOptions& opts);

}  // namespace ganomaly
