#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <string>

#include "ganomaly/io.hpp"
#include "ganomaly/synthetic.hpp"

using namespace ganomaly;
namespace fs = std::filesystem;

namespace {

SceneConfig small_cfg() {
  SceneConfig c;
  c.image_size = 16;
  c.channels = 3;
  c.seed = 11;
  c.normal_count = 12;
  c.abnormal_count = 4;
  c.test_normal_fraction = 0.5;
  return c;
}

bool samples_identical(const LabeledSample& a, const LabeledSample& b) {
  if (a.id != b.id || a.anomaly_label != b.anomaly_label || a.source_label != b.source_label)
    return false;
  if (a.image.shape() != b.image.shape()) return false;
  for (int64_t i = 0; i < a.image.numel(); ++i)
    if (a.image[i] != b.image[i]) return false;
  return true;
}

bool splits_identical(const DatasetSplit& a, const DatasetSplit& b) {
  if (a.train_normal.size() != b.train_normal.size() || a.test.size() != b.test.size())
    return false;
  for (size_t i = 0; i < a.train_normal.size(); ++i)
    if (!samples_identical(a.train_normal[i], b.train_normal[i])) return false;
  for (size_t i = 0; i < a.test.size(); ++i)
    if (!samples_identical(a.test[i], b.test[i])) return false;
  return true;
}

// Spatial variance averaged over channels. A flat-background scene scores
// near zero here even when its channels sit at different levels.
double pixel_variance(const Tensor<float>& img) {
  const int64_t c = img.dim(0), plane = img.dim(1) * img.dim(2);
  double total = 0.0;
  for (int64_t ch = 0; ch < c; ++ch) {
    const float* p = img.data() + ch * plane;
    double mean = 0.0;
    for (int64_t i = 0; i < plane; ++i) mean += p[i];
    mean /= static_cast<double>(plane);
    double var = 0.0;
    for (int64_t i = 0; i < plane; ++i) {
      const double d = p[i] - mean;
      var += d * d;
    }
    total += var / static_cast<double>(plane);
  }
  return total / static_cast<double>(c);
}

fs::path fresh_dir(const std::string& leaf) {
  auto p = fs::temp_directory_path() / "ganomaly_synthetic_tests" / leaf;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("the corpus is a pure function of its config") {
  SceneConfig cfg = small_cfg();
  DatasetSplit a = generate_scenes(cfg);
  DatasetSplit b = generate_scenes(cfg);
  CHECK(splits_identical(a, b));

  SceneConfig other = cfg;
  other.seed = 12;
  DatasetSplit c = generate_scenes(other);
  CHECK_FALSE(splits_identical(a, c));

  SUBCASE("scenes differ from one another within a corpus") {
    REQUIRE(a.train_normal.size() >= 2);
    bool differ = false;
    const auto& x = a.train_normal[0].image;
    const auto& y = a.train_normal[1].image;
    for (int64_t i = 0; i < x.numel() && !differ; ++i) differ = x[i] != y[i];
    CHECK(differ);
  }
}

TEST_CASE("counts, labels and the split assignment follow the config") {
  SceneConfig cfg = small_cfg();
  DatasetSplit split = generate_scenes(cfg);

  // 12 normals at fraction 0.5: 6 train, 6 test; all 4 abnormals in test.
  CHECK(split.train_normal.size() == 6);
  CHECK(split.test.size() == 10);
  CHECK_NOTHROW(check_split_contract(split));
  CHECK(split.rule.kind == "synthetic");
  CHECK(split.rule.novel == "cross");

  int64_t novel_in_test = 0;
  for (const auto& s : split.test) {
    CHECK(s.anomaly_label == (s.source_label == "cross"));
    novel_in_test += s.anomaly_label;
  }
  CHECK(novel_in_test == 4);

  for (const auto& s : split.train_normal) {
    CHECK(s.image.dim(0) == 3);
    CHECK(s.image.dim(1) == 16);
    CHECK(s.image.dim(2) == 16);
    for (int64_t i = 0; i < s.image.numel(); ++i) {
      CHECK(s.image[i] >= -1.0f);
      CHECK(s.image[i] <= 1.0f);
    }
  }

  SUBCASE("zero test fraction keeps every normal for training") {
    SceneConfig all_train = cfg;
    all_train.test_normal_fraction = 0.0;
    DatasetSplit s2 = generate_scenes(all_train);
    CHECK(s2.train_normal.size() == 12);
    CHECK(s2.test.size() == 4);
  }
  SUBCASE("single channel renders grayscale tensors") {
    SceneConfig gray = cfg;
    gray.channels = 1;
    DatasetSplit s3 = generate_scenes(gray);
    CHECK(s3.train_normal[0].image.dim(0) == 1);
  }
}

TEST_CASE("outlier scenes land in test with the intended characteristics") {
  SceneConfig cfg = small_cfg();
  cfg.hard_normal_outliers = 3;
  cfg.masked_novel_outliers = 2;
  DatasetSplit split = generate_scenes(cfg);

  CHECK(split.train_normal.size() == 6);
  CHECK(split.test.size() == 10 + 3 + 2);

  std::vector<const LabeledSample*> noise, masked;
  for (const auto& s : split.test) {
    if (s.source_label == "noise") noise.push_back(&s);
  }
  // masked novels are the trailing abnormal scenes by construction
  for (size_t i = split.test.size() - 2; i < split.test.size(); ++i)
    masked.push_back(&split.test[i]);

  REQUIRE(noise.size() == 3);
  for (const auto* s : noise) CHECK_FALSE(s->anomaly_label);
  for (const auto* s : masked) {
    CHECK(s->anomaly_label);
    CHECK(s->source_label == "cross");
  }

  // Noise scenes carry far more pixel variance than the flat masked scenes,
  // which is what pushes the two raw score populations apart.
  double min_noise_var = 1e9, max_masked_var = 0.0;
  for (const auto* s : noise) min_noise_var = std::min(min_noise_var, pixel_variance(s->image));
  for (const auto* s : masked) max_masked_var = std::max(max_masked_var, pixel_variance(s->image));
  CHECK(min_noise_var > 10.0 * max_masked_var);
}

TEST_CASE("subtle novel objects occupy a small pixel footprint") {
  // Render the same abnormal scene index with and without subtle_novel; the
  // novel object must shrink, everything else stays.
  SceneConfig big = small_cfg();
  big.image_size = 32;
  big.abnormal_count = 6;
  SceneConfig small = big;
  small.subtle_novel = true;

  DatasetSplit bs = generate_scenes(big);
  DatasetSplit ss = generate_scenes(small);
  REQUIRE(bs.test.size() == ss.test.size());

  int64_t changed_total = 0, shrunk = 0;
  for (size_t i = 0; i < bs.test.size(); ++i) {
    if (!bs.test[i].anomaly_label) continue;
    const auto& a = bs.test[i].image;
    const auto& b = ss.test[i].image;
    int64_t diff = 0;
    for (int64_t j = 0; j < a.numel(); ++j) diff += a[j] != b[j];
    changed_total += diff;
    if (diff > 0) ++shrunk;
  }
  // the two configs draw the same scene up to the novel object's radius
  CHECK(shrunk > 0);
  CHECK(changed_total > 0);
}

TEST_CASE("config validation lists every problem at once") {
  SceneConfig bad = small_cfg();
  bad.image_size = 12;
  bad.channels = 2;
  bad.normal_count = 1;
  bad.normal_shapes = {"circle", "hexagon", "cross"};
  bad.novel_shape = "cross";  // also listed as normal
  bad.test_normal_fraction = 1.0;
  bad.min_objects = 3;
  bad.max_objects = 1;
  bad.background_noise = 2.0;
  bad.hard_normal_outliers = -1;
  try {
    bad.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("image_size") != std::string::npos);
    CHECK(msg.find("channels") != std::string::npos);
    CHECK(msg.find("normal_count") != std::string::npos);
    CHECK(msg.find("hexagon") != std::string::npos);
    CHECK(msg.find("also listed as normal") != std::string::npos);
    CHECK(msg.find("test_normal_fraction") != std::string::npos);
    CHECK(msg.find("object count range") != std::string::npos);
    CHECK(msg.find("background_noise") != std::string::npos);
    CHECK(msg.find("outlier counts") != std::string::npos);
  }
  CHECK_NOTHROW(small_cfg().validate());
  CHECK_THROWS_AS(generate_scenes(bad), ConfigError);
}

TEST_CASE("exported scenes reproduce the in-memory corpus through the manifest path") {
  SceneConfig cfg = small_cfg();
  cfg.hard_normal_outliers = 1;
  cfg.masked_novel_outliers = 1;
  const auto dir = fresh_dir("export");

  const std::string manifest_path = export_scenes(cfg, dir.string());
  CHECK(fs::exists(manifest_path));
  CHECK(fs::exists(dir / "images" / "scene-0.png"));

  Manifest m = parse_manifest(manifest_path);
  CHECK(m.entries.size() == 12 + 4 + 1 + 1);

  // Every entry is pinned, so the fraction below is irrelevant.
  SplitPlan plan = make_manifest_split(m, {cfg.novel_shape}, 0.0, 1);
  DatasetSplit from_disk = materialize_split(plan, m.root, {cfg.image_size, cfg.channels});
  DatasetSplit in_memory = generate_scenes(cfg);

  CHECK(from_disk.train_normal.size() == in_memory.train_normal.size());
  CHECK(from_disk.test.size() == in_memory.test.size());

  // PNG is lossless and preprocessing is deterministic, so each sample must
  // come back bit-identical under its id.
  std::map<std::string, const LabeledSample*> by_id;
  for (const auto& s : in_memory.train_normal) by_id[s.id] = &s;
  for (const auto& s : in_memory.test) by_id[s.id] = &s;

  auto check_side = [&](const std::vector<LabeledSample>& side) {
    for (const auto& s : side) {
      REQUIRE(by_id.count(s.id) == 1);
      const LabeledSample& ref = *by_id[s.id];
      CHECK(s.anomaly_label == ref.anomaly_label);
      REQUIRE(s.image.shape() == ref.image.shape());
      bool equal = true;
      for (int64_t i = 0; i < s.image.numel() && equal; ++i) equal = s.image[i] == ref.image[i];
      CHECK(equal);
    }
  };
  check_side(from_disk.train_normal);
  check_side(from_disk.test);

  SUBCASE("train/test pins in the manifest match the in-memory assignment") {
    std::set<std::string> mem_train;
    for (const auto& s : in_memory.train_normal) mem_train.insert(s.id);
    for (const auto& s : from_disk.train_normal) CHECK(mem_train.count(s.id) == 1);
  }
}
