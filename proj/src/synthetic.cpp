#include "ganomaly/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "ganomaly/io.hpp"
#include "ganomaly/rng.hpp"

using nlohmann::json;

namespace ganomaly {

namespace {

const std::set<std::string> kKnownShapes = {"circle", "square", "triangle",
                                            "cross",  "stripe", "dot"};

uint64_t mix_seed(uint64_t seed, uint64_t salt) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct Color {
  double rgb[3];
};

Color random_color(Rng& rng, int64_t channels) {
  Color c{};
  c.rgb[0] = static_cast<double>(rng.uniform_int(20, 235));
  if (channels == 3) {
    c.rgb[1] = static_cast<double>(rng.uniform_int(20, 235));
    c.rgb[2] = static_cast<double>(rng.uniform_int(20, 235));
  } else {
    c.rgb[1] = c.rgb[2] = c.rgb[0];
  }
  return c;
}

bool inside_shape(const std::string& kind, double dx, double dy, double r) {
  if (kind == "circle") return dx * dx + dy * dy <= r * r;
  if (kind == "dot") return dx * dx + dy * dy <= r * r;
  if (kind == "square") return std::abs(dx) <= r && std::abs(dy) <= r;
  if (kind == "triangle") {
    // Upward triangle inscribed in the radius-r box.
    if (dy < -r || dy > r) return false;
    const double half = (dy + r) / 2.0;  // width grows linearly towards the base
    return std::abs(dx) <= half;
  }
  if (kind == "cross") {
    const double arm = std::max(1.0, r / 3.0);
    return (std::abs(dx) <= arm && std::abs(dy) <= r) ||
           (std::abs(dy) <= arm && std::abs(dx) <= r);
  }
  if (kind == "stripe") {
    const double half = std::max(1.0, r / 3.0);
    return std::abs(dy) <= half && std::abs(dx) <= 1.6 * r;
  }
  return false;
}

void draw_shape(RawImage& img, const std::string& kind, double cx, double cy, double r,
                const Color& col) {
  const int64_t y0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(cy - 2 * r)));
  const int64_t y1 = std::min<int64_t>(img.h - 1, static_cast<int64_t>(std::ceil(cy + 2 * r)));
  const int64_t x0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(cx - 2 * r)));
  const int64_t x1 = std::min<int64_t>(img.w - 1, static_cast<int64_t>(std::ceil(cx + 2 * r)));
  for (int64_t y = y0; y <= y1; ++y) {
    for (int64_t x = x0; x <= x1; ++x) {
      if (!inside_shape(kind, static_cast<double>(x) - cx, static_cast<double>(y) - cy, r)) continue;
      for (int64_t ch = 0; ch < img.c; ++ch)
        img.px(y, x, ch) = static_cast<uint8_t>(std::clamp(col.rgb[ch], 0.0, 255.0));
    }
  }
}

enum class Background { Gradient, Noise, Flat };

// All randomness is drawn in a fixed order from the per-scene stream, so a
// scene is a pure function of (config, scene index).
RawImage render_background(Rng& rng, const SceneConfig& cfg, Background mode, Color* out_c0,
                           Color* out_c1 = nullptr) {
  RawImage img;
  img.h = img.w = cfg.image_size;
  img.c = cfg.channels;
  img.pixels.resize(static_cast<size_t>(img.h * img.w * img.c));

  if (mode == Background::Noise) {
    for (auto& p : img.pixels) p = static_cast<uint8_t>(rng.uniform_int(0, 255));
    if (out_c0) *out_c0 = Color{{128, 128, 128}};
    if (out_c1) *out_c1 = Color{{128, 128, 128}};
    return img;
  }

  const Color c0 = random_color(rng, cfg.channels);
  Color c1 = c0;
  if (mode == Background::Gradient) {
    // A gentle darkening ramp keeps the background textured while the scene
    // still reads as one surface; wildly different endpoints would make the
    // background the dominant object in every image.
    const double ramp = rng.uniform(32.0, 64.0);
    for (int ch = 0; ch < 3; ++ch) c1.rgb[ch] = std::clamp(c0.rgb[ch] + ramp, 20.0, 235.0);
  }
  const double amp = mode == Background::Flat ? 0.0 : cfg.background_noise * 255.0;
  for (int64_t y = 0; y < img.h; ++y) {
    const double t = img.h > 1 ? static_cast<double>(y) / static_cast<double>(img.h - 1) : 0.0;
    for (int64_t x = 0; x < img.w; ++x) {
      for (int64_t ch = 0; ch < img.c; ++ch) {
        double v = (1.0 - t) * c0.rgb[ch] + t * c1.rgb[ch];
        if (amp > 0.0) v += rng.uniform(-amp, amp);
        img.px(y, x, ch) = static_cast<uint8_t>(std::clamp(v, 0.0, 255.0));
      }
    }
  }
  if (out_c0) *out_c0 = c0;
  if (out_c1) *out_c1 = c1;
  return img;
}

struct Scene {
  RawImage image;
  bool anomaly = false;
  std::string source_label;
  std::vector<std::string> labels;
};

enum class SceneKind { Normal, Abnormal, HardNormal, MaskedNovel };

Scene render_scene(const SceneConfig& cfg, SceneKind kind, uint64_t index) {
  Rng rng(mix_seed(cfg.seed, index));
  Scene scene;

  if (kind == SceneKind::HardNormal) {
    scene.image = render_background(rng, cfg, Background::Noise, nullptr);
    scene.source_label = "noise";
    scene.labels = {"noise"};
    return scene;
  }

  if (kind == SceneKind::MaskedNovel) {
    Color c0, c1;
    scene.image = render_background(rng, cfg, Background::Gradient, &c0, &c1);
    // The novel object is drawn in the background color sampled at its own
    // row: present by construction (and by label), but camouflaged against an
    // otherwise ordinary scene.
    const double s = static_cast<double>(cfg.image_size);
    const double r = rng.uniform(0.06, 0.09) * s;
    const double cx = rng.uniform(0.25 * s, 0.75 * s);
    const double cy = rng.uniform(0.25 * s, 0.75 * s);
    const double t = s > 1.0 ? cy / (s - 1.0) : 0.0;
    Color local{};
    for (int ch = 0; ch < 3; ++ch) local.rgb[ch] = (1.0 - t) * c0.rgb[ch] + t * c1.rgb[ch];
    draw_shape(scene.image, cfg.novel_shape, cx, cy, r, local);
    scene.anomaly = true;
    scene.source_label = cfg.novel_shape;
    scene.labels = {cfg.novel_shape};
    return scene;
  }

  Color bg0, bg1;
  scene.image = render_background(rng, cfg, Background::Gradient, &bg0, &bg1);
  const double s = static_cast<double>(cfg.image_size);
  const int64_t count = rng.uniform_int(cfg.min_objects, cfg.max_objects);
  for (int64_t i = 0; i < count; ++i) {
    const auto& shape =
        cfg.normal_shapes[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(cfg.normal_shapes.size()) - 1))];
    const Color col = random_color(rng, cfg.channels);
    const double r = rng.uniform(s / 8.0, s / 4.0);
    const double cx = rng.uniform(0.2 * s, 0.8 * s);
    const double cy = rng.uniform(0.2 * s, 0.8 * s);
    draw_shape(scene.image, shape, cx, cy, r, col);
    if (i == 0) scene.source_label = shape;
    scene.labels.push_back(shape);
  }
  if (scene.labels.empty()) {
    scene.source_label = "background";
    scene.labels.push_back("background");
  }

  if (kind == SceneKind::Abnormal) {
    // Subtle novels keep a narrow size band and a color picked to contrast
    // the local background: the footprint stays tiny, while the consistent
    // contrast keeps their scores clustered instead of trailing down into the
    // normal range. The color draw happens either way so both modes place the
    // object identically.
    const Color sampled = random_color(rng, cfg.channels);
    const double r =
        cfg.subtle_novel ? rng.uniform(0.085, 0.09) * s : rng.uniform(s / 8.0, s / 4.0);
    const double cx = rng.uniform(0.2 * s, 0.8 * s);
    const double cy = rng.uniform(0.2 * s, 0.8 * s);
    Color col = sampled;
    if (cfg.subtle_novel) {
      const double t = s > 1.0 ? cy / (s - 1.0) : 0.0;
      double lum = 0.0;
      for (int ch = 0; ch < 3; ++ch) lum += (1.0 - t) * bg0.rgb[ch] + t * bg1.rgb[ch];
      lum /= 3.0;
      const double v = lum > 127.0 ? 8.0 : 235.0;
      col = Color{{v, v, v}};
    }
    draw_shape(scene.image, cfg.novel_shape, cx, cy, std::max(1.5, r), col);
    scene.anomaly = true;
    scene.source_label = cfg.novel_shape;
    scene.labels.push_back(cfg.novel_shape);
  }
  return scene;
}

std::vector<std::pair<Scene, bool>> render_corpus(const SceneConfig& cfg) {
  cfg.validate();
  std::vector<std::pair<Scene, bool>> scenes;  // (scene, goes_to_test)
  const int64_t test_normals =
      std::llround(cfg.test_normal_fraction * static_cast<double>(cfg.normal_count));
  uint64_t index = 0;
  for (int64_t i = 0; i < cfg.normal_count; ++i, ++index) {
    const bool to_test = i >= cfg.normal_count - test_normals;
    scenes.push_back({render_scene(cfg, SceneKind::Normal, index), to_test});
  }
  for (int64_t i = 0; i < cfg.abnormal_count; ++i, ++index)
    scenes.push_back({render_scene(cfg, SceneKind::Abnormal, index), true});
  for (int64_t i = 0; i < cfg.hard_normal_outliers; ++i, ++index)
    scenes.push_back({render_scene(cfg, SceneKind::HardNormal, index), true});
  for (int64_t i = 0; i < cfg.masked_novel_outliers; ++i, ++index)
    scenes.push_back({render_scene(cfg, SceneKind::MaskedNovel, index), true});
  return scenes;
}

SplitRule scene_rule(const SceneConfig& cfg) {
  return {"synthetic", cfg.novel_shape,
          "procedural scenes, novel shape '" + cfg.novel_shape + "' only in test"};
}

}  // namespace

void SceneConfig::validate() const {
  std::vector<std::string> problems;
  if (image_size < 8 || (image_size & (image_size - 1)) != 0)
    problems.push_back("synthetic.image_size must be a power of two >= 8");
  if (channels != 1 && channels != 3) problems.push_back("synthetic.channels must be 1 or 3");
  if (normal_count < 2) problems.push_back("synthetic.normal_count must be >= 2");
  if (abnormal_count < 0) problems.push_back("synthetic.abnormal_count must be >= 0");
  if (!(test_normal_fraction >= 0.0 && test_normal_fraction < 1.0))
    problems.push_back("synthetic.test_normal_fraction must be in [0, 1)");
  if (normal_shapes.empty()) problems.push_back("synthetic.normal_shapes must not be empty");
  for (const auto& sh : normal_shapes)
    if (!kKnownShapes.count(sh)) problems.push_back("unknown shape \"" + sh + "\"");
  if (!kKnownShapes.count(novel_shape))
    problems.push_back("unknown novel shape \"" + novel_shape + "\"");
  for (const auto& sh : normal_shapes)
    if (sh == novel_shape)
      problems.push_back("novel shape \"" + novel_shape + "\" also listed as normal");
  if (min_objects < 0 || max_objects < min_objects)
    problems.push_back("synthetic object count range is invalid");
  if (!(background_noise >= 0.0 && background_noise <= 1.0))
    problems.push_back("synthetic.background_noise must be in [0, 1]");
  if (hard_normal_outliers < 0 || masked_novel_outliers < 0)
    problems.push_back("synthetic outlier counts must be >= 0");
  if (!problems.empty()) {
    std::string msg = "invalid synthetic config:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
}

DatasetSplit generate_scenes(const SceneConfig& cfg) {
  DatasetSplit split;
  split.rule = scene_rule(cfg);
  const PreprocessOptions opts{cfg.image_size, cfg.channels};
  uint64_t index = 0;
  for (auto& [scene, to_test] : render_corpus(cfg)) {
    LabeledSample s{"scene-" + std::to_string(index++), preprocess(scene.image, opts),
                    scene.anomaly, scene.source_label};
    (to_test ? split.test : split.train_normal).push_back(std::move(s));
  }
  return split;
}

std::string export_scenes(const SceneConfig& cfg, const std::string& dir) {
  io::make_dirs(dir);
  io::make_dirs(dir + "/images");
  json manifest{{"version", 1}, {"images", json::array()}};
  uint64_t index = 0;
  for (auto& [scene, to_test] : render_corpus(cfg)) {
    const std::string id = "scene-" + std::to_string(index++);
    const std::string file = "images/" + id + ".png";
    io::save_image(scene.image, dir + "/" + file);
    manifest["images"].push_back({{"id", id},
                                  {"file", file},
                                  {"labels", scene.labels},
                                  {"split", to_test ? "test" : "train"}});
  }
  const std::string path = dir + "/manifest.json";
  io::write_text_file(path, manifest.dump(2) + "\n");
  return path;
}

}  // namespace ganomaly
