#include "ganomaly/config.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ganomaly/errors.hpp"
#include "ganomaly/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ganomaly {

namespace {

// Collects every problem found while walking the config so the user gets one
// complete report instead of a fix-one-rerun loop.
struct Problems {
  std::vector<std::string> items;

  void add(const std::string& msg) { items.push_back(msg); }

  void raise_if_any() const {
    if (items.empty()) return;
    std::ostringstream os;
    os << "invalid config (" << items.size() << " problem" << (items.size() == 1 ? "" : "s")
       << "):";
    for (const auto& p : items) os << "\n  - " << p;
    throw ConfigError(os.str());
  }
};

void check_keys(const json& obj, const std::string& where,
                const std::set<std::string>& allowed, Problems& pr) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) pr.add(where + ": unknown key \"" + it.key() + "\"");
  }
}

template <typename T>
bool fetch(const json& obj, const std::string& where, const char* key, T& out,
           const char* type_name, Problems& pr) {
  auto it = obj.find(key);
  if (it == obj.end()) return false;
  try {
    out = it->template get<T>();
    return true;
  } catch (const json::exception&) {
    pr.add(where + "." + key + ": expected " + type_name);
    return false;
  }
}

bool fetch_num(const json& obj, const std::string& where, const char* key, double& out,
               Problems& pr) {
  auto it = obj.find(key);
  if (it == obj.end()) return false;
  if (!it->is_number()) {
    pr.add(where + "." + key + ": expected number");
    return false;
  }
  out = it->get<double>();
  return true;
}

bool fetch_int(const json& obj, const std::string& where, const char* key, int64_t& out,
               Problems& pr) {
  auto it = obj.find(key);
  if (it == obj.end()) return false;
  if (!it->is_number_integer()) {
    pr.add(where + "." + key + ": expected integer");
    return false;
  }
  out = it->get<int64_t>();
  return true;
}

std::string resolve_path(const std::string& p, const std::string& base_dir) {
  if (p.empty() || base_dir.empty()) return p;
  fs::path fp(p);
  if (fp.is_absolute()) return p;
  return (fs::path(base_dir) / fp).lexically_normal().string();
}

void parse_arch(const json& j, ArchConfig& a, Problems& pr) {
  check_keys(j, "arch", {"input_size", "channels", "latent_dim", "base_width"}, pr);
  fetch_int(j, "arch", "input_size", a.input_size, pr);
  fetch_int(j, "arch", "channels", a.channels, pr);
  fetch_int(j, "arch", "latent_dim", a.latent_dim, pr);
  fetch_int(j, "arch", "base_width", a.base_width, pr);
}

void parse_train(const json& j, TrainConfig& t, Problems& pr) {
  check_keys(j, "train",
             {"epochs", "batch_size", "learning_rate", "beta1", "beta2", "weights", "seed",
              "squared_latent_norms", "reinit_d_threshold", "checkpoint_every"},
             pr);
  fetch_int(j, "train", "epochs", t.epochs, pr);
  fetch_int(j, "train", "batch_size", t.batch_size, pr);
  fetch_num(j, "train", "learning_rate", t.learning_rate, pr);
  fetch_num(j, "train", "beta1", t.beta1, pr);
  fetch_num(j, "train", "beta2", t.beta2, pr);
  fetch(j, "train", "seed", t.seed, "unsigned integer", pr);
  fetch(j, "train", "squared_latent_norms", t.squared_latent_norms, "boolean", pr);
  fetch_num(j, "train", "reinit_d_threshold", t.reinit_d_threshold, pr);
  fetch_int(j, "train", "checkpoint_every", t.checkpoint_every, pr);
  if (auto it = j.find("weights"); it != j.end()) {
    if (!it->is_object()) {
      pr.add("train.weights: expected object");
    } else {
      check_keys(*it, "train.weights", {"adv", "con", "enc"}, pr);
      fetch_num(*it, "train.weights", "adv", t.weights.adv, pr);
      fetch_num(*it, "train.weights", "con", t.weights.con, pr);
      fetch_num(*it, "train.weights", "enc", t.weights.enc, pr);
    }
  }
}

void parse_synthetic(const json& j, SceneConfig& s, Problems& pr) {
  check_keys(j, "data.synthetic",
             {"image_size", "channels", "seed", "normal_count", "abnormal_count",
              "test_normal_fraction", "normal_shapes", "novel_shape", "min_objects",
              "max_objects", "subtle_novel", "background_noise", "hard_normal_outliers",
              "masked_novel_outliers"},
             pr);
  fetch_int(j, "data.synthetic", "image_size", s.image_size, pr);
  fetch_int(j, "data.synthetic", "channels", s.channels, pr);
  fetch(j, "data.synthetic", "seed", s.seed, "unsigned integer", pr);
  fetch_int(j, "data.synthetic", "normal_count", s.normal_count, pr);
  fetch_int(j, "data.synthetic", "abnormal_count", s.abnormal_count, pr);
  fetch_num(j, "data.synthetic", "test_normal_fraction", s.test_normal_fraction, pr);
  fetch(j, "data.synthetic", "normal_shapes", s.normal_shapes, "array of strings", pr);
  fetch(j, "data.synthetic", "novel_shape", s.novel_shape, "string", pr);
  fetch_int(j, "data.synthetic", "min_objects", s.min_objects, pr);
  fetch_int(j, "data.synthetic", "max_objects", s.max_objects, pr);
  fetch(j, "data.synthetic", "subtle_novel", s.subtle_novel, "boolean", pr);
  fetch_num(j, "data.synthetic", "background_noise", s.background_noise, pr);
  fetch_int(j, "data.synthetic", "hard_normal_outliers", s.hard_normal_outliers, pr);
  fetch_int(j, "data.synthetic", "masked_novel_outliers", s.masked_novel_outliers, pr);
}

void parse_data(const json& j, DataConfig& d, const std::string& base_dir, Problems& pr) {
  check_keys(j, "data", {"kind", "split_seed", "idx", "manifest", "synthetic", "split_plan"},
             pr);
  fetch(j, "data", "kind", d.kind, "string", pr);
  fetch(j, "data", "split_seed", d.split_seed, "unsigned integer", pr);
  if (auto it = j.find("idx"); it != j.end() && it->is_object()) {
    check_keys(*it, "data.idx",
               {"train_images", "train_labels", "test_images", "test_labels", "novel_digit"},
               pr);
    fetch(*it, "data.idx", "train_images", d.idx.train_images, "string", pr);
    fetch(*it, "data.idx", "train_labels", d.idx.train_labels, "string", pr);
    fetch(*it, "data.idx", "test_images", d.idx.test_images, "string", pr);
    fetch(*it, "data.idx", "test_labels", d.idx.test_labels, "string", pr);
    fetch(*it, "data.idx", "novel_digit", d.idx.novel_digit, "integer", pr);
    d.idx.train_images = resolve_path(d.idx.train_images, base_dir);
    d.idx.train_labels = resolve_path(d.idx.train_labels, base_dir);
    d.idx.test_images = resolve_path(d.idx.test_images, base_dir);
    d.idx.test_labels = resolve_path(d.idx.test_labels, base_dir);
  } else if (it != j.end()) {
    pr.add("data.idx: expected object");
  }
  if (auto it = j.find("manifest"); it != j.end() && it->is_object()) {
    check_keys(*it, "data.manifest", {"path", "novel_labels", "test_fraction"}, pr);
    fetch(*it, "data.manifest", "path", d.manifest.path, "string", pr);
    fetch(*it, "data.manifest", "novel_labels", d.manifest.novel_labels, "array of strings",
          pr);
    fetch_num(*it, "data.manifest", "test_fraction", d.manifest.test_fraction, pr);
    d.manifest.path = resolve_path(d.manifest.path, base_dir);
  } else if (it != j.end()) {
    pr.add("data.manifest: expected object");
  }
  if (auto it = j.find("synthetic"); it != j.end() && it->is_object()) {
    parse_synthetic(*it, d.synthetic, pr);
  } else if (it != j.end()) {
    pr.add("data.synthetic: expected object");
  }
  if (auto it = j.find("split_plan"); it != j.end() && it->is_object()) {
    check_keys(*it, "data.split_plan", {"path", "root"}, pr);
    fetch(*it, "data.split_plan", "path", d.split_plan.path, "string", pr);
    fetch(*it, "data.split_plan", "root", d.split_plan.root, "string", pr);
    d.split_plan.path = resolve_path(d.split_plan.path, base_dir);
    d.split_plan.root = resolve_path(d.split_plan.root, base_dir);
  } else if (it != j.end()) {
    pr.add("data.split_plan: expected object");
  }
}

void parse_scoring(const json& j, ScoringConfig& s, Problems& pr) {
  check_keys(j, "scoring", {"variant", "scaling", "threshold", "sweep", "ref_min", "ref_max"},
             pr);
  fetch(j, "scoring", "variant", s.variant, "string", pr);
  fetch(j, "scoring", "scaling", s.scaling, "string", pr);
  fetch_num(j, "scoring", "threshold", s.threshold, pr);
  fetch_num(j, "scoring", "ref_min", s.ref_min, pr);
  fetch_num(j, "scoring", "ref_max", s.ref_max, pr);
  if (auto it = j.find("sweep"); it != j.end() && it->is_object()) {
    check_keys(*it, "scoring.sweep", {"enabled", "lo", "hi", "step", "criterion"}, pr);
    fetch(*it, "scoring.sweep", "enabled", s.sweep.enabled, "boolean", pr);
    fetch_num(*it, "scoring.sweep", "lo", s.sweep.lo, pr);
    fetch_num(*it, "scoring.sweep", "hi", s.sweep.hi, pr);
    fetch_num(*it, "scoring.sweep", "step", s.sweep.step, pr);
    fetch(*it, "scoring.sweep", "criterion", s.sweep.criterion, "string", pr);
  } else if (it != j.end()) {
    pr.add("scoring.sweep: expected object");
  }
}

void require_file(const std::string& path, const std::string& what, Problems& pr) {
  if (path.empty()) {
    pr.add(what + ": path not set");
  } else if (!fs::exists(path)) {
    pr.add(what + ": file not found: " + path);
  }
}

void validate_semantics(const AppConfig& cfg, Problems& pr) {
  // Structural validators throw one error each; fold them into the report.
  try {
    cfg.arch.validate();
  } catch (const ConfigError& e) {
    pr.add(e.what());
  }
  try {
    cfg.train.validate();
  } catch (const ConfigError& e) {
    pr.add(e.what());
  }

  const std::string& kind = cfg.data.kind;
  if (kind == "idx") {
    require_file(cfg.data.idx.train_images, "data.idx.train_images", pr);
    require_file(cfg.data.idx.train_labels, "data.idx.train_labels", pr);
    require_file(cfg.data.idx.test_images, "data.idx.test_images", pr);
    require_file(cfg.data.idx.test_labels, "data.idx.test_labels", pr);
    if (cfg.data.idx.novel_digit < 0 || cfg.data.idx.novel_digit > 9)
      pr.add("data.idx.novel_digit: must be in 0..9");
  } else if (kind == "manifest") {
    require_file(cfg.data.manifest.path, "data.manifest.path", pr);
    if (cfg.data.manifest.novel_labels.empty())
      pr.add("data.manifest.novel_labels: at least one novel label is required");
    if (!(cfg.data.manifest.test_fraction > 0.0 && cfg.data.manifest.test_fraction < 1.0))
      pr.add("data.manifest.test_fraction: must be in (0, 1)");
  } else if (kind == "synthetic") {
    try {
      cfg.data.synthetic.validate();
    } catch (const ConfigError& e) {
      pr.add(e.what());
    }
    if (cfg.data.synthetic.image_size != cfg.arch.input_size)
      pr.add("data.synthetic.image_size: must match arch.input_size");
    if (cfg.data.synthetic.channels != cfg.arch.channels)
      pr.add("data.synthetic.channels: must match arch.channels");
  } else if (kind == "split-plan") {
    require_file(cfg.data.split_plan.path, "data.split_plan.path", pr);
    if (cfg.data.split_plan.root.empty())
      pr.add("data.split_plan.root: path not set");
    else if (!fs::is_directory(cfg.data.split_plan.root))
      pr.add("data.split_plan.root: not a directory: " + cfg.data.split_plan.root);
  } else {
    pr.add("data.kind: must be one of idx, manifest, synthetic, split-plan (got \"" + kind +
           "\")");
  }

  if (cfg.scoring.variant != "v1" && cfg.scoring.variant != "v2")
    pr.add("scoring.variant: must be v1 or v2");
  const std::string& sc = cfg.scoring.scaling;
  if (sc != "none" && sc != "global" && sc != "partitioned" && sc != "reference-range")
    pr.add("scoring.scaling: must be one of none, global, partitioned, reference-range");
  if (!std::isfinite(cfg.scoring.threshold))
    pr.add("scoring.threshold: must be finite");
  if (cfg.scoring.sweep.enabled) {
    if (!(cfg.scoring.sweep.step > 0.0)) pr.add("scoring.sweep.step: must be > 0");
    if (!(cfg.scoring.sweep.lo <= cfg.scoring.sweep.hi))
      pr.add("scoring.sweep: lo must not exceed hi");
    if (cfg.scoring.sweep.criterion != "accuracy" && cfg.scoring.sweep.criterion != "f1")
      pr.add("scoring.sweep.criterion: must be accuracy or f1");
  }
  if (sc == "reference-range" && !(cfg.scoring.ref_max > cfg.scoring.ref_min))
    pr.add("scoring: ref_max must exceed ref_min for reference-range scaling");
  if (cfg.output_dir.empty()) pr.add("output_dir: must not be empty");
}

}  // namespace

AppConfig parse_config(const std::string& json_text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");

  Problems pr;
  AppConfig cfg;
  check_keys(j, "config", {"arch", "train", "data", "scoring", "output_dir"}, pr);
  if (auto it = j.find("arch"); it != j.end()) {
    if (it->is_object())
      parse_arch(*it, cfg.arch, pr);
    else
      pr.add("arch: expected object");
  }
  if (auto it = j.find("train"); it != j.end()) {
    if (it->is_object())
      parse_train(*it, cfg.train, pr);
    else
      pr.add("train: expected object");
  }
  if (auto it = j.find("data"); it != j.end()) {
    if (it->is_object())
      parse_data(*it, cfg.data, base_dir, pr);
    else
      pr.add("data: expected object");
  }
  if (auto it = j.find("scoring"); it != j.end()) {
    if (it->is_object())
      parse_scoring(*it, cfg.scoring, pr);
    else
      pr.add("scoring: expected object");
  }
  fetch(j, "config", "output_dir", cfg.output_dir, "string", pr);
  cfg.output_dir = resolve_path(cfg.output_dir, base_dir);

  // Only run semantic checks on values that parsed; key/type problems above
  // already make the config invalid.
  validate_semantics(cfg, pr);
  pr.raise_if_any();
  return cfg;
}

AppConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = io::read_text_file(path);
  } catch (const IoError& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
  return parse_config(text, fs::path(path).parent_path().string());
}

std::string dump_config(const AppConfig& cfg) {
  // nlohmann::json keeps objects sorted by key, which makes this dump a
  // canonical form suitable for hashing.
  json j;
  j["arch"] = {{"input_size", cfg.arch.input_size},
               {"channels", cfg.arch.channels},
               {"latent_dim", cfg.arch.latent_dim},
               {"base_width", cfg.arch.base_width}};
  j["train"] = {{"epochs", cfg.train.epochs},
                {"batch_size", cfg.train.batch_size},
                {"learning_rate", cfg.train.learning_rate},
                {"beta1", cfg.train.beta1},
                {"beta2", cfg.train.beta2},
                {"weights",
                 {{"adv", cfg.train.weights.adv},
                  {"con", cfg.train.weights.con},
                  {"enc", cfg.train.weights.enc}}},
                {"seed", cfg.train.seed},
                {"squared_latent_norms", cfg.train.squared_latent_norms},
                {"reinit_d_threshold", cfg.train.reinit_d_threshold},
                {"checkpoint_every", cfg.train.checkpoint_every}};
  json data;
  data["kind"] = cfg.data.kind;
  data["split_seed"] = cfg.data.split_seed;
  if (cfg.data.kind == "idx") {
    data["idx"] = {{"train_images", cfg.data.idx.train_images},
                   {"train_labels", cfg.data.idx.train_labels},
                   {"test_images", cfg.data.idx.test_images},
                   {"test_labels", cfg.data.idx.test_labels},
                   {"novel_digit", cfg.data.idx.novel_digit}};
  } else if (cfg.data.kind == "manifest") {
    data["manifest"] = {{"path", cfg.data.manifest.path},
                        {"novel_labels", cfg.data.manifest.novel_labels},
                        {"test_fraction", cfg.data.manifest.test_fraction}};
  } else if (cfg.data.kind == "synthetic") {
    const SceneConfig& s = cfg.data.synthetic;
    data["synthetic"] = {{"image_size", s.image_size},
                         {"channels", s.channels},
                         {"seed", s.seed},
                         {"normal_count", s.normal_count},
                         {"abnormal_count", s.abnormal_count},
                         {"test_normal_fraction", s.test_normal_fraction},
                         {"normal_shapes", s.normal_shapes},
                         {"novel_shape", s.novel_shape},
                         {"min_objects", s.min_objects},
                         {"max_objects", s.max_objects},
                         {"subtle_novel", s.subtle_novel},
                         {"background_noise", s.background_noise},
                         {"hard_normal_outliers", s.hard_normal_outliers},
                         {"masked_novel_outliers", s.masked_novel_outliers}};
  } else if (cfg.data.kind == "split-plan") {
    data["split_plan"] = {{"path", cfg.data.split_plan.path},
                          {"root", cfg.data.split_plan.root}};
  }
  j["data"] = std::move(data);
  j["scoring"] = {{"variant", cfg.scoring.variant},
                  {"scaling", cfg.scoring.scaling},
                  {"threshold", cfg.scoring.threshold},
                  {"sweep",
                   {{"enabled", cfg.scoring.sweep.enabled},
                    {"lo", cfg.scoring.sweep.lo},
                    {"hi", cfg.scoring.sweep.hi},
                    {"step", cfg.scoring.sweep.step},
                    {"criterion", cfg.scoring.sweep.criterion}}},
                  {"ref_min", cfg.scoring.ref_min},
                  {"ref_max", cfg.scoring.ref_max}};
  j["output_dir"] = cfg.output_dir;
  return j.dump(2) + "\n";
}

std::string config_hash(const AppConfig& cfg) {
  const std::string dump = dump_config(cfg);
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : dump) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  const uint32_t folded = static_cast<uint32_t>(h ^ (h >> 32));
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%08x", folded);
  return buf;
}

DatasetSplit load_dataset(const AppConfig& cfg) {
  PreprocessOptions opts{cfg.arch.input_size, cfg.arch.channels};
  const DataConfig& d = cfg.data;
  if (d.kind == "idx") {
    auto train = load_idx_pairs(d.idx.train_images, d.idx.train_labels);
    auto test = load_idx_pairs(d.idx.test_images, d.idx.test_labels);
    return make_idx_protocol_split(train, test, d.idx.novel_digit, opts);
  }
  if (d.kind == "manifest") {
    Manifest m = parse_manifest(d.manifest.path);
    SplitPlan plan =
        make_manifest_split(m, d.manifest.novel_labels, d.manifest.test_fraction, d.split_seed);
    return materialize_split(plan, m.root, opts);
  }
  if (d.kind == "synthetic") {
    return generate_scenes(d.synthetic);
  }
  if (d.kind == "split-plan") {
    SplitPlan plan = load_split_plan(d.split_plan.path);
    return materialize_split(plan, d.split_plan.root, opts);
  }
  throw ConfigError("unknown data kind: " + d.kind);
}

}  // namespace ganomaly
