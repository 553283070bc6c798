#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include <nlohmann/json.hpp>

#include "ganomaly/datasets.hpp"
#include "ganomaly/io.hpp"
#include "ganomaly/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ganomaly {

namespace {

json parse_json_file(const std::string& path, const char* what) {
  json j;
  try {
    j = json::parse(io::read_text_file(path));
  } catch (const json::exception& e) {
    throw FormatError(std::string(what) + " " + path + " is not valid JSON: " + e.what());
  }
  return j;
}

}  // namespace

Manifest parse_manifest(const std::string& path) {
  const json j = parse_json_file(path, "manifest");
  std::vector<std::string> problems;
  if (j.value("version", 0) != 1) problems.push_back("version must be 1");
  Manifest m;
  m.root = fs::path(path).parent_path().string();
  if (m.root.empty()) m.root = ".";

  if (!j.contains("images") || !j["images"].is_array()) {
    problems.push_back("missing \"images\" array");
  } else {
    std::set<std::string> seen;
    size_t idx = 0;
    for (const auto& e : j["images"]) {
      const std::string where = "images[" + std::to_string(idx++) + "]";
      if (!e.is_object()) {
        problems.push_back(where + " is not an object");
        continue;
      }
      ManifestEntry entry;
      if (!e.contains("id") || !e["id"].is_string() || e["id"].get<std::string>().empty())
        problems.push_back(where + ": missing string \"id\"");
      else
        entry.id = e["id"].get<std::string>();
      if (!e.contains("file") || !e["file"].is_string())
        problems.push_back(where + ": missing string \"file\"");
      else
        entry.file = e["file"].get<std::string>();
      if (e.contains("labels")) {
        if (!e["labels"].is_array())
          problems.push_back(where + ": \"labels\" must be an array of strings");
        else
          for (const auto& l : e["labels"]) {
            if (!l.is_string())
              problems.push_back(where + ": \"labels\" must be an array of strings");
            else
              entry.labels.push_back(l.get<std::string>());
          }
      }
      if (e.contains("split")) {
        const std::string s = e["split"].is_string() ? e["split"].get<std::string>() : "?";
        if (s != "train" && s != "test")
          problems.push_back(where + ": \"split\" must be \"train\" or \"test\"");
        else
          entry.split = s;
      }
      for (const auto& [key, _] : e.items()) {
        if (key != "id" && key != "file" && key != "labels" && key != "split")
          problems.push_back(where + ": unknown key \"" + key + "\"");
      }
      if (!entry.id.empty() && !seen.insert(entry.id).second)
        problems.push_back("duplicate id \"" + entry.id + "\"");
      m.entries.push_back(std::move(entry));
    }
  }
  if (!problems.empty()) {
    std::string msg = "invalid manifest " + path + ":";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw FormatError(msg);
  }
  return m;
}

SplitPlan make_manifest_split(const Manifest& manifest,
                              const std::vector<std::string>& novel_labels, double test_fraction,
                              uint64_t seed) {
  if (novel_labels.empty()) throw ConfigError("manifest split: novel_labels must not be empty");
  if (!(test_fraction >= 0.0 && test_fraction <= 1.0))
    throw ConfigError("manifest split: test_fraction must be in [0, 1]");
  const std::set<std::string> novel(novel_labels.begin(), novel_labels.end());

  SplitPlan plan;
  std::string novel_desc;
  for (const auto& l : novel_labels) novel_desc += (novel_desc.empty() ? "" : ",") + l;
  plan.rule = {"manifest", novel_desc,
               "images whose labels intersect {" + novel_desc + "} are novel and go to test"};

  std::vector<std::string> pinned_violations;
  std::vector<size_t> floating_normals;
  int64_t novel_count = 0;

  auto planned = [&](const ManifestEntry& e, bool anomaly) {
    std::string src;
    if (anomaly) {
      for (const auto& l : e.labels)
        if (novel.count(l)) {
          src = l;
          break;
        }
    } else if (!e.labels.empty()) {
      src = e.labels.front();
    }
    return PlannedSample{e.id, e.file, src, anomaly};
  };

  for (size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    const bool anomaly =
        std::any_of(e.labels.begin(), e.labels.end(), [&](const auto& l) { return novel.count(l) > 0; });
    novel_count += anomaly;
    if (anomaly) {
      if (e.split == "train") {
        pinned_violations.push_back(e.id);
        continue;
      }
      plan.test.push_back(planned(e, true));
    } else if (e.split == "test") {
      plan.test.push_back(planned(e, false));
    } else if (e.split == "train") {
      plan.train_normal.push_back(planned(e, false));
    } else {
      floating_normals.push_back(i);
    }
  }

  if (!pinned_violations.empty()) {
    std::string msg = "manifest pins novel images to the training split:";
    for (const auto& id : pinned_violations) msg += " " + id;
    throw DataError(msg);
  }
  if (novel_count == 0)
    throw DataError("no image in the manifest carries a novel label ({" + novel_desc + "})");

  Rng rng(seed);
  rng.shuffle(floating_normals);
  const size_t k = static_cast<size_t>(
      std::llround(test_fraction * static_cast<double>(floating_normals.size())));
  for (size_t j = 0; j < floating_normals.size(); ++j) {
    const auto& e = manifest.entries[floating_normals[j]];
    (j < k ? plan.test : plan.train_normal).push_back(planned(e, false));
  }
  return plan;
}

void save_split_plan(const SplitPlan& plan, const std::string& path) {
  json j{{"version", 1},
         {"rule",
          {{"kind", plan.rule.kind}, {"novel", plan.rule.novel},
           {"description", plan.rule.description}}},
         {"train_normal", json::array()},
         {"test", json::array()}};
  for (const auto& s : plan.train_normal)
    j["train_normal"].push_back(
        {{"id", s.id}, {"file", s.file}, {"label", s.source_label}, {"anomaly", s.anomaly_label}});
  for (const auto& s : plan.test)
    j["test"].push_back(
        {{"id", s.id}, {"file", s.file}, {"label", s.source_label}, {"anomaly", s.anomaly_label}});
  io::write_text_file(path, j.dump(2) + "\n");
}

SplitPlan load_split_plan(const std::string& path) {
  const json j = parse_json_file(path, "split plan");
  if (j.value("version", 0) != 1) throw FormatError("split plan " + path + ": version must be 1");
  SplitPlan plan;
  try {
    const auto& r = j.at("rule");
    plan.rule = {r.at("kind").get<std::string>(), r.at("novel").get<std::string>(),
                 r.at("description").get<std::string>()};
    auto read_side = [&](const char* key, std::vector<PlannedSample>& out) {
      for (const auto& e : j.at(key)) {
        out.push_back({e.at("id").get<std::string>(), e.at("file").get<std::string>(),
                       e.at("label").get<std::string>(), e.at("anomaly").get<bool>()});
      }
    };
    read_side("train_normal", plan.train_normal);
    read_side("test", plan.test);
  } catch (const json::exception& e) {
    throw FormatError("split plan " + path + " is malformed: " + e.what());
  }
  for (const auto& s : plan.train_normal) {
    if (s.anomaly_label)
      throw DataError("split plan " + path + " places anomalous sample '" + s.id +
                      "' in train_normal");
  }
  return plan;
}

DatasetSplit materialize_split(const SplitPlan& plan, const std::string& root,
                               const PreprocessOptions& opts) {
  DatasetSplit split;
  split.rule = plan.rule;
  auto load = [&](const PlannedSample& p) {
    RawImage raw;
    try {
      raw = io::load_image(root.empty() ? p.file : root + "/" + p.file);
    } catch (const IoError& e) {
      throw IoError("sample '" + p.id + "': " + e.what());
    }
    return LabeledSample{p.id, preprocess(raw, opts), p.anomaly_label, p.source_label};
  };
  for (const auto& p : plan.train_normal) split.train_normal.push_back(load(p));
  for (const auto& p : plan.test) split.test.push_back(load(p));
  return split;
}

}  // namespace ganomaly
