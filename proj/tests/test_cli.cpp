#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ganomaly/datasets.hpp"
#include "ganomaly/io.hpp"

using namespace ganomaly;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch_root() {
  static fs::path p = [] {
    auto r = fs::temp_directory_path() / "ganomaly_cli_tests";
    fs::remove_all(r);
    fs::create_directories(r);
    return r;
  }();
  return p;
}

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string read_all(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::string s((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return s;
}

CliResult run_cli(const std::string& args) {
  static int call = 0;
  const fs::path out = scratch_root() / ("stdout." + std::to_string(call));
  const fs::path err = scratch_root() / ("stderr." + std::to_string(call));
  ++call;
  const std::string cmd = std::string("\"") + GANOMALY_CLI_PATH + "\" " + args + " > \"" +
                          out.string() + "\" 2> \"" + err.string() + "\"";
  const int rc = std::system(cmd.c_str());
  CliResult r;
  if (rc != -1 && WIFEXITED(rc)) r.code = WEXITSTATUS(rc);
  r.out = read_all(out);
  r.err = read_all(err);
  return r;
}

bool has(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

size_t line_count(const std::string& text) {
  size_t n = 0;
  for (char c : text) n += c == '\n' ? 1 : 0;
  return n;
}

// One shared tiny corpus: 16x16 grayscale scenes, two epochs, seconds to
// train. Every pipeline test reads from here.
const char* kTinyConfig = R"({
  "arch": {"input_size": 16, "channels": 1, "latent_dim": 8, "base_width": 8},
  "train": {"epochs": 2, "batch_size": 8, "seed": 3},
  "data": {"kind": "synthetic", "split_seed": 11,
           "synthetic": {"image_size": 16, "channels": 1, "seed": 5,
                         "normal_count": 24, "abnormal_count": 8,
                         "test_normal_fraction": 0.25}},
  "scoring": {"variant": "v1", "scaling": "global", "threshold": 0.5},
  "output_dir": "out"
})";

fs::path write_config(const std::string& leaf, const std::string& text) {
  const fs::path p = scratch_root() / leaf;
  io::write_text_file(p.string(), text);
  return p;
}

fs::path find_png(const fs::path& root) {
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && e.path().extension() == ".png") return e.path();
  }
  return {};
}

void put_u32_be(std::string& buf, uint32_t v) {
  buf.push_back(static_cast<char>(v >> 24));
  buf.push_back(static_cast<char>(v >> 16));
  buf.push_back(static_cast<char>(v >> 8));
  buf.push_back(static_cast<char>(v));
}

// Two fake digit classes as 8x8 idx files: class 0 is dark, class 1 bright,
// with a deterministic per-image wiggle so scores are not all equal.
void write_tiny_idx(const fs::path& dir, int n_train_per_class, int n_test_per_class) {
  auto emit = [&](const std::string& stem, int per_class) {
    std::string images, labels;
    std::vector<uint8_t> pix;
    std::vector<uint8_t> lab;
    for (int digit = 0; digit <= 1; ++digit) {
      for (int i = 0; i < per_class; ++i) {
        for (int p = 0; p < 64; ++p) {
          const int base = digit == 0 ? 40 : 200;
          pix.push_back(static_cast<uint8_t>(base + (p * 7 + i * 13) % 32));
        }
        lab.push_back(static_cast<uint8_t>(digit));
      }
    }
    put_u32_be(images, 0x803);
    put_u32_be(images, static_cast<uint32_t>(lab.size()));
    put_u32_be(images, 8);
    put_u32_be(images, 8);
    images.append(reinterpret_cast<const char*>(pix.data()), pix.size());
    put_u32_be(labels, 0x801);
    put_u32_be(labels, static_cast<uint32_t>(lab.size()));
    labels.append(reinterpret_cast<const char*>(lab.data()), lab.size());
    std::ofstream fi(dir / (stem + "-images.idx"), std::ios::binary);
    fi.write(images.data(), static_cast<std::streamsize>(images.size()));
    std::ofstream fl(dir / (stem + "-labels.idx"), std::ios::binary);
    fl.write(labels.data(), static_cast<std::streamsize>(labels.size()));
  };
  emit("train", n_train_per_class);
  emit("test", n_test_per_class);
}

}  // namespace

TEST_CASE("argument handling") {
  CHECK(run_cli("--help").code == 0);

  CliResult no_sub = run_cli("");
  CHECK(no_sub.code == 2);

  CHECK(run_cli("frobnicate").code == 2);

  // Required flag missing.
  CHECK(run_cli("train").code == 2);

  const fs::path cfg = write_config("argcheck.json", kTinyConfig);
  CliResult bad_variant = run_cli("train --config " + cfg.string() + " --variant v3");
  CHECK(bad_variant.code == 2);
  CHECK(has(bad_variant.err, "--variant must be v1 or v2"));

  CliResult bad_scaling = run_cli("train --config " + cfg.string() + " --scaling sideways");
  CHECK(bad_scaling.code == 2);
}

TEST_CASE("invalid config exits with the full problem report") {
  const fs::path cfg = write_config("broken.json", R"({
    "arch": {"channels": 7},
    "scoring": {"variant": "v9"},
    "surprise": 1
  })");
  CliResult r = run_cli("prepare --config " + cfg.string());
  CHECK(r.code == 2);
  CHECK(has(r.err, "config error:"));
  CHECK(has(r.err, "config: unknown key \"surprise\""));
  CHECK(has(r.err, "channels must be 1 or 3"));
  CHECK(has(r.err, "scoring.variant: must be v1 or v2"));
}

TEST_CASE("pipeline round trip on a tiny synthetic corpus") {
  const fs::path dir = scratch_root();
  const fs::path cfg = write_config("tiny.json", kTinyConfig);

  // prepare: scenes plus split plan plus summary.
  const fs::path prep = dir / "prep";
  CliResult p = run_cli("prepare --config " + cfg.string() + " --out " + prep.string());
  REQUIRE(p.code == 0);
  CHECK(has(p.out, "prepared split: 18 train (all normal), 14 test (6 normal / 8 novel)"));
  CHECK(fs::exists(prep / "config.json"));
  CHECK(fs::exists(prep / "split_plan.json"));
  CHECK(fs::exists(prep / "split_summary.json"));
  const fs::path png = find_png(prep / "scenes");
  REQUIRE(!png.empty());

  json summary = json::parse(read_all(prep / "split_summary.json"));
  CHECK(summary["train_normal_count"] == 18);
  CHECK(summary["test_count"] == 14);
  CHECK(summary["test_novel_count"] == 8);
  CHECK(summary["samples"].size() == 32);

  // train twice with the same seed: artifacts must match byte for byte.
  const fs::path run1 = dir / "run1";
  CliResult t1 = run_cli("train --config " + cfg.string() + " --out " + run1.string());
  REQUIRE(t1.code == 0);
  CHECK(has(t1.out, "dataset: 18 train / 14 test"));
  CHECK(has(t1.out, "epoch   1"));
  CHECK(has(t1.out, "epoch   2"));
  const fs::path final_ck = run1 / "checkpoints" / "checkpoint-final";
  REQUIRE(fs::exists(final_ck / "manifest.json"));

  const std::string telemetry1 = read_all(run1 / "telemetry.csv");
  CHECK(line_count(telemetry1) == 3);  // header + two epochs
  CHECK(telemetry1.rfind("epoch,l_adv,l_con,l_enc,l_g,l_d\n", 0) == 0);

  const fs::path run2 = dir / "run2";
  REQUIRE(run_cli("train --config " + cfg.string() + " --out " + run2.string()).code == 0);
  CHECK(read_all(run2 / "telemetry.csv") == telemetry1);

  // A different seed changes the losses.
  const fs::path run_seeded = dir / "run_seeded";
  REQUIRE(run_cli("train --config " + cfg.string() + " --seed 99 --out " +
                  run_seeded.string())
              .code == 0);
  CHECK(read_all(run_seeded / "telemetry.csv") != telemetry1);

  // evaluate: report, scores, scatter, scaling stats.
  const fs::path eval1 = dir / "eval1";
  CliResult e1 = run_cli("evaluate --config " + cfg.string() + " --checkpoint " +
                         final_ck.string() + " --out " + eval1.string());
  REQUIRE(e1.code == 0);
  CHECK(has(e1.out, "confusion (normal positive):"));
  CHECK_FALSE(has(e1.out, "WARNING"));
  REQUIRE(fs::exists(eval1 / "eval.json"));
  CHECK(fs::exists(eval1 / "scores.csv"));
  CHECK(fs::exists(eval1 / "scatter.svg"));
  REQUIRE(fs::exists(eval1 / "scaling_stats.json"));

  json report = json::parse(read_all(eval1 / "eval.json"));
  CHECK(report["variant"] == "v1");
  CHECK(report["scaling"] == "global");
  CHECK(report["label_dependent"] == false);
  CHECK(report["test_count"] == 14);
  CHECK(report["threshold"].get<double>() == doctest::Approx(0.5));
  CHECK(report["confusion_normal_positive"]["total"] == 14);
  const double auc = report["auc"].get<double>();
  CHECK(auc >= 0.0);
  CHECK(auc <= 1.0);
  json stats = json::parse(read_all(eval1 / "scaling_stats.json"));
  CHECK(stats["label_dependent"] == false);
  CHECK(stats["global"]["max"].get<double>() > stats["global"]["min"].get<double>());

  // --tau overrides the config threshold.
  const fs::path eval_tau = dir / "eval_tau";
  REQUIRE(run_cli("evaluate --config " + cfg.string() + " --checkpoint " + final_ck.string() +
                  " --tau 0.9 --out " + eval_tau.string())
              .code == 0);
  json tau_report = json::parse(read_all(eval_tau / "eval.json"));
  CHECK(tau_report["threshold"].get<double>() == doctest::Approx(0.9));

  // Partitioned scaling prints the deployment warning and marks the report.
  const fs::path eval2 = dir / "eval2";
  CliResult e2 = run_cli("evaluate --config " + cfg.string() + " --checkpoint " +
                         final_ck.string() + " --scaling partitioned --out " + eval2.string());
  REQUIRE(e2.code == 0);
  CHECK(has(e2.out, "WARNING"));
  CHECK(has(e2.out, "label_dependent=true"));
  json report2 = json::parse(read_all(eval2 / "eval.json"));
  CHECK(report2["label_dependent"] == true);
  json stats2 = json::parse(read_all(eval2 / "scaling_stats.json"));
  CHECK(stats2["label_dependent"] == true);

  // Checkpoint arch mismatch is a config error.
  const fs::path cfg32 = write_config("tiny32.json", R"({
    "arch": {"input_size": 32, "channels": 1, "latent_dim": 8, "base_width": 8},
    "data": {"kind": "synthetic",
             "synthetic": {"image_size": 32, "channels": 1,
                           "normal_count": 24, "abnormal_count": 8,
                           "test_normal_fraction": 0.25}},
    "output_dir": "out"
  })");
  CliResult mismatch = run_cli("evaluate --config " + cfg32.string() + " --checkpoint " +
                               final_ck.string() + " --out " + (dir / "evalx").string());
  CHECK(mismatch.code == 2);
  CHECK(has(mismatch.err, "checkpoint architecture does not match"));

  // resume: one extra epoch lands in its own telemetry, and matches the same
  // epoch of an uninterrupted three-epoch run byte for byte.
  std::string cfg3_text = kTinyConfig;
  const auto pos = cfg3_text.find("\"epochs\": 2");
  REQUIRE(pos != std::string::npos);
  cfg3_text.replace(pos, 11, "\"epochs\": 3");
  const fs::path cfg3 = write_config("tiny3.json", cfg3_text);

  const fs::path run3 = dir / "run3";
  CliResult t3 = run_cli("train --config " + cfg3.string() + " --resume " + final_ck.string() +
                         " --out " + run3.string());
  REQUIRE(t3.code == 0);
  const std::string resumed = read_all(run3 / "telemetry.csv");
  CHECK(line_count(resumed) == 2);  // header + epoch 3 only

  const fs::path run4 = dir / "run4";
  REQUIRE(run_cli("train --config " + cfg3.string() + " --out " + run4.string()).code == 0);
  const std::string full = read_all(run4 / "telemetry.csv");
  const std::string last_line = full.substr(full.rfind("\n3,") + 1);
  CHECK(resumed.substr(resumed.find('\n') + 1) == last_line);
  json run_meta = json::parse(read_all(run3 / "run.json"));
  CHECK(run_meta["resumed_from"] == final_ck.string());
  CHECK(run_meta["epochs_run"] == 1);

  // score: raw only without --stats, scaled against a stored global range,
  // and two distinct refusals on the deployment path.
  CliResult s1 = run_cli("score --checkpoint " + final_ck.string() + " --image " + png.string());
  REQUIRE(s1.code == 0);
  json score1 = json::parse(s1.out);
  CHECK(score1.contains("raw_score"));
  CHECK_FALSE(score1.contains("scaled_score"));

  CliResult s2 = run_cli("score --checkpoint " + final_ck.string() + " --image " + png.string() +
                         " --stats " + (eval1 / "scaling_stats.json").string());
  REQUIRE(s2.code == 0);
  json score2 = json::parse(s2.out);
  CHECK(score2["raw_score"].get<double>() == score1["raw_score"].get<double>());
  CHECK(score2.contains("scaled_score"));
  CHECK(score2["reference"]["max"].get<double>() ==
        doctest::Approx(stats["global"]["max"].get<double>()));

  CliResult s3 = run_cli("score --checkpoint " + final_ck.string() + " --image " + png.string() +
                         " --stats " + (eval2 / "scaling_stats.json").string());
  CHECK(s3.code == 2);
  CHECK(has(s3.err, "label-dependent"));

  CliResult s4 = run_cli("score --checkpoint " + final_ck.string() + " --image " + png.string() +
                         " --scaling partitioned");
  CHECK(s4.code == 2);
  CHECK(has(s4.err, "partitioned scaling needs ground-truth labels"));

  // Without --out the run directory is derived from hash + timestamp.
  CliResult auto_dir = run_cli("prepare --config " + cfg.string());
  REQUIRE(auto_dir.code == 0);
  const auto marker = auto_dir.out.rfind("run dir: ");
  REQUIRE(marker != std::string::npos);
  std::string named = auto_dir.out.substr(marker + 9);
  named.erase(named.find_last_not_of(" \n") + 1);
  CHECK(fs::exists(fs::path(named) / "split_summary.json"));
  CHECK(has(named, "run-"));

  // A test set with one class makes AUC undefined: numeric failure exit.
  const fs::path cfg_one = write_config("oneclass.json", R"({
    "arch": {"input_size": 16, "channels": 1, "latent_dim": 8, "base_width": 8},
    "data": {"kind": "synthetic", "split_seed": 11,
             "synthetic": {"image_size": 16, "channels": 1, "seed": 5,
                           "normal_count": 24, "abnormal_count": 0,
                           "test_normal_fraction": 0.25}},
    "output_dir": "out"
  })");
  CliResult numeric = run_cli("evaluate --config " + cfg_one.string() + " --checkpoint " +
                              final_ck.string() + " --out " + (dir / "evaln").string());
  CHECK(numeric.code == 4);
  CHECK(has(numeric.err, "numeric failure:"));
}

TEST_CASE("contaminated split plan is a data error") {
  const fs::path dir = scratch_root() / "plan";
  fs::create_directories(dir / "root");

  SplitPlan plan;
  plan.rule = {"manifest", "cross", "hand-built for the test"};
  plan.train_normal.push_back({"bad-0", "bad-0.png", "cross", true});
  plan.test.push_back({"t-0", "t-0.png", "circle", false});
  save_split_plan(plan, (dir / "plan.json").string());

  const fs::path cfg = write_config("plan.json.cfg", std::string(R"({
    "arch": {"input_size": 16, "channels": 1, "latent_dim": 8, "base_width": 8},
    "data": {"kind": "split-plan",
             "split_plan": {"path": ")") +
                                                          (dir / "plan.json").string() +
                                                          R"(", "root": ")" +
                                                          (dir / "root").string() + R"("}},
    "output_dir": "out"
  })");
  CliResult r = run_cli("prepare --config " + cfg.string());
  CHECK(r.code == 3);
  CHECK(has(r.err, "data error:"));
  CHECK(has(r.err, "bad-0"));
}

TEST_CASE("reproduce-mnist runs the leave-one-digit-out table") {
  const fs::path dir = scratch_root() / "repro";
  fs::create_directories(dir);
  write_tiny_idx(dir, 12, 4);

  const fs::path cfg = write_config("repro.json", std::string(R"({
    "arch": {"input_size": 8, "channels": 1, "latent_dim": 4, "base_width": 4},
    "train": {"epochs": 1, "batch_size": 4, "seed": 3},
    "data": {"kind": "idx",
             "idx": {"train_images": ")") +
                                                     (dir / "train-images.idx").string() +
                                                     R"(", "train_labels": ")" +
                                                     (dir / "train-labels.idx").string() +
                                                     R"(", "test_images": ")" +
                                                     (dir / "test-images.idx").string() +
                                                     R"(", "test_labels": ")" +
                                                     (dir / "test-labels.idx").string() +
                                                     R"(", "novel_digit": 0}},
    "output_dir": "out"
  })");

  const fs::path out = dir / "run";
  CliResult r = run_cli("reproduce-mnist --config " + cfg.string() + " --digits 1 --out " +
                        out.string());
  REQUIRE(r.code == 0);
  CHECK(has(r.out, "digit 1: auc_v1"));

  const std::string csv = read_all(out / "digit_auc.csv");
  CHECK(csv.rfind("digit,auc_v1,auc_v2,train_count,test_count\n", 0) == 0);
  CHECK(line_count(csv) == 2);
  CHECK(csv.find("\n1,") != std::string::npos);
  json summary = json::parse(read_all(out / "summary.json"));
  REQUIRE(summary["digits"].size() == 1);
  // The twelve held-out novel images join the eight test images.
  CHECK(summary["digits"][0]["train_count"] == 12);
  CHECK(summary["digits"][0]["test_count"] == 20);

  // The wrong data kind is refused before any work happens.
  const fs::path cfg_syn = write_config("repro_bad.json", kTinyConfig);
  CliResult bad = run_cli("reproduce-mnist --config " + cfg_syn.string());
  CHECK(bad.code == 2);
  CHECK(has(bad.err, "reproduce-mnist needs data.kind = \"idx\""));

  CliResult bad_digits = run_cli("reproduce-mnist --config " + cfg.string() +
                                 " --digits 1,zap --out " + (dir / "run2").string());
  CHECK(bad_digits.code == 2);
  CHECK(has(bad_digits.err, "--digits expects comma-separated digits"));
}
