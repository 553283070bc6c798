// ganomaly: anomaly-detection pipeline driver.
//
// Subcommands: prepare, train, evaluate, reproduce-mnist, score.
// Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric failure, 1 other.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "ganomaly/checkpoint.hpp"
#include "ganomaly/config.hpp"
#include "ganomaly/errors.hpp"
#include "ganomaly/evalmetrics.hpp"
#include "ganomaly/io.hpp"
#include "ganomaly/protocol.hpp"
#include "ganomaly/scoring.hpp"
#include "ganomaly/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ganomaly;

namespace {

// Flag values shared by several subcommands. Flags beat the config file.
struct Overrides {
  std::optional<uint64_t> seed;
  std::optional<std::string> variant;
  std::optional<std::string> scaling;
  std::optional<double> threshold;
};

void apply_overrides(AppConfig& cfg, const Overrides& ov) {
  if (ov.seed) cfg.train.seed = *ov.seed;
  if (ov.variant) cfg.scoring.variant = *ov.variant;
  if (ov.scaling) cfg.scoring.scaling = *ov.scaling;
  if (ov.threshold) cfg.scoring.threshold = *ov.threshold;
  if (ov.variant && *ov.variant != "v1" && *ov.variant != "v2")
    throw ConfigError("--variant must be v1 or v2");
  if (ov.scaling) parse_scaling(*ov.scaling);  // throws on unknown
}

std::string timestamp_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  localtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", &tm);
  return buf;
}

// Run directories are named by config hash + wall time so repeated
// invocations never clobber each other; --out pins an exact directory.
std::string pick_run_dir(const AppConfig& cfg, const std::string& out_flag) {
  if (!out_flag.empty()) return out_flag;
  return (fs::path(cfg.output_dir) / ("run-" + config_hash(cfg) + "-" + timestamp_now()))
      .string();
}

void write_json(const json& j, const std::string& path) {
  io::write_text_file(path, j.dump(2) + "\n");
}

json metrics_json(const DerivedMetrics& m) {
  return {{"precision", m.precision},
          {"sensitivity", m.sensitivity},
          {"f1", m.f1},
          {"accuracy", m.accuracy},
          {"precision_defined", m.precision_defined},
          {"sensitivity_defined", m.sensitivity_defined},
          {"f1_defined", m.f1_defined}};
}

json confusion_json(const ConfusionMatrix& cm) {
  return {{"tp", cm.tp}, {"fp", cm.fp}, {"fn", cm.fn}, {"tn", cm.tn}, {"total", cm.total()}};
}

json range_json(const RangeStats& r) { return {{"min", r.min}, {"max", r.max}}; }

void apply_scaling_from_config(ScoreSet& scores, const AppConfig& cfg) {
  switch (parse_scaling(cfg.scoring.scaling)) {
    case ScalingMode::None:
      break;
    case ScalingMode::Global:
      apply_global_scaling(scores);
      break;
    case ScalingMode::Partitioned:
      apply_partitioned_scaling(scores);
      break;
    case ScalingMode::ReferenceRange:
      apply_reference_scaling(scores, {cfg.scoring.ref_min, cfg.scoring.ref_max});
      break;
  }
}

// ---- prepare ----

int cmd_prepare(const std::string& config_path, const std::string& out_flag,
                const Overrides& ov) {
  AppConfig cfg = load_config(config_path);
  apply_overrides(cfg, ov);
  const std::string run_dir = pick_run_dir(cfg, out_flag);
  io::make_dirs(run_dir);
  io::write_text_file((fs::path(run_dir) / "config.json").string(), dump_config(cfg));

  // For file-backed corpora a reusable split plan is written; the summary
  // below covers every kind.
  DatasetSplit split;
  if (cfg.data.kind == "manifest") {
    Manifest m = parse_manifest(cfg.data.manifest.path);
    SplitPlan plan = make_manifest_split(m, cfg.data.manifest.novel_labels,
                                         cfg.data.manifest.test_fraction, cfg.data.split_seed);
    save_split_plan(plan, (fs::path(run_dir) / "split_plan.json").string());
    std::printf("split plan written: %s (root %s)\n",
                (fs::path(run_dir) / "split_plan.json").c_str(), m.root.c_str());
    split = materialize_split(plan, m.root, {cfg.arch.input_size, cfg.arch.channels});
  } else if (cfg.data.kind == "synthetic") {
    const std::string scene_dir = (fs::path(run_dir) / "scenes").string();
    const std::string manifest_path = export_scenes(cfg.data.synthetic, scene_dir);
    Manifest m = parse_manifest(manifest_path);
    SplitPlan plan = make_manifest_split(m, {cfg.data.synthetic.novel_shape},
                                         cfg.data.synthetic.test_normal_fraction,
                                         cfg.data.split_seed);
    save_split_plan(plan, (fs::path(run_dir) / "split_plan.json").string());
    std::printf("scenes rendered under %s\n", scene_dir.c_str());
    split = load_dataset(cfg);
  } else {
    split = load_dataset(cfg);
  }
  check_split_contract(split);

  json summary;
  summary["rule"] = {{"kind", split.rule.kind},
                     {"novel", split.rule.novel},
                     {"description", split.rule.description}};
  summary["train_normal_count"] = split.train_normal.size();
  summary["test_count"] = split.test.size();
  int64_t test_normal = 0;
  std::map<std::string, int64_t> per_label;
  for (const auto& s : split.test) {
    if (!s.anomaly_label) ++test_normal;
    ++per_label[s.source_label];
  }
  summary["test_normal_count"] = test_normal;
  summary["test_novel_count"] = static_cast<int64_t>(split.test.size()) - test_normal;
  summary["test_by_source_label"] = per_label;
  json listing = json::array();
  for (const auto& s : split.train_normal)
    listing.push_back({{"id", s.id}, {"partition", "train"}, {"label", s.source_label},
                       {"anomaly", false}});
  for (const auto& s : split.test)
    listing.push_back({{"id", s.id}, {"partition", "test"}, {"label", s.source_label},
                       {"anomaly", s.anomaly_label}});
  summary["samples"] = std::move(listing);
  write_json(summary, (fs::path(run_dir) / "split_summary.json").string());

  std::printf("prepared split: %zu train (all normal), %zu test (%lld normal / %lld novel)\n",
              split.train_normal.size(), split.test.size(),
              static_cast<long long>(test_normal),
              static_cast<long long>(static_cast<int64_t>(split.test.size()) - test_normal));
  std::printf("run dir: %s\n", run_dir.c_str());
  return kExitOk;
}

// ---- train ----

int cmd_train(const std::string& config_path, const std::string& out_flag,
              const std::string& resume, const Overrides& ov) {
  AppConfig cfg = load_config(config_path);
  apply_overrides(cfg, ov);
  const std::string run_dir = pick_run_dir(cfg, out_flag);
  io::make_dirs(run_dir);
  io::write_text_file((fs::path(run_dir) / "config.json").string(), dump_config(cfg));

  DatasetSplit split = load_dataset(cfg);
  std::printf("dataset: %zu train / %zu test (%s)\n", split.train_normal.size(),
              split.test.size(), split.rule.description.c_str());

  const auto t0 = std::chrono::steady_clock::now();
  RunOptions opts;
  opts.checkpoint_dir = (fs::path(run_dir) / "checkpoints").string();
  opts.resume_from = resume;
  opts.on_epoch = [&](const EpochRecord& r) {
    std::printf("epoch %3lld  l_adv %.5f  l_con %.5f  l_enc %.5f  l_g %.5f  l_d %.5f\n",
                static_cast<long long>(r.epoch), r.adv, r.con, r.enc, r.g_total, r.d);
    std::fflush(stdout);
  };
  TrainOutput out = train_model(cfg.arch, cfg.train, split, opts);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  write_telemetry_csv(out.telemetry, (fs::path(run_dir) / "telemetry.csv").string());

  json run;
  run["command"] = "train";
  run["config_hash"] = config_hash(cfg);
  run["rule"] = {{"kind", split.rule.kind},
                 {"novel", split.rule.novel},
                 {"description", split.rule.description}};
  run["train_count"] = split.train_normal.size();
  run["test_count"] = split.test.size();
  run["epochs_run"] = out.telemetry.size();
  run["d_reinits"] = out.d_reinits;
  run["resumed_from"] = resume;
  run["final_checkpoint"] = (fs::path(opts.checkpoint_dir) / "checkpoint-final").string();
  if (!out.telemetry.empty()) {
    const EpochRecord& last = out.telemetry.back();
    run["final_losses"] = {{"l_adv", last.adv},
                           {"l_con", last.con},
                           {"l_enc", last.enc},
                           {"l_g", last.g_total},
                           {"l_d", last.d}};
  }
  // Wall-clock data lives only here, never in the deterministic artifacts.
  run["wall_seconds"] = secs;
  run["finished_at"] = timestamp_now();
  write_json(run, (fs::path(run_dir) / "run.json").string());

  std::printf("training done in %.1fs; artifacts under %s\n", secs, run_dir.c_str());
  return kExitOk;
}

// ---- evaluate ----

int cmd_evaluate(const std::string& config_path, const std::string& checkpoint,
                 const std::string& out_flag, const Overrides& ov) {
  AppConfig cfg = load_config(config_path);
  apply_overrides(cfg, ov);
  const std::string run_dir = pick_run_dir(cfg, out_flag);
  io::make_dirs(run_dir);
  io::write_text_file((fs::path(run_dir) / "config.json").string(), dump_config(cfg));

  LoadedCheckpoint ck = load_checkpoint(checkpoint);
  if (!(ck.bundle.arch == cfg.arch)) {
    throw ConfigError("checkpoint architecture does not match the config's arch section");
  }

  DatasetSplit split = load_dataset(cfg);
  const ScoreVariant variant = parse_variant(cfg.scoring.variant);
  ScoreSet scores = score_samples(ck.bundle, split.test, variant,
                                  cfg.train.squared_latent_norms, cfg.train.batch_size);
  apply_scaling_from_config(scores, cfg);
  if (scores.label_dependent) {
    std::printf("WARNING: label_dependent=true; these scores were scaled with ground-truth\n"
                "         label statistics and do not constitute deployable detection.\n");
  }

  double tau = cfg.scoring.threshold;
  json report;
  report["checkpoint"] = checkpoint;
  report["epoch"] = ck.epoch;
  report["variant"] = to_string(scores.variant);
  report["scaling"] = to_string(scores.scaling);
  report["label_dependent"] = scores.label_dependent;
  report["test_count"] = scores.samples.size();

  if (cfg.scoring.sweep.enabled) {
    const SweepCriterion crit = cfg.scoring.sweep.criterion == "f1" ? SweepCriterion::F1
                                                                    : SweepCriterion::Accuracy;
    SweepResult sweep = sweep_threshold(scores, cfg.scoring.sweep.lo, cfg.scoring.sweep.hi,
                                        cfg.scoring.sweep.step, crit);
    tau = sweep.best().tau;
    json pts = json::array();
    for (const auto& p : sweep.points) {
      pts.push_back({{"tau", p.tau},
                     {"accuracy", p.metrics.accuracy},
                     {"f1", p.metrics.f1}});
    }
    report["sweep"] = {{"criterion", cfg.scoring.sweep.criterion},
                       {"lo", cfg.scoring.sweep.lo},
                       {"hi", cfg.scoring.sweep.hi},
                       {"step", cfg.scoring.sweep.step},
                       {"best_tau", tau},
                       {"points", std::move(pts)}};
  }
  report["threshold"] = tau;

  const ConfusionMatrix cm = confusion_at(scores, tau);
  report["confusion_normal_positive"] = confusion_json(cm);
  report["metrics_normal_positive"] = metrics_json(derived_metrics(cm));
  const ConfusionMatrix flipped = flip_positive(cm);
  report["confusion_novel_positive"] = confusion_json(flipped);
  report["metrics_novel_positive"] = metrics_json(derived_metrics(flipped));
  report["auc"] = roc_auc(scores);

  write_json(report, (fs::path(run_dir) / "eval.json").string());
  write_scores_csv(scores, (fs::path(run_dir) / "scores.csv").string());
  io::write_score_scatter_svg(scores, scores.scaling == ScalingMode::None ? -1.0 : tau,
                              (fs::path(run_dir) / "scatter.svg").string());

  json stats;
  stats["variant"] = to_string(scores.variant);
  stats["scaling"] = to_string(scores.scaling);
  stats["label_dependent"] = scores.label_dependent;
  stats["global"] = range_json(scores.global);
  stats["normal"] = range_json(scores.normal);
  stats["abnormal"] = range_json(scores.abnormal);
  write_json(stats, (fs::path(run_dir) / "scaling_stats.json").string());

  const DerivedMetrics m = derived_metrics(cm);
  std::printf("confusion (normal positive): tp %lld  fp %lld  fn %lld  tn %lld\n",
              static_cast<long long>(cm.tp), static_cast<long long>(cm.fp),
              static_cast<long long>(cm.fn), static_cast<long long>(cm.tn));
  std::printf("precision %.4f  sensitivity %.4f  f1 %.4f  accuracy %.4f  auc %.4f\n",
              m.precision, m.sensitivity, m.f1, m.accuracy, report["auc"].get<double>());
  std::printf("report: %s\n", (fs::path(run_dir) / "eval.json").c_str());
  return kExitOk;
}

// ---- reproduce-mnist ----

int cmd_reproduce_mnist(const std::string& config_path, const std::string& out_flag,
                        const std::string& digits_flag, const Overrides& ov) {
  AppConfig cfg = load_config(config_path);
  apply_overrides(cfg, ov);
  if (cfg.data.kind != "idx")
    throw ConfigError("reproduce-mnist needs data.kind = \"idx\"");
  const std::string run_dir = pick_run_dir(cfg, out_flag);
  io::make_dirs(run_dir);
  io::write_text_file((fs::path(run_dir) / "config.json").string(), dump_config(cfg));

  std::vector<int> digits;
  if (!digits_flag.empty()) {
    std::stringstream ss(digits_flag);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        digits.push_back(std::stoi(tok));
      } catch (const std::exception&) {
        throw ConfigError("--digits expects comma-separated digits, got \"" + tok + "\"");
      }
    }
  }

  DigitRunHooks hooks;
  hooks.on_epoch = [](const EpochRecord& r) {
    std::printf("  epoch %3lld  l_g %.5f  l_d %.5f\n", static_cast<long long>(r.epoch),
                r.g_total, r.d);
    std::fflush(stdout);
  };
  hooks.on_digit = [](const DigitRunResult& r) {
    std::printf("digit %d: auc_v1 %.4f  auc_v2 %.4f  (train %lld, test %lld)\n", r.digit,
                r.auc_v1, r.auc_v2, static_cast<long long>(r.train_count),
                static_cast<long long>(r.test_count));
    std::fflush(stdout);
  };
  std::vector<DigitRunResult> rows = run_digit_protocol(cfg.data.idx, cfg.arch, cfg.train,
                                                        digits, hooks);

  write_digit_results_csv(rows, (fs::path(run_dir) / "digit_auc.csv").string());
  json summary;
  summary["digits"] = json::array();
  json high = json::array();
  for (const auto& r : rows) {
    summary["digits"].push_back({{"digit", r.digit},
                                 {"auc_v1", r.auc_v1},
                                 {"auc_v2", r.auc_v2},
                                 {"train_count", r.train_count},
                                 {"test_count", r.test_count}});
    if (r.auc_v1 >= 0.8) high.push_back(r.digit);
  }
  summary["high_auc_digits_v1"] = std::move(high);
  write_json(summary, (fs::path(run_dir) / "summary.json").string());
  std::printf("results: %s\n", (fs::path(run_dir) / "digit_auc.csv").c_str());
  return kExitOk;
}

// ---- score (single image) ----

int cmd_score(const std::string& checkpoint, const std::string& image_path,
              const std::string& stats_path, const Overrides& ov) {
  LoadedCheckpoint ck = load_checkpoint(checkpoint);
  const ScoreVariant variant = parse_variant(ov.variant.value_or("v1"));

  // This is the deployment path: no ground-truth label exists, so
  // label-dependent scaling is structurally impossible here. Only a stored
  // reference range (from scaling_stats.json) may be applied.
  if (ov.scaling && *ov.scaling == "partitioned") {
    throw ConfigError(
        "partitioned scaling needs ground-truth labels and cannot be applied to a "
        "single unlabeled image; use --stats with a stored reference range instead");
  }

  RawImage raw = io::load_image(image_path);
  Tensor<float> img =
      preprocess(raw, {ck.bundle.arch.input_size, ck.bundle.arch.channels});
  const double score = anomaly_score(ck.bundle, img, variant, ck.cfg.squared_latent_norms);

  json out;
  out["image"] = image_path;
  out["variant"] = to_string(variant);
  out["raw_score"] = score;
  if (!stats_path.empty()) {
    json stats;
    try {
      stats = json::parse(io::read_text_file(stats_path));
    } catch (const json::exception& e) {
      throw ConfigError(std::string("cannot parse --stats file: ") + e.what());
    }
    if (stats.value("label_dependent", false)) {
      throw ConfigError("--stats file holds label-dependent ranges; refusing to apply them "
                        "to unlabeled data");
    }
    if (!stats.contains("global")) throw ConfigError("--stats file lacks a global range");
    RangeStats ref{stats["global"]["min"].get<double>(), stats["global"]["max"].get<double>()};
    ScoreSet one;
    one.variant = variant;
    one.samples.push_back({image_path, score, 0.0, false, false, ""});
    apply_reference_scaling(one, ref);
    out["scaled_score"] = one.samples[0].scaled;
    out["reference"] = range_json(ref);
  }
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GANomaly-style anomaly detection pipeline"};
  app.require_subcommand(1);

  std::string config_path, out_dir, resume, checkpoint, image_path, stats_path, digits;
  Overrides ov;
  uint64_t seed_val = 0;
  std::string variant_val, scaling_val;
  double tau_val = 0.0;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", config_path, "JSON config file");
    if (needs_config) c->required();
    sub->add_option("--out", out_dir, "run directory (default: output_dir/run-<hash>-<time>)");
    // The each() hooks see the raw token during parsing (the bound variable
    // is only assigned afterwards), so they parse the token themselves.
    sub->add_option("--seed", seed_val, "override train.seed")
        ->each([&](const std::string& s) { ov.seed = std::stoull(s); });
    sub->add_option("--variant", variant_val, "score variant: v1 | v2")
        ->each([&](const std::string& s) { ov.variant = s; });
    sub->add_option("--scaling", scaling_val,
                    "scaling: none | global | partitioned | reference-range")
        ->each([&](const std::string& s) { ov.scaling = s; });
    sub->add_option("--tau", tau_val, "override scoring.threshold")
        ->each([&](const std::string& s) { ov.threshold = std::stod(s); });
  };

  CLI::App* prepare = app.add_subcommand("prepare", "materialize the dataset split");
  add_common(prepare, true);

  CLI::App* train = app.add_subcommand("train", "train the networks");
  add_common(train, true);
  train->add_option("--resume", resume, "checkpoint directory to continue from");

  CLI::App* evaluate = app.add_subcommand("evaluate", "score + scale + threshold + report");
  add_common(evaluate, true);
  evaluate->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();

  CLI::App* repro = app.add_subcommand("reproduce-mnist", "leave-one-digit-out AUC table");
  add_common(repro, true);
  repro->add_option("--digits", digits, "comma-separated digits (default: all ten)");

  CLI::App* score = app.add_subcommand("score", "score a single image against a checkpoint");
  add_common(score, false);
  score->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
  score->add_option("--image", image_path, "image file to score")->required();
  score->add_option("--stats", stats_path, "scaling_stats.json from an evaluate run");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Bad flags are config errors; --help is a success.
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (prepare->parsed()) return cmd_prepare(config_path, out_dir, ov);
    if (train->parsed()) return cmd_train(config_path, out_dir, resume, ov);
    if (evaluate->parsed()) return cmd_evaluate(config_path, checkpoint, out_dir, ov);
    if (repro->parsed()) return cmd_reproduce_mnist(config_path, out_dir, digits, ov);
    if (score->parsed()) return cmd_score(checkpoint, image_path, stats_path, ov);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kExitNumeric;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kExitOk;
}
