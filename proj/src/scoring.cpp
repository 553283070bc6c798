#include "ganomaly/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ganomaly/io.hpp"

namespace ganomaly {

const char* to_string(ScoreVariant v) { return v == ScoreVariant::V1 ? "v1" : "v2"; }

const char* to_string(ScalingMode m) {
  switch (m) {
    case ScalingMode::None: return "none";
    case ScalingMode::Global: return "global";
    case ScalingMode::Partitioned: return "partitioned";
    case ScalingMode::ReferenceRange: return "reference-range";
  }
  return "?";
}

ScoreVariant parse_variant(const std::string& s) {
  if (s == "v1") return ScoreVariant::V1;
  if (s == "v2") return ScoreVariant::V2;
  throw ConfigError("unknown score variant \"" + s + "\" (expected v1 or v2)");
}

ScalingMode parse_scaling(const std::string& s) {
  if (s == "none") return ScalingMode::None;
  if (s == "global") return ScalingMode::Global;
  if (s == "partitioned") return ScalingMode::Partitioned;
  if (s == "reference-range") return ScalingMode::ReferenceRange;
  throw ConfigError("unknown scaling mode \"" + s +
                    "\" (expected none, global, partitioned or reference-range)");
}

namespace {

// Latent distances for one forward batch, appended to out.
void batch_scores(ModelBundle<float>& m, const Tensor<float>& batch, ScoreVariant variant,
                  bool squared, std::vector<double>& out) {
  Tensor<float> z = m.gen_encoder.forward(batch, false);
  Tensor<float> xhat = m.gen_decoder.forward(z, false);
  Tensor<float> zhat = variant == ScoreVariant::V1 ? m.encoder.forward(xhat, false)
                                                   : m.gen_encoder.forward(xhat, false);
  const int64_t n = z.dim(0), d = z.dim(1);
  for (int64_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (int64_t j = 0; j < d; ++j) {
      const double df = static_cast<double>(z.at(i, j)) - static_cast<double>(zhat.at(i, j));
      sq += df * df;
    }
    out.push_back(squared ? sq : std::sqrt(sq));
  }
}

}  // namespace

double anomaly_score(ModelBundle<float>& m, const Tensor<float>& image, ScoreVariant variant,
                     bool squared) {
  image.require_shape({m.arch.channels, m.arch.input_size, m.arch.input_size}, "anomaly_score");
  std::vector<double> out;
  batch_scores(m, image.reshaped({1, m.arch.channels, m.arch.input_size, m.arch.input_size}),
               variant, squared, out);
  return out[0];
}

ScoreSet score_samples(ModelBundle<float>& m, const std::vector<LabeledSample>& samples,
                       ScoreVariant variant, bool squared, int64_t batch_size) {
  if (samples.empty()) throw DataError("score_samples: empty sample list");
  if (batch_size < 1) throw ConfigError("score_samples: batch_size must be >= 1");
  const int64_t c = m.arch.channels, s = m.arch.input_size;
  const std::vector<int64_t> want{c, s, s};
  const int64_t elems = c * s * s;

  ScoreSet set;
  set.variant = variant;
  set.squared = squared;
  std::vector<double> raw;
  raw.reserve(samples.size());

  const int64_t n = static_cast<int64_t>(samples.size());
  for (int64_t at = 0; at < n; at += batch_size) {
    const int64_t bs = std::min<int64_t>(batch_size, n - at);
    Tensor<float> batch({bs, c, s, s});
    for (int64_t i = 0; i < bs; ++i) {
      const auto& sample = samples[static_cast<size_t>(at + i)];
      if (sample.image.shape() != want) {
        throw DataError("sample '" + sample.id + "' has shape " +
                        Tensor<float>::shape_str(sample.image.shape()) + ", expected " +
                        Tensor<float>::shape_str(want));
      }
      std::copy(sample.image.data(), sample.image.data() + elems, batch.data() + i * elems);
    }
    batch_scores(m, batch, variant, squared, raw);
  }

  for (size_t i = 0; i < samples.size(); ++i) {
    set.samples.push_back({samples[i].id, raw[i], 0.0, false, samples[i].anomaly_label,
                           samples[i].source_label});
  }
  return set;
}

namespace {

RangeStats score_range(const std::vector<ScoredSample>& samples, int which /*0 all,1 normal,2 novel*/) {
  RangeStats r{};
  bool first = true;
  for (const auto& s : samples) {
    if (which == 1 && s.anomaly_label) continue;
    if (which == 2 && !s.anomaly_label) continue;
    if (first) {
      r.min = r.max = s.raw;
      first = false;
    } else {
      r.min = std::min(r.min, s.raw);
      r.max = std::max(r.max, s.raw);
    }
  }
  if (first) throw NumericError("scaling: empty partition");
  return r;
}

void check_range(const RangeStats& r, const char* what) {
  if (!(r.max > r.min)) {
    throw NumericError(std::string("degenerate ") + what + " score range [" +
                       std::to_string(r.min) + ", " + std::to_string(r.max) +
                       "]: cannot min-max scale");
  }
}

}  // namespace

void apply_global_scaling(ScoreSet& s) {
  const RangeStats r = score_range(s.samples, 0);
  check_range(r, "global");
  for (auto& smp : s.samples) {
    smp.scaled = (smp.raw - r.min) / (r.max - r.min);
    smp.has_scaled = true;
  }
  s.global = r;
  s.scaling = ScalingMode::Global;
}

void apply_partitioned_scaling(ScoreSet& s) {
  const RangeStats rn = score_range(s.samples, 1);
  const RangeStats ra = score_range(s.samples, 2);
  check_range(rn, "normal-partition");
  check_range(ra, "abnormal-partition");
  for (auto& smp : s.samples) {
    const RangeStats& r = smp.anomaly_label ? ra : rn;
    smp.scaled = (smp.raw - r.min) / (r.max - r.min);
    smp.has_scaled = true;
  }
  s.normal = rn;
  s.abnormal = ra;
  s.scaling = ScalingMode::Partitioned;
  // The per-partition ranges come from ground-truth labels; anything built on
  // these numbers needs the labels at inference time.
  s.label_dependent = true;
}

void apply_reference_scaling(ScoreSet& s, RangeStats reference) {
  check_range(reference, "reference");
  for (auto& smp : s.samples) {
    smp.scaled = std::clamp((smp.raw - reference.min) / (reference.max - reference.min), 0.0, 1.0);
    smp.has_scaled = true;
  }
  s.global = reference;
  s.scaling = ScalingMode::ReferenceRange;
}

void require_label_free(const ScoreSet& s) {
  if (s.label_dependent) {
    throw ConfigError(
        "score set was scaled with ground-truth label statistics (partitioned scaling); such "
        "scores cannot be produced in deployment, use global or reference-range scaling");
  }
}

void write_scores_csv(const ScoreSet& s, const std::string& path) {
  std::string out = "id,raw_score,scaled_score,label,variant,scaling\n";
  char line[512];
  for (const auto& smp : s.samples) {
    if (smp.has_scaled) {
      std::snprintf(line, sizeof(line), "%s,%.10g,%.10g,%s,%s,%s\n", smp.id.c_str(), smp.raw,
                    smp.scaled, smp.anomaly_label ? "novel" : "normal", to_string(s.variant),
                    to_string(s.scaling));
    } else {
      std::snprintf(line, sizeof(line), "%s,%.10g,,%s,%s,%s\n", smp.id.c_str(), smp.raw,
                    smp.anomaly_label ? "novel" : "normal", to_string(s.variant),
                    to_string(s.scaling));
    }
    out += line;
  }
  io::write_text_file(path, out);
}

}  // namespace ganomaly
