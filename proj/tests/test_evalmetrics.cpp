#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <string>
#include <vector>

#include "ganomaly/evalmetrics.hpp"
#include "ganomaly/rng.hpp"

using namespace ganomaly;

namespace {

ScoreSet hand_set(const std::vector<double>& raw, const std::vector<bool>& novel) {
  ScoreSet s;
  for (size_t i = 0; i < raw.size(); ++i)
    s.samples.push_back(
        {"h" + std::to_string(i), raw[i], 0.0, false, novel[i], novel[i] ? "novel" : "normal"});
  return s;
}

void add(ScoreSet& s, int64_t count, double score, bool novel) {
  for (int64_t i = 0; i < count; ++i)
    s.samples.push_back({"x" + std::to_string(s.samples.size()), score, 0.0, false, novel,
                         novel ? "novel" : "normal"});
}

// The result tables print two decimals by cutting, not rounding half up
// (their accuracy 0.478 appears as 0.47), so the oracle compares cut digits.
double cut2(double v) { return std::floor(v * 100.0) / 100.0; }

// O(pos * neg) pair-counting AUC, the independent oracle: a tied pair
// contributes one half.
double brute_force_auc(const std::vector<double>& scores, const std::vector<bool>& novel) {
  double wins = 0.0;
  int64_t pairs = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (!novel[i]) continue;
    for (size_t j = 0; j < scores.size(); ++j) {
      if (novel[j]) continue;
      ++pairs;
      if (scores[i] > scores[j])
        wins += 1.0;
      else if (scores[i] == scores[j])
        wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

}  // namespace

TEST_CASE("derived metrics reproduce the published table rows") {
  SUBCASE("1859-sample row with heavy false positives") {
    const ConfusionMatrix cm{886, 954, 16, 3};
    REQUIRE(cm.total() == 1859);
    DerivedMetrics m = derived_metrics(cm);
    CHECK(m.precision == doctest::Approx(886.0 / 1840.0).epsilon(1e-12));
    CHECK(m.sensitivity == doctest::Approx(886.0 / 902.0).epsilon(1e-12));
    CHECK(cut2(m.precision) == doctest::Approx(0.48));
    CHECK(cut2(m.sensitivity) == doctest::Approx(0.98));
    CHECK(cut2(m.f1) == doctest::Approx(0.64));
    CHECK(cut2(m.accuracy) == doctest::Approx(0.47));
  }
  SUBCASE("near-chance row") {
    DerivedMetrics m = derived_metrics({460, 448, 442, 509});
    CHECK(cut2(m.precision) == doctest::Approx(0.50));
    CHECK(cut2(m.sensitivity) == doctest::Approx(0.50));
    CHECK(cut2(m.f1) == doctest::Approx(0.50));
    CHECK(cut2(m.accuracy) == doctest::Approx(0.52));
  }
  SUBCASE("partition-scaled row") {
    DerivedMetrics m = derived_metrics({878, 44, 24, 913});
    CHECK(m.accuracy == doctest::Approx(1791.0 / 1859.0).epsilon(1e-12));
    CHECK(std::abs(m.accuracy * 100.0 - 96.3) < 0.05);
  }
  SUBCASE("textbook sanity values") {
    DerivedMetrics m = derived_metrics({50, 0, 0, 50});
    CHECK(m.precision == 1.0);
    CHECK(m.sensitivity == 1.0);
    CHECK(m.f1 == 1.0);
    CHECK(m.accuracy == 1.0);
  }
}

TEST_CASE("zero denominators clear the defined flags instead of dividing") {
  SUBCASE("nothing predicted normal") {
    DerivedMetrics m = derived_metrics({0, 0, 5, 3});
    CHECK_FALSE(m.precision_defined);
    CHECK(m.sensitivity_defined);
    CHECK(m.sensitivity == 0.0);
    CHECK_FALSE(m.f1_defined);
    CHECK(m.accuracy == doctest::Approx(3.0 / 8.0));
  }
  SUBCASE("no normal samples at all") {
    DerivedMetrics m = derived_metrics({0, 2, 0, 3});
    CHECK_FALSE(m.sensitivity_defined);
    CHECK_FALSE(m.f1_defined);
  }
  SUBCASE("precision and sensitivity both zero") {
    DerivedMetrics m = derived_metrics({0, 5, 3, 2});
    CHECK(m.precision_defined);
    CHECK(m.sensitivity_defined);
    CHECK(m.precision == 0.0);
    CHECK(m.sensitivity == 0.0);
    CHECK_FALSE(m.f1_defined);
  }
  SUBCASE("an empty matrix is an error") {
    CHECK_THROWS_AS(derived_metrics({0, 0, 0, 0}), DataError);
  }
}

TEST_CASE("confusion counting treats normal as positive and tau as inclusive for normal") {
  ScoreSet s = hand_set({0.2, 0.5, 0.8, 0.5}, {false, false, true, true});
  ConfusionMatrix cm = confusion_at(s, 0.5);
  // score > tau means predicted novel; 0.5 is not > 0.5
  CHECK(cm.tp == 2);  // 0.2 and 0.5 normals predicted normal
  CHECK(cm.fn == 0);
  CHECK(cm.tn == 1);  // 0.8 novel predicted novel
  CHECK(cm.fp == 1);  // 0.5 novel predicted normal

  SUBCASE("scaled values take precedence once present") {
    for (auto& smp : s.samples) {
      smp.scaled = 1.0 - smp.raw;  // reverse the ordering
      smp.has_scaled = true;
    }
    // scaled values: normals 0.8/0.5, novels 0.2/0.5, so only the 0.8 normal
    // is predicted novel and both novels pass as normal
    ConfusionMatrix flipped = confusion_at(s, 0.5);
    CHECK(flipped.tp == 1);
    CHECK(flipped.fn == 1);
    CHECK(flipped.fp == 2);
    CHECK(flipped.tn == 0);
  }
  SUBCASE("an empty set is an error") {
    CHECK_THROWS_AS(confusion_at(ScoreSet{}, 0.5), DataError);
  }
}

TEST_CASE("flipping the positive class swaps the roles symmetrically") {
  const ConfusionMatrix cm{886, 954, 16, 3};
  const ConfusionMatrix f = flip_positive(cm);
  CHECK(f.tp == 3);
  CHECK(f.fp == 16);
  CHECK(f.fn == 954);
  CHECK(f.tn == 886);
  CHECK(f.total() == cm.total());

  const ConfusionMatrix back = flip_positive(f);
  CHECK(back.tp == cm.tp);
  CHECK(back.fp == cm.fp);
  CHECK(back.fn == cm.fn);
  CHECK(back.tn == cm.tn);

  // accuracy is class-symmetric, precision is not
  DerivedMetrics m1 = derived_metrics(cm);
  DerivedMetrics m2 = derived_metrics(f);
  CHECK(m1.accuracy == doctest::Approx(m2.accuracy).epsilon(1e-12));
}

TEST_CASE("the threshold sweep walks the inclusive grid and keeps the lowest tied winner") {
  // Fixture built so 0.47 is the unique accuracy maximizer: 20 normals sit
  // just below it at 0.465 and 20 novels just above it at 0.475, so every
  // other grid threshold misclassifies one of the two packs.
  ScoreSet s;
  add(s, 1, 0.0, false);
  add(s, 857, 0.20, false);
  add(s, 20, 0.465, false);
  add(s, 23, 0.90, false);
  add(s, 1, 1.0, false);
  add(s, 1, 0.0, true);
  add(s, 43, 0.30, true);
  add(s, 20, 0.475, true);
  add(s, 892, 0.95, true);
  add(s, 1, 1.0, true);
  REQUIRE(s.samples.size() == 1859);

  SweepResult r = sweep_threshold(s, 0.4, 0.55, 0.01, SweepCriterion::Accuracy);
  REQUIRE(r.points.size() == 16);
  CHECK(r.points.front().tau == doctest::Approx(0.40));
  CHECK(r.points.back().tau == doctest::Approx(0.55));

  const SweepPoint& best = r.best();
  CHECK(best.tau == doctest::Approx(0.47));
  CHECK(best.cm.tp == 878);
  CHECK(best.cm.fp == 44);
  CHECK(best.cm.fn == 24);
  CHECK(best.cm.tn == 913);
  CHECK(std::abs(best.metrics.accuracy * 100.0 - 96.3) < 0.05);
  for (size_t i = 0; i < r.points.size(); ++i) {
    if (i == r.best_index) continue;
    CHECK(r.points[i].metrics.accuracy < best.metrics.accuracy);
  }

  SUBCASE("ties resolve to the lowest threshold") {
    ScoreSet flat = hand_set({0.1, 0.9}, {false, true});
    SweepResult tie = sweep_threshold(flat, 0.2, 0.8, 0.1, SweepCriterion::Accuracy);
    // every grid point classifies both correctly, so all accuracies tie at 1
    CHECK(tie.best().metrics.accuracy == 1.0);
    CHECK(tie.best().tau == doctest::Approx(0.2));
  }
  SUBCASE("the best point dominates the grid on random sets") {
    Rng rng(77);
    for (int rep = 0; rep < 10; ++rep) {
      std::vector<double> raw;
      std::vector<bool> novel;
      for (int i = 0; i < 60; ++i) {
        raw.push_back(rng.uniform());
        novel.push_back(rng.uniform() < 0.4);
      }
      novel[0] = false;
      novel[1] = true;
      ScoreSet rs = hand_set(raw, novel);
      for (auto crit : {SweepCriterion::Accuracy, SweepCriterion::F1}) {
        SweepResult sr = sweep_threshold(rs, 0.0, 1.0, 0.05, crit);
        const SweepPoint& b = sr.best();
        for (const auto& p : sr.points) {
          if (crit == SweepCriterion::Accuracy) {
            CHECK(p.metrics.accuracy <= b.metrics.accuracy);
          } else if (p.metrics.f1_defined && b.metrics.f1_defined) {
            CHECK(p.metrics.f1 <= b.metrics.f1);
          }
        }
      }
    }
  }
  SUBCASE("the f1 criterion can disagree with accuracy") {
    SweepResult rf = sweep_threshold(s, 0.4, 0.55, 0.01, SweepCriterion::F1);
    CHECK(rf.points.size() == 16);
    // f1 here scores the normal class, whose best threshold need not be the
    // accuracy winner; we only require a deterministic, dominating choice.
    for (const auto& p : rf.points)
      if (p.metrics.f1_defined) CHECK(p.metrics.f1 <= rf.best().metrics.f1);
  }
  SUBCASE("grid parameter validation") {
    CHECK_THROWS_AS(sweep_threshold(s, 0.4, 0.55, 0.0, SweepCriterion::Accuracy), ConfigError);
    CHECK_THROWS_AS(sweep_threshold(s, 0.6, 0.5, 0.01, SweepCriterion::Accuracy), ConfigError);
  }
}

TEST_CASE("roc_auc equals hand-computable values") {
  CHECK(roc_auc({0.1, 0.2, 0.8, 0.9}, {false, false, true, true}) == doctest::Approx(1.0));
  CHECK(roc_auc({0.8, 0.9, 0.1, 0.2}, {false, false, true, true}) == doctest::Approx(0.0));
  CHECK(roc_auc({0.5, 0.5, 0.5, 0.5}, {false, true, false, true}) == doctest::Approx(0.5));
  CHECK(roc_auc({0.3, 0.7}, {false, true}) == doctest::Approx(1.0));
  // one tied pair out of two: (0.5 vs 0.5) counts half
  CHECK(roc_auc({0.5, 0.2, 0.5}, {false, false, true}) == doctest::Approx(0.75));

  SUBCASE("a single class is undefined") {
    CHECK_THROWS_AS(roc_auc({0.1, 0.2}, {false, false}), NumericError);
    CHECK_THROWS_AS(roc_auc({0.1, 0.2}, {true, true}), NumericError);
    CHECK_THROWS_AS(roc_auc({0.1, 0.2, 0.3}, {true, true}), ShapeError);
  }
}

TEST_CASE("roc_auc matches brute-force pair counting on random tied fixtures") {
  Rng rng(123);
  for (int rep = 0; rep < 50; ++rep) {
    const int64_t n = rng.uniform_int(2, 200);
    std::vector<double> scores;
    std::vector<bool> novel;
    for (int64_t i = 0; i < n; ++i) {
      // coarse grid forces plenty of exact ties
      scores.push_back(static_cast<double>(rng.uniform_int(0, 9)) / 10.0);
      novel.push_back(rng.uniform() < 0.5);
    }
    novel[0] = false;
    if (n > 1) novel[static_cast<size_t>(n - 1)] = true;
    if (n == 1) continue;
    CAPTURE(rep);
    CAPTURE(n);
    CHECK(std::abs(roc_auc(scores, novel) - brute_force_auc(scores, novel)) < 1e-12);
  }
}

TEST_CASE("auc is invariant under global min-max scaling") {
  Rng rng(321);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> raw;
    std::vector<bool> novel;
    for (int i = 0; i < 80; ++i) {
      raw.push_back(rng.uniform(3.0, 19.0));
      novel.push_back(rng.uniform() < 0.3);
    }
    novel[0] = false;
    novel[1] = true;
    ScoreSet s = hand_set(raw, novel);
    const double before = roc_auc(s);
    apply_global_scaling(s);
    std::vector<double> scaled;
    for (const auto& smp : s.samples) scaled.push_back(smp.scaled);
    const double after = roc_auc(scaled, novel);
    CHECK(std::abs(before - after) < 1e-12);
  }
}
