#include <doctest.h>

#include <random>

#include "drgrade/error.hpp"
#include "drgrade/eval.hpp"
#include "drgrade/synth.hpp"

using namespace drgrade;
using namespace drgrade::eval;

namespace {

features::SplitSet fixture_splits(std::uint64_t seed, int images) {
  const auto fx = detect::synth_detections(seed, images);
  return features::build_feature_table(fx.manifest, fx.detections, {}, seed).splits;
}

ml::ClassifierConfig quick() {
  ml::ClassifierConfig c;
  c.mlp.epochs = 40;
  c.mlp.seed = 3;
  return c;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("accuracy") {
  const std::vector<int> a{0, 1, 2, 0};
  CHECK(accuracy(a, a) == 1.0);
  CHECK(accuracy(std::vector<int>{0, 1, 2, 0}, std::vector<int>{0, 1, 1, 0}) == 0.75);
  try {
    accuracy(std::vector<int>{0}, std::vector<int>{0, 1});
    FAIL("expected LengthMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::LengthMismatch);
  }
  try {
    accuracy(std::vector<int>{}, std::vector<int>{});
    FAIL("expected EmptyInput");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::EmptyInput);
  }
}

TEST_CASE("percent formatting") {
  CHECK(format_percent(0.9255) == "92.55");
  CHECK(format_percent(0.9117) == "91.17");
  CHECK(format_percent(1.0) == "100.00");
  CHECK(format_percent(0.0) == "0.00");
}

TEST_CASE("confusion matrix") {
  const std::vector<int> t{0, 1, 2, 2};
  const auto perfect = confusion_matrix(t, t);
  CHECK(perfect[0][0] == 1);
  CHECK(perfect[2][2] == 2);
  CHECK(perfect[0][1] + perfect[1][0] + perfect[2][0] == 0);
  const auto one = confusion_matrix(std::vector<int>{0}, std::vector<int>{2});
  CHECK(one[2][0] == 1);
  try {
    confusion_matrix(std::vector<int>{3}, std::vector<int>{0});
    FAIL("expected OutOfRangeLabel");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::OutOfRangeLabel);
  }
}

TEST_CASE("trace over total equals accuracy on random vectors") {
  std::mt19937 gen(1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> p(1 + gen() % 300), t(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = static_cast<int>(gen() % 3);
      t[i] = static_cast<int>(gen() % 3);
    }
    const auto m = confusion_matrix(p, t);
    CHECK(static_cast<double>(m[0][0] + m[1][1] + m[2][2]) / t.size() == accuracy(p, t));
    std::array<std::size_t, 3> rows{};
    for (int v : t) ++rows[v];
    for (int r = 0; r < 3; ++r) CHECK(m[r][0] + m[r][1] + m[r][2] == rows[r]);
  }
}

TEST_CASE("suite report on the synthetic fixture") {
  const auto splits = fixture_splits(1, 600);
  SuiteConfig cfg;
  cfg.classifiers = quick();
  const auto report = evaluate_suite(splits, cfg);
  REQUIRE(report.entries.size() == ml::kAllModelKinds.size());
  for (std::size_t i = 1; i < report.entries.size(); ++i)
    CHECK(report.entries[i - 1].test_accuracy >= report.entries[i].test_accuracy);
  for (const auto& e : report.entries) {
    CAPTURE(e.name);
    CHECK(e.error.empty());
    CHECK(e.test_accuracy > report.majority_baseline);
    std::size_t total = 0, trace = 0;
    for (int r = 0; r < 3; ++r) {
      trace += e.confusion[r][r];
      for (int c = 0; c < 3; ++c) total += e.confusion[r][c];
    }
    CHECK(total == splits.test.size());
    CHECK(static_cast<double>(trace) / total == e.test_accuracy);
  }
  const auto counts = splits.test.class_counts();
  CHECK(report.majority_baseline ==
        static_cast<double>(*std::max_element(counts.begin(), counts.end())) / splits.test.size());
  CHECK(evaluate_suite(splits, cfg).to_json() == report.to_json());
  CHECK(report.to_text().find("Neural Network") != std::string::npos);
}

TEST_CASE("single classifier suite and failing classifiers") {
  const auto splits = fixture_splits(2, 300);
  SuiteConfig cfg;
  cfg.classifiers = quick();
  cfg.enabled = {ml::ModelKind::MLP};
  CHECK(evaluate_suite(splits, cfg).entries.size() == 1);

  cfg.enabled = {ml::ModelKind::KNN, ml::ModelKind::NaiveBayes};
  cfg.classifiers.knn.k = 0;  // broken
  const auto report = evaluate_suite(splits, cfg);
  REQUIRE(report.entries.size() == 2);
  CHECK(report.entries[0].kind == ml::ModelKind::NaiveBayes);
  CHECK(report.entries[1].kind == ml::ModelKind::KNN);
  CHECK_FALSE(report.entries[1].error.empty());
  CHECK(report.to_text().find("FAILED") != std::string::npos);

  cfg.enabled.clear();
  CHECK_THROWS_AS(evaluate_suite(splits, cfg), Error);
}

TEST_CASE("default groups partition the columns") {
  const auto groups = default_feature_groups();
  CHECK(groups.size() == 5);
  CHECK_NOTHROW(check_partition(groups, features::default_feature_order()));
  auto broken = groups;
  broken.pop_back();
  CHECK_THROWS_AS(check_partition(broken, features::default_feature_order()), Error);
  broken = groups;
  broken[0].columns.push_back("count_ex");
  CHECK_THROWS_AS(check_partition(broken, features::default_feature_order()), Error);
}

TEST_CASE("ablation with a bad partition fails before training") {
  const auto splits = fixture_splits(3, 200);
  std::vector<FeatureGroup> groups{{"all_but_one", {"eye_code"}}};
  CHECK_THROWS_AS(ablation(splits, ml::ModelKind::MLP, quick(), groups), Error);
}

TEST_CASE("ablation: weighted area sums dominate, a constant group is inert") {
  auto splits = fixture_splits(4, 800);
  // Add a constant all-zero column as its own group.
  for (auto* t : {&splits.train, &splits.val, &splits.test}) {
    t->feature_order.push_back("zero");
    for (auto& r : t->rows) r.values.push_back(0.0);
    t->scaler.reset();
  }
  auto groups = default_feature_groups();
  groups.push_back({"zero", {"zero"}});
  const auto report = ablation(splits, ml::ModelKind::DecisionTree, quick(), groups);
  REQUIRE(report.entries.size() == 6);
  CHECK(report.entries.front().group == "weighted_area_sums");
  for (std::size_t i = 1; i < report.entries.size(); ++i)
    CHECK(report.entries[i - 1].delta >= report.entries[i].delta);
  for (const auto& e : report.entries) {
    CHECK(e.delta == e.baseline_accuracy - e.ablated_accuracy);
    if (e.group == "zero") CHECK(std::abs(e.delta) <= 0.02);
  }
  CHECK(report.to_json().find("\"weighted_area_sums\"") != std::string::npos);
}

}
