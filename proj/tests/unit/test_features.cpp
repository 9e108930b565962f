#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "drgrade/error.hpp"
#include "drgrade/features.hpp"
#include "drgrade/synth.hpp"

using namespace drgrade;
using namespace drgrade::features;
using detect::Eye;
using detect::LesionInstance;
using detect::LesionType;

namespace {

LesionInstance lesion(const std::string& id, LesionType t, double cx, double cy, double area,
                      double conf) {
  LesionInstance l;
  l.image_id = id;
  l.lesion_type = t;
  l.bbox = {cx - 5, cy - 5, cx + 5, cy + 5};
  l.center = {cx, cy};
  l.mask_area = area;
  l.confidence = conf;
  return l;
}

FeatureTable table_of(const std::vector<std::vector<double>>& cols, const std::vector<int>& labels) {
  FeatureTable t;
  t.feature_order.clear();
  for (std::size_t c = 0; c < cols.size(); ++c) t.feature_order.push_back("f" + std::to_string(c));
  for (std::size_t r = 0; r < labels.size(); ++r) {
    ImageFeatureRow row;
    row.image_id = "r" + std::to_string(r);
    row.label = labels[r];
    for (const auto& col : cols) row.values.push_back(col[r]);
    t.rows.push_back(row);
  }
  return t;
}

FeatureTable labelled(std::array<int, 3> counts) {
  FeatureTable t;
  int id = 0;
  for (int label = 0; label < 3; ++label)
    for (int i = 0; i < counts[static_cast<std::size_t>(label)]; ++i) {
      ImageFeatureRow r;
      r.image_id = "id" + std::to_string(id++);
      r.values.assign(13, 0.0);
      r.label = label;
      t.rows.push_back(r);
    }
  return t;
}

bool close_rel(double a, double b) {
  return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
}

// Per-image recomputation straight from the definitions.
std::vector<double> naive_row(const detect::ImageManifestEntry& e, const detect::Detections& all) {
  std::vector<double> v{e.eye == Eye::Right ? 1.0 : 0.0};
  std::array<double, 2> count{}, wsum{};
  std::array<std::array<double, 4>, 2> stats{};
  for (int t = 0; t < 2; ++t) {
    std::vector<double> xs, ys;
    for (const auto& l : all) {
      if (l.image_id != e.image_id || static_cast<int>(l.lesion_type) != t) continue;
      xs.push_back(l.center[0]);
      ys.push_back(l.center[1]);
      wsum[t] += l.confidence * l.mask_area;
    }
    count[t] = static_cast<double>(xs.size());
    if (xs.empty()) continue;
    auto mean = [](const std::vector<double>& z) {
      double s = 0;
      for (double q : z) s += q;
      return s / static_cast<double>(z.size());
    };
    auto sd = [&](const std::vector<double>& z) {
      const double m = mean(z);
      double s = 0;
      for (double q : z) s += (q - m) * (q - m);
      return std::sqrt(s / static_cast<double>(z.size()));
    };
    stats[t] = {mean(xs), mean(ys), sd(xs), sd(ys)};
  }
  v.push_back(count[0]);
  v.push_back(count[1]);
  v.push_back(wsum[0]);
  v.push_back(wsum[1]);
  for (int t = 0; t < 2; ++t)
    for (double s : stats[t]) v.push_back(s);
  return v;
}

}  // namespace

TEST_SUITE("features") {

TEST_CASE("column order") {
  const auto order = default_feature_order();
  REQUIRE(order.size() == 13);
  CHECK(order.front() == "eye_code");
  CHECK(order[3] == "wsum_ex");
  CHECK(order.back() == "std_cy_ma");
}

TEST_CASE("pruning is strict and EX-only") {
  const detect::Detections in = {lesion("a", LesionType::EX, 10, 10, 20, 0.64),
                                 lesion("a", LesionType::EX, 10, 10, 20, 0.65),
                                 lesion("a", LesionType::MA, 10, 10, 20, 0.40),
                                 lesion("a", LesionType::EX, 10, 10, 20, 0.9)};
  const auto out = prune_low_confidence(in);
  REQUIRE(out.size() == 3);
  CHECK(out[0].confidence == 0.65);
  CHECK(out[1].lesion_type == LesionType::MA);
  CHECK(out[2].confidence == 0.9);
  CHECK(prune_low_confidence({}).empty());
}

TEST_CASE("weighted area") {
  CHECK(weighted_area(lesion("a", LesionType::EX, 10, 10, 120, 0.8)) == doctest::Approx(96.0));
  CHECK(weighted_area(lesion("a", LesionType::EX, 10, 10, 77, 1.0)) == 77.0);
  CHECK(weighted_area(lesion("a", LesionType::MA, 10, 10, 10, 0.35)) == doctest::Approx(3.5));
}

TEST_CASE("severity remap") {
  CHECK(remap_severity(0) == 0);
  CHECK(remap_severity(1) == 0);
  CHECK(remap_severity(2) == 1);
  CHECK(remap_severity(3) == 2);
  CHECK(remap_severity(4) == 2);
  CHECK_THROWS_AS(remap_severity(5), Error);
  CHECK_THROWS_AS(remap_severity(-1), Error);
}

TEST_CASE("aggregation worked example") {
  const detect::Manifest m = {{"img", Eye::Right, 3}, {"healthy", Eye::Left, 0}};
  const detect::Detections d = {lesion("img", LesionType::EX, 10, 20, 50, 1.0),
                                lesion("img", LesionType::EX, 30, 40, 50, 1.0),
                                lesion("img", LesionType::MA, 7, 9, 4, 0.5)};
  const auto rows = aggregate_per_image(m, d);
  REQUIRE(rows.size() == 2);
  const auto& r = rows[0].values;
  CHECK(rows[0].label == 2);
  CHECK(r[0] == 1.0);
  CHECK(r[1] == 2);
  CHECK(r[2] == 1);
  CHECK(r[3] == 100.0);
  CHECK(r[4] == 2.0);
  CHECK(r[5] == 20.0);
  CHECK(r[6] == 30.0);
  CHECK(r[7] == 10.0);
  CHECK(r[8] == 10.0);
  CHECK(r[9] == 7.0);
  CHECK(r[10] == 9.0);
  CHECK(r[11] == 0.0);  // singleton std
  CHECK(r[12] == 0.0);
  for (double v : rows[1].values) CHECK(v == 0.0);
  CHECK(rows[1].label == 0);
}

TEST_CASE("orphan instances are rejected") {
  const detect::Manifest m = {{"a", Eye::Left, 1}};
  try {
    aggregate_per_image(m, {lesion("b", LesionType::MA, 10, 10, 5, 0.5)});
    FAIL("expected OrphanInstance");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::OrphanInstance);
  }
}

TEST_CASE("aggregation matches the naive oracle on random fixtures") {
  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 5; ++trial) {
    detect::Manifest m;
    for (int i = 0; i < 200; ++i)
      m.push_back({"i" + std::to_string(i), gen() % 2 ? Eye::Left : Eye::Right, static_cast<int>(gen() % 5)});
    detect::Detections d;
    std::uniform_real_distribution<double> pos(10, 1000), area(1, 90), conf(0.35, 1.0);
    const int n = static_cast<int>(gen() % 1000) + 1;
    for (int k = 0; k < n; ++k)
      d.push_back(lesion(m[gen() % m.size()].image_id, gen() % 2 ? LesionType::EX : LesionType::MA,
                         pos(gen), pos(gen), area(gen), conf(gen)));
    const auto rows = aggregate_per_image(m, d);
    REQUIRE(rows.size() == m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
      const auto expect = naive_row(m[i], d);
      CHECK(rows[i].image_id == m[i].image_id);
      for (std::size_t c = 0; c < 13; ++c) CHECK(close_rel(rows[i].values[c], expect[c]));
    }
  }
}

TEST_CASE("z-score boundary cases") {
  // mu = 20, s = 40: z of 100 is exactly 2, kept.
  CHECK(zscore_filter(table_of({{0, 0, 0, 0, 100}}, {0, 0, 0, 0, 0}), 2.0).size() == 5);
  // mu = 10, s = 30: z = 3, dropped.
  const auto t = zscore_filter(table_of({{0, 0, 0, 0, 0, 0, 0, 0, 0, 100}}, std::vector<int>(10, 0)), 2.0);
  CHECK(t.size() == 9);
  for (const auto& r : t.rows) CHECK(r.values[0] == 0.0);
  // identical rows: zero variance never drops
  CHECK(zscore_filter(table_of({{3, 3, 3}, {1, 1, 1}}, {0, 1, 2})).size() == 3);
}

TEST_CASE("z-score drops on any column, single pass") {
  std::mt19937 gen(5);
  std::normal_distribution<double> nd(0, 1);
  std::vector<std::vector<double>> cols(4, std::vector<double>(300));
  for (auto& c : cols)
    for (auto& v : c) v = nd(gen);
  const auto table = table_of(cols, std::vector<int>(300, 0));
  const double k = 2.0;
  std::vector<double> mu(4), sd(4);
  for (int c = 0; c < 4; ++c) {
    double s = 0;
    for (double v : cols[c]) s += v;
    mu[c] = s / 300;
    double q = 0;
    for (double v : cols[c]) q += (v - mu[c]) * (v - mu[c]);
    sd[c] = std::sqrt(q / 300);
  }
  std::set<std::string> keep;
  for (int r = 0; r < 300; ++r) {
    bool ok = true;
    for (int c = 0; c < 4; ++c) ok = ok && std::abs(cols[c][r] - mu[c]) <= k * sd[c];
    if (ok) keep.insert("r" + std::to_string(r));
  }
  const auto out = zscore_filter(table, k);
  std::set<std::string> got;
  for (const auto& r : out.rows) got.insert(r.image_id);
  CHECK(got == keep);
  CHECK(got.size() < 300);
}

TEST_CASE("undersampling") {
  auto counts = [](const FeatureTable& t) { return t.class_counts(); };
  CHECK(counts(undersample_majority(labelled({1000, 300, 200}), 1)) == std::array<std::size_t, 3>{300, 300, 200});
  CHECK(counts(undersample_majority(labelled({100, 150, 120}), 1)) == std::array<std::size_t, 3>{100, 150, 120});

  const auto a = undersample_majority(labelled({1000, 300, 200}), 9);
  const auto b = undersample_majority(labelled({1000, 300, 200}), 9);
  CHECK(a.rows == b.rows);
  const auto c = undersample_majority(labelled({1000, 300, 200}), 10);
  CHECK(a.rows != c.rows);

  // survivors keep their relative order
  std::vector<int> ids;
  for (const auto& r : a.rows) ids.push_back(std::stoi(r.image_id.substr(2)));
  CHECK(std::is_sorted(ids.begin(), ids.end()));
}

TEST_CASE("min-max normalization") {
  const auto out = minmax_normalize(table_of({{2, 4, 6}, {5, 5, 5}}, {0, 1, 2}));
  CHECK(out.rows[0].values == std::vector<double>{0.0, 0.0});
  CHECK(out.rows[1].values == std::vector<double>{0.5, 0.0});
  CHECK(out.rows[2].values == std::vector<double>{1.0, 0.0});
  REQUIRE(out.scaler);
  CHECK(out.scaler->ranges[0] == std::pair<double, double>{2, 6});
  CHECK_THROWS_AS(minmax_normalize(FeatureTable{}), Error);
}

TEST_CASE("split sizes and disjointness") {
  for (auto [n, tr, va, te] : std::vector<std::array<int, 4>>{{1000, 800, 100, 100}, {10, 8, 1, 1}, {15, 12, 1, 2}}) {
    const auto s = split(labelled({n, 0, 0}), 3);
    CHECK(static_cast<int>(s.train.size()) == tr);
    CHECK(static_cast<int>(s.val.size()) == va);
    CHECK(static_cast<int>(s.test.size()) == te);
    std::set<std::string> ids;
    for (const auto* t : {&s.train, &s.val, &s.test})
      for (const auto& r : t->rows) ids.insert(r.image_id);
    CHECK(static_cast<int>(ids.size()) == n);
  }
  CHECK_THROWS_AS(split(labelled({9, 0, 0}), 1), Error);
  CHECK(split(labelled({50, 0, 0}), 4).test.rows == split(labelled({50, 0, 0}), 4).test.rows);
}

TEST_CASE("full stage on the synthetic fixture") {
  const auto fx = detect::synth_detections(1, 500);
  const auto a = build_feature_table(fx.manifest, fx.detections, {}, 1);
  const auto b = build_feature_table(fx.manifest, fx.detections, {}, 1);
  const auto& c = a.counts;
  CHECK(c.aggregated == 500);
  CHECK(c.after_zscore <= c.aggregated);
  CHECK(c.after_undersample <= c.after_zscore);
  CHECK(a.splits.train.size() + a.splits.val.size() + a.splits.test.size() == c.after_undersample);

  std::ostringstream sa, sb;
  write_table_csv(sa, a.splits.train);
  write_table_csv(sb, b.splits.train);
  CHECK(sa.str() == sb.str());

  for (const auto* t : {&a.splits.train, &a.splits.val, &a.splits.test})
    for (const auto& r : t->rows)
      for (double v : r.values) CHECK((v >= 0.0 && v <= 1.0));

  // Undo the scaling and compare each row with the naive oracle.
  std::map<std::string, const detect::ImageManifestEntry*> by_id;
  for (const auto& e : fx.manifest) by_id[e.image_id] = &e;
  const auto pruned = prune_low_confidence(fx.detections);
  const auto& sc = *a.splits.train.scaler;
  for (const auto& r : a.splits.test.rows) {
    const auto expect = naive_row(*by_id.at(r.image_id), pruned);
    for (std::size_t col = 0; col < 13; ++col) {
      const auto [lo, hi] = sc.ranges[col];
      const double raw = hi > lo ? lo + r.values[col] * (hi - lo) : lo;
      CHECK(std::abs(raw - expect[col]) <= 1e-9 * std::max(1.0, std::abs(expect[col])) + 1e-9 * (hi - lo));
    }
  }
}

TEST_CASE("normalized columns span [0, 1] before the split") {
  const auto fx = detect::synth_detections(2, 400);
  const auto build = build_feature_table(fx.manifest, fx.detections, {}, 2);
  for (std::size_t c = 0; c < 13; ++c) {
    double lo = 1e9, hi = -1e9;
    for (const auto& r : build.table.rows) {
      lo = std::min(lo, r.values[c]);
      hi = std::max(hi, r.values[c]);
    }
    const bool constant = build.table.scaler->ranges[c].first == build.table.scaler->ranges[c].second;
    CHECK(lo == 0.0);
    CHECK(hi == (constant ? 0.0 : 1.0));
  }
}

TEST_CASE("train-only scaler fits the training split") {
  const auto fx = detect::synth_detections(4, 300);
  FeatureConfig cfg;
  cfg.scaler_fit = ScalerFit::TrainOnly;
  const auto build = build_feature_table(fx.manifest, fx.detections, cfg, 4);
  for (std::size_t c = 0; c < 13; ++c) {
    double hi = 0;
    for (const auto& r : build.splits.train.rows) hi = std::max(hi, r.values[c]);
    const bool constant = build.splits.train.scaler->ranges[c].first == build.splits.train.scaler->ranges[c].second;
    CHECK(hi == (constant ? 0.0 : 1.0));
  }
}

TEST_CASE("permuting detection lines does not change the rows") {
  auto fx = detect::synth_detections(6, 200);
  auto shuffled = fx.detections;
  std::mt19937 gen(1);
  std::shuffle(shuffled.begin(), shuffled.end(), gen);
  const auto a = aggregate_per_image(fx.manifest, prune_low_confidence(fx.detections));
  const auto b = aggregate_per_image(fx.manifest, prune_low_confidence(shuffled));
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t c = 0; c < 13; ++c) CHECK(close_rel(a[i].values[c], b[i].values[c]));
}

TEST_CASE("CSV and scaler round trip") {
  const auto fx = detect::synth_detections(8, 100);
  const auto build = build_feature_table(fx.manifest, fx.detections, {}, 8);
  std::stringstream s;
  write_table_csv(s, build.splits.train);
  const auto back = read_table_csv(s);
  CHECK(back.feature_order == build.splits.train.feature_order);
  CHECK(back.rows == build.splits.train.rows);
  CHECK(scaler_from_json(scaler_to_json(*build.table.scaler)) == *build.table.scaler);

  std::istringstream bad_header("id,eye_code,label\nx,1,0\n");
  CHECK_THROWS_AS(read_table_csv(bad_header), Error);
  std::istringstream short_row("image_id,eye_code,label\nx,0\n");
  CHECK_THROWS_AS(read_table_csv(short_row), Error);
  std::istringstream bad_label("image_id,eye_code,label\nx,1,3\n");
  CHECK_THROWS_AS(read_table_csv(bad_label), Error);
}

TEST_CASE("select_columns keeps the requested columns") {
  const auto fx = detect::synth_detections(9, 100);
  const auto t = build_feature_table(fx.manifest, fx.detections, {}, 9).table;
  const auto sub = t.select_columns({"wsum_ma", "eye_code"});
  CHECK(sub.feature_order == std::vector<std::string>{"wsum_ma", "eye_code"});
  CHECK(sub.rows[0].values[0] == t.rows[0].values[4]);
  CHECK(sub.rows[0].values[1] == t.rows[0].values[0]);
  CHECK_THROWS_AS(t.select_columns({"nope"}), Error);
}

}
