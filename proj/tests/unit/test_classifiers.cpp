#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "drgrade/adam.hpp"
#include "drgrade/classifiers.hpp"
#include "drgrade/error.hpp"
#include "drgrade/gradcheck.hpp"
#include "drgrade/random.hpp"

using namespace drgrade;
using namespace drgrade::ml;

namespace {

Dataset blobs(int per_class, std::size_t dims, double separation, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Dataset d;
  d.n_features = dims;
  for (int c = 0; c < 3; ++c) {
    // centres on the vertices of an equilateral triangle with side `separation`
    const double angle = 2.0 * std::numbers::pi * c / 3.0;
    const double r = separation / std::sqrt(3.0);
    for (int i = 0; i < per_class; ++i) {
      std::vector<double> x(dims);
      for (auto& v : x) v = nd(gen);
      x[0] += r * std::cos(angle);
      x[1] += r * std::sin(angle);
      d.push_back(x, c);
    }
  }
  return d;
}

double train_accuracy(const auto& model, const Dataset& d) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < d.size(); ++i) hits += model.predict(d.row(i)) == d.y[i];
  return static_cast<double>(hits) / static_cast<double>(d.size());
}

Dataset xor_data() {
  Dataset d;
  d.n_features = 2;
  d.push_back(std::vector<double>{0, 0}, 0);
  d.push_back(std::vector<double>{1, 1}, 0);
  d.push_back(std::vector<double>{0, 1}, 1);
  d.push_back(std::vector<double>{1, 0}, 1);
  return d;
}

features::FeatureTable blob_table(int per_class, std::uint64_t seed) {
  const auto d = blobs(per_class, 13, 5.0, seed);
  features::FeatureTable t;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto r = d.row(i);
    t.rows.push_back({"b" + std::to_string(i), {r.begin(), r.end()}, d.y[i]});
  }
  return t;
}

}  // namespace

TEST_SUITE("classifiers") {

TEST_CASE("adam matches the reference recursion for 100 scalar steps") {
  AdamConfig cfg;
  cfg.learning_rate = 0.05;
  AdamState state(1);
  std::vector<double> p{0.0};
  double rp = 0.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 100; ++t) {
    const double g = 2.0 * (p[0] - 3.0);
    adam_update(p, std::vector<double>{g}, state, cfg);
    const double rg = 2.0 * (rp - 3.0);
    m = 0.9 * m + 0.1 * rg;
    v = 0.999 * v + 0.001 * rg * rg;
    const double mh = m / (1.0 - std::pow(0.9, t));
    const double vh = v / (1.0 - std::pow(0.999, t));
    rp -= 0.05 * mh / (std::sqrt(vh) + 1e-8);
    CHECK(std::abs(p[0] - rp) <= 1e-12);
  }
  CHECK(state.t == 100);
}

TEST_CASE("mlp gradient check on the 13-75-75-3 network") {
  const auto d = blobs(20, 13, 3.0, 1);
  const auto net = Mlp::initialized({13, 75, 75, 3}, 7);
  std::vector<std::size_t> batch(d.size());
  for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = i;
  CHECK(mlp_gradient_check(net, d, batch, 3) < 1e-4);
}

TEST_CASE("mlp loss is summed over the batch") {
  const auto d = blobs(5, 13, 3.0, 2);
  const auto net = Mlp::initialized({13, 8, 3}, 1);
  const std::vector<std::size_t> once{0, 4, 9};
  const std::vector<std::size_t> twice{0, 4, 9, 0, 4, 9};
  std::vector<double> g1(net.params().size()), g2(net.params().size());
  const double l1 = net.loss_and_gradient(d, once, g1);
  const double l2 = net.loss_and_gradient(d, twice, g2);
  CHECK(l2 == doctest::Approx(2 * l1));
  for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g2[i] == doctest::Approx(2 * g1[i]));
  CHECK(net.loss(d, once) == doctest::Approx(l1));
}

TEST_CASE("mlp learns separable blobs and is deterministic") {
  const auto d = blobs(100, 13, 5.0, 4);
  MlpConfig cfg;
  cfg.epochs = 30;
  cfg.seed = 5;
  const auto a = train_mlp(d, cfg);
  const auto b = train_mlp(d, cfg);
  CHECK(train_accuracy(a, d) >= 0.95);
  CHECK(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
  CHECK(a.layer_sizes() == std::vector<int>{13, 75, 75, 3});
}

TEST_CASE("mlp rejects bad configs and labels") {
  MlpConfig cfg;
  cfg.hidden_sizes = {};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.learning_rate = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  Dataset d;
  d.n_features = 1;
  d.push_back(std::vector<double>{1}, 5);
  CHECK_THROWS_AS(train_mlp(d, MlpConfig{}), Error);
}

TEST_CASE("logistic regression gradient check and fit") {
  const auto d = blobs(30, 4, 4.0, 6);
  std::vector<double> params(3 * 5);
  Rng rng(1);
  for (auto& p : params) p = rng.normal(0, 0.5);
  LossFunction fn = [&](std::span<const double> p, std::span<double> g) {
    return LogisticRegression::loss_and_gradient(d, p, g, 1e-2);
  };
  CHECK(finite_difference_check(fn, params, {200, 1e-5, 2}) < 1e-6);
  const auto model = LogisticRegression::fit(d, LogRegConfig{}, 3);
  CHECK(train_accuracy(model, d) >= 0.9);
}

TEST_CASE("naive Bayes matches the closed-form posterior") {
  const auto d = blobs(15, 3, 3.0, 8);
  const NaiveBayesConfig cfg;
  const auto nb = NaiveBayes::fit(d, cfg, 3);

  // Priors, means and population variances written out by hand.
  const std::size_t n = d.size(), dims = 3;
  std::vector<double> gm(dims, 0), gv(dims, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < dims; ++j) gm[j] += d.row(i)[j] / n;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < dims; ++j) gv[j] += std::pow(d.row(i)[j] - gm[j], 2) / n;
  const double eps = 1e-9 * *std::max_element(gv.begin(), gv.end());
  CHECK(nb.epsilon() == doctest::Approx(eps).epsilon(1e-12));

  double mean[3][3] = {}, var[3][3] = {}, cnt[3] = {};
  for (std::size_t i = 0; i < n; ++i) {
    cnt[d.y[i]] += 1;
    for (std::size_t j = 0; j < dims; ++j) mean[d.y[i]][j] += d.row(i)[j];
  }
  for (int c = 0; c < 3; ++c)
    for (std::size_t j = 0; j < dims; ++j) mean[c][j] /= cnt[c];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < dims; ++j) var[d.y[i]][j] += std::pow(d.row(i)[j] - mean[d.y[i]][j], 2);
  for (int c = 0; c < 3; ++c)
    for (std::size_t j = 0; j < dims; ++j) var[c][j] = var[c][j] / cnt[c] + eps;

  for (const auto& x : {std::vector<double>{0.1, -0.3, 0.2}, std::vector<double>{1.5, 1.0, -1.0},
                        std::vector<double>{-2, 0.5, 0}}) {
    double joint[3], total = 0;
    for (int c = 0; c < 3; ++c) {
      double p = cnt[c] / n;
      for (std::size_t j = 0; j < dims; ++j)
        p *= std::exp(-std::pow(x[j] - mean[c][j], 2) / (2 * var[c][j])) / std::sqrt(2 * std::numbers::pi * var[c][j]);
      joint[c] = p;
      total += p;
    }
    const auto post = nb.posterior(x);
    for (int c = 0; c < 3; ++c) CHECK(std::abs(post[c] - joint[c] / total) <= 1e-9);
  }
}

TEST_CASE("knn with k = 1 has perfect training accuracy") {
  const auto d = blobs(40, 5, 1.0, 9);
  CHECK(train_accuracy(Knn::fit(d, {1}, 3), d) == 1.0);
  CHECK(train_accuracy(Knn::fit(d, {5}, 3), d) > 0.5);
}

TEST_CASE("knn ties go to the smallest label") {
  Dataset d;
  d.n_features = 1;
  d.push_back(std::vector<double>{-1}, 2);
  d.push_back(std::vector<double>{1}, 1);
  CHECK(Knn::fit(d, {2}, 3).predict(std::vector<double>{0}) == 1);
}

TEST_CASE("decision tree fits XOR") {
  const auto d = xor_data();
  const auto tree = DecisionTree::fit(d, TreeConfig{}, 3);
  CHECK(train_accuracy(tree, d) == 1.0);
  CHECK(tree.depth() == 2);
}

TEST_CASE("decision tree respects max_depth and min_leaf") {
  const auto d = blobs(50, 4, 1.0, 10);
  TreeConfig cfg;
  cfg.max_depth = 3;
  CHECK(DecisionTree::fit(d, cfg, 3).depth() <= 3);
  cfg = {};
  cfg.max_depth = 64;
  cfg.min_leaf = 1;
  CHECK(train_accuracy(DecisionTree::fit(d, cfg, 3), d) == 1.0);
}

TEST_CASE("adaboost improves on a single stump") {
  const auto d = blobs(60, 3, 3.0, 11);
  const auto boost = AdaBoost::fit(d, AdaBoostConfig{}, 3);
  CHECK(boost.rounds() >= 1);
  std::size_t one = 0, all = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    one += boost.predict(d.row(i), 1) == d.y[i];
    all += boost.predict(d.row(i)) == d.y[i];
  }
  CHECK(all >= one);
  CHECK(static_cast<double>(all) / d.size() > 0.85);
}

TEST_CASE("smo matches brute-force dual search on four points") {
  const std::vector<std::array<double, 2>> pts = {{0, 0}, {-1, 0.5}, {2, 0}, {3, 1}};
  const std::vector<double> y = {-1, -1, 1, 1};
  std::vector<double> gram(16);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) gram[i * 4 + j] = pts[i][0] * pts[j][0] + pts[i][1] * pts[j][1];
  auto dual = [&](const std::array<double, 4>& a) {
    double s = a[0] + a[1] + a[2] + a[3], q = 0;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) q += a[i] * a[j] * y[i] * y[j] * gram[i * 4 + j];
    return s - 0.5 * q;
  };
  const double c = 1.0;
  double best = -1e9;
  std::array<double, 4> best_a{};
  const int steps = 100;
  for (int i = 0; i <= steps; ++i)
    for (int j = 0; j <= steps; ++j)
      for (int k = 0; k <= steps; ++k) {
        std::array<double, 4> a{c * i / steps, c * j / steps, c * k / steps, 0};
        a[3] = a[0] + a[1] - a[2];
        if (a[3] < 0 || a[3] > c) continue;
        const double v = dual(a);
        if (v > best) {
          best = v;
          best_a = a;
        }
      }

  const auto sol = solve_smo(gram, y, {c, 1e-3, 100000});
  CHECK(sol.converged);
  std::array<double, 4> a{sol.alpha[0], sol.alpha[1], sol.alpha[2], sol.alpha[3]};
  CHECK(dual(a) >= best - 1e-6);
  for (int i = 0; i < 4; ++i) CHECK(std::abs(a[i] - best_a[i]) <= 0.02);
  CHECK(a[0] == doctest::Approx(0.5).epsilon(0.01));
  CHECK(a[2] == doctest::Approx(0.5).epsilon(0.01));

  // KKT conditions
  double balance = 0;
  for (int i = 0; i < 4; ++i) {
    balance += a[i] * y[i];
    double f = sol.bias;
    for (int j = 0; j < 4; ++j) f += a[j] * y[j] * gram[j * 4 + i];
    const double m = y[i] * f;
    if (a[i] <= 1e-8) CHECK(m >= 1 - 1e-3);
    else if (a[i] >= c - 1e-8) CHECK(m <= 1 + 1e-3);
    else CHECK(std::abs(m - 1) <= 1e-3);
  }
  CHECK(std::abs(balance) <= 1e-9);
}

TEST_CASE("kernel and linear SVMs separate blobs") {
  const auto d = blobs(40, 3, 5.0, 12);
  SvmConfig cfg;
  for (auto kind : {KernelKind::Linear, KernelKind::Polynomial, KernelKind::Rbf}) {
    const auto svm = KernelSvm::fit(d, Kernel{kind}, cfg, 3);
    CHECK(svm.converged());
    CHECK(train_accuracy(svm, d) >= 0.95);
  }
  CHECK(train_accuracy(LinearSvm::fit(d, cfg, 3), d) >= 0.95);
}

TEST_CASE("kernel values") {
  const std::vector<double> a{1, 2}, b{3, -1};
  CHECK(Kernel{KernelKind::Linear}(a, b) == 1.0);
  CHECK(Kernel{KernelKind::Polynomial, 0.5, 1.0, 3}(a, b) == doctest::Approx(std::pow(1.5, 3)));
  CHECK(Kernel{KernelKind::Rbf, 0.5}(a, b) == doctest::Approx(std::exp(-0.5 * 13)));
}

TEST_CASE("every classifier copes with a single-class training set") {
  auto t = blob_table(10, 13);
  for (auto& r : t.rows) r.label = 1;
  for (auto kind : kAllModelKinds) {
    CAPTURE(kind_code(kind));
    const auto m = fit_model(kind, t, ClassifierConfig{});
    for (int p : predict(m, t)) CHECK(p == 1);
  }
}

TEST_CASE("serialization round trip for every kind") {
  const auto t = blob_table(15, 14);
  for (auto kind : kAllModelKinds) {
    CAPTURE(kind_code(kind));
    const auto m = fit_model(kind, t, ClassifierConfig{});
    const auto text = serialize_model(m);
    const auto back = deserialize_model(text);
    CHECK(back.kind == kind);
    CHECK(predict(back, t) == predict(m, t));
    CHECK(serialize_model(back) == text);
  }
}

TEST_CASE("unknown model format versions are rejected") {
  const auto m = fit_model(ModelKind::KNN, blob_table(5, 15), ClassifierConfig{});
  auto doc = nlohmann::json::parse(serialize_model(m));
  doc["format_version"] = 99;
  try {
    deserialize_model(doc.dump());
    FAIL("expected UnsupportedFormat");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnsupportedFormat);
  }
  doc.erase("format_version");
  CHECK_THROWS_AS(deserialize_model(doc.dump()), Error);
}

TEST_CASE("predict rejects a different feature order") {
  auto t = blob_table(5, 16);
  const auto m = fit_model(ModelKind::NaiveBayes, t, ClassifierConfig{});
  std::swap(t.feature_order[0], t.feature_order[1]);
  try {
    predict(m, t);
    FAIL("expected SchemaMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::SchemaMismatch);
  }
}

TEST_CASE("kind codes and names") {
  for (auto kind : kAllModelKinds) CHECK(parse_kind(kind_code(kind)) == kind);
  CHECK(display_name(ModelKind::MLP) == "Neural Network");
  CHECK(display_name(ModelKind::SvmRbf) == "SVM - RBF");
  CHECK_THROWS_AS(parse_kind("forest"), Error);
  CHECK(ClassifierConfig{}.tree.max_depth == 10);
  CHECK(ClassifierConfig{}.knn.k == 5);
  CHECK(ClassifierConfig{}.adaboost.rounds == 50);
  CHECK(ClassifierConfig{}.svm.c == 1.0);
  CHECK(ClassifierConfig{}.mlp.hidden_sizes == std::vector<int>{75, 75});
  CHECK(ClassifierConfig{}.mlp.learning_rate == 0.001);
}

}
