#include "drgrade/decision_tree.hpp"

#include <algorithm>
#include <numeric>

#include "drgrade/error.hpp"

namespace drgrade::ml {

void TreeConfig::validate() const {
  if (max_depth < 0) throw Error(Errc::ConfigError, "tree max_depth must be >= 0");
  if (min_leaf < 1) throw Error(Errc::ConfigError, "tree min_leaf must be >= 1");
}

namespace {

double gini_mass(std::span<const double> counts, double total) {
  if (total <= 0.0) return 0.0;
  double sq = 0.0;
  for (double c : counts) sq += c * c;
  return total - sq / total;  // total * gini
}

int majority(std::span<const double> counts) {
  int best = 0;
  for (std::size_t k = 1; k < counts.size(); ++k) {
    if (counts[k] > counts[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
  }
  return best;
}

class Builder {
 public:
  Builder(const Dataset& data, std::span<const double> weights, const TreeConfig& cfg,
          int n_classes)
      : data_(data), weights_(weights), cfg_(cfg), k_(static_cast<std::size_t>(n_classes)) {}

  std::vector<DecisionTree::Node> run() {
    std::vector<std::size_t> all(data_.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    grow(all, 0);
    return std::move(nodes_);
  }

 private:
  int grow(std::vector<std::size_t>& idx, int depth) {
    std::vector<double> counts(k_, 0.0);
    double total = 0.0;
    for (auto i : idx) {
      counts[static_cast<std::size_t>(data_.y[i])] += weights_[i];
      total += weights_[i];
    }
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    nodes_[static_cast<std::size_t>(id)].label = majority(counts);

    const bool pure = std::count_if(counts.begin(), counts.end(),
                                    [](double c) { return c > 0.0; }) <= 1;
    const auto min_leaf = static_cast<std::size_t>(cfg_.min_leaf);
    if (pure || depth >= cfg_.max_depth || idx.size() < 2 * min_leaf) return id;

    int best_feature = -1;
    double best_threshold = 0.0;
    double best_impurity = 0.0;
    std::vector<std::size_t> order = idx;
    std::vector<double> left(k_);
    std::vector<double> right(k_);
    for (std::size_t f = 0; f < data_.n_features; ++f) {
      auto value = [&](std::size_t i) { return data_.x[i * data_.n_features + f]; };
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return value(a) < value(b); });
      std::fill(left.begin(), left.end(), 0.0);
      double left_total = 0.0;
      for (std::size_t pos = 0; pos + 1 < order.size(); ++pos) {
        const auto i = order[pos];
        left[static_cast<std::size_t>(data_.y[i])] += weights_[i];
        left_total += weights_[i];
        const double v = value(i);
        const double next = value(order[pos + 1]);
        if (!(v < next)) continue;
        const std::size_t n_left = pos + 1;
        if (n_left < min_leaf || order.size() - n_left < min_leaf) continue;
        for (std::size_t c = 0; c < k_; ++c) right[c] = counts[c] - left[c];
        const double impurity =
            gini_mass(left, left_total) + gini_mass(right, total - left_total);
        if (best_feature < 0 || impurity < best_impurity) {
          best_feature = static_cast<int>(f);
          best_impurity = impurity;
          double mid = v + (next - v) / 2.0;
          if (!(mid < next)) mid = v;
          best_threshold = mid;
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> lhs;
    std::vector<std::size_t> rhs;
    for (auto i : idx) {
      (data_.x[i * data_.n_features + static_cast<std::size_t>(best_feature)] <= best_threshold
           ? lhs
           : rhs)
          .push_back(i);
    }
    idx.clear();
    idx.shrink_to_fit();
    const int l = grow(lhs, depth + 1);
    const int r = grow(rhs, depth + 1);
    auto& node = nodes_[static_cast<std::size_t>(id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  const Dataset& data_;
  std::span<const double> weights_;
  TreeConfig cfg_;
  std::size_t k_;
  std::vector<DecisionTree::Node> nodes_;
};

}  // namespace

DecisionTree DecisionTree::fit(const Dataset& data, const TreeConfig& cfg, int n_classes) {
  const std::vector<double> unit(data.size(), 1.0);
  return fit(data, unit, cfg, n_classes);
}

DecisionTree DecisionTree::fit(const Dataset& data, std::span<const double> weights,
                               const TreeConfig& cfg, int n_classes) {
  cfg.validate();
  if (data.size() == 0) throw Error(Errc::EmptyTable, "cannot fit a tree on an empty table");
  if (weights.size() != data.size()) throw Error(Errc::LengthMismatch, "one weight per row required");
  for (int label : data.y) {
    if (label < 0 || label >= n_classes) throw Error(Errc::OutOfRangeLabel, "label out of range");
  }
  DecisionTree tree;
  tree.nodes_ = Builder(data, weights, cfg, n_classes).run();
  return tree;
}

int DecisionTree::predict(std::span<const double> x) const {
  std::size_t at = 0;
  while (nodes_[at].feature >= 0) {
    const auto& n = nodes_[at];
    at = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                                       : n.right);
  }
  return nodes_[at].label;
}

int DecisionTree::depth() const {
  // Nodes are stored in preorder, children after parents.
  std::vector<int> d(nodes_.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    deepest = std::max(deepest, d[i]);
    if (nodes_[i].feature >= 0) {
      d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
    }
  }
  return deepest;
}

nlohmann::json DecisionTree::to_json() const {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : nodes_) {
    nodes.push_back({n.feature, n.threshold, n.left, n.right, n.label});
  }
  return {{"nodes", nodes}};
}

DecisionTree DecisionTree::from_json(const nlohmann::json& j) {
  DecisionTree tree;
  for (const auto& n : j.at("nodes")) {
    tree.nodes_.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(),
                           n.at(3).get<int>(), n.at(4).get<int>()});
  }
  if (tree.nodes_.empty()) throw Error(Errc::ParseError, "tree has no nodes");
  const auto n = static_cast<int>(tree.nodes_.size());
  for (int i = 0; i < n; ++i) {
    const auto& node = tree.nodes_[static_cast<std::size_t>(i)];
    if (node.feature >= 0 &&
        (node.left <= i || node.left >= n || node.right <= i || node.right >= n)) {
      throw Error(Errc::ParseError, "tree child index out of range");
    }
  }
  return tree;
}

}  // namespace drgrade::ml
