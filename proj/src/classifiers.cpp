#include "drgrade/classifiers.hpp"

#include <fstream>
#include <sstream>

#include "drgrade/error.hpp"

namespace drgrade::ml {

using nlohmann::ordered_json;

std::string_view kind_code(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::MLP: return "mlp";
    case ModelKind::DecisionTree: return "tree";
    case ModelKind::NaiveBayes: return "naive_bayes";
    case ModelKind::LogisticRegression: return "logreg";
    case ModelKind::KNN: return "knn";
    case ModelKind::AdaBoost: return "adaboost";
    case ModelKind::SvmLinear: return "svm_linear";
    case ModelKind::SvmPoly: return "svm_poly";
    case ModelKind::SvmRbf: return "svm_rbf";
  }
  return "unknown";
}

std::string_view display_name(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::MLP: return "Neural Network";
    case ModelKind::DecisionTree: return "Decision Tree";
    case ModelKind::NaiveBayes: return "Naive Bayes";
    case ModelKind::LogisticRegression: return "Logistic Regression";
    case ModelKind::KNN: return "KNN";
    case ModelKind::AdaBoost: return "AdaBoost";
    case ModelKind::SvmLinear: return "SVM - Linear";
    case ModelKind::SvmPoly: return "SVM - Polynomial";
    case ModelKind::SvmRbf: return "SVM - RBF";
  }
  return "unknown";
}

ModelKind parse_kind(std::string_view code) {
  for (auto kind : kAllModelKinds) {
    if (kind_code(kind) == code) return kind;
  }
  throw Error(Errc::ConfigError, "unknown classifier '" + std::string(code) + "'");
}

ordered_json ClassifierConfig::to_json(ModelKind kind) const {
  switch (kind) {
    case ModelKind::MLP:
      return {{"hidden_sizes", mlp.hidden_sizes}, {"learning_rate", mlp.learning_rate},
              {"epochs", mlp.epochs}, {"batch_size", mlp.batch_size},
              {"adam_beta1", mlp.adam_beta1}, {"adam_beta2", mlp.adam_beta2},
              {"adam_epsilon", mlp.adam_epsilon}, {"seed", mlp.seed}};
    case ModelKind::DecisionTree:
      return {{"max_depth", tree.max_depth}, {"min_leaf", tree.min_leaf}};
    case ModelKind::NaiveBayes:
      return {{"var_smoothing", naive_bayes.var_smoothing}};
    case ModelKind::LogisticRegression:
      return {{"l2", logreg.l2}, {"iterations", logreg.iterations},
              {"learning_rate", logreg.learning_rate}};
    case ModelKind::KNN:
      return {{"k", knn.k}};
    case ModelKind::AdaBoost:
      return {{"rounds", adaboost.rounds}};
    case ModelKind::SvmLinear:
      return {{"c", svm.c}, {"linear_epochs", svm.linear_epochs}, {"seed", svm.seed}};
    case ModelKind::SvmPoly:
      return {{"c", svm.c}, {"degree", svm.degree}, {"coef0", svm.coef0}, {"gamma", svm.gamma},
              {"tol", svm.tol}, {"max_passes", svm.max_passes}};
    case ModelKind::SvmRbf:
      return {{"c", svm.c}, {"gamma", svm.gamma}, {"tol", svm.tol},
              {"max_passes", svm.max_passes}};
  }
  return ordered_json::object();
}

namespace {

TrainedModel wrap(ModelKind kind, ModelState state, const features::FeatureTable& train,
                  ordered_json config) {
  TrainedModel m;
  m.kind = kind;
  m.state = std::move(state);
  m.feature_order = train.feature_order;
  m.scaler = train.scaler;
  m.config = std::move(config);
  return m;
}

void require_rows(const features::FeatureTable& train) {
  if (train.rows.empty()) throw Error(Errc::EmptyTable, "training table is empty");
}

}  // namespace

TrainedModel mlp_fit(const features::FeatureTable& train, const MlpConfig& cfg) {
  require_rows(train);
  ClassifierConfig holder;
  holder.mlp = cfg;
  return wrap(ModelKind::MLP, train_mlp(to_dataset(train), cfg), train,
              holder.to_json(ModelKind::MLP));
}

TrainedModel fit_classical(ModelKind kind, const features::FeatureTable& train,
                           const ClassifierConfig& cfg) {
  require_rows(train);
  const Dataset data = to_dataset(train);
  const int k = features::kNumClasses;
  auto config = cfg.to_json(kind);
  switch (kind) {
    case ModelKind::MLP:
      return mlp_fit(train, cfg.mlp);
    case ModelKind::DecisionTree:
      return wrap(kind, DecisionTree::fit(data, cfg.tree, k), train, std::move(config));
    case ModelKind::NaiveBayes:
      return wrap(kind, NaiveBayes::fit(data, cfg.naive_bayes, k), train, std::move(config));
    case ModelKind::LogisticRegression:
      return wrap(kind, LogisticRegression::fit(data, cfg.logreg, k), train, std::move(config));
    case ModelKind::KNN:
      return wrap(kind, Knn::fit(data, cfg.knn, k), train, std::move(config));
    case ModelKind::AdaBoost:
      return wrap(kind, AdaBoost::fit(data, cfg.adaboost, k), train, std::move(config));
    case ModelKind::SvmLinear:
      return wrap(kind, LinearSvm::fit(data, cfg.svm, k), train, std::move(config));
    case ModelKind::SvmPoly:
      return wrap(kind, KernelSvm::fit(data, Kernel{KernelKind::Polynomial}, cfg.svm, k), train,
                  std::move(config));
    case ModelKind::SvmRbf:
      return wrap(kind, KernelSvm::fit(data, Kernel{KernelKind::Rbf}, cfg.svm, k), train,
                  std::move(config));
  }
  throw Error(Errc::InvalidArgument, "unknown model kind");
}

TrainedModel fit_model(ModelKind kind, const features::FeatureTable& train,
                       const ClassifierConfig& cfg) {
  if (kind == ModelKind::MLP) return mlp_fit(train, cfg.mlp);
  return fit_classical(kind, train, cfg);
}

int predict_row(const TrainedModel& model, std::span<const double> x) {
  if (x.size() != model.feature_order.size()) {
    throw Error(Errc::SchemaMismatch, "row width does not match the model");
  }
  return std::visit([&](const auto& m) { return m.predict(x); }, model.state);
}

std::vector<int> predict(const TrainedModel& model, const features::FeatureTable& rows) {
  if (rows.feature_order != model.feature_order) {
    throw Error(Errc::SchemaMismatch, "feature order does not match the model");
  }
  std::vector<int> out;
  out.reserve(rows.rows.size());
  for (const auto& r : rows.rows) out.push_back(predict_row(model, r.values));
  return out;
}

std::string serialize_model(const TrainedModel& model) {
  ordered_json doc;
  doc["format_version"] = kModelFormatVersion;
  doc["kind"] = kind_code(model.kind);
  doc["n_classes"] = model.n_classes;
  doc["feature_order"] = model.feature_order;
  if (model.scaler) {
    ordered_json s = ordered_json::object();
    for (std::size_t c = 0; c < model.scaler->columns.size(); ++c) {
      s[model.scaler->columns[c]] = {model.scaler->ranges[c].first, model.scaler->ranges[c].second};
    }
    doc["scaler"] = s;
  } else {
    doc["scaler"] = nullptr;
  }
  doc["config"] = model.config;
  doc["params"] = std::visit([](const auto& m) { return ordered_json(m.to_json()); }, model.state);
  return doc.dump() + "\n";
}

TrainedModel deserialize_model(std::string_view text) {
  nlohmann::json doc;
  ordered_json raw;
  try {
    raw = ordered_json::parse(text);
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::ParseError, e.what());
  }
  try {
    if (!doc.contains("format_version") || !doc["format_version"].is_number_integer()) {
      throw Error(Errc::UnsupportedFormat, "model document has no integer format_version");
    }
    const int version = doc["format_version"].get<int>();
    if (version != kModelFormatVersion) {
      throw Error(Errc::UnsupportedFormat, "unsupported model format_version " + std::to_string(version));
    }
    TrainedModel m;
    m.kind = parse_kind(doc.at("kind").get<std::string>());
    m.n_classes = doc.at("n_classes").get<int>();
    m.feature_order = doc.at("feature_order").get<std::vector<std::string>>();
    if (!doc.at("scaler").is_null()) {
      // Keep the model's column order, not the JSON object's key order.
      features::Scaler s;
      const auto& sj = doc["scaler"];
      for (const auto& col : m.feature_order) {
        const auto& range = sj.at(col);
        s.columns.push_back(col);
        s.ranges.emplace_back(range.at(0).get<double>(), range.at(1).get<double>());
      }
      m.scaler = std::move(s);
    }
    m.config = raw.at("config");
    const auto& p = doc.at("params");
    switch (m.kind) {
      case ModelKind::MLP: m.state = Mlp::from_json(p); break;
      case ModelKind::DecisionTree: m.state = DecisionTree::from_json(p); break;
      case ModelKind::NaiveBayes: m.state = NaiveBayes::from_json(p); break;
      case ModelKind::LogisticRegression: m.state = LogisticRegression::from_json(p); break;
      case ModelKind::KNN: m.state = Knn::from_json(p); break;
      case ModelKind::AdaBoost: m.state = AdaBoost::from_json(p); break;
      case ModelKind::SvmLinear: m.state = LinearSvm::from_json(p); break;
      case ModelKind::SvmPoly:
      case ModelKind::SvmRbf: m.state = KernelSvm::from_json(p); break;
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("malformed model document: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const TrainedModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << serialize_model(model);
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return deserialize_model(buf.str());
}

}  // namespace drgrade::ml
