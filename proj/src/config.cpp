#include "drgrade/config.hpp"

#include <fstream>
#include <optional>
#include <sstream>

#include "drgrade/error.hpp"
#include "drgrade/random.hpp"
#include "drgrade/text.hpp"

namespace drgrade::cli {

namespace {

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
  throw Error(Errc::ConfigError, msg, line);
}

std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '\\' && quoted) {
      ++i;
    } else if (c == '"') {
      quoted = !quoted;
    } else if (c == '#' && !quoted) {
      return line.substr(0, i);
    }
  }
  return line;
}

std::string parse_string(std::string_view s, std::size_t line) {
  if (s.size() < 2 || s.front() != '"' || s.back() != '"') fail(line, "expected a quoted string");
  std::string out;
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    char c = s[i];
    if (c == '"') fail(line, "stray quote inside string");
    if (c == '\\') {
      if (i + 2 >= s.size()) fail(line, "dangling escape");
      c = s[++i];
      switch (c) {
        case '"': case '\\': break;
        case 'n': c = '\n'; break;
        case 't': c = '\t'; break;
        default: fail(line, std::string("unsupported escape \\") + c);
      }
    }
    out.push_back(c);
  }
  return out;
}

// Splits an array body on commas outside quotes.
std::vector<std::string_view> split_items(std::string_view body, std::size_t line) {
  std::vector<std::string_view> items;
  bool quoted = false;
  std::size_t start = 0;
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i] == '\\' && quoted) {
      ++i;
    } else if (body[i] == '"') {
      quoted = !quoted;
    } else if (body[i] == ',' && !quoted) {
      items.push_back(text::trim(body.substr(start, i - start)));
      start = i + 1;
    }
  }
  if (quoted) fail(line, "unterminated string in array");
  const auto last = text::trim(body.substr(start));
  if (!last.empty()) items.push_back(last);
  for (const auto item : items) {
    if (item.empty()) fail(line, "empty array element");
  }
  return items;
}

Value parse_value(std::string_view s, std::size_t line) {
  if (s.empty()) fail(line, "missing value");
  if (s == "true") return true;
  if (s == "false") return false;
  if (s.front() == '"') return parse_string(s, line);
  if (s.front() == '[') {
    if (s.back() != ']') fail(line, "unterminated array");
    const auto items = split_items(s.substr(1, s.size() - 2), line);
    if (items.empty()) return std::vector<std::string>{};
    if (items.front().front() == '"') {
      std::vector<std::string> out;
      for (const auto item : items) out.push_back(parse_string(item, line));
      return out;
    }
    std::vector<std::int64_t> out;
    for (const auto item : items) {
      const auto v = text::parse_int(item);
      if (!v) fail(line, "arrays hold only integers or only strings");
      out.push_back(*v);
    }
    return out;
  }
  if (const auto i = text::parse_int(s)) return *i;
  if (const auto d = text::parse_double(s)) return *d;
  fail(line, "cannot parse value '" + std::string(s) + "'");
}

// Typed accessors over one entry.
bool as_bool(const Entry& e) {
  if (const auto* b = std::get_if<bool>(&e.value)) return *b;
  fail(e.line, e.key + " must be true or false");
}

std::int64_t as_int(const Entry& e) {
  if (const auto* i = std::get_if<std::int64_t>(&e.value)) return *i;
  fail(e.line, e.key + " must be an integer");
}

int as_int32(const Entry& e) {
  const auto v = as_int(e);
  if (v < INT32_MIN || v > INT32_MAX) fail(e.line, e.key + " is out of range");
  return static_cast<int>(v);
}

double as_double(const Entry& e) {
  if (const auto* d = std::get_if<double>(&e.value)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&e.value)) return static_cast<double>(*i);
  fail(e.line, e.key + " must be a number");
}

std::string as_string(const Entry& e) {
  if (const auto* s = std::get_if<std::string>(&e.value)) return *s;
  fail(e.line, e.key + " must be a quoted string");
}

std::vector<std::int64_t> as_int_array(const Entry& e) {
  if (const auto* a = std::get_if<std::vector<std::int64_t>>(&e.value)) return *a;
  if (const auto* s = std::get_if<std::vector<std::string>>(&e.value); s && s->empty()) return {};
  fail(e.line, e.key + " must be an array of integers");
}

std::vector<std::string> as_string_array(const Entry& e) {
  if (const auto* a = std::get_if<std::vector<std::string>>(&e.value)) return *a;
  fail(e.line, e.key + " must be an array of strings");
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (const char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out.push_back(c);
    }
  }
  return out + "\"";
}

std::string number(double v) {
  auto s = text::format_double(v);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

ml::ModelKind kind_at(const Entry& e, const std::string& code) {
  try {
    return ml::parse_kind(code);
  } catch (const Error&) {
    fail(e.line, "unknown classifier '" + code + "'");
  }
}

void apply(PipelineConfig& cfg, const std::string& section, const Entry& e) {
  const auto& k = e.key;
  auto unknown = [&]() {
    fail(e.line, "unknown key '" + k + "' in section [" + section + "]");
  };
  if (section == "paths") {
    if (k == "images_dir") cfg.paths.images_dir = as_string(e);
    else if (k == "detections_file") cfg.paths.detections_file = as_string(e);
    else if (k == "manifest_file") cfg.paths.manifest_file = as_string(e);
    else if (k == "workdir") cfg.paths.workdir = as_string(e);
    else unknown();
  } else if (section == "prep") {
    auto& p = cfg.prep;
    if (k == "enabled") cfg.prep_enabled = as_bool(e);
    else if (k == "workers") {
      const auto w = as_int(e);
      if (w < 0) fail(e.line, "prep workers must be >= 0");
      cfg.prep_workers = static_cast<unsigned>(w);
    }
    else if (k == "blank_threshold") p.blank_threshold = as_int32(e);
    else if (k == "target_size") p.target_size = as_int32(e);
    else if (k == "blur_sigma") p.blur_sigma = as_double(e);
    else if (k == "weight_original") p.weight_original = as_double(e);
    else if (k == "weight_blurred") p.weight_blurred = as_double(e);
    else if (k == "gamma_offset") p.gamma_offset = as_double(e);
    else unknown();
  } else if (section == "features") {
    auto& f = cfg.features;
    if (k == "ex_threshold") f.ex_threshold = as_double(e);
    else if (k == "zscore_k") f.zscore_k = as_double(e);
    else if (k == "scaler_fit") {
      const auto v = as_string(e);
      if (v == "full") f.scaler_fit = features::ScalerFit::Full;
      else if (v == "train_only") f.scaler_fit = features::ScalerFit::TrainOnly;
      else fail(e.line, "scaler_fit must be \"full\" or \"train_only\"");
    }
    else unknown();
  } else if (section == "run") {
    if (k == "seed") {
      const auto v = as_int(e);
      if (v < 0) fail(e.line, "seed must be >= 0");
      cfg.seed = static_cast<std::uint64_t>(v);
    } else {
      unknown();
    }
  } else if (section == "classifiers") {
    if (k == "enabled") {
      cfg.enabled.clear();
      for (const auto& code : as_string_array(e)) cfg.enabled.push_back(kind_at(e, code));
    } else {
      unknown();
    }
  } else if (section == "mlp") {
    auto& m = cfg.classifiers.mlp;
    if (k == "hidden_sizes") {
      m.hidden_sizes.clear();
      for (const auto v : as_int_array(e)) {
        if (v < 1 || v > INT32_MAX) fail(e.line, "hidden sizes must be >= 1");
        m.hidden_sizes.push_back(static_cast<int>(v));
      }
    }
    else if (k == "learning_rate") m.learning_rate = as_double(e);
    else if (k == "epochs") m.epochs = as_int32(e);
    else if (k == "batch_size") m.batch_size = as_int32(e);
    else if (k == "adam_beta1") m.adam_beta1 = as_double(e);
    else if (k == "adam_beta2") m.adam_beta2 = as_double(e);
    else if (k == "adam_epsilon") m.adam_epsilon = as_double(e);
    else unknown();
  } else if (section == "tree") {
    if (k == "max_depth") cfg.classifiers.tree.max_depth = as_int32(e);
    else if (k == "min_leaf") cfg.classifiers.tree.min_leaf = as_int32(e);
    else unknown();
  } else if (section == "naive_bayes") {
    if (k == "var_smoothing") cfg.classifiers.naive_bayes.var_smoothing = as_double(e);
    else unknown();
  } else if (section == "logreg") {
    auto& l = cfg.classifiers.logreg;
    if (k == "l2") l.l2 = as_double(e);
    else if (k == "iterations") l.iterations = as_int32(e);
    else if (k == "learning_rate") l.learning_rate = as_double(e);
    else unknown();
  } else if (section == "knn") {
    if (k == "k") cfg.classifiers.knn.k = as_int32(e);
    else unknown();
  } else if (section == "adaboost") {
    if (k == "rounds") cfg.classifiers.adaboost.rounds = as_int32(e);
    else unknown();
  } else if (section == "svm") {
    auto& s = cfg.classifiers.svm;
    if (k == "c") s.c = as_double(e);
    else if (k == "degree") s.degree = as_int32(e);
    else if (k == "coef0") s.coef0 = as_double(e);
    else if (k == "gamma") s.gamma = as_double(e);
    else if (k == "tol") s.tol = as_double(e);
    else if (k == "max_passes") s.max_passes = as_int32(e);
    else if (k == "linear_epochs") s.linear_epochs = as_int32(e);
    else unknown();
  } else if (section == "ablation") {
    if (k == "classifier") cfg.ablation_classifier = kind_at(e, as_string(e));
    else unknown();
  } else if (section == "synth") {
    if (k == "images") cfg.synth_images = as_int32(e);
    else if (k == "image_size") cfg.synth_image_size = as_int32(e);
    else unknown();
  } else {
    fail(e.line, section.empty() ? "key '" + k + "' appears before any [section]"
                                 : "unknown section [" + section + "]");
  }
}

}  // namespace

Document parse_document(std::string_view text) {
  Document doc;
  doc.push_back({"", {}});
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = std::min(text.find('\n', pos), text.size());
    const auto raw = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    const auto line = text::trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "malformed section header");
      const std::string name(text::trim(line.substr(1, line.size() - 2)));
      if (name.empty()) fail(line_no, "empty section name");
      for (const auto& s : doc) {
        if (s.name == name) fail(line_no, "duplicate section [" + name + "]");
      }
      doc.push_back({name, {}});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(line_no, "expected key = value");
    const std::string key(text::trim(line.substr(0, eq)));
    if (key.empty()) fail(line_no, "missing key");
    for (const auto& e : doc.back().entries) {
      if (e.key == key) fail(line_no, "duplicate key '" + key + "'");
    }
    doc.back().entries.push_back({key, parse_value(text::trim(line.substr(eq + 1)), line_no), line_no});
  }
  return doc;
}

PipelineConfig config_from_document(const Document& doc) {
  PipelineConfig cfg;
  for (const auto& section : doc) {
    for (const auto& e : section.entries) apply(cfg, section.name, e);
  }
  cfg.validate();
  return cfg;
}

PipelineConfig parse_config(std::string_view text) {
  return config_from_document(parse_document(text));
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ConfigError, "cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const Error& e) {
    throw Error(Errc::ConfigError, path.string() + ": " + e.what());
  }
}

void PipelineConfig::validate() const {
  auto bad = [](const std::string& msg) { throw Error(Errc::ConfigError, msg); };
  try {
    prep.validate();
    classifiers.mlp.validate();
    classifiers.svm.validate();
  } catch (const Error& e) {
    if (e.code() == Errc::ConfigError) throw;
    bad(e.what());
  }
  if (paths.workdir.empty()) bad("paths.workdir must not be empty");
  if (!(features.ex_threshold >= 0.0 && features.ex_threshold <= 1.0)) {
    bad("features.ex_threshold must lie in [0, 1]");
  }
  if (!(features.zscore_k > 0.0)) bad("features.zscore_k must be > 0");
  if (classifiers.tree.max_depth < 1) bad("tree.max_depth must be >= 1");
  if (classifiers.tree.min_leaf < 1) bad("tree.min_leaf must be >= 1");
  if (!(classifiers.naive_bayes.var_smoothing >= 0.0)) bad("naive_bayes.var_smoothing must be >= 0");
  if (!(classifiers.logreg.l2 >= 0.0)) bad("logreg.l2 must be >= 0");
  if (classifiers.logreg.iterations < 1) bad("logreg.iterations must be >= 1");
  if (!(classifiers.logreg.learning_rate > 0.0)) bad("logreg.learning_rate must be > 0");
  if (classifiers.knn.k < 1) bad("knn.k must be >= 1");
  if (classifiers.adaboost.rounds < 1) bad("adaboost.rounds must be >= 1");
  if (enabled.empty()) bad("classifiers.enabled must name at least one classifier");
  for (std::size_t i = 0; i < enabled.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (enabled[i] == enabled[j]) {
        bad("classifier '" + std::string(ml::kind_code(enabled[i])) + "' enabled twice");
      }
    }
  }
  if (synth_images < 1) bad("synth.images must be >= 1");
  if (synth_image_size < 16) bad("synth.image_size must be >= 16");
}

std::filesystem::path PipelineConfig::detections_path() const {
  return paths.detections_file.empty() ? paths.workdir / "detections.jsonl" : paths.detections_file;
}

std::filesystem::path PipelineConfig::manifest_path() const {
  return paths.manifest_file.empty() ? paths.workdir / "manifest.csv" : paths.manifest_file;
}

ml::ClassifierConfig PipelineConfig::seeded_classifiers() const {
  auto out = classifiers;
  out.mlp.seed = derive_seed(seed, 10);
  out.svm.seed = derive_seed(seed, 11);
  return out;
}

std::string dump_config(const PipelineConfig& cfg) {
  std::ostringstream out;
  const auto& c = cfg.classifiers;
  out << "[paths]\n"
      << "images_dir = " << quote(cfg.paths.images_dir.string()) << '\n'
      << "detections_file = " << quote(cfg.paths.detections_file.string()) << '\n'
      << "manifest_file = " << quote(cfg.paths.manifest_file.string()) << '\n'
      << "workdir = " << quote(cfg.paths.workdir.string()) << '\n';
  out << "\n[prep]\n"
      << "enabled = " << (cfg.prep_enabled ? "true" : "false") << '\n'
      << "workers = " << cfg.prep_workers << '\n'
      << "blank_threshold = " << cfg.prep.blank_threshold << '\n'
      << "target_size = " << cfg.prep.target_size << '\n'
      << "blur_sigma = " << number(cfg.prep.blur_sigma) << '\n'
      << "weight_original = " << number(cfg.prep.weight_original) << '\n'
      << "weight_blurred = " << number(cfg.prep.weight_blurred) << '\n'
      << "gamma_offset = " << number(cfg.prep.gamma_offset) << '\n';
  out << "\n[features]\n"
      << "ex_threshold = " << number(cfg.features.ex_threshold) << '\n'
      << "zscore_k = " << number(cfg.features.zscore_k) << '\n'
      << "scaler_fit = "
      << (cfg.features.scaler_fit == features::ScalerFit::Full ? "\"full\"" : "\"train_only\"")
      << '\n';
  out << "\n[run]\nseed = " << cfg.seed << '\n';
  out << "\n[classifiers]\nenabled = [";
  for (std::size_t i = 0; i < cfg.enabled.size(); ++i) {
    out << (i ? ", " : "") << quote(std::string(ml::kind_code(cfg.enabled[i])));
  }
  out << "]\n";
  out << "\n[mlp]\nhidden_sizes = [";
  for (std::size_t i = 0; i < c.mlp.hidden_sizes.size(); ++i) {
    out << (i ? ", " : "") << c.mlp.hidden_sizes[i];
  }
  out << "]\n"
      << "learning_rate = " << number(c.mlp.learning_rate) << '\n'
      << "epochs = " << c.mlp.epochs << '\n'
      << "batch_size = " << c.mlp.batch_size << '\n'
      << "adam_beta1 = " << number(c.mlp.adam_beta1) << '\n'
      << "adam_beta2 = " << number(c.mlp.adam_beta2) << '\n'
      << "adam_epsilon = " << number(c.mlp.adam_epsilon) << '\n';
  out << "\n[tree]\nmax_depth = " << c.tree.max_depth << "\nmin_leaf = " << c.tree.min_leaf << '\n';
  out << "\n[naive_bayes]\nvar_smoothing = " << number(c.naive_bayes.var_smoothing) << '\n';
  out << "\n[logreg]\nl2 = " << number(c.logreg.l2) << "\niterations = " << c.logreg.iterations
      << "\nlearning_rate = " << number(c.logreg.learning_rate) << '\n';
  out << "\n[knn]\nk = " << c.knn.k << '\n';
  out << "\n[adaboost]\nrounds = " << c.adaboost.rounds << '\n';
  out << "\n[svm]\n"
      << "c = " << number(c.svm.c) << '\n'
      << "degree = " << c.svm.degree << '\n'
      << "coef0 = " << number(c.svm.coef0) << '\n'
      << "gamma = " << number(c.svm.gamma) << '\n'
      << "tol = " << number(c.svm.tol) << '\n'
      << "max_passes = " << c.svm.max_passes << '\n'
      << "linear_epochs = " << c.svm.linear_epochs << '\n';
  out << "\n[ablation]\nclassifier = " << quote(std::string(ml::kind_code(cfg.ablation_classifier)))
      << '\n';
  out << "\n[synth]\nimages = " << cfg.synth_images << "\nimage_size = " << cfg.synth_image_size
      << '\n';
  return out.str();
}

}  // namespace drgrade::cli
