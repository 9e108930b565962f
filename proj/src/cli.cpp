#include "drgrade/cli.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "drgrade/error.hpp"
#include "drgrade/eval.hpp"
#include "drgrade/image_io.hpp"
#include "drgrade/synth.hpp"

namespace drgrade::cli {

namespace fs = std::filesystem;

std::string artifact::model_file(ml::ModelKind kind) {
  return "model." + std::string(ml::kind_code(kind)) + ".json";
}

namespace {

// A stage input that does not exist; reported with exit code 2.
class MissingInput : public std::runtime_error {
 public:
  explicit MissingInput(const fs::path& path)
      : std::runtime_error("missing input file: " + path.string()) {}
};

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::ConfigError:
    case Errc::SchemaMismatch:
    case Errc::ParseError:
    case Errc::ValidationError:
    case Errc::DuplicateId:
    case Errc::UnsupportedFormat:
      return kConfigError;
    default:
      return kRuntimeFailure;
  }
}

void require(const fs::path& path) {
  if (!fs::exists(path)) throw MissingInput(path);
}

void write_atomic(const fs::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(Errc::IoError, "cannot write " + tmp.string());
    f << content;
    f.close();
    if (!f) throw Error(Errc::IoError, "write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

class WorkdirLock {
 public:
  explicit WorkdirLock(const fs::path& path) {
    fd_ = ::open(path.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
    if (fd_ >= 0 && ::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      fd_ = -1;
    }
  }
  ~WorkdirLock() {
    if (fd_ >= 0) {
      ::flock(fd_, LOCK_UN);
      ::close(fd_);
    }
  }
  WorkdirLock(const WorkdirLock&) = delete;
  WorkdirLock& operator=(const WorkdirLock&) = delete;
  bool held() const noexcept { return fd_ >= 0; }

 private:
  int fd_ = -1;
};

struct Context {
  const PipelineConfig& cfg;
  std::ostream& out;
  std::ostream& err;
  fs::path workdir;
};

std::string table_csv(const features::FeatureTable& t) {
  std::ostringstream s;
  features::write_table_csv(s, t);
  return s.str();
}

features::SplitSet load_splits(const Context& ctx, bool with_train) {
  const auto scaler_path = ctx.workdir / artifact::kScaler;
  std::vector<fs::path> needed;
  if (with_train) needed.push_back(ctx.workdir / artifact::kTrain);
  needed.push_back(ctx.workdir / artifact::kVal);
  needed.push_back(ctx.workdir / artifact::kTest);
  for (const auto& p : needed) require(p);

  std::optional<features::Scaler> scaler;
  if (fs::exists(scaler_path)) {
    std::ifstream in(scaler_path);
    std::stringstream buf;
    buf << in.rdbuf();
    scaler = features::scaler_from_json(buf.str());
  }
  features::SplitSet s;
  s.seed = ctx.cfg.seed;
  if (with_train) s.train = features::load_table_csv(ctx.workdir / artifact::kTrain);
  s.val = features::load_table_csv(ctx.workdir / artifact::kVal);
  s.test = features::load_table_csv(ctx.workdir / artifact::kTest);
  for (auto* t : {&s.train, &s.val, &s.test}) t->scaler = scaler;
  return s;
}

int do_synth(const Context& ctx) {
  detect::SynthOptions opts;
  opts.image_size = ctx.cfg.synth_image_size;
  detect::SeverityRule rule;
  rule.ex_prune_threshold = ctx.cfg.features.ex_threshold;
  const auto result = detect::synth_detections(ctx.cfg.seed, ctx.cfg.synth_images, rule, opts);

  std::ostringstream manifest;
  detect::write_manifest(manifest, result.manifest);
  std::ostringstream dets;
  detect::write_detections(dets, result.detections);
  const auto manifest_path = ctx.cfg.manifest_path();
  const auto det_path = ctx.cfg.detections_path();
  for (const auto& p : {manifest_path, det_path}) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
  }
  write_atomic(manifest_path, manifest.str());
  write_atomic(det_path, dets.str());
  ctx.out << "synth: " << result.manifest.size() << " images, " << result.detections.size()
          << " lesion instances -> " << manifest_path.string() << ", " << det_path.string() << '\n';
  return kOk;
}

int do_prep(const Context& ctx) {
  const auto& dir = ctx.cfg.paths.images_dir;
  if (dir.empty()) throw Error(Errc::ConfigError, "paths.images_dir is not set");
  if (!fs::is_directory(dir)) throw MissingInput(dir);

  std::vector<fs::path> inputs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && imageprep::is_supported_image(entry.path())) {
      inputs.push_back(entry.path());
    }
  }
  std::sort(inputs.begin(), inputs.end());

  const auto out_dir = ctx.workdir / artifact::kPreparedDir;
  fs::create_directories(out_dir);
  std::size_t ok = 0;
  std::size_t failed = 0;
  auto report_failure = [&](const fs::path& p, const std::string& why) {
    ++failed;
    ctx.err << "prep: FAILED " << p.filename().string() << ": " << why << '\n';
  };

  std::set<std::string> stems;
  const unsigned workers = ctx.cfg.prep_workers == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                                     : ctx.cfg.prep_workers;
  const std::size_t chunk = 2 * static_cast<std::size_t>(workers);
  for (std::size_t start = 0; start < inputs.size(); start += chunk) {
    const std::size_t end = std::min(inputs.size(), start + chunk);
    std::vector<imageprep::Image> images;
    std::vector<fs::path> names;
    for (std::size_t i = start; i < end; ++i) {
      const auto stem = inputs[i].stem().string();
      if (!stems.insert(stem).second) {
        report_failure(inputs[i], "another input already maps to " + stem + ".png");
        continue;
      }
      try {
        images.push_back(imageprep::read_image(inputs[i]));
        names.push_back(inputs[i]);
      } catch (const std::exception& e) {
        report_failure(inputs[i], e.what());
      }
    }
    const auto results = imageprep::preprocess_batch(images, ctx.cfg.prep, workers);
    for (std::size_t i = 0; i < results.size(); ++i) {
      if (!results[i].image) {
        report_failure(names[i], results[i].error);
        continue;
      }
      const auto target = out_dir / (names[i].stem().string() + ".png");
      auto tmp = target;
      tmp.replace_extension(".tmp.png");
      try {
        imageprep::write_png(tmp, results[i].image->image);
        fs::rename(tmp, target);
        ++ok;
      } catch (const std::exception& e) {
        report_failure(names[i], e.what());
      }
    }
  }
  ctx.out << "prep: " << inputs.size() << " images, " << ok << " prepared, " << failed
          << " failed\n";
  return failed == 0 ? kOk : kRuntimeFailure;
}

int do_features(const Context& ctx) {
  const auto manifest_path = ctx.cfg.manifest_path();
  const auto det_path = ctx.cfg.detections_path();
  require(manifest_path);
  require(det_path);
  const auto manifest = detect::load_manifest(manifest_path);
  const auto dets = detect::load_detections(det_path);
  const auto build = features::build_feature_table(manifest, dets, ctx.cfg.features, ctx.cfg.seed);

  write_atomic(ctx.workdir / artifact::kTrain, table_csv(build.splits.train));
  write_atomic(ctx.workdir / artifact::kVal, table_csv(build.splits.val));
  write_atomic(ctx.workdir / artifact::kTest, table_csv(build.splits.test));
  if (build.splits.train.scaler) {
    write_atomic(ctx.workdir / artifact::kScaler, features::scaler_to_json(*build.splits.train.scaler));
  }
  const auto& c = build.counts;
  ctx.out << "features: " << c.instances_in << " instances, " << c.instances_pruned
          << " after pruning; " << c.aggregated << " images, " << c.after_zscore
          << " after z-score filter, " << c.after_undersample << " after undersampling\n"
          << "features: split " << build.splits.train.size() << '/' << build.splits.val.size()
          << '/' << build.splits.test.size() << '\n';
  return kOk;
}

int do_train(const Context& ctx) {
  const auto path = ctx.workdir / artifact::kTrain;
  require(path);
  auto train = features::load_table_csv(path);
  const auto scaler_path = ctx.workdir / artifact::kScaler;
  if (fs::exists(scaler_path)) {
    std::ifstream in(scaler_path);
    std::stringstream buf;
    buf << in.rdbuf();
    train.scaler = features::scaler_from_json(buf.str());
  }
  const auto classifiers = ctx.cfg.seeded_classifiers();
  int code = kOk;
  for (const auto kind : ctx.cfg.enabled) {
    const auto target = ctx.workdir / artifact::model_file(kind);
    try {
      const auto model = ml::fit_model(kind, train, classifiers);
      write_atomic(target, ml::serialize_model(model));
      ctx.out << "train: " << ml::kind_code(kind) << " -> " << target.filename().string() << '\n';
    } catch (const std::exception& e) {
      // Never leave a previous run's model behind for eval to pick up.
      fs::remove(target);
      ctx.err << "train: " << ml::kind_code(kind) << " FAILED: " << e.what() << '\n';
      code = kRuntimeFailure;
    }
  }
  return code;
}

int do_eval(const Context& ctx) {
  const auto splits = load_splits(ctx, true);
  std::vector<ml::TrainedModel> models;
  for (const auto kind : ctx.cfg.enabled) {
    const auto path = ctx.workdir / artifact::model_file(kind);
    require(path);
    models.push_back(ml::load_model(path));
  }
  const auto report = eval::evaluate_models(models, splits);
  const auto text = report.to_text();
  write_atomic(ctx.workdir / artifact::kReportText, text);
  write_atomic(ctx.workdir / artifact::kReportJson, report.to_json());
  ctx.out << text;
  const bool any_failed = std::any_of(report.entries.begin(), report.entries.end(),
                                      [](const auto& e) { return !e.error.empty(); });
  return any_failed ? kRuntimeFailure : kOk;
}

int do_ablate(const Context& ctx) {
  const auto splits = load_splits(ctx, true);
  const auto report =
      eval::ablation(splits, ctx.cfg.ablation_classifier, ctx.cfg.seeded_classifiers());
  const auto text = report.to_text();
  write_atomic(ctx.workdir / artifact::kAblationText, text);
  write_atomic(ctx.workdir / artifact::kAblationJson, report.to_json());
  ctx.out << text;
  return kOk;
}

int do_pipeline(const Context& ctx) {
  std::vector<std::function<int(const Context&)>> stages;
  if (ctx.cfg.prep_enabled) stages.emplace_back(do_prep);
  for (auto stage : {do_features, do_train, do_eval, do_ablate}) stages.emplace_back(stage);
  for (const auto& stage : stages) {
    if (const int code = stage(ctx); code != kOk) return code;
  }
  return kOk;
}

int guarded(const char* name, const PipelineConfig& cfg, std::ostream& out, std::ostream& err,
            int (*body)(const Context&)) {
  const fs::path workdir = cfg.paths.workdir;
  std::error_code ec;
  fs::create_directories(workdir, ec);
  if (ec || !fs::is_directory(workdir)) {
    err << "error: workdir " << workdir.string() << " is not a writable directory\n";
    return kConfigError;
  }
  WorkdirLock lock(workdir / artifact::kLock);
  if (!lock.held()) {
    err << "error: workdir " << workdir.string() << " is in use by another drgrade process\n";
    return kRuntimeFailure;
  }

  const Context ctx{cfg, out, err, workdir};
  int code = kOk;
  std::string message;
  try {
    code = body(ctx);
    if (code != kOk) message = std::string(name) + " finished with failures";
  } catch (const MissingInput& e) {
    code = kConfigError;
    message = e.what();
  } catch (const Error& e) {
    code = exit_code_for(e.code());
    message = e.what();
  } catch (const std::exception& e) {
    code = kRuntimeFailure;
    message = e.what();
  }

  const auto marker = workdir / (std::string(name) + ".failed");
  if (code == kOk) {
    fs::remove(marker, ec);
  } else {
    err << "error: " << message << '\n';
    std::ofstream(marker) << "exit " << code << ": " << message << '\n';
  }
  return code;
}

}  // namespace

int cmd_synth(const PipelineConfig& c, std::ostream& o, std::ostream& e) { return guarded("synth", c, o, e, do_synth); }
int cmd_prep(const PipelineConfig& c, std::ostream& o, std::ostream& e) { return guarded("prep", c, o, e, do_prep); }
int cmd_features(const PipelineConfig& c, std::ostream& o, std::ostream& e) { return guarded("features", c, o, e, do_features); }
int cmd_train(const PipelineConfig& c, std::ostream& o, std::ostream& e) { return guarded("train", c, o, e, do_train); }
int cmd_eval(const PipelineConfig& c, std::ostream& o, std::ostream& e) { return guarded("eval", c, o, e, do_eval); }
int cmd_ablate(const PipelineConfig& c, std::ostream& o, std::ostream& e) { return guarded("ablate", c, o, e, do_ablate); }
int cmd_pipeline(const PipelineConfig& c, std::ostream& o, std::ostream& e) { return guarded("pipeline", c, o, e, do_pipeline); }

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Diabetic retinopathy severity grading from lesion detections", "drgrade"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::uint64_t seed = 0;
  std::string workdir;
  int images = 0;
  auto* config_opt = app.add_option("--config", config_path, "TOML-style config file");
  auto* seed_opt = app.add_option("--seed", seed, "Seed for every random stage");
  auto* workdir_opt = app.add_option("--workdir", workdir, "Artifact directory");

  using Command = int (*)(const PipelineConfig&, std::ostream&, std::ostream&);
  const std::vector<std::tuple<const char*, const char*, Command>> commands = {
      {"prep", "Preprocess fundus images into workdir/prepared", cmd_prep},
      {"features", "Build train/val/test feature tables from detections", cmd_features},
      {"train", "Fit every enabled classifier on train.csv", cmd_train},
      {"eval", "Score trained models on val and test", cmd_eval},
      {"ablate", "Leave-one-group-out feature ablation", cmd_ablate},
      {"synth", "Write a synthetic manifest and detection file", cmd_synth},
      {"pipeline", "[prep,] features, train, eval and ablate in sequence", cmd_pipeline},
  };
  CLI::Option* images_opt = nullptr;
  for (const auto& [name, help, fn] : commands) {
    auto* sub = app.add_subcommand(name, help);
    if (std::string_view(name) == "synth") {
      images_opt = sub->add_option("--images", images, "Number of synthetic images");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }

  PipelineConfig cfg;
  try {
    if (config_opt->count() > 0) {
      if (!fs::exists(config_path)) {
        err << "error: missing config file: " << config_path << '\n';
        return kConfigError;
      }
      cfg = load_config(config_path);
    }
    if (seed_opt->count() > 0) cfg.seed = seed;
    if (workdir_opt->count() > 0) cfg.paths.workdir = workdir;
    if (images_opt && images_opt->count() > 0) cfg.synth_images = images;
    cfg.validate();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }

  for (const auto& [name, help, fn] : commands) {
    if (app.got_subcommand(name)) return fn(cfg, out, err);
  }
  return kConfigError;
}

}  // namespace drgrade::cli
