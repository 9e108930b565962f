#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "drgrade/cli.hpp"
#include "drgrade/error.hpp"
#include "drgrade/image_io.hpp"

using namespace drgrade;
using namespace drgrade::cli;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / ("drgrade_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "drgrade");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

// Keeps the CLI tests quick: small MLP budget, no kernel SVMs.
std::string fast_config(const fs::path& workdir) {
  return "[paths]\nworkdir = \"" + workdir.string() +
         "\"\n[mlp]\nepochs = 15\n[classifiers]\nenabled = [\"mlp\", \"tree\", \"naive_bayes\", \"knn\"]\n";
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("defaults match the documented values") {
  const PipelineConfig cfg;
  CHECK(cfg.features.ex_threshold == 0.65);
  CHECK(cfg.features.zscore_k == 2.0);
  CHECK(cfg.features.scaler_fit == features::ScalerFit::Full);
  CHECK(cfg.enabled.size() == 9);
  CHECK(cfg.prep.blur_sigma == 20.0);
}

TEST_CASE("parse reads every section") {
  const auto cfg = parse_config(R"(# comment
[paths]
workdir = "out dir"   # trailing comment
images_dir = "imgs"
[prep]
enabled = true
target_size = 256
[features]
ex_threshold = 0.7
scaler_fit = "train_only"
[run]
seed = 42
[classifiers]
enabled = ["mlp", "svm_rbf"]
[mlp]
hidden_sizes = [10, 20, 30]
learning_rate = 1e-2
[svm]
c = 2
[ablation]
classifier = "tree"
[synth]
images = 77
)");
  CHECK(cfg.paths.workdir == "out dir");
  CHECK(cfg.prep_enabled);
  CHECK(cfg.prep.target_size == 256);
  CHECK(cfg.features.ex_threshold == 0.7);
  CHECK(cfg.features.scaler_fit == features::ScalerFit::TrainOnly);
  CHECK(cfg.seed == 42);
  CHECK(cfg.enabled == std::vector<ml::ModelKind>{ml::ModelKind::MLP, ml::ModelKind::SvmRbf});
  CHECK(cfg.classifiers.mlp.hidden_sizes == std::vector<int>{10, 20, 30});
  CHECK(cfg.classifiers.mlp.learning_rate == 0.01);
  CHECK(cfg.classifiers.svm.c == 2.0);
  CHECK(cfg.ablation_classifier == ml::ModelKind::DecisionTree);
  CHECK(cfg.synth_images == 77);
  CHECK(cfg.manifest_path() == fs::path("out dir") / "manifest.csv");
}

TEST_CASE("dump and parse round trip") {
  PipelineConfig cfg;
  cfg.seed = 9;
  cfg.paths.images_dir = "a \"quoted\" dir";
  cfg.classifiers.mlp.learning_rate = 0.1 + 0.2;
  cfg.classifiers.svm.gamma = 1.0 / 3.0;
  cfg.enabled = {ml::ModelKind::KNN};
  const auto text = dump_config(cfg);
  const auto back = parse_config(text);
  CHECK(dump_config(back) == text);
  CHECK(back.classifiers.mlp.learning_rate == cfg.classifiers.mlp.learning_rate);
  CHECK(back.paths.images_dir == cfg.paths.images_dir);
  CHECK(dump_config(parse_config(dump_config(PipelineConfig{}))) == dump_config(PipelineConfig{}));
}

TEST_CASE("config errors name the line") {
  auto line_of = [](const std::string& text) -> std::size_t {
    try {
      parse_config(text);
    } catch (const Error& e) {
      CHECK(e.code() == Errc::ConfigError);
      return e.line().value_or(0);
    }
    FAIL("expected ConfigError");
    return 0;
  };
  CHECK(line_of("[run]\nseed = 1\nbogus = 2\n") == 3);
  CHECK(line_of("[nosuch]\nx = 1\n") == 2);
  CHECK(line_of("[run]\nseed = \"one\"\n") == 2);
  CHECK(line_of("[run]\nseed = 1\nseed = 2\n") == 3);
  CHECK(line_of("[classifiers]\nenabled = [\"forest\"]\n") == 2);
  CHECK(line_of("[paths\n") == 1);
  CHECK_THROWS_AS(parse_config("[features]\nex_threshold = 1.5\n"), Error);
  CHECK_THROWS_AS(parse_config("[prep]\ntarget_size = 31\n"), Error);
  CHECK_THROWS_AS(parse_config("[classifiers]\nenabled = []\n"), Error);
}

}

TEST_SUITE("cli") {

TEST_CASE("synth then pipeline produces every artifact") {
  TempDir dir("pipeline");
  const auto work = dir.path / "work";
  write(dir.path / "run.toml", fast_config(work));
  const auto cfg = (dir.path / "run.toml").string();

  auto r = invoke({"--config", cfg, "synth", "--seed", "1", "--images", "500"});
  REQUIRE(r.code == 0);
  r = invoke({"--config", cfg, "--seed", "1", "pipeline"});
  CHECK(r.code == 0);
  CAPTURE(r.err);
  for (const char* f : {"manifest.csv", "detections.jsonl", "train.csv", "val.csv", "test.csv",
                        "scaler.json", "model.mlp.json", "model.tree.json", "report.txt",
                        "report.json", "ablation.txt", "ablation.json"})
    CHECK(fs::exists(work / f));
  CHECK_FALSE(fs::exists(work / "pipeline.failed"));

  const auto report = slurp(work / "report.txt");
  CHECK(report.find("Neural Network") != std::string::npos);
  CHECK(report.find("KNN") != std::string::npos);

  // eval twice on the same artifacts gives identical reports
  r = invoke({"--config", cfg, "eval"});
  CHECK(r.code == 0);
  CHECK(slurp(work / "report.txt") == report);
  const auto json = slurp(work / "report.json");
  CHECK(invoke({"--config", cfg, "eval"}).code == 0);
  CHECK(slurp(work / "report.json") == json);
}

TEST_CASE("all nine classifiers appear in the report") {
  TempDir dir("nine");
  const auto work = dir.path.string();
  REQUIRE(invoke({"--workdir", work, "synth", "--seed", "1", "--images", "500"}).code == 0);
  const auto r = invoke({"--workdir", work, "--seed", "1", "pipeline"});
  CHECK(r.code == 0);
  const auto report = slurp(dir.path / "report.txt");
  for (auto kind : ml::kAllModelKinds) CHECK(report.find(std::string(ml::display_name(kind))) != std::string::npos);
}

TEST_CASE("train without features exits 2 naming the missing file") {
  TempDir dir("missing");
  const auto r = invoke({"--workdir", dir.path.string(), "train"});
  CHECK(r.code == 2);
  CHECK(r.err.find("train.csv") != std::string::npos);
  CHECK(fs::exists(dir.path / "train.failed"));
}

TEST_CASE("config problems exit 2") {
  TempDir dir("badcfg");
  CHECK(invoke({"--config", (dir.path / "nope.toml").string(), "eval"}).code == 2);
  write(dir.path / "bad.toml", "[run]\nseed = -4\n");
  CHECK(invoke({"--config", (dir.path / "bad.toml").string(), "eval"}).code == 2);
  CHECK(invoke({"--bogus-flag", "eval"}).code == 2);
  CHECK(invoke({}).code == 2);
  CHECK(invoke({"--help"}).code == 0);
}

TEST_CASE("corrupt detections exit 2 with a failure marker") {
  TempDir dir("corrupt");
  write(dir.path / "manifest.csv", "image_id,eye,severity_raw\na,left,0\n");
  write(dir.path / "detections.jsonl", "{\"image_id\": 3}\n");
  const auto r = invoke({"--workdir", dir.path.string(), "features"});
  CHECK(r.code == 2);
  CHECK(fs::exists(dir.path / "features.failed"));
  CHECK_FALSE(fs::exists(dir.path / "train.csv"));
}

TEST_CASE("commands are idempotent") {
  TempDir dir("idem");
  const auto work = dir.path.string();
  REQUIRE(invoke({"--workdir", work, "--seed", "3", "synth", "--images", "120"}).code == 0);
  const auto manifest = slurp(dir.path / "manifest.csv");
  const auto dets = slurp(dir.path / "detections.jsonl");
  REQUIRE(invoke({"--workdir", work, "--seed", "3", "synth", "--images", "120"}).code == 0);
  CHECK(slurp(dir.path / "manifest.csv") == manifest);
  CHECK(slurp(dir.path / "detections.jsonl") == dets);
  REQUIRE(invoke({"--workdir", work, "--seed", "3", "features"}).code == 0);
  const auto train = slurp(dir.path / "train.csv");
  REQUIRE(invoke({"--workdir", work, "--seed", "3", "features"}).code == 0);
  CHECK(slurp(dir.path / "train.csv") == train);
}

TEST_CASE("prep: empty directory, partial failure, determinism") {
  TempDir dir("prep");
  const auto images = dir.path / "images";
  fs::create_directories(images);
  const auto work = dir.path / "work";
  write(dir.path / "prep.toml", "[paths]\nimages_dir = \"" + images.string() + "\"\nworkdir = \"" +
                                    work.string() + "\"\n[prep]\ntarget_size = 64\nblur_sigma = 4\n");
  const auto cfg = (dir.path / "prep.toml").string();

  auto r = invoke({"--config", cfg, "prep"});
  CHECK(r.code == 0);
  CHECK(r.out.find("0 images") != std::string::npos);

  for (int i = 0; i < 9; ++i) {
    imageprep::Image img(80 + i, 70, 3, 0);
    for (int y = 10; y < 60; ++y)
      for (int x = 10; x < 70; ++x)
        for (int c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<std::uint8_t>((x * 7 + y * 3 + c * 50 + i) % 200 + 20);
    imageprep::write_png(images / ("eye_" + std::to_string(i) + ".png"), img);
  }
  write(images / "broken.jpg", "not really a jpeg");
  r = invoke({"--config", cfg, "prep"});
  CHECK(r.code == 1);
  CHECK(r.out.find("10 images, 9 prepared, 1 failed") != std::string::npos);
  CHECK(fs::exists(work / "prep.failed"));
  std::size_t written = 0;
  for (const auto& e : fs::directory_iterator(work / "prepared")) written += e.path().extension() == ".png";
  CHECK(written == 9);

  const auto first = slurp(work / "prepared" / "eye_3.png");
  fs::remove(images / "broken.jpg");
  r = invoke({"--config", cfg, "prep"});
  CHECK(r.code == 0);
  CHECK(slurp(work / "prepared" / "eye_3.png") == first);
  CHECK_FALSE(fs::exists(work / "prep.failed"));
  const auto out = imageprep::read_image(work / "prepared" / "eye_3.png");
  CHECK(out.width == 64);
  CHECK(out.at(0, 0, 0) == 0);
}

TEST_CASE("prep with a missing image directory exits 2") {
  TempDir dir("prepmissing");
  write(dir.path / "p.toml", "[paths]\nimages_dir = \"" + (dir.path / "none").string() + "\"\nworkdir = \"" +
                                 dir.path.string() + "\"\n");
  const auto r = invoke({"--config", (dir.path / "p.toml").string(), "prep"});
  CHECK(r.code == 2);
  CHECK(r.err.find("none") != std::string::npos);
}

}
