#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "drgrade/cli.hpp"
#include "drgrade/config.hpp"
#include "drgrade/error.hpp"
#include "drgrade/eval.hpp"
#include "drgrade/features.hpp"
#include "drgrade/imageprep.hpp"
#include "drgrade/synth.hpp"

namespace py = pybind11;
using namespace drgrade;

namespace {

PyObject* g_error = nullptr;

struct Fixture {
  detect::Manifest manifest;
  detect::Detections detections;
  std::vector<double> thresholds;
};

struct Report {
  std::string text;
  std::string json;
};

imageprep::Image to_image(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw Error(Errc::InvalidArgument, "expected an HxW or HxWxC uint8 array");
  const int h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
  imageprep::Image img(w, h, c);
  std::copy(a.data(), a.data() + a.size(), img.pixels.begin());
  img.validate();
  return img;
}

py::array_t<std::uint8_t> to_array(const imageprep::Image& img) {
  std::vector<py::ssize_t> shape{img.height, img.width};
  if (img.channels > 1) shape.push_back(img.channels);
  py::array_t<std::uint8_t> out(shape);
  std::copy(img.pixels.begin(), img.pixels.end(), out.mutable_data());
  return out;
}

py::array_t<double> matrix_of(const features::FeatureTable& t) {
  const auto cols = static_cast<py::ssize_t>(t.feature_order.size());
  py::array_t<double> out({static_cast<py::ssize_t>(t.rows.size()), cols});
  double* p = out.mutable_data();
  for (const auto& r : t.rows) p = std::copy(r.values.begin(), r.values.end(), p);
  return out;
}

py::array_t<int> labels_array(const features::FeatureTable& t) {
  const auto labels = eval::labels_of(t);
  py::array_t<int> out(static_cast<py::ssize_t>(labels.size()));
  std::copy(labels.begin(), labels.end(), out.mutable_data());
  return out;
}

std::vector<int> int_vector(const py::array_t<int, py::array::c_style | py::array::forcecast>& a) {
  return {a.data(), a.data() + a.size()};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Detection-table severity grading: preprocessing, features, classifiers, evaluation.";

  g_error = PyErr_NewException("drgrade._core.DrgradeError", PyExc_RuntimeError, nullptr);
  m.attr("DrgradeError") = py::handle(g_error);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(g_error)(e.what());
      exc.attr("code") = std::string(errc_name(e.code()));
      exc.attr("line") = e.line() ? py::cast(*e.line()) : py::none();
      PyErr_SetObject(g_error, exc.ptr());
    }
  });

  py::class_<cli::PipelineConfig>(m, "Config")
      .def(py::init<>())
      .def_static("from_text", &cli::parse_config, py::arg("text"))
      .def_static("load", &cli::load_config, py::arg("path"))
      .def("dump", &cli::dump_config)
      .def("validate", &cli::PipelineConfig::validate)
      .def_readwrite("seed", &cli::PipelineConfig::seed)
      .def_property(
          "workdir", [](const cli::PipelineConfig& c) { return c.paths.workdir; },
          [](cli::PipelineConfig& c, const std::filesystem::path& p) { c.paths.workdir = p; })
      .def_property(
          "enabled",
          [](const cli::PipelineConfig& c) {
            std::vector<std::string> codes;
            for (auto k : c.enabled) codes.emplace_back(ml::kind_code(k));
            return codes;
          },
          [](cli::PipelineConfig& c, const std::vector<std::string>& codes) {
            c.enabled.clear();
            for (const auto& s : codes) c.enabled.push_back(ml::parse_kind(s));
          })
      .def_property(
          "ablation_classifier",
          [](const cli::PipelineConfig& c) { return std::string(ml::kind_code(c.ablation_classifier)); },
          [](cli::PipelineConfig& c, const std::string& s) { c.ablation_classifier = ml::parse_kind(s); })
      .def_property(
          "mlp_epochs", [](const cli::PipelineConfig& c) { return c.classifiers.mlp.epochs; },
          [](cli::PipelineConfig& c, int e) { c.classifiers.mlp.epochs = e; });

  py::class_<Fixture>(m, "Fixture")
      .def_property_readonly("n_images", [](const Fixture& f) { return f.manifest.size(); })
      .def_property_readonly("n_instances", [](const Fixture& f) { return f.detections.size(); })
      .def_readonly("thresholds", &Fixture::thresholds)
      .def("manifest",
           [](const Fixture& f) {
             py::list out;
             for (const auto& e : f.manifest)
               out.append(py::make_tuple(e.image_id, std::string(detect::to_string(e.eye)), e.severity_raw));
             return out;
           })
      .def("detections_jsonl",
           [](const Fixture& f) {
             std::ostringstream s;
             detect::write_detections(s, f.detections);
             return s.str();
           })
      .def("save", [](const Fixture& f, const std::filesystem::path& manifest, const std::filesystem::path& dets) {
        detect::save_manifest(manifest, f.manifest);
        detect::save_detections(dets, f.detections);
      });

  m.def(
      "synth",
      [](std::uint64_t seed, int images, int image_size) {
        detect::SynthOptions opt;
        opt.image_size = image_size;
        auto r = detect::synth_detections(seed, images, {}, opt);
        return Fixture{std::move(r.manifest), std::move(r.detections), std::move(r.thresholds)};
      },
      py::arg("seed"), py::arg("images"), py::arg("image_size") = 1024);

  m.def(
      "load_fixture",
      [](const std::filesystem::path& manifest, const std::filesystem::path& dets) {
        return Fixture{detect::load_manifest(manifest), detect::load_detections(dets), {}};
      },
      py::arg("manifest"), py::arg("detections"));

  py::class_<features::FeatureTable>(m, "Table")
      .def_readonly("feature_order", &features::FeatureTable::feature_order)
      .def("__len__", &features::FeatureTable::size)
      .def_property_readonly("image_ids",
                             [](const features::FeatureTable& t) {
                               std::vector<std::string> ids;
                               for (const auto& r : t.rows) ids.push_back(r.image_id);
                               return ids;
                             })
      .def_property_readonly("X", &matrix_of)
      .def_property_readonly("y", &labels_array)
      .def("class_counts", &features::FeatureTable::class_counts)
      .def("to_csv", [](const features::FeatureTable& t) {
        std::ostringstream s;
        features::write_table_csv(s, t);
        return s.str();
      });

  py::class_<features::FeatureBuild>(m, "FeatureBuild")
      .def_property_readonly("train", [](const features::FeatureBuild& b) { return b.splits.train; })
      .def_property_readonly("val", [](const features::FeatureBuild& b) { return b.splits.val; })
      .def_property_readonly("test", [](const features::FeatureBuild& b) { return b.splits.test; })
      .def_readonly("table", &features::FeatureBuild::table)
      .def_property_readonly("counts", [](const features::FeatureBuild& b) {
        py::dict d;
        d["instances_in"] = b.counts.instances_in;
        d["instances_pruned"] = b.counts.instances_pruned;
        d["aggregated"] = b.counts.aggregated;
        d["after_zscore"] = b.counts.after_zscore;
        d["after_undersample"] = b.counts.after_undersample;
        return d;
      });

  m.def(
      "build_features",
      [](const Fixture& f, const cli::PipelineConfig& cfg) {
        return features::build_feature_table(f.manifest, f.detections, cfg.features, cfg.seed);
      },
      py::arg("fixture"), py::arg("config") = cli::PipelineConfig{});

  py::class_<Report>(m, "Report").def_readonly("text", &Report::text).def_readonly("json", &Report::json);

  m.def(
      "evaluate",
      [](const features::FeatureBuild& b, const cli::PipelineConfig& cfg) {
        eval::SuiteConfig suite;
        suite.enabled = cfg.enabled;
        suite.classifiers = cfg.seeded_classifiers();
        py::gil_scoped_release release;
        const auto r = eval::evaluate_suite(b.splits, suite);
        return Report{r.to_text(), r.to_json()};
      },
      py::arg("build"), py::arg("config") = cli::PipelineConfig{});

  m.def(
      "ablation",
      [](const features::FeatureBuild& b, const cli::PipelineConfig& cfg) {
        py::gil_scoped_release release;
        const auto r = eval::ablation(b.splits, cfg.ablation_classifier, cfg.seeded_classifiers(),
                                      eval::default_feature_groups());
        return Report{r.to_text(), r.to_json()};
      },
      py::arg("build"), py::arg("config") = cli::PipelineConfig{});

  m.def(
      "preprocess",
      [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a, const cli::PipelineConfig& cfg) {
        return to_array(imageprep::preprocess_image(to_image(a), cfg.prep).image);
      },
      py::arg("image"), py::arg("config") = cli::PipelineConfig{});

  m.def(
      "gaussian_blur",
      [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a, double sigma) {
        return to_array(imageprep::gaussian_blur(to_image(a), sigma));
      },
      py::arg("image"), py::arg("sigma"));

  m.def(
      "accuracy",
      [](const py::array_t<int, py::array::c_style | py::array::forcecast>& pred,
         const py::array_t<int, py::array::c_style | py::array::forcecast>& truth) {
        return eval::accuracy(int_vector(pred), int_vector(truth));
      },
      py::arg("pred"), py::arg("truth"));

  m.def(
      "confusion_matrix",
      [](const py::array_t<int, py::array::c_style | py::array::forcecast>& pred,
         const py::array_t<int, py::array::c_style | py::array::forcecast>& truth) {
        return eval::confusion_matrix(int_vector(pred), int_vector(truth));
      },
      py::arg("pred"), py::arg("truth"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv{"drgrade"};
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
