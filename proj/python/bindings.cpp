#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mathrec/counting.hpp"
#include "mathrec/inkml.hpp"
#include "mathrec/latex.hpp"
#include "mathrec/manifest.hpp"
#include "mathrec/metrics.hpp"
#include "mathrec/model.hpp"
#include "mathrec/posforest.hpp"
#include "mathrec/raster.hpp"
#include "mathrec/synth.hpp"
#include "mathrec/trainer.hpp"

namespace py = pybind11;
using namespace mathrec;

namespace {

py::array_t<float> image_to_array(const data::Image& img) {
  py::array_t<float> out({img.height, img.width});
  std::copy(img.pixels.begin(), img.pixels.end(), out.mutable_data());
  return out;
}

data::Image array_to_image(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) fail("ShapeMismatch", "expected a 2-d grayscale array");
  data::Image img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), img.pixels.begin());
  return img;
}

const char* relpos_name(forest::RelPos rp) {
  switch (rp) {
    case forest::RelPos::Upper: return "upper";
    case forest::RelPos::Lower: return "lower";
    default: return "middle";
  }
}

// Read-only inference over a trained checkpoint.
struct Predictor {
  train::LoadedCheckpoint ckpt;
  model::Model model;

  explicit Predictor(const std::string& path)
      : ckpt(train::read_train_checkpoint(path)), model(train::model_from_checkpoint(ckpt)) {}

  latex::TokenSeq predict(const py::array_t<float, py::array::c_style | py::array::forcecast>& a,
                          int max_len) const {
    auto img = array_to_image(a);
    auto r = model.predict_ids(model::image_tensor<float>(img),
                               max_len > 0 ? max_len : ckpt.cfg.max_len);
    return r.ids.empty() ? latex::TokenSeq{} : ckpt.vocab.decode_ids(r.ids);
  }

  std::vector<double> counts(
      const py::array_t<float, py::array::c_style | py::array::forcecast>& a) const {
    return model.predict_counts(model::image_tensor<float>(array_to_image(a)));
  }

  std::vector<std::string> classes() const { return ckpt.vocab.classes(); }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "math expression recognition core";

  py::register_exception<Error>(m, "MathrecError");

  m.def("tokenize", &latex::tokenize, py::arg("source"));
  m.def("join", &latex::join, py::arg("tokens"));
  m.def(
      "position_labels",
      [](const latex::TokenSeq& tokens) {
        auto l = forest::encode_position_labels(tokens);
        std::vector<std::string> rel;
        rel.reserve(l.relpos.size());
        for (auto rp : l.relpos) rel.emplace_back(relpos_name(rp));
        return py::make_tuple(l.depth, rel);
      },
      py::arg("tokens"), "Per-token (depths, relative positions).");

  py::class_<latex::Vocab>(m, "Vocab")
      .def_static("build", &latex::Vocab::build, py::arg("corpus"))
      .def_static("load", &latex::Vocab::load, py::arg("path"))
      .def("save", &latex::Vocab::save, py::arg("path"))
      .def("encode", &latex::Vocab::encode, py::arg("token"))
      .def("encode_ids", &latex::Vocab::encode_ids, py::arg("tokens"))
      .def("decode_ids", &latex::Vocab::decode_ids, py::arg("ids"))
      .def_property_readonly("num_classes", &latex::Vocab::num_classes)
      .def_property_readonly("classes", &latex::Vocab::classes);

  m.def("count_vector", &counting::count_vector, py::arg("tokens"), py::arg("vocab"));
  m.def("smooth_l1", &counting::smooth_l1, py::arg("pred"), py::arg("target"));

  m.def("edit_distance", &metrics::edit_distance, py::arg("pred"), py::arg("truth"));
  m.def(
      "evaluate",
      [](const std::vector<latex::TokenSeq>& preds, const std::vector<latex::TokenSeq>& truths) {
        auto r = metrics::evaluate(preds, truths);
        py::dict d;
        d["exprate"] = r.exprate;
        d["le1"] = r.le1;
        d["le2"] = r.le2;
        d["le3"] = r.le3;
        d["n"] = r.n_samples;
        d["distances"] = r.distances;
        return d;
      },
      py::arg("predictions"), py::arg("truths"));

  m.def("synth_expression", &data::synth_expression, py::arg("seed"), py::arg("max_depth"));
  m.def("grammar_terminals", [] { return data::grammar_terminals(); });
  m.def(
      "render", [](const latex::TokenSeq& tokens) { return image_to_array(data::render_synthetic(tokens)); },
      py::arg("tokens"), "Typeset tokens with the built-in bitmap font.");
  m.def(
      "rasterize",
      [](const std::vector<data::Trace>& traces, int height) {
        return image_to_array(data::rasterize(traces, height));
      },
      py::arg("traces"), py::arg("height") = 64);
  m.def(
      "parse_inkml",
      [](const std::string& path) {
        auto s = data::parse_inkml_file(path);
        return py::make_tuple(s.traces, s.truth);
      },
      py::arg("path"), "(traces, truth) from an InkML file.");
  m.def(
      "build_synthetic_corpus",
      [](const std::string& dir, std::uint64_t seed, int n, int max_depth) {
        return static_cast<int>(data::build_synthetic_corpus(dir, seed, n, max_depth).size());
      },
      py::arg("dir"), py::arg("seed") = 0, py::arg("n") = 64, py::arg("max_depth") = 2);
  m.def(
      "read_pgm", [](const std::string& path) { return image_to_array(data::read_pgm(path)); },
      py::arg("path"));

  py::class_<Predictor>(m, "Predictor")
      .def(py::init<const std::string&>(), py::arg("checkpoint"))
      .def("predict", &Predictor::predict, py::arg("image"), py::arg("max_len") = 0)
      .def("counts", &Predictor::counts, py::arg("image"))
      .def_property_readonly("classes", &Predictor::classes);
}
