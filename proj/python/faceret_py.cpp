#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "faceret/activations.hpp"
#include "faceret/cli.hpp"
#include "faceret/descriptor.hpp"
#include "faceret/error.hpp"
#include "faceret/evaluation.hpp"
#include "faceret/network.hpp"
#include "faceret/selftest.hpp"
#include "faceret/similarity.hpp"

namespace py = pybind11;
using namespace faceret;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const FloatArray& a) {
  if (a.ndim() == 0) throw Error(ErrorKind::InvalidArgument, "expected an array with at least one dimension");
  std::vector<std::size_t> dims(a.shape(), a.shape() + a.ndim());
  return Tensor(Shape(dims), std::vector<float>(a.data(), a.data() + a.size()));
}

FloatArray to_array(const Tensor& t) {
  std::vector<py::ssize_t> dims(t.shape().dims().begin(), t.shape().dims().end());
  FloatArray out(dims);
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

FeatureMatrix to_matrix(const FloatArray& a) {
  if (a.ndim() != 2) throw Error(ErrorKind::Shape, "descriptor matrix must be 2-D (rows, dim)");
  return FeatureMatrix(a.shape(0), a.shape(1), std::vector<float>(a.data(), a.data() + a.size()));
}

std::span<const float> as_span(const FloatArray& a) { return {a.data(), static_cast<std::size_t>(a.size())}; }

}  // namespace

PYBIND11_MODULE(_faceret, m) {
  m.doc() = "Face descriptor extraction with average-biased rectifiers and retrieval evaluation";

  static py::exception<Error> error_type(m, "FaceretError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object instance = py::reinterpret_borrow<py::object>(error_type.ptr())(e.what());
      instance.attr("kind") = to_string(e.kind());
      PyErr_SetObject(error_type.ptr(), instance.ptr());
    }
  });

  m.def("relu", [](const FloatArray& x) { return to_array(relu(to_tensor(x))); }, py::arg("x"));
  m.def("ab_relu", [](const FloatArray& x, float alpha) { return to_array(ab_relu(to_tensor(x), alpha)); },
        py::arg("x"), py::arg("alpha") = 1.0f);
  m.def("mean_volume", [](const FloatArray& x) { return mean_volume(to_tensor(x)); }, py::arg("x"));

  m.def("conv2d", [](const FloatArray& x, const FloatArray& w, const FloatArray& b, std::size_t stride,
                     std::size_t pad) { return to_array(conv2d_forward(to_tensor(x), to_tensor(w), as_span(b), stride, pad)); },
        py::arg("x"), py::arg("weight"), py::arg("bias"), py::arg("stride") = 1, py::arg("pad") = 0);
  m.def("maxpool", [](const FloatArray& x, std::size_t window, std::size_t stride, std::size_t pad) {
          return to_array(maxpool_forward(to_tensor(x), window, stride, pad));
        },
        py::arg("x"), py::arg("window") = 2, py::arg("stride") = 2, py::arg("pad") = 0);

  m.def("read_vgt", [](const std::filesystem::path& p) { return to_array(read_vgt(p)); }, py::arg("path"));
  m.def("write_vgt", [](const std::filesystem::path& p, const FloatArray& a) { write_vgt(p, to_tensor(a)); },
        py::arg("path"), py::arg("array"));

  py::class_<DescriptorVariant>(m, "Variant")
      .def_readonly("name", &DescriptorVariant::name)
      .def_readonly("tap_layer", &DescriptorVariant::tap_layer)
      .def_property_readonly("overrides",
                             [](const DescriptorVariant& v) {
                               std::map<std::size_t, std::string> out;
                               for (const auto& [k, a] : v.overrides) out[k] = a.to_string();
                               return out;
                             })
      .def("__repr__", [](const DescriptorVariant& v) { return "<Variant " + v.name + ">"; });
  m.def("parse_variant", &parse_variant, py::arg("name"));
  m.def("standard_variants", &standard_variant_names);

  py::class_<Model>(m, "Model")
      .def_property_readonly("input_shape", [](const Model& mdl) { return mdl.spec.input_shape.dims(); })
      .def_property_readonly("normalization_mean", [](const Model& mdl) { return mdl.spec.normalization_mean; })
      .def_property_readonly("layer_names",
                             [](const Model& mdl) {
                               std::vector<std::string> names;
                               for (const auto& l : mdl.spec.layers) names.push_back(l.name);
                               return names;
                             })
      .def_property_readonly("output_shapes",
                             [](const Model& mdl) {
                               std::vector<std::vector<std::size_t>> out;
                               for (const auto& s : mdl.spec.infer_shapes()) out.push_back(s.dims());
                               return out;
                             })
      .def("spec_json", [](const Model& mdl) { return spec_to_json(mdl.spec); })
      .def("save", [](const Model& mdl, const std::filesystem::path& p) { save_weights(p, mdl.spec, mdl.weights); },
           py::arg("path"))
      .def("conv_weights",
           [](const Model& mdl, std::size_t layer) {
             const ConvWeights& w = mdl.weights.at(layer);
             return py::make_tuple(to_array(w.weight), to_array(Tensor(Shape{w.bias.size()}, w.bias)));
           },
           py::arg("layer"))
      .def("forward",
           [](const Model& mdl, const FloatArray& x, std::size_t tap, const std::map<std::size_t, std::string>& overrides) {
             ActivationOverrides ov;
             for (const auto& [k, text] : overrides) ov.emplace(k, ActivationKind::parse(text));
             const Tensor in = to_tensor(x);
             Tensor out;
             {
               py::gil_scoped_release release;
               out = forward(mdl.spec, mdl.weights, in, tap, ov);
             }
             return to_array(out);
           },
           py::arg("x"), py::arg("tap"), py::arg("overrides") = std::map<std::size_t, std::string>{})
      .def("preprocess",
           [](const Model& mdl, const FloatArray& image) {
             return to_array(preprocess(to_tensor(image), mdl.spec.input_shape, mdl.spec.normalization_mean));
           },
           py::arg("image"))
      .def("extract",
           [](const Model& mdl, const FloatArray& image, const std::string& variant) {
             const DescriptorVariant v = parse_variant(variant);
             const Tensor x = preprocess(to_tensor(image), mdl.spec.input_shape, mdl.spec.normalization_mean);
             Tensor values;
             {
               py::gil_scoped_release release;
               values = extract(mdl.spec, mdl.weights, v, x).values;
             }
             return to_array(values);
           },
           py::arg("image"), py::arg("variant"));
  m.def("load_model", &load_weights, py::arg("path"));
  m.def(
      "desk_model",
      [](std::size_t input_size, std::size_t width_divisor, std::uint64_t seed) {
        Model mdl;
        mdl.spec = vgg_face_spec({input_size, width_divisor});
        mdl.weights = random_weights(mdl.spec, seed);
        return mdl;
      },
      py::arg("input_size") = 32, py::arg("width_divisor") = 16, py::arg("seed") = 0);

  m.def("distance",
        [](const std::string& kind, const FloatArray& x, const FloatArray& y) {
          return distance(parse_distance(kind), as_span(x), as_span(y));
        },
        py::arg("kind"), py::arg("x"), py::arg("y"));
  m.def("rank_gallery",
        [](const std::string& kind, const FloatArray& probe, const FloatArray& gallery) {
          return rank_gallery(parse_distance(kind), as_span(probe), to_matrix(gallery));
        },
        py::arg("kind"), py::arg("probe"), py::arg("gallery"));

  m.def("anmrr",
        [](const std::vector<std::pair<std::vector<std::size_t>, std::size_t>>& queries, std::optional<std::size_t> window,
           std::optional<std::size_t> gtm) {
          std::vector<AnmrrQuery> qs;
          for (const auto& [ranks, ng] : queries) qs.push_back({ranks, ng});
          return anmrr(qs, {window, gtm});
        },
        py::arg("queries"), py::arg("window") = py::none(), py::arg("gtm") = py::none());

  m.def("evaluate",
        [](const std::vector<std::string>& subjects, const FloatArray& descriptors, const std::string& distance_kind,
           const std::vector<std::size_t>& cutoffs, const std::string& window, const std::string& variant,
           std::size_t threads, const std::string& format) {
          ExperimentOptions opt;
          opt.variant = variant;
          opt.distance = parse_distance(distance_kind);
          opt.cutoffs = cutoffs;
          opt.window = AnmrrWindow::parse(window);
          opt.threads = threads;
          const FeatureMatrix matrix = to_matrix(descriptors);
          std::vector<MetricsReport> reports;
          {
            py::gil_scoped_release release;
            reports.push_back(run_experiment(subjects, matrix, opt));
          }
          if (format == "json") return report_json(reports);
          if (format == "csv") return report_csv(reports);
          throw Error(ErrorKind::Usage, "format must be csv or json");
        },
        py::arg("subjects"), py::arg("descriptors"), py::arg("distance") = "chisq",
        py::arg("cutoffs") = std::vector<std::size_t>{1, 5, 10}, py::arg("anmrr_window") = "cutoff",
        py::arg("variant") = "", py::arg("threads") = 1, py::arg("format") = "json");

  m.def("selftest", [] {
    std::vector<std::tuple<std::string, bool, std::string>> out;
    for (const auto& r : run_selftest()) out.emplace_back(r.name, r.passed, r.detail);
    return out;
  });

  m.def("cli",
        [](const std::vector<std::string>& args) {
          std::ostringstream out, err;
          const int code = cli::run(args, out, err);
          return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"));
}
