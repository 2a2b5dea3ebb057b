#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "rrtrack/checkpoint.hpp"
#include "rrtrack/cli.hpp"
#include "rrtrack/errors.hpp"
#include "rrtrack/eval.hpp"
#include "rrtrack/geometry.hpp"
#include "rrtrack/tracker.hpp"

namespace py = pybind11;
using namespace rrtrack;

namespace {

Image image_from_array(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw ShapeError("frames must be HxWx3 uint8 arrays");
  Image img;
  img.height = static_cast<int>(a.shape(0));
  img.width = static_cast<int>(a.shape(1));
  img.rgb.assign(a.data(), a.data() + a.size());
  return img;
}

py::array_t<std::uint8_t> image_to_array(const Image& img) {
  py::array_t<std::uint8_t> a({img.height, img.width, 3});
  std::copy(img.rgb.begin(), img.rgb.end(), a.mutable_data());
  return a;
}

py::tuple box_tuple(const BoundingBox& b) { return py::make_tuple(b.x1, b.y1, b.x2, b.y2); }

}  // namespace

PYBIND11_MODULE(_rrtrack, m) {
  m.doc() = "Recurrent single-object tracker";

  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<BoundingBox>(m, "BoundingBox")
      .def(py::init<>())
      .def(py::init([](double x1, double y1, double x2, double y2) { return BoundingBox{x1, y1, x2, y2}; }))
      .def_readwrite("x1", &BoundingBox::x1)
      .def_readwrite("y1", &BoundingBox::y1)
      .def_readwrite("x2", &BoundingBox::x2)
      .def_readwrite("y2", &BoundingBox::y2)
      .def("area", &BoundingBox::area)
      .def("as_tuple", &box_tuple)
      .def("__repr__", [](const BoundingBox& b) {
        std::ostringstream os;
        os << "BoundingBox(" << b.x1 << ", " << b.y1 << ", " << b.x2 << ", " << b.y2 << ")";
        return os.str();
      });

  py::class_<CropWindow>(m, "CropWindow")
      .def_readonly("cx", &CropWindow::cx)
      .def_readonly("cy", &CropWindow::cy)
      .def_readonly("w", &CropWindow::w)
      .def_readonly("h", &CropWindow::h)
      .def_readonly("clamped", &CropWindow::clamped);

  m.def("iou", &iou);
  m.def("crop_window_for", [](const BoundingBox& b) { return crop_window_for(b); });
  m.def("encode_target", [](const CropWindow& w, const BoundingBox& b) {
    const auto t = encode_target(w, b);
    return py::make_tuple(t.x1, t.y1, t.x2, t.y2);
  });
  m.def("decode_prediction", [](const CropWindow& w, double x1, double y1, double x2, double y2) {
    return decode_prediction(w, {x1, y1, x2, y2}).box;
  });

  py::class_<NetworkConfig>(m, "NetworkConfig")
      .def_static("desk", &NetworkConfig::desk)
      .def_static("small", &NetworkConfig::small)
      .def_readwrite("crop_size", &NetworkConfig::crop_size)
      .def_readwrite("embed_dim", &NetworkConfig::embed_dim)
      .def_readwrite("lstm_units", &NetworkConfig::lstm_units)
      .def_readwrite("seed", &NetworkConfig::seed)
      .def("stream_feature_length", &NetworkConfig::stream_feature_length);

  py::class_<NetworkParams>(m, "NetworkParams")
      .def_static("initialize", &NetworkParams::initialize)
      .def_static("load", [](const std::filesystem::path& p) { return load_network(p); })
      .def("save", [](const NetworkParams& p, const std::filesystem::path& path) { save_network(path, p); })
      .def_property_readonly("config", &NetworkParams::config)
      .def("names", [](const NetworkParams& p) {
        std::vector<std::string> out;
        for (const auto& [name, t] : p.named_tensors()) out.push_back(name);
        return out;
      });

  m.def(
      "track",
      [](const NetworkParams& params, const std::vector<py::array_t<std::uint8_t>>& frames, const BoundingBox& init,
         std::size_t reset_interval, bool reset_enabled) {
        std::vector<Image> images;
        for (const auto& f : frames) images.push_back(image_from_array(f));
        py::gil_scoped_release release;
        return track_sequence(params, images, init, {reset_interval, reset_enabled});
      },
      py::arg("params"), py::arg("frames"), py::arg("init_box"), py::arg("reset_interval") = 32,
      py::arg("reset_enabled") = true);

  m.def("read_ppm", [](const std::filesystem::path& p) { return image_to_array(read_ppm(p)); });

  m.def("success_auc", [](const std::vector<BoundingBox>& pred, const std::vector<BoundingBox>& truth) {
    return ope_evaluate(pred, truth, {}).success.auc;
  });
  m.def("mean_iou", [](const std::vector<BoundingBox>& pred, const std::vector<BoundingBox>& truth) {
    return ope_evaluate(pred, truth, {}).accuracy;
  });

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return py::make_tuple(code, out.str(), err.str());
  });
}
