#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pathoquant/error.hpp"
#include "pathoquant/fixture.hpp"
#include "pathoquant/service/pipeline.hpp"

namespace py = pybind11;

namespace {

std::span<const std::uint8_t> view(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

py::bytes to_bytes(const std::vector<std::uint8_t>& v) {
  return py::bytes(reinterpret_cast<const char*>(v.data()), v.size());
}

pq::PostprocessParams make_params(double seg_threshold, double size_gate_min,
                                  std::optional<double> size_gate_max, double marker_threshold) {
  pq::PostprocessParams p;
  p.seg_threshold = seg_threshold;
  p.size_gate_min = size_gate_min;
  p.size_gate_max = size_gate_max;
  p.marker_threshold = marker_threshold;
  return p;
}

py::dict result_dict(const pq::PipelineResult& r) {
  py::dict images;
  for (const auto& [name, png] : r.images) images[py::str(name)] = to_bytes(png);
  py::dict scoring;
  scoring["num_total"] = r.scoring.num_total;
  scoring["num_pos"] = r.scoring.num_pos;
  scoring["percent_pos"] = r.scoring.percent_pos;
  py::dict out;
  out["images"] = images;
  out["scoring"] = scoring;
  return out;
}

const pq::Pipeline& reference_pipeline() {
  static const pq::Pipeline pipeline(std::make_shared<pq::ReferenceBackend>());
  return pipeline;
}

pq::Resolution resolution_arg(const std::string& text) {
  const auto r = pq::parse_resolution(text);
  if (!r) throw pq::Error(pq::ErrorCode::kInvalidParameter, "resolution must be 10x, 20x or 40x");
  return *r;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "IHC quantification pipeline: decode, stain deconvolution, segmentation, scoring";

  static py::exception<pq::Error> error(m, "Error", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const pq::Error& e) {
      PyErr_SetString(error.ptr(), (std::string(pq::to_string(e.code())) + ": " + e.what()).c_str());
    }
  });

  m.def(
      "decode",
      [](const std::string& data, bool pil) {
        pq::RasterImage img = [&] {
          py::gil_scoped_release release;
          return reference_pipeline().decode(view(data), pil);
        }();
        const auto px = img.pixels();
        return py::make_tuple(img.width(), img.height(),
                              py::bytes(reinterpret_cast<const char*>(px.data()), px.size()));
      },
      py::arg("data"), py::arg("pil") = false,
      "Decode an image file to (width, height, packed RGB bytes).");

  m.def(
      "encode_png",
      [](int width, int height, const std::string& rgb) {
        pq::RasterImage img(width, height, std::vector<std::uint8_t>(rgb.begin(), rgb.end()));
        return to_bytes(pq::encode_png(img));
      },
      py::arg("width"), py::arg("height"), py::arg("rgb"));

  m.def(
      "process",
      [](const std::string& data, const std::string& resolution, bool slim, bool pil,
         double seg_threshold, double size_gate_min, std::optional<double> size_gate_max,
         double marker_threshold) {
        const auto res = resolution_arg(resolution);
        const auto params = make_params(seg_threshold, size_gate_min, size_gate_max, marker_threshold);
        pq::PipelineResult r;
        {
          py::gil_scoped_release release;
          const auto& pipe = reference_pipeline();
          r = pipe.process(pipe.decode(view(data), pil), res, params, slim);
        }
        return result_dict(r);
      },
      py::arg("data"), py::arg("resolution") = "20x", py::arg("slim") = false,
      py::arg("pil") = false, py::arg("seg_threshold") = 0.5, py::arg("size_gate_min") = 20.0,
      py::arg("size_gate_max") = py::none(), py::arg("marker_threshold") = 0.5,
      "Run the full pipeline on encoded image bytes; returns {'images', 'scoring'}.");

  m.def(
      "adjust",
      [](const std::string& seg_raw, std::optional<std::string> original,
         std::optional<std::string> resolution, double seg_threshold, double size_gate_min,
         std::optional<double> size_gate_max, double marker_threshold) {
        const auto params = make_params(seg_threshold, size_gate_min, size_gate_max, marker_threshold);
        std::optional<double> scale;
        if (resolution) scale = pq::canonical_scale(resolution_arg(*resolution));
        pq::PipelineResult r;
        {
          py::gil_scoped_release release;
          pq::ImageLimits seg_limits;
          seg_limits.max_dim *= 2;
          const auto seg = pq::decode_image(view(seg_raw), true, seg_limits);
          std::optional<pq::RasterImage> img;
          if (original) img = reference_pipeline().decode(view(*original), false);
          r = reference_pipeline().adjust(seg, img ? &*img : nullptr, scale, params);
        }
        return result_dict(r);
      },
      py::arg("seg_raw"), py::arg("original") = py::none(), py::arg("resolution") = py::none(),
      py::arg("seg_threshold") = 0.5, py::arg("size_gate_min") = 20.0,
      py::arg("size_gate_max") = py::none(), py::arg("marker_threshold") = 0.5,
      "Re-run postprocessing from a seg_raw PNG.");

  m.def(
      "random_fixture",
      [](int total, int positive, std::uint64_t seed, int width, int height, int min_radius,
         int max_radius) {
        pq::RandomFixtureOptions o;
        o.width = width;
        o.height = height;
        o.min_radius = min_radius;
        o.max_radius = max_radius;
        const auto spec = pq::random_fixture_spec(total, positive, seed, o);
        return py::make_tuple(to_bytes(pq::encode_png(pq::render_fixture(spec))),
                              pq::fixture_truth_json(spec));
      },
      py::arg("total"), py::arg("positive"), py::arg("seed"), py::arg("width") = 1024,
      py::arg("height") = 1024, py::arg("min_radius") = 5, py::arg("max_radius") = 10,
      "Render a random stained-disk fixture; returns (png_bytes, truth_json).");

  m.def(
      "fixture_from_spec",
      [](const std::string& spec_json) {
        const auto spec = pq::parse_fixture_spec(spec_json);
        return py::make_tuple(to_bytes(pq::encode_png(pq::render_fixture(spec))),
                              pq::fixture_truth_json(spec));
      },
      py::arg("spec_json"));

  m.def("optical_density", &pq::optical_density, py::arg("intensity"));

  m.def(
      "unmix",
      [](double r, double g, double b) {
        const auto c = pq::StainMatrix::standard_hdab().unmix(
            {pq::optical_density(r), pq::optical_density(g), pq::optical_density(b)});
        return py::make_tuple(c.hema, c.dab);
      },
      py::arg("r"), py::arg("g"), py::arg("b"),
      "Hematoxylin and DAB concentrations of one RGB pixel (standard stain vectors).");
}
