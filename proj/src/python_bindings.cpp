#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "photodeg/errors.hpp"
#include "photodeg/fit.hpp"
#include "photodeg/io.hpp"
#include "photodeg/pipeline.hpp"
#include "photodeg/prediction.hpp"
#include "photodeg/simulate.hpp"

namespace py = pybind11;
using namespace photodeg;

namespace {

py::dict band_to_dict(const PredictionBand& band) {
  py::dict d;
  d["specimen_id"] = band.specimen_id;
  d["times_h"] = band.times_h;
  d["s_star_cum"] = band.s_star_cum;
  d["point"] = band.point;
  d["lower"] = band.lower;
  d["upper"] = band.upper;
  d["warnings"] = band.warnings;
  return d;
}

// Config keys as accepted by the configuration file; values are passed
// through their string form.
RunConfig config_from(const std::string& command, const py::dict& options) {
  RunConfig cfg;
  cfg.command = command;
  for (const auto& [key, value] : options) cfg.set(py::str(key), py::str(value));
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Photodegradation path models, outdoor prediction and calibrated intervals";

  static py::exception<Error> base(m, "Error");
  static py::exception<ValidationError> validation(m, "ValidationError", base.ptr());
  static py::exception<ConfigurationError> configuration(m, "ConfigurationError", base.ptr());
  static py::exception<DomainError> domain(m, "DomainError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ValidationError& e) {
      PyErr_SetString(validation.ptr(), e.what());
    } catch (const ConfigurationError& e) {
      PyErr_SetString(configuration.ptr(), e.what());
    } catch (const DomainError& e) {
      PyErr_SetString(domain.ptr(), e.what());
    } catch (const Error& e) {
      PyErr_SetString(base.ptr(), e.what());
    }
  });

  py::class_<CombinedParams>(m, "CombinedParams")
      .def(py::init<>())
      .def_static("published", &CombinedParams::published)
      .def_readwrite("alpha", &CombinedParams::alpha)
      .def_readwrite("beta_lambda", &CombinedParams::beta_lambda)
      .def_readwrite("p", &CombinedParams::p)
      .def_readwrite("ea_over_r", &CombinedParams::ea_over_r)
      .def_readwrite("beta_rh", &CombinedParams::beta_rh)
      .def_readwrite("rh0", &CombinedParams::rh0)
      .def_readwrite("eta0", &CombinedParams::eta0)
      .def_readwrite("b353", &CombinedParams::b353)
      .def_readwrite("sigma0", &CombinedParams::sigma0)
      .def_readwrite("sigma1", &CombinedParams::sigma1)
      .def_readwrite("sigma2", &CombinedParams::sigma2)
      .def_readwrite("sigma_v", &CombinedParams::sigma_v)
      .def_readwrite("sigma_eps", &CombinedParams::sigma_eps)
      .def_readwrite("sigma_u", &CombinedParams::sigma_u)
      .def("fixed", &CombinedParams::fixed)
      .def("__repr__", [](const CombinedParams& p) {
        return "CombinedParams(alpha=" + format_number(p.alpha) + ", beta_lambda=" + format_number(p.beta_lambda) +
               ", p=" + format_number(p.p) + ", ...)";
      });

  m.def("aic", &aic, py::arg("loglik"), py::arg("n_params"));
  m.def("sigma_of_lambda", py::overload_cast<double, const CombinedParams&>(&sigma_of_lambda), py::arg("lambda_nm"),
        py::arg("params"));
  m.def("arrhenius_log", &arrhenius_log, py::arg("temp_c"), py::arg("ea_over_r"));
  m.def("rh_log_effect", &rh_log_effect, py::arg("rh"), py::arg("beta_rh"), py::arg("rh0"));
  m.def("nd_log_effect", &nd_log_effect, py::arg("nd"), py::arg("p"));
  m.def("degradation_path", &degradation_path, py::arg("z"), py::arg("alpha"), py::arg("v") = 0.0);

  m.def(
      "predict_synthetic",
      [](const CombinedParams& params, int n_days, std::uint64_t seed, double v, int bin_min) {
        WeatherSpec spec;
        spec.n_days = n_days;
        spec.seed = seed;
        const auto binned = bin_covariates(simulate_weather(spec), static_cast<long long>(bin_min) * 60);
        return band_to_dict(predict_path(binned, params, v));
      },
      py::arg("params"), py::arg("n_days") = 120, py::arg("seed") = 7, py::arg("v") = 0.0, py::arg("bin_min") = 60,
      "Point prediction on a synthetic weather record.");

  m.def(
      "estimate_random_effect",
      [](const std::vector<double>& measured, const std::vector<double>& predicted, int first, int last) {
        const auto e = estimate_random_effect(measured, predicted, first, last);
        return py::make_tuple(e.v, e.fallback);
      },
      py::arg("measured"), py::arg("predicted"), py::arg("first") = 5, py::arg("last") = 10);

  m.def("prediction_mse", [](const std::vector<double>& a, const std::vector<double>& b) { return prediction_mse(a, b); });

  m.def(
      "run",
      [](const std::string& command, const py::dict& options, const std::vector<std::string>& fits) {
        PipelineRequest request;
        request.config = config_from(command, options);
        for (const auto& f : fits) request.fits.emplace_back(f);
        PipelineResult result;
        {
          py::gil_scoped_release release;
          result = run_pipeline(request);
        }
        py::dict d;
        d["summary"] = result.summary;
        d["warnings"] = result.warnings;
        std::vector<std::string> artifacts;
        for (const auto& a : result.artifacts) artifacts.push_back(a.string());
        d["artifacts"] = artifacts;
        return d;
      },
      py::arg("command"), py::arg("options") = py::dict(), py::arg("fits") = std::vector<std::string>{},
      "Run one pipeline command. Options use the configuration-file keys.");
}
