#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "json.hpp"
#include "meltpool/bench.hpp"
#include "meltpool/config.hpp"
#include "meltpool/error.hpp"
#include "meltpool/verify.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace meltpool;

namespace {

json metrics_json(const MeltPoolMetrics& m) {
  return {{"length_um", m.length}, {"width_um", m.width},   {"depth_um", m.depth},
          {"cooling_rate", m.cooling_rate}, {"time", m.time}, {"empty", m.empty}};
}

json metric_set_json(const MetricSet& s) {
  json out = json::object();
  const auto put = [&](const char* key, const std::optional<double>& v) { out[key] = v ? json(*v) : json(); };
  put("length", s.length);
  put("width", s.width);
  put("depth", s.depth);
  put("cooling_rate", s.cooling_rate);
  return out;
}

json definition_json(const CaseDefinition& d) {
  json out = {{"label", d.label()},
              {"machine", to_string(d.machine)},
              {"case", to_string(d.id)},
              {"model", to_string(d.model)},
              {"source", to_string(d.source)},
              {"power", d.power},
              {"speed", d.speed},
              {"d4sigma", d.d4sigma},
              {"absorptivity", d.absorptivity},
              {"emissivity", d.emissivity},
              {"theta", d.theta}};
  if (d.source == SourceVariant::Goldak) {
    out["ff_fr"] = d.ff_fr;
    out["cr_cf"] = d.cr_cf;
  }
  return out;
}

std::string run_config(const std::string& patch) {
  RunConfig rc = config_from_json(json::parse(patch));
  RunOutcome out;
  {
    py::gil_scoped_release release;
    out = execute_run(std::move(rc));
  }
  const TemperatureField& last = out.result.snapshots.fields.back();
  const auto [lo, hi] = std::minmax_element(last.values.begin(), last.values.end());
  json summary = {{"final_time", last.time},
                  {"final_min_temperature", *lo},
                  {"final_max_temperature", *hi},
                  {"energy_balance", out.energy_balance},
                  {"steps", out.result.report.steps.size()},
                  {"nodes", last.grid->node_count()},
                  {"history", json::array()}};
  for (const auto& m : out.history) summary["history"].push_back(metrics_json(m));
  if (out.gated) summary["metrics"] = metrics_json(*out.gated);
  return summary.dump();
}

std::string run_bench_case(const std::string& machine, const std::string& id, const std::string& model,
                           const std::string& grid, const std::optional<std::filesystem::path>& profile) {
  const CaseDefinition def = make_case(machine_from_string(machine), case_from_string(id),
                                       model_from_string(model), profile);
  const GridPreset preset = preset_from_string(grid);
  CaseRun run;
  {
    py::gil_scoped_release release;
    run = run_case(def, preset);
  }
  json out = {{"definition", definition_json(def)},
              {"grid", to_string(run.preset)},
              {"metrics", metrics_json(run.metrics)},
              {"deviation", metric_set_json(run.deviation)},
              {"energy_balance", run.energy_balance},
              {"wall_seconds", run.wall_seconds},
              {"steps", run.steps},
              {"nodes", run.node_count},
              {"surrogate", run.surrogate},
              {"history", json::array()}};
  for (const auto& m : run.history) out["history"].push_back(metrics_json(m));
  return out.dump();
}

std::string catalog() {
  json out = json::array();
  for (const CatalogEntry& e : case_catalog()) {
    const ReferenceRecord& r = e.reference;
    out.push_back({{"definition", definition_json(e.definition)},
                   {"measured", metric_set_json(r.measured())},
                   {"computed_iso", metric_set_json(r.computed_iso)},
                   {"deviation_iso", metric_set_json(r.deviation_iso)},
                   {"computed_aniso", metric_set_json(r.computed_aniso)},
                   {"deviation_aniso", metric_set_json(r.deviation_aniso)}});
  }
  return out.dump();
}

std::string report_json(const OracleReport& r) {
  json out = {{"name", r.name},
              {"tolerance", r.tolerance},
              {"max_error", r.max_error()},
              {"passed", r.passed()},
              {"energy_balance", r.energy_balance},
              {"probes", json::array()}};
  for (const auto& p : r.probes) {
    out["probes"].push_back({{"label", p.label},
                             {"computed", p.computed},
                             {"analytic", p.analytic},
                             {"relative_error", p.relative_error}});
  }
  return out.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Melt-pool heat conduction solver";
  m.attr("__version__") = kToolVersion;

  auto invalid = py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", invalid.ptr());
  py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);
  py::register_exception<MetricError>(m, "MetricError", PyExc_RuntimeError);
  py::register_exception<FetchError>(m, "FetchError", PyExc_RuntimeError);

  m.def("radiation_flux", &radiation_flux, py::arg("temperature"), py::arg("ambient"), py::arg("emissivity"),
        py::arg("stefan_boltzmann") = kStefanBoltzmann,
        "Radiative flux into the surface in W/mm^2, negative for a hot surface.");
  m.def(
      "phase_fraction",
      [](double T, double solidus, double liquidus, double sharpness) {
        PhaseChangeModel pc{solidus, liquidus, sharpness};
        pc.validate();
        return phase_fraction(pc, T);
      },
      py::arg("temperature"), py::arg("solidus") = 1290.0, py::arg("liquidus") = 1350.0,
      py::arg("sharpness") = 3.0);
  m.def(
      "absorbed_power",
      [](const std::string& patch) { return absorbed_power(config_from_json(json::parse(patch)).simulation.source.model); },
      py::arg("config_json"));
  m.def(
      "total_power",
      [](const std::string& patch) { return total_power(config_from_json(json::parse(patch)).simulation.source.model); },
      py::arg("config_json"), "Quadrature of the surface flux in W.");
  m.def(
      "resolve_config", [](const std::string& patch) { return to_json(config_from_json(json::parse(patch))).dump(); },
      py::arg("config_json"));
  m.def("default_config", [] { return to_json(default_run_config()).dump(); });
  m.def("run", &run_config, py::arg("config_json"));
  m.def("case_catalog", &catalog);
  m.def("run_case", &run_bench_case, py::arg("machine"), py::arg("case"), py::arg("model") = "iso",
        py::arg("grid") = "desk", py::arg("profile") = std::nullopt);
  m.def("deviation_percent", &deviation_percent, py::arg("computed"), py::arg("measured"));
  m.def(
      "rosenthal_temperature",
      [](double xi, double r, double absorbed_power, double speed, double conductivity, double diffusivity,
         double ambient) {
        RosenthalParams p{absorbed_power, speed, conductivity, diffusivity, ambient};
        p.validate();
        return rosenthal_temperature(p, xi, r);
      },
      py::arg("xi"), py::arg("r"), py::arg("absorbed_power") = 20.0, py::arg("speed") = 100.0,
      py::arg("conductivity") = 0.02, py::arg("diffusivity") = 5.0, py::arg("ambient") = 20.0);
  m.def("halfspace_flux_temperature", &halfspace_flux_temperature, py::arg("flux"), py::arg("conductivity"),
        py::arg("diffusivity"), py::arg("ambient"), py::arg("depth"), py::arg("time"));
  m.def("verify_halfspace", [] {
    OracleReport r;
    {
      py::gil_scoped_release release;
      r = verify_halfspace();
    }
    return report_json(r);
  });
}
