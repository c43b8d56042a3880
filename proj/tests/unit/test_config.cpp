#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "meltpool/config.hpp"
#include "meltpool/error.hpp"

using namespace meltpool;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string field_of(const json& patch) {
  try {
    config_from_json(patch);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<accepted>";
}

fs::path write_file(const std::string& name, const std::string& text) {
  const fs::path p = fs::temp_directory_path() / name;
  std::ofstream(p) << text;
  return p;
}

json small_run() {
  return json::parse(R"({
    "grid": {"domain": {"width": 1.0, "depth": 0.5, "length": 1.5}, "coarse_spacing": 0.1,
             "bands": {"x": {"lo": -0.1, "hi": 0.1, "spacing": 0.04},
                       "y": {"lo": -0.08, "hi": 0.0, "spacing": 0.04},
                       "z": {"lo": 0.2, "hi": 1.0, "spacing": 0.04}}},
    "source": {"path": {"start": [0.0, 0.3], "length": 0.5}},
    "metrics": {"travel": 0.4, "min_travel": 0.3}
  })");
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("defaults round trip through the echo") {
    const json echo = to_json(default_run_config());
    const RunConfig parsed = config_from_json(echo);
    CHECK(to_json(parsed) == echo);
    CHECK(to_json(config_from_json(json::object())) == echo);
    CHECK(echo.contains("boundary"));
    CHECK(echo["source"]["model"] == "goldak");
    CHECK(echo["metrics"]["cooling_low"] == 1000.0);
  }

  TEST_CASE("doubles survive the echo bit-exactly") {
    json patch = json::object();
    patch["source"]["absorptivity"] = 0.1 + 0.2;
    patch["material"]["phase_change"]["sharpness"] = 1.0 / 3.0;
    const RunConfig a = config_from_json(patch);
    const RunConfig b = config_from_json(json::parse(to_json(a).dump()));
    CHECK(to_json(b) == to_json(a));
    CHECK(get_parameter(b.simulation, Parameter::Absorptivity) == 0.1 + 0.2);
  }

  TEST_CASE("errors name the offending field") {
    CHECK(field_of(json::parse(R"({"solver": {"dt": -1e-5}})")) == "solver.dt");
    CHECK(field_of(json::parse(R"({"source": {"absorptivity": 1.5}})")) == "source.absorptivity");
    CHECK(field_of(json::parse(R"({"source": {"model": "tophat"}})")) == "source.model");
    CHECK(field_of(json::parse(R"({"grid": {"growth": 2.0}})")) == "grid.growth");
    CHECK(field_of(json::parse(R"({"grid": {"bands": {"x": {"lo": -5.0}}}})")) == "grid.bands.x.lo");
    CHECK(field_of(json::parse(R"({"material": {"phase_change": {"liquidus": 1000}}})")) ==
          "material.phase_change.liquidus");
    CHECK(field_of(json::parse(R"({"metrics": {"stations": 2}})")) == "metrics.stations");
    CHECK(field_of(json::parse(R"({"boundary": {"emissivity": "high"}})")) == "boundary.emissivity");
    CHECK(field_of(json::parse(R"({"solver": {"newton_max_iterations": 2.5}})")) ==
          "solver.newton_max_iterations");
    CHECK(field_of(json::parse(R"({"solver": {"tolerance": 1e-6}})")) == "solver.tolerance");
    CHECK(field_of(json::parse(R"({"extra": {}})")) == "extra");
    CHECK(field_of(json::parse(R"({"source": {"path": {"direction": [1.0, 1.0]}}})")) ==
          "source.path.direction");
    CHECK_THROWS_AS(config_from_json(json::array()), ConfigError);
  }

  TEST_CASE("files layer in order and accept manifests") {
    const fs::path base = write_file("meltpool_cfg_base.json",
                                     "// comment\n{\"source\": {\"absorptivity\": 0.3, \"power\": 150}}");
    const fs::path over = write_file("meltpool_cfg_over.json", "{\"source\": {\"absorptivity\": 0.4}}");
    const RunConfig rc = load_config({base, over});
    CHECK(get_parameter(rc.simulation, Parameter::Absorptivity) == 0.4);
    CHECK(to_json(rc)["source"]["power"] == 150.0);

    RunManifest m;
    m.version = kToolVersion;
    m.command = "run";
    m.grid_preset = "custom";
    m.config = to_json(rc);
    const fs::path dir = fs::temp_directory_path() / "meltpool_cfg_manifest";
    fs::create_directories(dir);
    m.write(dir);
    CHECK(to_json(load_config({dir / "manifest.json"})) == to_json(rc));

    const fs::path bad = write_file("meltpool_cfg_bad.json", "{\"source\": ");
    CHECK_THROWS_AS(load_config({bad}), ConfigError);
    CHECK_THROWS_AS(load_config({fs::temp_directory_path() / "meltpool_missing.json"}), ConfigError);
    for (const auto& p : {base, over, bad}) fs::remove(p);
    fs::remove_all(dir);
  }

  TEST_CASE("source models") {
    const RunConfig g = config_from_json(json::parse(R"({"source": {"model": "gaussian", "power": 179.2,
                                                         "absorptivity": 0.086, "d4sigma": 0.17}})"));
    CHECK(std::holds_alternative<MeasuredProfile>(g.simulation.source.model));
    CHECK(absorbed_power(g.simulation.source.model) == doctest::Approx(179.2 * 0.086));
    CHECK(to_json(config_from_json(to_json(g))) == to_json(g));
    CHECK(field_of(json::parse(R"({"source": {"model": "measured", "profile": "/nonexistent"}})")) ==
          "source.profile");
  }

  TEST_CASE("parameter fragments reproduce the calibrated values") {
    SimulationConfig cfg = default_run_config().simulation;
    set_parameter(cfg, Parameter::Absorptivity, 0.41);
    set_parameter(cfg, Parameter::FrontRearRatio, 0.07);
    const std::vector<Parameter> params{Parameter::Absorptivity, Parameter::FrontRearRatio};
    const RunConfig rc = config_from_json(parameter_fragment(cfg, params));
    for (Parameter p : params) CHECK(get_parameter(rc.simulation, p) == doctest::Approx(get_parameter(cfg, p)));
  }

  TEST_CASE("a run from its echo is bit-identical") {
    const RunConfig rc = config_from_json(small_run());
    const RunOutcome a = execute_run(rc);
    const RunOutcome b = execute_run(config_from_json(to_json(rc)));
    REQUIRE(a.gated.has_value());
    REQUIRE(b.gated.has_value());
    CHECK(a.gated->length == b.gated->length);
    CHECK(a.gated->width == b.gated->width);
    CHECK(a.gated->depth == b.gated->depth);
    CHECK(a.history.size() == b.history.size());
    CHECK(a.result.snapshots.fields.back().values == b.result.snapshots.fields.back().values);
    CHECK(a.energy_balance < 0.01);
  }
}
