#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "meltpool/error.hpp"
#include "meltpool/solver.hpp"
#include "meltpool/verify.hpp"

using namespace meltpool;

namespace {

// Small CBM-like problem: 0.6 mm of travel on a 0.05 mm band.
SimulationConfig small_config(double h = 0.05) {
  SimulationConfig c;
  c.material = in625();
  GoldakSpec g;
  g.power = 195.0;
  g.absorptivity = 0.38;
  g.a = 0.05;
  g.c_front = 0.05;
  g.c_rear = 0.05;
  c.source.model = g;
  c.source.path.start = {0.0, 0.3};
  c.source.path.speed = 800.0;
  c.source.path.length = 0.6;
  c.grid.domain = DomainBox{1.0, 0.4, 1.2};
  c.grid.coarse_spacing = 0.1;
  c.grid.bands[0] = RefinementBand{-0.1, 0.1, h};
  c.grid.bands[1] = RefinementBand{-0.1, 0.0, h};
  c.grid.bands[2] = RefinementBand{0.2, 1.0, h};
  c.end_time = c.source.path.end_time();
  return c;
}

double max_abs_diff(const TemperatureField& a, const TemperatureField& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) m = std::max(m, std::abs(a.values[i] - b.values[i]));
  return m;
}

}  // namespace

TEST_SUITE("solver") {
  TEST_CASE("radiation flux") {
    CHECK(radiation_flux(20.0, 20.0, 0.47) == 0.0);
    CHECK(radiation_flux(1290.0, 20.0, 0.47) == doctest::Approx(-0.159).epsilon(2e-3));
    CHECK(std::abs(radiation_flux(1290.0, 20.0, 0.47) + 0.16) / 0.16 < 0.02);
    for (double T : {0.0, 500.0, 3000.0}) CHECK(radiation_flux(T, 20.0, 0.0) == 0.0);
    CHECK(radiation_flux(10.0, 20.0, 0.5) > 0.0);
  }

  TEST_CASE("config validation names the field") {
    SimulationConfig c = small_config();
    c.time_step = -1e-5;
    try {
      c.validate();
      FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.field() == "solver.dt");
    }
    c = small_config();
    c.emissivity = 1.5;
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }

  TEST_CASE("lumped volumes fill the domain") {
    HeatSolver s(small_config());
    const auto v = lumped_volumes(*s.grid());
    double total = 0.0;
    for (double x : v) total += x;
    CHECK(total == doctest::Approx(1.0 * 0.4 * 1.2).epsilon(1e-12));
  }

  TEST_CASE("laser loads carry the absorbed power") {
    HeatSolver s(small_config(0.025));
    const auto loads = s.laser_loads(0.5 * s.config().end_time);
    double total = 0.0;
    for (double l : loads) total += l;
    CHECK(total == doctest::Approx(195.0 * 0.38).epsilon(5e-3));
    for (double l : loads) CHECK(l >= 0.0);
  }

  TEST_CASE("equilibrium is preserved") {
    SimulationConfig c = small_config();
    std::get<GoldakSpec>(c.source.model).power = 0.0;
    c.emissivity = 0.0;
    HeatSolver s(c);
    TemperatureField f = s.initial_field();
    for (int n = 0; n < 3; ++n) {
      StepRecord r;
      f = s.advance(f, 1e-4, r);
      for (double v : f.values) CHECK(v == doctest::Approx(20.0).epsilon(1e-12));
    }
    c.emissivity = 0.47;  // ambient equals the initial temperature
    const TemperatureField g = advance(HeatSolver(c).initial_field(), c, 1e-4);
    CHECK(max_abs_diff(g, HeatSolver(c).initial_field()) < 1e-9);
  }

  TEST_CASE("zero power run keeps the initial temperature") {
    SimulationConfig c = small_config();
    std::get<GoldakSpec>(c.source.model).power = 0.0;
    c.emissivity = 0.0;
    const SimulationResult r = simulate(c);
    for (double v : r.snapshots.fields.back().values) CHECK(v == 20.0);
    CHECK(energy_balance(r, c.material) == 0.0);
  }

  TEST_CASE("history depends on Q and eta only through the product") {
    SimulationConfig a = small_config();
    a.end_time = 0.25e-3;
    SimulationConfig b = a;
    auto& g = std::get<GoldakSpec>(b.source.model);
    g.power *= 2.0;
    g.absorptivity *= 0.5;
    const SimulationResult ra = simulate(a);
    const SimulationResult rb = simulate(b);
    REQUIRE(ra.snapshots.fields.size() == rb.snapshots.fields.size());
    for (std::size_t s = 0; s < ra.snapshots.fields.size(); ++s) {
      CHECK(ra.snapshots.fields[s].values == rb.snapshots.fields[s].values);
    }
  }

  TEST_CASE("snapshots land on requested times") {
    SimulationConfig c = small_config();
    c.end_time = 0.4e-3;
    c.snapshots.times = {0.13e-3, 0.3e-3};
    const SimulationResult r = simulate(c);
    const auto& f = r.snapshots.fields;
    REQUIRE(f.size() == 4);
    CHECK(f[0].time == 0.0);
    CHECK(f[1].time == 0.13e-3);
    CHECK(f[2].time == 0.3e-3);
    CHECK(f[3].time == doctest::Approx(0.4e-3).epsilon(1e-12));
    CHECK(&r.snapshots.nearest(0.31e-3) == &f[2]);
  }

  TEST_CASE("energy ledger closes, also on a truncated window") {
    SimulationConfig c = small_config();
    c.snapshots.every_n_steps = 10;
    SimulationResult r = simulate(c);
    CHECK(energy_balance(r, c.material) <= 0.01);

    // Keep the first half of the snapshots and the steps up to the last kept one.
    SimulationResult half = r;
    half.snapshots.fields.resize(r.snapshots.fields.size() / 2 + 1);
    const double t1 = half.snapshots.fields.back().time;
    half.report.steps.erase(std::remove_if(half.report.steps.begin(), half.report.steps.end(),
                                           [&](const StepRecord& s) { return s.time > t1 + 1e-15; }),
                            half.report.steps.end());
    double input = 0.0, radiated = 0.0;
    for (const auto& s : half.report.steps) {
      input += s.energy_input;
      radiated += s.energy_radiated;
    }
    const auto vol = lumped_volumes(*r.snapshots.fields.front().grid);
    double stored = 0.0;
    for (std::size_t p = 0; p < vol.size(); ++p) {
      stored += vol[p] * (volumetric_enthalpy(c.material, half.snapshots.fields.back().values[p]) -
                          volumetric_enthalpy(c.material, half.snapshots.fields.front().values[p]));
    }
    CHECK(energy_balance(half, c.material) == doctest::Approx(std::abs(input + radiated - stored) / input));
    CHECK(energy_balance(half, c.material) <= 0.01);
    CHECK(input == doctest::Approx(195.0 * 0.38 * t1).epsilon(5e-3));
  }

  TEST_CASE("maximum temperature sits on the heated surface") {
    SimulationConfig c = small_config();
    c.emissivity = 0.0;
    c.snapshots.times = {0.5 * c.end_time};
    const SimulationResult r = simulate(c);
    for (const auto& f : r.snapshots.fields) {
      const auto& g = *f.grid;
      double surface = 20.0, overall = 20.0;
      for (std::size_t k = 0; k < g.nodes(2); ++k) {
        for (std::size_t j = 0; j < g.nodes(1); ++j) {
          for (std::size_t i = 0; i < g.nodes(0); ++i) {
            overall = std::max(overall, f.at(i, j, k));
            if (j + 1 == g.nodes(1)) surface = std::max(surface, f.at(i, j, k));
          }
        }
      }
      CHECK(overall <= surface * 1.01);
    }
  }

  TEST_CASE("backward Euler is first order in time") {
    // Richardson reference from the two finest steps; error ratio ~2 per halving.
    SimulationConfig c = small_config();
    c.end_time = 0.3e-3;
    std::vector<TemperatureField> finals;
    for (double dt : {4e-5, 2e-5, 1e-5, 0.5e-5}) {
      SimulationConfig ci = c;
      ci.time_step = dt;
      finals.push_back(simulate(ci).snapshots.fields.back());
    }
    TemperatureField reference = finals[3];
    for (std::size_t i = 0; i < reference.values.size(); ++i) {
      reference.values[i] = 2.0 * finals[3].values[i] - finals[2].values[i];
    }
    const double e0 = max_abs_diff(finals[0], reference);
    const double e1 = max_abs_diff(finals[1], reference);
    const double ratio = e0 / e1;
    MESSAGE("time-step error ratio " << ratio);
    CHECK(ratio > 1.6);
    CHECK(ratio < 2.6);
  }

  TEST_CASE("half-space flux: surface error shrinks with the spacing") {
    std::vector<double> errors;
    for (double h : {0.008, 0.004, 0.002}) {
      HalfspaceSetup s;
      s.surface_spacing = h;
      s.steps = 400;
      const OracleReport r = verify_halfspace(s);
      errors.push_back(std::abs(r.probes.back().computed - r.probes.back().analytic) /
                       (r.probes.back().analytic - 20.0));
      CHECK(r.energy_balance < 1e-6);
    }
    MESSAGE("half-space surface errors " << errors[0] << " " << errors[1] << " " << errors[2]);
    CHECK(errors[1] < errors[0]);
    CHECK(errors[2] < errors[1]);
    CHECK(errors[2] < 0.01);
  }
}
