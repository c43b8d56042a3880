#include "meltpool/verify.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "meltpool/error.hpp"
#include "meltpool/solver.hpp"

namespace meltpool {

void RosenthalParams::validate() const {
  if (!(absorbed_power > 0.0 && speed > 0.0 && conductivity > 0.0 && diffusivity > 0.0)) {
    throw InvalidInput("rosenthal: power, speed, conductivity and diffusivity must be positive");
  }
  if (!(ambient + kKelvinOffset > 0.0)) throw InvalidInput("rosenthal: ambient below absolute zero");
}

double rosenthal_temperature(const RosenthalParams& p, double xi, double r) {
  p.validate();
  const double R = std::hypot(xi, r);
  if (!(R > 0.0)) throw InvalidInput("rosenthal_temperature: the source point itself is singular");
  return p.ambient + p.absorbed_power / (2.0 * std::numbers::pi * p.conductivity * R) *
                         std::exp(-p.speed * (R + xi) / (2.0 * p.diffusivity));
}

double halfspace_flux_temperature(double q, double conductivity, double diffusivity,
                                  double ambient, double depth, double time) {
  if (!(conductivity > 0.0 && diffusivity > 0.0)) {
    throw InvalidInput("halfspace_flux_temperature: conductivity and diffusivity must be positive");
  }
  if (depth < 0.0) throw InvalidInput("halfspace_flux_temperature: depth must be >= 0");
  if (time <= 0.0) return ambient;
  const double root = std::sqrt(diffusivity * time);
  const double x = depth / (2.0 * root);
  const double ierfc = std::exp(-x * x) / std::sqrt(std::numbers::pi) - x * std::erfc(x);
  return ambient + 2.0 * q / conductivity * root * ierfc;
}

double OracleReport::max_error() const {
  double e = 0.0;
  for (const auto& p : probes) e = std::max(e, p.relative_error);
  return e;
}

namespace {

MaterialModel constant_material(double conductivity, double diffusivity) {
  MaterialModel m;
  m.conductivity = PropertyCurve::constant(conductivity);
  m.heat_capacity = PropertyCurve::constant(conductivity / (diffusivity * m.density));
  m.latent_heat = 0.0;
  return m;
}

ProbeComparison compare(std::string label, const TemperatureField& f, Point3 p, double analytic,
                        double ambient) {
  ProbeComparison c;
  c.label = std::move(label);
  c.point = p;
  c.computed = interpolate(f, p);
  c.analytic = analytic;
  c.relative_error = std::abs(c.computed - analytic) / std::abs(analytic - ambient);
  return c;
}

}  // namespace

OracleReport verify_halfspace(const HalfspaceSetup& s) {
  if (s.steps < 1) throw InvalidInput("verify_halfspace: steps must be >= 1");
  SimulationConfig cfg;
  cfg.material = constant_material(s.conductivity, s.diffusivity);
  cfg.emissivity = 0.0;
  cfg.initial_temperature = 20.0;
  cfg.ambient_temperature = 20.0;

  // A constant 2x2 profile far wider than the column gives a uniform flux.
  const double extent = 1.0;
  MeasuredProfile uniform(2, 2, extent, extent, {1.0, 1.0, 1.0, 1.0}, s.flux * extent * extent, 1.0);
  const double column = 10.0 * s.surface_spacing;
  cfg.source.model = uniform;
  cfg.source.path.start = {0.0, 0.5 * column};
  cfg.source.path.speed = 1e-9;
  cfg.source.path.length = 1.0;

  cfg.grid.domain = {column, 1.0, column};
  cfg.grid.coarse_spacing = 0.5 * column;
  cfg.grid.bands[1] = RefinementBand{-s.band_depth, 0.0, s.surface_spacing};
  cfg.end_time = s.end_time;
  cfg.time_step = s.end_time / static_cast<double>(s.steps);
  cfg.snapshots.times = {0.25 * s.end_time, 0.5 * s.end_time};

  const SimulationResult run = simulate(cfg);
  OracleReport report;
  report.name = "half-space constant flux";
  report.tolerance = s.tolerance;
  report.wall_seconds = run.report.wall_seconds;
  report.energy_balance = energy_balance(run, cfg.material);
  const Point3 top{0.0, 0.0, 0.5 * column};
  for (const auto& f : run.snapshots.fields) {
    if (f.time <= 0.0) continue;
    std::ostringstream label;
    label << "surface t=" << f.time * 1e3 << " ms";
    report.probes.push_back(compare(label.str(), f, top,
                                    halfspace_flux_temperature(s.flux, s.conductivity,
                                                               s.diffusivity, cfg.initial_temperature,
                                                               0.0, f.time),
                                    cfg.initial_temperature));
  }
  return report;
}

OracleReport verify_rosenthal(const RosenthalSetup& s) {
  const RosenthalParams& p = s.params;
  p.validate();
  if (!(s.fine_spacing > 0.0 && s.travel > 0.0 && s.steps_per_cell > 0.0)) {
    throw InvalidInput("verify_rosenthal: spacing, travel and steps per cell must be positive");
  }
  SimulationConfig cfg;
  cfg.material = constant_material(p.conductivity, p.diffusivity);
  cfg.emissivity = 0.0;
  cfg.initial_temperature = p.ambient;
  cfg.ambient_temperature = p.ambient;

  const double h = s.fine_spacing;
  GoldakSpec source;
  source.power = p.absorbed_power;
  source.absorptivity = 1.0;
  source.a = source.c_front = source.c_rear = h;
  cfg.source.model = source;
  const double start = 0.5;
  const double end = start + s.travel;
  cfg.source.path.start = {0.0, start};
  cfg.source.path.speed = p.speed;
  cfg.source.path.length = s.travel + 1.0;

  cfg.grid.domain = {2.0, 1.0, end + 1.0};
  cfg.grid.coarse_spacing = 0.2;
  cfg.grid.bands[0] = RefinementBand{-0.25, 0.25, h};
  cfg.grid.bands[1] = RefinementBand{-0.25, 0.0, h};
  cfg.grid.bands[2] = RefinementBand{end - 0.6, end + 0.25, h};
  cfg.end_time = s.travel / p.speed;
  cfg.time_step = h / (s.steps_per_cell * p.speed);

  const SimulationResult run = simulate(cfg);
  const TemperatureField& f = run.snapshots.fields.back();
  OracleReport report;
  report.name = "Rosenthal moving point source";
  report.tolerance = s.tolerance;
  report.wall_seconds = run.report.wall_seconds;
  report.energy_balance = energy_balance(run, cfg.material);

  struct Probe {
    const char* label;
    double xi;  // along the scan
    double x;   // transverse
    double y;   // vertical
  };
  const Probe probes[] = {
      {"behind 0.1 mm", -0.1, 0.0, 0.0},     {"behind 0.2 mm", -0.2, 0.0, 0.0},
      {"behind 0.4 mm", -0.4, 0.0, 0.0},     {"side 0.1 mm", 0.0, 0.1, 0.0},
      {"behind-side 0.1 mm", -0.1, 0.1, 0.0}, {"below 0.1 mm", 0.0, 0.0, -0.1},
      {"behind-below 0.1 mm", -0.1, 0.0, -0.1},
  };
  for (const Probe& pr : probes) {
    const Point3 at{pr.x, pr.y, end + pr.xi};
    report.probes.push_back(compare(pr.label, f, at,
                                    rosenthal_temperature(p, pr.xi, std::hypot(pr.x, pr.y)),
                                    p.ambient));
  }
  return report;
}

std::string format_report(const OracleReport& r) {
  std::ostringstream out;
  out << r.name << " (tolerance " << 100.0 * r.tolerance << "%, energy balance "
      << std::setprecision(3) << r.energy_balance << ")\n";
  out << std::left << std::setw(24) << "probe" << std::right << std::setw(14) << "computed"
      << std::setw(14) << "analytic" << std::setw(12) << "error %" << '\n';
  for (const auto& p : r.probes) {
    out << std::left << std::setw(24) << p.label << std::right << std::fixed
        << std::setprecision(3) << std::setw(14) << p.computed << std::setw(14) << p.analytic
        << std::setw(12) << 100.0 * p.relative_error << '\n';
    out.unsetf(std::ios::fixed);
  }
  out << (r.passed() ? "PASS" : "FAIL") << ": max error " << std::setprecision(3)
      << 100.0 * r.max_error() << "%\n";
  return out.str();
}

void write_report_csv(const std::filesystem::path& path, const OracleReport& r) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << "probe,x,y,z,computed,analytic,relative_error\n";
  out.precision(10);
  for (const auto& p : r.probes) {
    out << p.label << ',' << p.point.x << ',' << p.point.y << ',' << p.point.z << ','
        << p.computed << ',' << p.analytic << ',' << p.relative_error << '\n';
  }
}

}  // namespace meltpool
