#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "meltpool/grid.hpp"

namespace meltpool {

struct RosenthalParams {
  double absorbed_power = 20.0;  // Q eta, W
  double speed = 100.0;          // mm/s
  double conductivity = 0.02;    // W/(mm degC)
  double diffusivity = 5.0;      // mm^2/s
  double ambient = 20.0;         // degC

  void validate() const;
};

/// Quasi-steady point source moving over a semi-infinite body. `xi` is the
/// offset along the travel direction (positive ahead of the source) and `r`
/// the distance from the travel axis; R = sqrt(xi^2 + r^2) must be positive.
double rosenthal_temperature(const RosenthalParams& p, double xi, double r);

/// Constant flux q (W/mm^2) switched on at t = 0 over the surface of a
/// half-space: T0 + (2q/k) sqrt(alpha t) ierfc(y / (2 sqrt(alpha t))), y the
/// depth below the surface. Returns T0 for t <= 0.
double halfspace_flux_temperature(double q, double conductivity, double diffusivity,
                                  double ambient, double depth, double time);

struct ProbeComparison {
  std::string label;
  Point3 point;
  double computed = 0.0;  // degC
  double analytic = 0.0;  // degC
  double relative_error = 0.0;  // |computed - analytic| / (analytic - ambient)
};

struct OracleReport {
  std::string name;
  double tolerance = 0.0;
  std::vector<ProbeComparison> probes;
  double wall_seconds = 0.0;
  double energy_balance = 0.0;

  double max_error() const;
  bool passed() const { return !probes.empty() && max_error() <= tolerance; }
};

struct HalfspaceSetup {
  double flux = 1.0;           // W/mm^2
  double conductivity = 0.01;  // W/(mm degC)
  double diffusivity = 4.0;    // mm^2/s
  double end_time = 1e-3;      // s
  double surface_spacing = 0.002;  // mm, uniform band under the surface
  double band_depth = 0.2;         // mm
  std::size_t steps = 200;
  double tolerance = 0.01;
};

/// Uniform flux over the whole top face of a thin column; surface and
/// near-surface temperatures against the half-space solution.
OracleReport verify_halfspace(const HalfspaceSetup& setup = {});

struct RosenthalSetup {
  RosenthalParams params;
  double fine_spacing = 0.0125;  // mm
  double travel = 2.5;           // mm of beam travel before comparing
  double steps_per_cell = 4.0;   // time steps per fine cell of travel
  double tolerance = 0.05;
};

/// Constant properties, no latent heat, no radiation, and a Goldak source one
/// fine cell wide; probes behind and beside the beam at least eight cells away.
OracleReport verify_rosenthal(const RosenthalSetup& setup = {});

/// Aligned-text table of a report.
std::string format_report(const OracleReport& report);
void write_report_csv(const std::filesystem::path& path, const OracleReport& report);

}  // namespace meltpool
