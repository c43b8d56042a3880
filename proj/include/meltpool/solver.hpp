#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "meltpool/grid.hpp"
#include "meltpool/heat_source.hpp"
#include "meltpool/material.hpp"

namespace meltpool {

inline constexpr double kKelvinOffset = 273.15;
inline constexpr double kStefanBoltzmann = 5.67e-14;  // W/(mm^2 K^4)

struct NewtonSettings {
  double relative_tolerance = 1e-8;  // on the residual 2-norm, relative to the step's first residual
  int max_iterations = 25;
  double linear_tolerance = 1e-6;    // BiCGSTAB relative tolerance per Newton update
  int max_backtracks = 4;            // damping halvings per Newton update
  int max_step_halvings = 8;         // time-step halvings before a run is abandoned
};

struct SnapshotPlan {
  std::vector<double> times;    // always hit exactly; the initial and final fields are always kept
  std::size_t every_n_steps = 0;  // additional cadence, 0 disables
};

struct SimulationConfig {
  MaterialModel material;
  HeatSource source;
  GridSpec grid;
  double initial_temperature = 20.0;  // degC
  double ambient_temperature = 20.0;  // degC
  double emissivity = 0.47;
  double stefan_boltzmann = kStefanBoltzmann;
  std::optional<double> time_step;  // s; h_min / (2 v) when empty
  double end_time = 0.0;            // s
  NewtonSettings newton;
  SnapshotPlan snapshots;

  void validate() const;
};

/// Radiative flux into the surface, W/mm^2: sigma eps (T^2 + Te^2)(Te^2 - T^2)
/// with both temperatures converted to kelvin. Negative when T > Te.
double radiation_flux(double T, double T_ambient, double emissivity,
                      double stefan_boltzmann = kStefanBoltzmann);

struct StepRecord {
  std::size_t step = 0;
  double time = 0.0;  // end of step
  double dt = 0.0;
  int newton_iterations = 0;
  double initial_residual = 0.0;
  double final_residual = 0.0;
  double wall_seconds = 0.0;
  double energy_input = 0.0;     // J absorbed from the laser during the step
  double energy_radiated = 0.0;  // J, negative for a loss
  double energy_stored = 0.0;    // J, enthalpy change
};

struct SolveReport {
  std::vector<StepRecord> steps;
  std::size_t rejected_steps = 0;
  double wall_seconds = 0.0;

  double total_input() const;
  double total_radiated() const;
  double total_stored() const;
};

struct SnapshotStore {
  std::vector<TemperatureField> fields;  // increasing time

  const TemperatureField& nearest(double time) const;
};

struct SimulationResult {
  SnapshotStore snapshots;
  SolveReport report;
};

/// Lumped nodal volumes (mm^3) of a grid.
std::vector<double> lumped_volumes(const GradedGrid& grid);

/// Implicit (backward Euler) solver for the nonlinear heat equation on a
/// structured trilinear-hexahedral grid.
///
/// The capacity is lumped and the time derivative is discretized as an
/// enthalpy difference, so the Newton Jacobian carries the apparent capacity at
/// the current iterate and the discrete energy balance closes to the Newton
/// tolerance. Conductivity is evaluated per cell at the mean corner
/// temperature. The top face carries the laser flux and radiation; all other
/// faces are adiabatic.
class HeatSolver {
 public:
  explicit HeatSolver(SimulationConfig cfg);
  ~HeatSolver();
  HeatSolver(HeatSolver&&) noexcept;
  HeatSolver& operator=(HeatSolver&&) noexcept;

  const SimulationConfig& config() const;
  const std::shared_ptr<const GradedGrid>& grid() const;
  TemperatureField initial_field() const;

  /// Default step: beam moves half of the smallest cell per step.
  double default_time_step() const;

  /// One implicit step from `state` (at state.time) to state.time + dt.
  /// Throws SolverError when Newton does not converge; `record` receives the
  /// step diagnostics either way.
  TemperatureField advance(const TemperatureField& state, double dt, StepRecord& record);

  /// Nodal laser loads (W) for a beam at time t, exposed for audits.
  std::vector<double> laser_loads(double t) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Convenience wrapper for a single step with a fresh solver.
TemperatureField advance(const TemperatureField& state, const SimulationConfig& cfg, double dt);

using ProgressCallback = std::function<void(const StepRecord&)>;

/// Full time loop from t = 0 to cfg.end_time.
SimulationResult simulate(const SimulationConfig& cfg, const ProgressCallback& progress = {});

/// Relative energy residual |E_in + E_rad - dH| / E_in over the window from the
/// first to the last stored snapshot. Reported as 0 when nothing happened.
double energy_balance(const SimulationResult& result, const MaterialModel& material);

void write_report_csv(const std::filesystem::path& path, const SolveReport& report);

/// One VTK file per snapshot plus `manifest.csv` listing index, time and file.
std::vector<std::filesystem::path> write_snapshots(const std::filesystem::path& dir,
                                                   const SnapshotStore& store);

}  // namespace meltpool
