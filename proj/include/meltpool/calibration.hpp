#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "meltpool/metrics.hpp"
#include "meltpool/solver.hpp"

namespace meltpool {

enum class Parameter {
  Absorptivity,          // eta
  Emissivity,            // epsilon
  FrontRearRatio,        // f_f / f_r
  RearFrontRadiusRatio,  // c_r / c_f
  Sharpness,             // S
  ThetaX,                // conductivity scaling along the scan
  ThetaY,                // transverse
  ThetaZ,                // depth
};

/// Short names used in files and on the command line: eta, emissivity, ff_fr,
/// cr_cf, S, theta_x, theta_y, theta_z.
std::string parameter_name(Parameter p);
Parameter parameter_from_name(const std::string& name);

double get_parameter(const SimulationConfig& cfg, Parameter p);

/// Writes the parameter into the config. Goldak ratios require a Goldak
/// source; the fractions are re-split so they still sum to 2 and c_r is
/// rescaled from c_f. Setting a theta creates the anisotropy model if needed.
void set_parameter(SimulationConfig& cfg, Parameter p, double value);

struct ParameterHandle {
  Parameter id = Parameter::Absorptivity;
  double lower = 0.0;
  double upper = 1.0;
  double value = 0.5;

  void validate() const;
};

struct CalibrationTarget {
  double length = 0.0;        // um
  double width = 0.0;         // um
  double depth = 0.0;         // um
  double cooling_rate = 0.0;  // degC/s
  double w_length = 1.0;
  double w_width = 0.0;
  double w_depth = 0.0;
  double w_cooling_rate = 0.0;

  void validate() const;
};

/// Sum over weighted metrics of w ((m - t) / t)^2.
double objective(const MeltPoolMetrics& m, const CalibrationTarget& target);

/// How a configuration is turned into metrics: run it, take the snapshot
/// nearest to `travel` mm of beam travel and measure it.
struct MeasureSpec {
  double travel = 2.5;      // mm
  double min_travel = 2.0;  // mm
  CoolingRateDefinition cooling;
  MetricSettings settings;
};

MeltPoolMetrics evaluate(const SimulationConfig& cfg, const MeasureSpec& spec);

using Evaluator = std::function<MeltPoolMetrics(const SimulationConfig&)>;
Evaluator simulation_evaluator(MeasureSpec spec);

struct SweepRow {
  double value = 0.0;
  MeltPoolMetrics metrics;
  std::optional<std::string> error;  // set when the run failed
};

/// One evaluation per value with everything else frozen. Rows come back in the
/// order of `values`; failed runs are recorded and the sweep continues.
std::vector<SweepRow> sensitivity_sweep(const SimulationConfig& cfg, Parameter param,
                                        const std::vector<double>& values,
                                        const Evaluator& evaluate, unsigned threads = 0);

struct CalibrationSettings {
  std::size_t budget = 40;           // maximum evaluations
  double initial_step = 0.1;         // fraction of each parameter range
  double objective_tolerance = 1e-10;  // spread of simplex objectives
  double parameter_tolerance = 1e-6;   // simplex extent, fraction of each range
  unsigned threads = 0;              // 0: hardware concurrency
};

struct TraceEntry {
  std::size_t evaluation = 0;
  std::vector<double> values;
  double objective = 0.0;  // +inf when the run failed
  MeltPoolMetrics metrics;
  std::optional<std::string> error;
};

struct CalibrationResult {
  std::vector<ParameterHandle> best;  // values at the best point seen
  double best_objective = 0.0;
  std::vector<TraceEntry> trace;         // every evaluation in order
  std::vector<double> best_per_iteration;  // best objective after each simplex iteration
  bool converged = false;
};

/// Bounded Nelder-Mead seeded at the handles' values. Trial points are clamped
/// to the bounds. Deterministic for fixed inputs.
CalibrationResult calibrate(const SimulationConfig& cfg, std::vector<ParameterHandle> free,
                            const CalibrationTarget& target, const Evaluator& evaluate,
                            const CalibrationSettings& settings = {});

/// Same optimizer on a plain function, used for optimizer checks.
CalibrationResult minimize(const std::function<double(const std::vector<double>&)>& f,
                           std::vector<ParameterHandle> free,
                           const CalibrationSettings& settings = {});

void write_sweep_csv(const std::filesystem::path& path, Parameter param,
                     const std::vector<SweepRow>& rows);
void write_trace_csv(const std::filesystem::path& path, const CalibrationResult& result);

}  // namespace meltpool
