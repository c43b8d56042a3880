#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "meltpool/calibration.hpp"
#include "meltpool/solver.hpp"

namespace meltpool {

/// Where the laser model came from, kept so the config echo reproduces it.
enum class SourceKind { Goldak, Measured, Gaussian };

struct SourceOrigin {
  SourceKind kind = SourceKind::Goldak;
  std::filesystem::path profile;  // measured: profile file
  double d4sigma = 0.17;          // gaussian: mm
  double spacing = 0.0;           // gaussian: sample spacing, 0 picks a default
};

/// Everything a `run` needs: the solver setup plus how metrics are taken.
struct RunConfig {
  SimulationConfig simulation;
  SourceOrigin origin;
  MeasureSpec measure;
};

/// CBM case B with the calibrated Goldak set on the desk grid.
RunConfig default_run_config();

/// Resolved config as JSON with sections material, source, grid, boundary,
/// solver and metrics. Doubles are written in shortest round-trip form, so
/// parsing the echo reproduces the config exactly.
nlohmann::json to_json(const RunConfig& cfg);

/// Applies `patch` (JSON merge patch) on top of the defaults and validates.
/// Throws ConfigError naming the dotted field path of the first problem.
RunConfig config_from_json(const nlohmann::json& patch);

/// Reads and merges config files in order. A file may also be a run manifest,
/// in which case its `config` member is used.
RunConfig load_config(const std::vector<std::filesystem::path>& files);

nlohmann::json read_json_file(const std::filesystem::path& path);

/// Fragment holding only the given parameters, accepted by `run` as a config
/// file layered on top of the base config.
nlohmann::json parameter_fragment(const SimulationConfig& cfg, const std::vector<Parameter>& params);

/// Result of a configured run: the raw simulation plus metrics on every
/// snapshot with at least `measure.min_travel` of travel.
struct RunOutcome {
  SimulationResult result;
  std::vector<MeltPoolMetrics> history;
  std::optional<MeltPoolMetrics> gated;  // at `measure.travel`, when the run gets that far
  double energy_balance = 0.0;
};

/// Simulates `rc` with an extra snapshot at the metric gate and measures it.
RunOutcome execute_run(RunConfig rc, const ProgressCallback& progress = {});

/// Output inventory written at the root of every CLI output directory.
struct RunManifest {
  std::string tool = "meltpool";
  std::string version;
  std::string command;
  std::string grid_preset;  // "desk", "convergence" or "custom"
  double wall_seconds = 0.0;
  nlohmann::json config;    // resolved config echo (an array for multi-case commands)
  std::vector<std::string> files;  // relative to the manifest directory

  nlohmann::json to_json() const;
  void write(const std::filesystem::path& dir) const;  // dir/manifest.json
};

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace meltpool
