#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "meltpool/metrics.hpp"
#include "meltpool/solver.hpp"

namespace meltpool {

enum class Machine { CBM, AMMT };
enum class CaseId { A, B, C };
enum class SourceVariant { Goldak, Measured, GaussianSurrogate };
enum class ConductivityModel { Isotropic, Anisotropic };
enum class GridPreset { Desk, Convergence };

std::string to_string(Machine m);
std::string to_string(CaseId c);
std::string to_string(SourceVariant s);
std::string to_string(ConductivityModel m);
std::string to_string(GridPreset g);
Machine machine_from_string(const std::string& s);
CaseId case_from_string(const std::string& s);
ConductivityModel model_from_string(const std::string& s);  // "iso" or "aniso"
GridPreset preset_from_string(const std::string& s);        // "desk" or "convergence"

struct CaseDefinition {
  Machine machine = Machine::CBM;
  CaseId id = CaseId::B;
  double power = 195.0;      // W
  double speed = 800.0;      // mm/s
  double d4sigma = 100.0;    // um
  SourceVariant source = SourceVariant::Goldak;
  ConductivityModel model = ConductivityModel::Isotropic;
  double absorptivity = 0.38;
  double emissivity = 0.47;
  double ff_fr = 0.053;  // Goldak only
  double cr_cf = 0.167;  // Goldak only
  std::array<double, 3> theta{1.0, 1.0, 1.0};  // (scan, transverse, depth)
  std::optional<std::filesystem::path> profile;  // measured beam profile file

  std::string label() const;  // e.g. "CBM-B-iso"
};

struct Measurement {
  double value = 0.0;
  std::optional<double> uncertainty;
};

/// Four metrics, each optional: length, width, depth (um) and cooling rate (degC/s).
struct MetricSet {
  std::optional<double> length;
  std::optional<double> width;
  std::optional<double> depth;
  std::optional<double> cooling_rate;
};

struct ReferenceRecord {
  std::optional<Measurement> length;
  std::optional<Measurement> width;
  std::optional<Measurement> depth;
  std::optional<Measurement> cooling_rate;
  MetricSet computed_iso;     // the paper's computed values, isotropic model
  MetricSet deviation_iso;    // the paper's deviations, %
  MetricSet computed_aniso;   // anisotropic model
  MetricSet deviation_aniso;

  MetricSet measured() const;
};

struct CatalogEntry {
  CaseDefinition definition;  // isotropic variant
  ReferenceRecord reference;
};

/// The six (machine, case) entries with their calibrated parameters and
/// published reference values.
std::vector<CatalogEntry> case_catalog();

const CatalogEntry& catalog_entry(Machine m, CaseId c);

/// Catalog definition for a machine/case/model. AMMT cases use the measured
/// profile when a file is given and the Gaussian surrogate otherwise.
CaseDefinition make_case(Machine m, CaseId c, ConductivityModel model = ConductivityModel::Isotropic,
                         const std::optional<std::filesystem::path>& profile = std::nullopt);

/// Scan track geometry shared by all cases.
struct TrackLayout {
  double start = 0.75;        // mm, z of the first beam position
  double travel = 3.0;        // mm simulated
  double measure_at = 2.5;    // mm, quasi-steady gate
  double min_travel = 2.0;    // mm
};

/// Full solver configuration for a case on a grid preset.
SimulationConfig case_config(const CaseDefinition& def, GridPreset preset,
                             const TrackLayout& track = {});

/// Fine spacing of a preset in mm.
double preset_spacing(GridPreset preset);

CoolingRateDefinition cooling_definition(Machine m);

struct CaseRun {
  CaseDefinition definition;
  GridPreset preset = GridPreset::Desk;
  MeltPoolMetrics metrics;             // at the quasi-steady gate
  std::vector<MeltPoolMetrics> history;  // every stored snapshot with at least min_travel of travel
  MetricSet deviation;                 // % against the measurements
  double energy_balance = 0.0;
  double wall_seconds = 0.0;
  std::size_t steps = 0;
  std::size_t node_count = 0;
  double peak_temperature = 0.0;  // at the quasi-steady gate, degC
  double boundary_rise = 0.0;  // max |T - T0| on the sides, bottom and ends over stored snapshots
  bool surrogate = false;  // Gaussian stand-in for a measured profile
};

struct RunOptions {
  TrackLayout track;
  MetricSettings settings;
  ProgressCallback progress;
  std::vector<double> extra_travels{3.0};  // additional snapshots for the history, mm
};

/// Largest |T - reference| over every face except the top surface.
double far_boundary_rise(const TemperatureField& field, double reference);

CaseRun run_case(const CaseDefinition& def, GridPreset preset, const RunOptions& options = {});

/// |computed - measured| / measured * 100.
double deviation_percent(double computed, double measured);

MetricSet deviations(const MeltPoolMetrics& m, const ReferenceRecord& ref);

/// Aligned-text table with values and deviations for each run, plus a banner
/// when a surrogate profile was used.
std::string deviation_report(const std::vector<CaseRun>& runs);
void write_deviation_csv(const std::filesystem::path& path, const std::vector<CaseRun>& runs);

struct FetchOptions {
  std::optional<std::filesystem::path> cache_dir;  // default: default_cache_dir()
  std::optional<std::string> expected_sha256;      // lowercase hex
  bool offline = false;
  int timeout_seconds = 30;
};

/// $MELTPOOL_CACHE_DIR, else $XDG_CACHE_HOME/meltpool, else ~/.cache/meltpool.
std::filesystem::path default_cache_dir();

std::string sha256_hex(const std::string& bytes);

/// Downloads `url` once into the cache and returns the cached file. The first
/// download records the content hash in the cache registry; later calls verify
/// the cached file against it and never touch the network. Throws FetchError
/// on a hash mismatch, or when the file is not cached and cannot be fetched.
std::filesystem::path fetch_reference_data(const std::string& url, const FetchOptions& options = {});

}  // namespace meltpool
