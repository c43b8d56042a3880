#include "meltpool/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "meltpool/error.hpp"

namespace meltpool {

std::string to_string(Machine m) { return m == Machine::CBM ? "CBM" : "AMMT"; }

std::string to_string(CaseId c) {
  switch (c) {
    case CaseId::A: return "A";
    case CaseId::B: return "B";
    default: return "C";
  }
}

std::string to_string(SourceVariant s) {
  switch (s) {
    case SourceVariant::Goldak: return "goldak";
    case SourceVariant::Measured: return "measured";
    default: return "gaussian-surrogate";
  }
}

std::string to_string(ConductivityModel m) {
  return m == ConductivityModel::Isotropic ? "iso" : "aniso";
}

std::string to_string(GridPreset g) { return g == GridPreset::Desk ? "desk" : "convergence"; }

Machine machine_from_string(const std::string& s) {
  if (s == "CBM" || s == "cbm") return Machine::CBM;
  if (s == "AMMT" || s == "ammt") return Machine::AMMT;
  throw InvalidInput("unknown machine '" + s + "' (expected CBM or AMMT)");
}

CaseId case_from_string(const std::string& s) {
  if (s == "A" || s == "a") return CaseId::A;
  if (s == "B" || s == "b") return CaseId::B;
  if (s == "C" || s == "c") return CaseId::C;
  throw InvalidInput("unknown case '" + s + "' (expected A, B or C)");
}

ConductivityModel model_from_string(const std::string& s) {
  if (s == "iso") return ConductivityModel::Isotropic;
  if (s == "aniso") return ConductivityModel::Anisotropic;
  throw InvalidInput("unknown model '" + s + "' (expected iso or aniso)");
}

GridPreset preset_from_string(const std::string& s) {
  if (s == "desk") return GridPreset::Desk;
  if (s == "convergence") return GridPreset::Convergence;
  throw InvalidInput("unknown grid preset '" + s + "' (expected desk or convergence)");
}

std::string CaseDefinition::label() const {
  return to_string(machine) + "-" + to_string(id) + "-" + to_string(model);
}

MetricSet ReferenceRecord::measured() const {
  MetricSet m;
  if (length) m.length = length->value;
  if (width) m.width = width->value;
  if (depth) m.depth = depth->value;
  if (cooling_rate) m.cooling_rate = cooling_rate->value;
  return m;
}

namespace {

CatalogEntry cbm(CaseId id, double power, double speed, Measurement length, Measurement cr,
                 double computed_length, double computed_cr, double dev_length, double dev_cr) {
  CatalogEntry e;
  CaseDefinition& d = e.definition;
  d.machine = Machine::CBM;
  d.id = id;
  d.power = power;
  d.speed = speed;
  d.d4sigma = 100.0;
  d.source = SourceVariant::Goldak;
  d.absorptivity = 0.38;
  d.emissivity = 0.47;
  d.ff_fr = 0.053;
  d.cr_cf = 0.167;
  ReferenceRecord& r = e.reference;
  r.length = length;
  r.cooling_rate = cr;
  r.computed_iso.length = computed_length;
  r.computed_iso.cooling_rate = computed_cr;
  r.deviation_iso.length = dev_length;
  r.deviation_iso.cooling_rate = dev_cr;
  return e;
}

CatalogEntry ammt(CaseId id, double power, double speed, MetricSet measured, MetricSet iso,
                  MetricSet iso_dev, MetricSet aniso, MetricSet aniso_dev) {
  CatalogEntry e;
  CaseDefinition& d = e.definition;
  d.machine = Machine::AMMT;
  d.id = id;
  d.power = power;
  d.speed = speed;
  d.d4sigma = 170.0;
  d.source = SourceVariant::GaussianSurrogate;
  d.absorptivity = 0.086;
  d.emissivity = 0.47;
  ReferenceRecord& r = e.reference;
  r.length = Measurement{*measured.length, std::nullopt};
  r.width = Measurement{*measured.width, std::nullopt};
  r.depth = Measurement{*measured.depth, std::nullopt};
  r.cooling_rate = Measurement{*measured.cooling_rate, std::nullopt};
  r.computed_iso = iso;
  r.deviation_iso = iso_dev;
  r.computed_aniso = aniso;
  r.deviation_aniso = aniso_dev;
  return e;
}

}  // namespace

std::vector<CatalogEntry> case_catalog() {
  return {
      cbm(CaseId::A, 150.0, 400.0, {659.0, 21.0}, {6.20e5, 7.99e4}, 707.0, 8.79e5, 7.3, 41.8),
      cbm(CaseId::B, 195.0, 800.0, {782.0, 21.0}, {9.35e5, 1.43e5}, 812.0, 1.35e6, 3.8, 44.3),
      cbm(CaseId::C, 195.0, 1200.0, {754.0, 46.0}, {1.28e6, 3.94e5}, 772.0, 2.09e6, 2.4, 63.3),
      ammt(CaseId::A, 137.9, 400.0, {300.0, 147.9, 42.5, 1.16e6}, {301.0, 119.0, 52.0, 0.91e6},
           {0.47, 19.3, 18.6, 21.6}, {304.0, 146.4, 44.6, 0.82e6}, {1.33, 1.0, 2.5, 29.3}),
      ammt(CaseId::B, 179.2, 800.0, {359.0, 123.5, 36.0, 1.08e6}, {360.0, 103.0, 42.0, 1.33e6},
           {0.11, 16.4, 15.8, 23.1}, {362.0, 123.7, 36.1, 1.23e6}, {0.84, 0.02, 0.2, 13.9}),
      ammt(CaseId::C, 179.2, 1200.0, {370.0, 106.0, 29.5, 1.90e6}, {348.0, 91.0, 32.0, 2.18e6},
           {5.9, 14.2, 10.1, 14.7}, {346.0, 105.1, 27.3, 1.88e6}, {6.49, 0.8, 5.1, 1.3}),
  };
}

const CatalogEntry& catalog_entry(Machine m, CaseId c) {
  static const std::vector<CatalogEntry> catalog = case_catalog();
  for (const auto& e : catalog) {
    if (e.definition.machine == m && e.definition.id == c) return e;
  }
  throw InvalidInput("no catalog entry for " + to_string(m) + " " + to_string(c));
}

CaseDefinition make_case(Machine m, CaseId c, ConductivityModel model,
                         const std::optional<std::filesystem::path>& profile) {
  CaseDefinition d = catalog_entry(m, c).definition;
  d.model = model;
  if (model == ConductivityModel::Anisotropic) {
    d.theta = {1.0, 1.4, 0.9};
    d.emissivity = 0.0;
  }
  if (m == Machine::AMMT && profile) {
    d.source = SourceVariant::Measured;
    d.profile = profile;
  }
  return d;
}

double preset_spacing(GridPreset preset) {
  return preset == GridPreset::Desk ? 0.025 : 0.0125;
}

CoolingRateDefinition cooling_definition(Machine m) {
  CoolingRateDefinition d;
  d.T_high = 1290.0;
  d.T_low = m == Machine::CBM ? 1000.0 : 1190.0;
  return d;
}

SimulationConfig case_config(const CaseDefinition& def, GridPreset preset, const TrackLayout& track) {
  SimulationConfig cfg;
  cfg.material = in625();
  if (def.model == ConductivityModel::Anisotropic) {
    AnisotropyModel an;
    an.theta = def.theta;
    cfg.material.anisotropy = an;
  }
  cfg.emissivity = def.emissivity;
  const double radius = 0.5e-3 * def.d4sigma;  // mm
  switch (def.source) {
    case SourceVariant::Goldak: {
      GoldakSpec g;
      g.power = def.power;
      g.absorptivity = def.absorptivity;
      g.a = radius;
      g.c_front = radius;
      g.c_rear = def.cr_cf * radius;
      std::tie(g.f_front, g.f_rear) = resolve_fractions(def.ff_fr);
      cfg.source.model = g;
      break;
    }
    case SourceVariant::Measured:
      if (!def.profile) throw InvalidInput(def.label() + ": measured source without a profile file");
      cfg.source.model = load_profile(*def.profile, def.power, def.absorptivity);
      break;
    case SourceVariant::GaussianSurrogate:
      cfg.source.model = gaussian_profile(1e-3 * def.d4sigma, def.power, def.absorptivity);
      break;
  }
  cfg.source.path.start = {0.0, track.start};
  cfg.source.path.direction = {0.0, 1.0};
  cfg.source.path.speed = def.speed;
  cfg.source.path.length = track.travel;

  const double h = preset_spacing(preset);
  cfg.grid.domain = DomainBox{2.0, 1.0, 4.0};
  cfg.grid.coarse_spacing = 0.2;
  cfg.grid.growth = 1.3;
  cfg.grid.bands[0] = RefinementBand{-0.15, 0.15, h};
  cfg.grid.bands[1] = RefinementBand{-0.12, 0.0, h};
  cfg.grid.bands[2] = RefinementBand{track.start - 0.2, track.start + track.travel + 0.1, h};
  cfg.end_time = track.travel / def.speed;
  cfg.snapshots.times = {track.measure_at / def.speed};
  return cfg;
}

double deviation_percent(double computed, double measured) {
  if (measured == 0.0) throw InvalidInput("deviation_percent: measured value is zero");
  return std::abs(computed - measured) / std::abs(measured) * 100.0;
}

MetricSet deviations(const MeltPoolMetrics& m, const ReferenceRecord& ref) {
  MetricSet d;
  if (ref.length) d.length = deviation_percent(m.length, ref.length->value);
  if (ref.width) d.width = deviation_percent(m.width, ref.width->value);
  if (ref.depth) d.depth = deviation_percent(m.depth, ref.depth->value);
  if (ref.cooling_rate) d.cooling_rate = deviation_percent(m.cooling_rate, ref.cooling_rate->value);
  return d;
}

double far_boundary_rise(const TemperatureField& field, double reference) {
  const GradedGrid& g = *field.grid;
  const std::size_t nx = g.nodes(0), ny = g.nodes(1), nz = g.nodes(2);
  double rise = 0.0;
  for (std::size_t k = 0; k < nz; ++k) {
    for (std::size_t j = 0; j < ny; ++j) {
      for (std::size_t i = 0; i < nx; ++i) {
        const bool face = i == 0 || i + 1 == nx || j == 0 || k == 0 || k + 1 == nz;
        if (face) rise = std::max(rise, std::abs(field.values[g.index(i, j, k)] - reference));
      }
    }
  }
  return rise;
}

CaseRun run_case(const CaseDefinition& def, GridPreset preset, const RunOptions& opt) {
  SimulationConfig cfg = case_config(def, preset, opt.track);
  for (double t : opt.extra_travels) {
    if (t > 0.0 && t <= opt.track.travel) cfg.snapshots.times.push_back(t / def.speed);
  }
  HeatSolver probe(cfg);
  CaseRun run;
  run.definition = def;
  run.preset = preset;
  run.surrogate = def.source == SourceVariant::GaussianSurrogate;
  run.node_count = probe.grid()->node_count();

  SimulationResult result;
  try {
    result = simulate(cfg, opt.progress);
  } catch (const SolverError& e) {
    throw SolverError(def.label() + " on the " + to_string(preset) + " grid: " + e.what());
  }
  run.energy_balance = energy_balance(result, cfg.material);
  run.wall_seconds = result.report.wall_seconds;
  run.steps = result.report.steps.size();
  const CoolingRateDefinition cooling = cooling_definition(def.machine);
  const ScanPath& path = cfg.source.path;
  const TemperatureField& gate =
      quasi_steady_snapshot(result.snapshots, path, opt.track.measure_at, opt.track.min_travel);
  run.metrics = measure(gate, scan_geometry(path, gate.time), cooling, opt.settings);
  run.peak_temperature = *std::max_element(gate.values.begin(), gate.values.end());
  for (const auto& f : result.snapshots.fields) {
    if ((f.time - path.start_time) * path.speed < opt.track.min_travel - 1e-9) continue;
    run.history.push_back(measure(f, scan_geometry(path, f.time), cooling, opt.settings));
  }
  for (const auto& f : result.snapshots.fields) {
    run.boundary_rise = std::max(run.boundary_rise, far_boundary_rise(f, cfg.initial_temperature));
  }
  run.deviation = deviations(run.metrics, catalog_entry(def.machine, def.id).reference);
  return run;
}

namespace {

std::string cell(const std::optional<double>& v, int precision, bool scientific = false) {
  if (!v) return "-";
  std::ostringstream s;
  if (scientific) {
    s << std::scientific << std::setprecision(precision) << *v;
  } else {
    s << std::fixed << std::setprecision(precision) << *v;
  }
  return s.str();
}

}  // namespace

std::string deviation_report(const std::vector<CaseRun>& runs) {
  std::ostringstream out;
  if (std::any_of(runs.begin(), runs.end(), [](const auto& r) { return r.surrogate; })) {
    out << "NOTE: Gaussian surrogate beam profile in use (no measured profile file supplied)\n";
  }
  const int w = 14;
  out << std::left << std::setw(18) << "case" << std::right << std::setw(w) << "length um"
      << std::setw(w) << "width um" << std::setw(w) << "depth um" << std::setw(w) << "CR C/s"
      << std::setw(10) << "dL %" << std::setw(10) << "dW %" << std::setw(10) << "dD %"
      << std::setw(10) << "dCR %" << '\n';
  for (const auto& r : runs) {
    out << std::left << std::setw(18) << (r.definition.label() + "/" + to_string(r.preset))
        << std::right << std::setw(w) << cell(r.metrics.length, 1) << std::setw(w)
        << cell(r.metrics.width, 1) << std::setw(w) << cell(r.metrics.depth, 1) << std::setw(w)
        << cell(r.metrics.cooling_rate, 3, true) << std::setw(10) << cell(r.deviation.length, 2)
        << std::setw(10) << cell(r.deviation.width, 2) << std::setw(10) << cell(r.deviation.depth, 2)
        << std::setw(10) << cell(r.deviation.cooling_rate, 2) << '\n';
  }
  return out.str();
}

void write_deviation_csv(const std::filesystem::path& path, const std::vector<CaseRun>& runs) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << "machine,case,model,source,grid,length_um,width_um,depth_um,cooling_rate,"
         "dev_length_pct,dev_width_pct,dev_depth_pct,dev_cooling_rate_pct,energy_balance,"
         "wall_seconds,steps,nodes\n";
  out.precision(10);
  const auto opt = [](const std::optional<double>& v) {
    std::ostringstream s;
    s.precision(10);
    if (v) s << *v;
    return s.str();
  };
  for (const auto& r : runs) {
    const auto& d = r.definition;
    out << to_string(d.machine) << ',' << to_string(d.id) << ',' << to_string(d.model) << ','
        << to_string(d.source) << ',' << to_string(r.preset) << ',' << r.metrics.length << ','
        << r.metrics.width << ',' << r.metrics.depth << ',' << r.metrics.cooling_rate << ','
        << opt(r.deviation.length) << ',' << opt(r.deviation.width) << ','
        << opt(r.deviation.depth) << ',' << opt(r.deviation.cooling_rate) << ','
        << r.energy_balance << ',' << r.wall_seconds << ',' << r.steps << ',' << r.node_count
        << '\n';
  }
}

}  // namespace meltpool
