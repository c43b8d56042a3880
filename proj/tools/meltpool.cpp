// meltpool: command-line front end (run, sweep, calibrate, bench, verify).

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "meltpool/bench.hpp"
#include "meltpool/calibration.hpp"
#include "meltpool/config.hpp"
#include "meltpool/error.hpp"
#include "meltpool/metrics.hpp"
#include "meltpool/solver.hpp"
#include "meltpool/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace meltpool;

namespace {

enum ExitCode { kOk = 0, kFailed = 1, kConfig = 2, kSolver = 3, kMetric = 4, kFetch = 5 };

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void prepare_out(const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw InvalidInput("--out: cannot create " + out.string() + ": " + ec.message());
}

struct RunArgs {
  std::vector<std::string> configs;
  std::string out;
  bool vtk = false;
};

int cmd_run(const RunArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<fs::path> files(a.configs.begin(), a.configs.end());
  RunConfig rc = load_config(files);
  const fs::path out = a.out;
  prepare_out(out);
  const json echo = to_json(rc);

  std::size_t steps_done = 0;
  const RunOutcome run = execute_run(rc, [&](const StepRecord& r) {
    ++steps_done;
    if (steps_done % 50 == 0) {
      std::cerr << "step " << r.step << "  t=" << r.time << " s  newton=" << r.newton_iterations << '\n';
    }
  });
  const SimulationResult& result = run.result;
  const std::optional<MeltPoolMetrics>& gated = run.gated;
  const double balance = run.energy_balance;

  RunManifest manifest;
  manifest.version = kToolVersion;
  manifest.command = "run";
  manifest.grid_preset = "custom";
  manifest.config = echo;

  write_report_csv(out / "report.csv", result.report);
  manifest.files.push_back("report.csv");
  write_metrics_csv(out / "metrics.csv", run.history);
  manifest.files.push_back("metrics.csv");

  const TemperatureField& final_field = result.snapshots.fields.back();
  const auto [tmin, tmax] = std::minmax_element(final_field.values.begin(), final_field.values.end());
  json summary = {{"final_time", final_field.time},
                  {"final_min_temperature", *tmin},
                  {"final_max_temperature", *tmax},
                  {"energy_balance", balance},
                  {"steps", result.report.steps.size()},
                  {"rejected_steps", result.report.rejected_steps},
                  {"nodes", final_field.grid->node_count()}};
  if (gated) {
    summary["metrics"] = {{"length_um", gated->length},
                          {"width_um", gated->width},
                          {"depth_um", gated->depth},
                          {"cooling_rate", gated->cooling_rate},
                          {"time", gated->time},
                          {"empty", gated->empty}};
  }
  {
    std::ofstream s(out / "summary.json");
    s << summary.dump(2) << '\n';
  }
  manifest.files.push_back("summary.json");

  if (a.vtk) {
    for (const auto& p : write_snapshots(out / "snapshots", result.snapshots)) {
      manifest.files.push_back(fs::relative(p, out).string());
    }
    manifest.files.push_back("snapshots/manifest.csv");
  }

  std::cout << "steps " << result.report.steps.size() << ", final max T " << *tmax
            << " degC, energy balance " << balance << '\n';
  if (gated) {
    std::cout << "melt pool at " << rc.measure.travel << " mm: length " << gated->length
              << " um, width " << gated->width << " um, depth " << gated->depth
              << " um, cooling rate " << gated->cooling_rate << " degC/s\n";
  }
  manifest.files.push_back("manifest.json");
  manifest.wall_seconds = seconds_since(t0);
  manifest.write(out);
  return kOk;
}

std::vector<double> parse_values(const std::string& list, const std::string& range) {
  std::vector<double> v;
  if (!list.empty()) {
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        v.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw InvalidInput("--values: '" + item + "' is not a number");
      }
    }
  }
  if (!range.empty()) {
    double lo = 0.0, hi = 0.0;
    int n = 0;
    char c1 = 0, c2 = 0;
    std::istringstream in(range);
    if (!(in >> lo >> c1 >> hi >> c2 >> n) || c1 != ':' || c2 != ':' || n < 2) {
      throw InvalidInput("--range: expected lo:hi:count with count >= 2");
    }
    for (int i = 0; i < n; ++i) v.push_back(lo + (hi - lo) * i / (n - 1));
  }
  if (v.empty()) throw InvalidInput("sweep: give --values or --range");
  return v;
}

struct SweepArgs {
  std::vector<std::string> configs;
  std::string out;
  std::string param;
  std::string values;
  std::string range;
  unsigned threads = 0;
};

int cmd_sweep(const SweepArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig rc = load_config({a.configs.begin(), a.configs.end()});
  const Parameter p = parameter_from_name(a.param);
  const std::vector<double> values = parse_values(a.values, a.range);
  const fs::path out = a.out;
  prepare_out(out);
  const json echo = to_json(rc);

  const auto rows = sensitivity_sweep(rc.simulation, p, values, simulation_evaluator(rc.measure), a.threads);
  write_sweep_csv(out / "sweep.csv", p, rows);
  std::cout << std::setw(12) << a.param << std::setw(12) << "length" << std::setw(12) << "width"
            << std::setw(12) << "depth" << std::setw(14) << "CR" << '\n';
  for (const auto& r : rows) {
    std::cout << std::setw(12) << r.value;
    if (r.error) {
      std::cout << "  failed: " << *r.error << '\n';
    } else {
      std::cout << std::setw(12) << r.metrics.length << std::setw(12) << r.metrics.width
                << std::setw(12) << r.metrics.depth << std::setw(14) << r.metrics.cooling_rate << '\n';
    }
  }
  RunManifest m;
  m.version = kToolVersion;
  m.command = "sweep " + a.param;
  m.grid_preset = "custom";
  m.config = echo;
  m.files = {"sweep.csv", "manifest.json"};
  m.wall_seconds = seconds_since(t0);
  m.write(out);
  return kOk;
}

ParameterHandle parse_free(const std::string& spec, const SimulationConfig& cfg) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(item);
  if (parts.size() != 3 && parts.size() != 4) {
    throw InvalidInput("--free: expected name:lower:upper[:start], got '" + spec + "'");
  }
  ParameterHandle h;
  h.id = parameter_from_name(parts[0]);
  try {
    h.lower = std::stod(parts[1]);
    h.upper = std::stod(parts[2]);
    h.value = parts.size() == 4 ? std::stod(parts[3]) : get_parameter(cfg, h.id);
  } catch (const std::invalid_argument&) {
    throw InvalidInput("--free: bounds in '" + spec + "' must be numbers");
  }
  h.validate();
  return h;
}

struct CalibrateArgs {
  std::vector<std::string> configs;
  std::string out;
  std::vector<std::string> free;
  std::optional<double> length, width, depth, cooling_rate;
  double w_length = 1.0, w_width = 1.0, w_depth = 1.0, w_cooling_rate = 1.0;
  std::size_t budget = 40;
  unsigned threads = 0;
};

int cmd_calibrate(const CalibrateArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig rc = load_config({a.configs.begin(), a.configs.end()});
  std::vector<ParameterHandle> free;
  for (const auto& f : a.free) free.push_back(parse_free(f, rc.simulation));
  if (free.empty()) throw InvalidInput("calibrate: at least one --free parameter is required");
  CalibrationTarget target;
  target.w_length = target.w_width = target.w_depth = target.w_cooling_rate = 0.0;
  if (a.length) target.length = *a.length, target.w_length = a.w_length;
  if (a.width) target.width = *a.width, target.w_width = a.w_width;
  if (a.depth) target.depth = *a.depth, target.w_depth = a.w_depth;
  if (a.cooling_rate) target.cooling_rate = *a.cooling_rate, target.w_cooling_rate = a.w_cooling_rate;
  target.validate();
  const fs::path out = a.out;
  prepare_out(out);
  const json echo = to_json(rc);

  CalibrationSettings s;
  s.budget = a.budget;
  s.threads = a.threads;
  const CalibrationResult r = calibrate(rc.simulation, free, target, simulation_evaluator(rc.measure), s);
  write_trace_csv(out / "trace.csv", r);

  SimulationConfig best = rc.simulation;
  std::vector<Parameter> ids;
  for (const auto& h : r.best) {
    set_parameter(best, h.id, h.value);
    ids.push_back(h.id);
    std::cout << parameter_name(h.id) << " = " << h.value << '\n';
  }
  std::cout << "objective " << r.best_objective << " after " << r.trace.size() << " evaluations"
            << (r.converged ? " (converged)" : " (budget exhausted)") << '\n';
  {
    std::ofstream f(out / "best.json");
    f << parameter_fragment(best, ids).dump(2) << '\n';
  }
  RunManifest m;
  m.version = kToolVersion;
  m.command = "calibrate";
  m.grid_preset = "custom";
  m.config = echo;
  m.files = {"trace.csv", "best.json", "manifest.json"};
  m.wall_seconds = seconds_since(t0);
  m.write(out);
  return kOk;
}

struct BenchArgs {
  std::vector<std::string> machines;
  std::vector<std::string> cases;
  std::string model = "iso";
  std::string grid = "desk";
  std::string profile;
  std::string out;
  std::string fetch_url;
  std::string fetch_sha256;
  unsigned threads = 1;
};

int cmd_bench(const BenchArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path out = a.out;
  prepare_out(out);
  const ConductivityModel model = model_from_string(a.model);
  const GridPreset preset = preset_from_string(a.grid);
  std::optional<fs::path> profile;
  if (!a.profile.empty()) {
    if (!fs::exists(a.profile)) throw InvalidInput("--profile: file not found: " + a.profile);
    profile = a.profile;
  }

  std::vector<CaseDefinition> defs;
  const std::vector<std::string> machines = a.machines.empty() ? std::vector<std::string>{"CBM", "AMMT"} : a.machines;
  const std::vector<std::string> cases = a.cases.empty() ? std::vector<std::string>{"A", "B", "C"} : a.cases;
  for (const auto& m : machines) {
    for (const auto& c : cases) {
      defs.push_back(make_case(machine_from_string(m), case_from_string(c), model, profile));
    }
  }

  RunManifest manifest;
  manifest.version = kToolVersion;
  manifest.command = "bench";
  manifest.grid_preset = to_string(preset);
  manifest.config = json::array();

  if (!a.fetch_url.empty()) {
    FetchOptions fo;
    if (!a.fetch_sha256.empty()) fo.expected_sha256 = a.fetch_sha256;
    const fs::path file = fetch_reference_data(a.fetch_url, fo);
    std::cout << "reference data: " << file.string() << '\n';
  }

  std::vector<std::optional<CaseRun>> runs(defs.size());
  std::vector<std::string> errors(defs.size());
  std::atomic<std::size_t> next{0};
  std::mutex io;
  const auto worker = [&] {
    for (std::size_t i = next++; i < defs.size(); i = next++) {
      {
        std::lock_guard<std::mutex> lock(io);
        std::cerr << "running " << defs[i].label() << " on the " << a.grid << " grid\n";
      }
      try {
        runs[i] = run_case(defs[i], preset);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(a.threads, static_cast<unsigned>(defs.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::vector<CaseRun> done;
  int status = kOk;
  for (std::size_t i = 0; i < defs.size(); ++i) {
    RunConfig rc;
    rc.simulation = case_config(defs[i], preset);
    rc.origin.kind = defs[i].source == SourceVariant::Goldak
                         ? SourceKind::Goldak
                         : (defs[i].source == SourceVariant::Measured ? SourceKind::Measured : SourceKind::Gaussian);
    if (defs[i].profile) rc.origin.profile = *defs[i].profile;
    rc.origin.d4sigma = 1e-3 * defs[i].d4sigma;
    rc.measure.cooling = cooling_definition(defs[i].machine);
    manifest.config.push_back({{"case", defs[i].label()}, {"config", to_json(rc)}});
    if (runs[i]) {
      done.push_back(*runs[i]);
    } else {
      std::cerr << "error [solver] " << defs[i].label() << ": " << errors[i] << '\n';
      status = kSolver;
    }
  }
  if (!done.empty()) {
    const std::string table = deviation_report(done);
    std::cout << table;
    std::ofstream(out / "report.txt") << table;
    write_deviation_csv(out / "deviations.csv", done);
    manifest.files = {"report.txt", "deviations.csv"};
  }
  manifest.files.push_back("manifest.json");
  manifest.wall_seconds = seconds_since(t0);
  manifest.write(out);
  return status;
}

struct VerifyArgs {
  std::string oracle = "all";
  std::string grid = "desk";
  std::string out;
};

int cmd_verify(const VerifyArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path out = a.out;
  prepare_out(out);
  std::vector<OracleReport> reports;
  if (a.oracle == "all" || a.oracle == "halfspace") reports.push_back(verify_halfspace());
  if (a.oracle == "all" || a.oracle == "rosenthal") {
    RosenthalSetup rs;
    rs.fine_spacing = preset_spacing(preset_from_string(a.grid));
    reports.push_back(verify_rosenthal(rs));
  }
  if (reports.empty()) throw InvalidInput("--oracle: expected all, halfspace or rosenthal");
  RunManifest m;
  m.version = kToolVersion;
  m.command = "verify " + a.oracle;
  m.grid_preset = a.grid;
  m.config = json::object();
  bool ok = true;
  for (const auto& r : reports) {
    std::cout << format_report(r) << '\n';
    const std::string file = (r.name.find("Rosenthal") != std::string::npos ? "rosenthal" : "halfspace") + std::string(".csv");
    write_report_csv(out / file, r);
    m.files.push_back(file);
    ok = ok && r.passed();
  }
  m.files.push_back("manifest.json");
  m.wall_seconds = seconds_since(t0);
  m.write(out);
  return ok ? kOk : kFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Melt-pool thermal simulation for laser powder bed fusion"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  RunArgs run;
  auto* r = app.add_subcommand("run", "Simulate one scan track from a config file");
  r->add_option("-c,--config", run.configs, "Config file(s), later files patch earlier ones")->required();
  r->add_option("-o,--out", run.out, "Output directory")->required();
  r->add_flag("--vtk", run.vtk, "Write every snapshot as a VTK file");

  SweepArgs sweep;
  auto* s = app.add_subcommand("sweep", "One-at-a-time sensitivity sweep of a parameter");
  s->add_option("-c,--config", sweep.configs, "Config file(s)")->required();
  s->add_option("-o,--out", sweep.out, "Output directory")->required();
  s->add_option("-p,--param", sweep.param, "eta, emissivity, ff_fr, cr_cf, S, theta_x, theta_y, theta_z")->required();
  s->add_option("--values", sweep.values, "Comma-separated values");
  s->add_option("--range", sweep.range, "lo:hi:count, evenly spaced");
  s->add_option("--threads", sweep.threads, "Concurrent evaluations (0: all cores)");

  CalibrateArgs cal;
  auto* c = app.add_subcommand("calibrate", "Fit free parameters to melt-pool targets");
  c->add_option("-c,--config", cal.configs, "Config file(s)")->required();
  c->add_option("-o,--out", cal.out, "Output directory")->required();
  c->add_option("--free", cal.free, "name:lower:upper[:start], repeatable")->required();
  c->add_option("--target-length", cal.length, "Target length, um");
  c->add_option("--target-width", cal.width, "Target width, um");
  c->add_option("--target-depth", cal.depth, "Target depth, um");
  c->add_option("--target-cooling-rate", cal.cooling_rate, "Target cooling rate, degC/s");
  c->add_option("--weight-length", cal.w_length, "Objective weight");
  c->add_option("--weight-width", cal.w_width, "Objective weight");
  c->add_option("--weight-depth", cal.w_depth, "Objective weight");
  c->add_option("--weight-cooling-rate", cal.w_cooling_rate, "Objective weight");
  c->add_option("--budget", cal.budget, "Maximum simulations");
  c->add_option("--threads", cal.threads, "Concurrent evaluations (0: all cores)");

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "Run benchmark cases and report deviations");
  b->add_option("--machine", bench.machines, "CBM and/or AMMT (default both)");
  b->add_option("--case", bench.cases, "A, B and/or C (default all)");
  b->add_option("--model", bench.model, "iso or aniso")->check(CLI::IsMember({"iso", "aniso"}));
  b->add_option("--grid", bench.grid, "desk or convergence")->check(CLI::IsMember({"desk", "convergence"}));
  b->add_option("--profile", bench.profile, "Measured AMMT beam profile file");
  b->add_option("-o,--out", bench.out, "Output directory")->required();
  b->add_option("--fetch", bench.fetch_url, "Download and cache a reference data file first");
  b->add_option("--sha256", bench.fetch_sha256, "Expected hash of the --fetch file");
  b->add_option("--threads", bench.threads, "Cases run concurrently");

  VerifyArgs ver;
  auto* v = app.add_subcommand("verify", "Compare the solver against analytic solutions");
  v->add_option("--oracle", ver.oracle, "all, halfspace or rosenthal")
      ->check(CLI::IsMember({"all", "halfspace", "rosenthal"}));
  v->add_option("--grid", ver.grid, "Fine spacing preset for the moving-source check")
      ->check(CLI::IsMember({"desk", "convergence"}));
  v->add_option("-o,--out", ver.out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (r->parsed()) return cmd_run(run);
    if (s->parsed()) return cmd_sweep(sweep);
    if (c->parsed()) return cmd_calibrate(cal);
    if (b->parsed()) return cmd_bench(bench);
    if (v->parsed()) return cmd_verify(ver);
  } catch (const ConfigError& e) {
    std::cerr << "error [config] " << e.what() << '\n';
    return kConfig;
  } catch (const InvalidInput& e) {
    std::cerr << "error [input] " << e.what() << '\n';
    return kConfig;
  } catch (const SolverError& e) {
    std::cerr << "error [solver] " << e.what() << '\n';
    return kSolver;
  } catch (const MetricError& e) {
    std::cerr << "error [metric] " << e.what() << '\n';
    return kMetric;
  } catch (const FetchError& e) {
    std::cerr << "error [fetch] " << e.what() << '\n';
    return kFetch;
  } catch (const std::exception& e) {
    std::cerr << "error " << e.what() << '\n';
    return kFailed;
  }
  return kFailed;
}
