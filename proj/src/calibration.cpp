#include "meltpool/calibration.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <thread>

#include "meltpool/error.hpp"

namespace meltpool {

namespace {

struct NameEntry {
  Parameter id;
  const char* name;
};

constexpr NameEntry kNames[] = {
    {Parameter::Absorptivity, "eta"},       {Parameter::Emissivity, "emissivity"},
    {Parameter::FrontRearRatio, "ff_fr"},   {Parameter::RearFrontRadiusRatio, "cr_cf"},
    {Parameter::Sharpness, "S"},            {Parameter::ThetaX, "theta_x"},
    {Parameter::ThetaY, "theta_y"},         {Parameter::ThetaZ, "theta_z"},
};

GoldakSpec& goldak(SimulationConfig& cfg, Parameter p) {
  auto* g = std::get_if<GoldakSpec>(&cfg.source.model);
  if (!g) throw InvalidInput(parameter_name(p) + " requires a Goldak source");
  return *g;
}

const GoldakSpec& goldak(const SimulationConfig& cfg, Parameter p) {
  const auto* g = std::get_if<GoldakSpec>(&cfg.source.model);
  if (!g) throw InvalidInput(parameter_name(p) + " requires a Goldak source");
  return *g;
}

int theta_index(Parameter p) {
  return p == Parameter::ThetaX ? 0 : (p == Parameter::ThetaY ? 1 : 2);
}

// Runs f(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& f) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  const auto workers = static_cast<std::size_t>(std::min<std::size_t>(threads, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) f(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace

std::string parameter_name(Parameter p) {
  for (const auto& e : kNames) {
    if (e.id == p) return e.name;
  }
  return "unknown";
}

Parameter parameter_from_name(const std::string& name) {
  for (const auto& e : kNames) {
    if (name == e.name) return e.id;
  }
  std::string known;
  for (const auto& e : kNames) known += std::string(known.empty() ? "" : ", ") + e.name;
  throw InvalidInput("unknown parameter '" + name + "' (expected one of " + known + ")");
}

double get_parameter(const SimulationConfig& cfg, Parameter p) {
  switch (p) {
    case Parameter::Absorptivity:
      if (const auto* g = std::get_if<GoldakSpec>(&cfg.source.model)) return g->absorptivity;
      return std::get<MeasuredProfile>(cfg.source.model).absorptivity();
    case Parameter::Emissivity:
      return cfg.emissivity;
    case Parameter::FrontRearRatio: {
      const auto& g = goldak(cfg, p);
      return g.f_front / g.f_rear;
    }
    case Parameter::RearFrontRadiusRatio: {
      const auto& g = goldak(cfg, p);
      return g.c_rear / g.c_front;
    }
    case Parameter::Sharpness:
      return cfg.material.phase_change.sharpness;
    default:
      return cfg.material.anisotropy ? cfg.material.anisotropy->theta[theta_index(p)] : 1.0;
  }
}

void set_parameter(SimulationConfig& cfg, Parameter p, double value) {
  if (!std::isfinite(value)) throw InvalidInput(parameter_name(p) + " must be finite");
  switch (p) {
    case Parameter::Absorptivity:
      if (auto* g = std::get_if<GoldakSpec>(&cfg.source.model)) {
        g->absorptivity = value;
      } else {
        auto& m = std::get<MeasuredProfile>(cfg.source.model);
        m.set_power(m.power(), value);
      }
      break;
    case Parameter::Emissivity:
      cfg.emissivity = value;
      break;
    case Parameter::FrontRearRatio: {
      auto& g = goldak(cfg, p);
      std::tie(g.f_front, g.f_rear) = resolve_fractions(value);
      break;
    }
    case Parameter::RearFrontRadiusRatio: {
      auto& g = goldak(cfg, p);
      if (!(value > 0.0)) throw InvalidInput("cr_cf must be positive");
      g.c_rear = value * g.c_front;
      break;
    }
    case Parameter::Sharpness:
      cfg.material.phase_change.sharpness = value;
      break;
    default:
      if (!cfg.material.anisotropy) cfg.material.anisotropy.emplace();
      cfg.material.anisotropy->theta[theta_index(p)] = value;
      break;
  }
}

void ParameterHandle::validate() const {
  const std::string n = parameter_name(id);
  if (!std::isfinite(lower) || !std::isfinite(upper) || !(lower < upper)) {
    throw InvalidInput(n + ": bounds must be finite with lower < upper");
  }
  if (!(value >= lower && value <= upper)) throw InvalidInput(n + ": value outside its bounds");
}

void CalibrationTarget::validate() const {
  const double t[4] = {length, width, depth, cooling_rate};
  const double w[4] = {w_length, w_width, w_depth, w_cooling_rate};
  const char* names[4] = {"length", "width", "depth", "cooling_rate"};
  bool any = false;
  for (int i = 0; i < 4; ++i) {
    if (!(w[i] >= 0.0) || !std::isfinite(w[i])) {
      throw InvalidInput(std::string("target weight for ") + names[i] + " must be >= 0");
    }
    if (w[i] > 0.0) {
      any = true;
      if (!(t[i] > 0.0)) {
        throw InvalidInput(std::string("target ") + names[i] + " must be positive when weighted");
      }
    }
  }
  if (!any) throw InvalidInput("calibration target: all weights are zero");
}

double objective(const MeltPoolMetrics& m, const CalibrationTarget& t) {
  t.validate();
  const auto term = [](double w, double value, double target) {
    if (w == 0.0) return 0.0;
    const double r = (value - target) / target;
    return w * r * r;
  };
  return term(t.w_length, m.length, t.length) + term(t.w_width, m.width, t.width) +
         term(t.w_depth, m.depth, t.depth) + term(t.w_cooling_rate, m.cooling_rate, t.cooling_rate);
}

MeltPoolMetrics evaluate(const SimulationConfig& base, const MeasureSpec& spec) {
  SimulationConfig cfg = base;
  const ScanPath& path = cfg.source.path;
  const double at = path.start_time + spec.travel / path.speed;
  cfg.end_time = at;
  cfg.snapshots.times.clear();
  cfg.snapshots.every_n_steps = 0;
  const SimulationResult run = simulate(cfg);
  const TemperatureField& f = quasi_steady_snapshot(run.snapshots, path, spec.travel, spec.min_travel);
  return measure(f, scan_geometry(path, f.time), spec.cooling, spec.settings);
}

Evaluator simulation_evaluator(MeasureSpec spec) {
  return [spec](const SimulationConfig& cfg) { return evaluate(cfg, spec); };
}

std::vector<SweepRow> sensitivity_sweep(const SimulationConfig& cfg, Parameter param,
                                        const std::vector<double>& values,
                                        const Evaluator& eval, unsigned threads) {
  std::vector<SweepRow> rows(values.size());
  parallel_for(values.size(), threads, [&](std::size_t i) {
    rows[i].value = values[i];
    try {
      SimulationConfig c = cfg;
      set_parameter(c, param, values[i]);
      rows[i].metrics = eval(c);
    } catch (const std::exception& e) {
      rows[i].error = e.what();
    }
  });
  return rows;
}

namespace {

using BatchFn = std::function<std::vector<double>(const std::vector<std::vector<double>>&)>;

CalibrationResult nelder_mead(const BatchFn& batch, std::vector<ParameterHandle> free,
                              const CalibrationSettings& s) {
  if (free.empty()) throw InvalidInput("calibrate: at least one free parameter is required");
  if (s.budget < 1) throw InvalidInput("calibrate: budget must be >= 1 evaluation");
  for (const auto& h : free) h.validate();
  const std::size_t n = free.size();
  std::vector<double> lo(n), hi(n), range(n);
  for (std::size_t i = 0; i < n; ++i) {
    lo[i] = free[i].lower;
    hi[i] = free[i].upper;
    range[i] = hi[i] - lo[i];
  }
  const auto clamp = [&](std::vector<double> x) {
    for (std::size_t i = 0; i < n; ++i) x[i] = std::clamp(x[i], lo[i], hi[i]);
    return x;
  };

  CalibrationResult result;
  std::size_t used = 0;
  // Evaluates as many of the points as the budget allows.
  const auto run = [&](const std::vector<std::vector<double>>& pts) {
    const std::size_t take = std::min(pts.size(), s.budget - used);
    std::vector<std::vector<double>> head(pts.begin(), pts.begin() + static_cast<long>(take));
    used += take;
    return batch(head);
  };

  std::vector<std::vector<double>> x(1, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) x[0][i] = free[i].value;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v = x[0];
    const double step = s.initial_step * range[i];
    v[i] = v[i] + step <= hi[i] ? v[i] + step : v[i] - step;
    x.push_back(clamp(v));
  }
  std::vector<double> f = run(x);
  x.resize(f.size());

  const auto finish = [&](bool converged) {
    const auto best = std::min_element(f.begin(), f.end()) - f.begin();
    result.best = free;
    for (std::size_t i = 0; i < n; ++i) result.best[i].value = x[static_cast<std::size_t>(best)][i];
    result.best_objective = f[static_cast<std::size_t>(best)];
    result.converged = converged;
    return result;
  };
  if (x.size() < n + 1) return finish(false);

  while (true) {
    std::vector<std::size_t> order(n + 1);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return f[a] < f[b]; });
    std::vector<std::vector<double>> xs;
    std::vector<double> fs;
    for (auto o : order) {
      xs.push_back(x[o]);
      fs.push_back(f[o]);
    }
    x.swap(xs);
    f.swap(fs);
    result.best_per_iteration.push_back(f[0]);

    double extent = 0.0;
    for (std::size_t j = 1; j <= n; ++j)
      for (std::size_t i = 0; i < n; ++i) extent = std::max(extent, std::abs(x[j][i] - x[0][i]) / range[i]);
    if (std::isfinite(f[n]) && (f[n] - f[0] <= s.objective_tolerance || extent <= s.parameter_tolerance)) {
      return finish(true);
    }
    if (used >= s.budget) return finish(false);

    std::vector<double> centre(n, 0.0);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i) centre[i] += x[j][i] / static_cast<double>(n);
    const auto blend = [&](const std::vector<double>& a, double t) {
      std::vector<double> out(n);
      for (std::size_t i = 0; i < n; ++i) out[i] = centre[i] + t * (a[i] - centre[i]);
      return clamp(out);
    };

    const std::vector<double> xr = blend(x[n], -1.0);
    const double fr = run({xr})[0];
    if (fr < f[0]) {
      if (used >= s.budget) {
        x[n] = xr;
        f[n] = fr;
        continue;
      }
      const std::vector<double> xe = blend(x[n], -2.0);
      const double fe = run({xe})[0];
      if (fe < fr) {
        x[n] = xe;
        f[n] = fe;
      } else {
        x[n] = xr;
        f[n] = fr;
      }
      continue;
    }
    if (fr < f[n - 1]) {
      x[n] = xr;
      f[n] = fr;
      continue;
    }
    if (used >= s.budget) continue;
    const bool outside = fr < f[n];
    const std::vector<double> xc = outside ? blend(x[n], -0.5) : blend(x[n], 0.5);
    const double fc = run({xc})[0];
    if (fc < std::min(fr, f[n])) {
      x[n] = xc;
      f[n] = fc;
      continue;
    }
    if (outside && fr < f[n]) {
      x[n] = xr;
      f[n] = fr;
    }
    if (used >= s.budget) continue;
    std::vector<std::vector<double>> shrunk;
    for (std::size_t j = 1; j <= n; ++j) {
      std::vector<double> v(n);
      for (std::size_t i = 0; i < n; ++i) v[i] = x[0][i] + 0.5 * (x[j][i] - x[0][i]);
      shrunk.push_back(clamp(v));
    }
    const std::vector<double> fsh = run(shrunk);
    for (std::size_t j = 0; j < fsh.size(); ++j) {
      x[j + 1] = shrunk[j];
      f[j + 1] = fsh[j];
    }
  }
}

}  // namespace

CalibrationResult calibrate(const SimulationConfig& cfg, std::vector<ParameterHandle> free,
                            const CalibrationTarget& target, const Evaluator& eval,
                            const CalibrationSettings& s) {
  target.validate();
  std::vector<TraceEntry> trace;
  std::vector<Parameter> ids;
  for (const auto& h : free) ids.push_back(h.id);
  const BatchFn batch = [&](const std::vector<std::vector<double>>& pts) {
    std::vector<TraceEntry> entries(pts.size());
    parallel_for(pts.size(), s.threads, [&](std::size_t k) {
      TraceEntry& e = entries[k];
      e.values = pts[k];
      try {
        SimulationConfig c = cfg;
        for (std::size_t i = 0; i < ids.size(); ++i) set_parameter(c, ids[i], pts[k][i]);
        e.metrics = eval(c);
        e.objective = objective(e.metrics, target);
      } catch (const std::exception& ex) {
        e.error = ex.what();
        e.objective = std::numeric_limits<double>::infinity();
      }
    });
    std::vector<double> out;
    for (auto& e : entries) {
      e.evaluation = trace.size();
      out.push_back(e.objective);
      trace.push_back(std::move(e));
    }
    return out;
  };
  CalibrationResult r = nelder_mead(batch, std::move(free), s);
  r.trace = std::move(trace);
  return r;
}

CalibrationResult minimize(const std::function<double(const std::vector<double>&)>& fn,
                           std::vector<ParameterHandle> free, const CalibrationSettings& s) {
  std::vector<TraceEntry> trace;
  const BatchFn batch = [&](const std::vector<std::vector<double>>& pts) {
    std::vector<double> out;
    for (const auto& p : pts) {
      TraceEntry e;
      e.evaluation = trace.size();
      e.values = p;
      e.objective = fn(p);
      out.push_back(e.objective);
      trace.push_back(std::move(e));
    }
    return out;
  };
  CalibrationResult r = nelder_mead(batch, std::move(free), s);
  r.trace = std::move(trace);
  return r;
}

void write_sweep_csv(const std::filesystem::path& path, Parameter param,
                     const std::vector<SweepRow>& rows) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << parameter_name(param) << ",length_um,width_um,depth_um,cooling_rate,empty,error\n";
  out.precision(10);
  for (const auto& r : rows) {
    out << r.value << ',' << r.metrics.length << ',' << r.metrics.width << ',' << r.metrics.depth
        << ',' << r.metrics.cooling_rate << ',' << (r.metrics.empty ? 1 : 0) << ',';
    if (r.error) {
      std::string msg = *r.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      out << '"' << msg << '"';
    }
    out << '\n';
  }
}

void write_trace_csv(const std::filesystem::path& path, const CalibrationResult& r) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << "evaluation";
  for (const auto& h : r.best) out << ',' << parameter_name(h.id);
  out << ",objective,length_um,width_um,depth_um,cooling_rate\n";
  out.precision(10);
  for (const auto& e : r.trace) {
    out << e.evaluation;
    for (double v : e.values) out << ',' << v;
    out << ',' << e.objective << ',' << e.metrics.length << ',' << e.metrics.width << ','
        << e.metrics.depth << ',' << e.metrics.cooling_rate << '\n';
  }
}

}  // namespace meltpool
