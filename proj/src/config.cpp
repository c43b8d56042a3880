#include "meltpool/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "meltpool/error.hpp"

namespace meltpool {

using nlohmann::json;
namespace fs = std::filesystem;

RunConfig default_run_config() {
  RunConfig rc;
  SimulationConfig& c = rc.simulation;
  c.material = in625();
  GoldakSpec g;
  g.power = 195.0;
  g.absorptivity = 0.38;
  g.a = 0.05;
  g.c_front = 0.05;
  g.c_rear = 0.167 * 0.05;
  std::tie(g.f_front, g.f_rear) = resolve_fractions(0.053);
  c.source.model = g;
  c.source.path.start = {0.0, 0.75};
  c.source.path.direction = {0.0, 1.0};
  c.source.path.speed = 800.0;
  c.source.path.length = 3.0;
  c.emissivity = 0.47;
  c.grid.domain = DomainBox{2.0, 1.0, 4.0};
  c.grid.coarse_spacing = 0.2;
  c.grid.growth = 1.3;
  c.grid.bands[0] = RefinementBand{-0.15, 0.15, 0.025};
  c.grid.bands[1] = RefinementBand{-0.12, 0.0, 0.025};
  c.grid.bands[2] = RefinementBand{0.55, 3.85, 0.025};
  c.end_time = c.source.path.end_time();
  return rc;
}

namespace {

const char* extrapolation_name(Extrapolation e) {
  return e == Extrapolation::HoldLast ? "hold_last" : "linear";
}

json curve_json(const PropertyCurve& curve) {
  json knots = json::array();
  for (const auto& k : curve.knots()) knots.push_back({k.temperature, k.value});
  return {{"knots", knots}, {"extrapolation", extrapolation_name(curve.policy())}};
}

const char* kind_name(SourceKind k) {
  switch (k) {
    case SourceKind::Goldak: return "goldak";
    case SourceKind::Measured: return "measured";
    default: return "gaussian";
  }
}

const char* axis_key(int axis) { return axis == 0 ? "x" : (axis == 1 ? "y" : "z"); }

/// Typed access to one JSON object with dotted-path errors and unknown-key detection.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "must be an object");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) {
    used_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const json& raw(const std::string& key) {
    if (!has(key)) throw ConfigError(field(key), "is required");
    return j_.at(key);
  }

  double number(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number()) throw ConfigError(field(key), "must be a number");
    return v.get<double>();
  }

  double positive(const std::string& key) {
    const double v = number(key);
    if (!(v > 0.0)) throw ConfigError(field(key), "must be > 0");
    return v;
  }

  double nonnegative(const std::string& key) {
    const double v = number(key);
    if (!(v >= 0.0)) throw ConfigError(field(key), "must be >= 0");
    return v;
  }

  std::optional<double> optional_number(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return number(key);
  }

  long long integer(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number_integer()) throw ConfigError(field(key), "must be an integer");
    return v.get<long long>();
  }

  std::string string(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_string()) throw ConfigError(field(key), "must be a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const std::string& key, std::size_t expected = 0) {
    const json& v = raw(key);
    if (!v.is_array()) throw ConfigError(field(key), "must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError(field(key), "must be an array of numbers");
      out.push_back(e.get<double>());
    }
    if (expected && out.size() != expected) {
      throw ConfigError(field(key), "must have " + std::to_string(expected) + " entries");
    }
    return out;
  }

  Section child(const std::string& key) { return Section(raw(key), field(key)); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) throw ConfigError(field(it.key()), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

PropertyCurve parse_curve(Section s) {
  Extrapolation policy = Extrapolation::HoldLast;
  if (s.has("extrapolation")) {
    const std::string p = s.string("extrapolation");
    if (p == "linear") {
      policy = Extrapolation::LinearExtend;
    } else if (p != "hold_last") {
      throw ConfigError(s.field("extrapolation"), "must be hold_last or linear");
    }
  }
  PropertyCurve curve;
  if (s.has("file")) {
    const std::string file = s.string("file");
    try {
      curve = load_property_curve(file, policy);
    } catch (const InvalidInput& e) {
      throw ConfigError(s.field("file"), e.what());
    }
  } else {
    const json& knots = s.raw("knots");
    if (!knots.is_array()) throw ConfigError(s.field("knots"), "must be an array of [T, value] pairs");
    std::vector<Knot> ks;
    for (const auto& k : knots) {
      if (!k.is_array() || k.size() != 2 || !k[0].is_number() || !k[1].is_number()) {
        throw ConfigError(s.field("knots"), "must be an array of [T, value] pairs");
      }
      ks.push_back({k[0].get<double>(), k[1].get<double>()});
    }
    try {
      curve = PropertyCurve(std::move(ks), policy);
    } catch (const InvalidInput& e) {
      throw ConfigError(s.field("knots"), e.what());
    }
  }
  if (!(curve.min_value() > 0.0)) throw ConfigError(s.field("knots"), "values must be positive");
  s.finish();
  return curve;
}

MaterialModel parse_material(Section s) {
  MaterialModel m;
  m.density = s.positive("density");
  m.latent_heat = s.nonnegative("latent_heat");
  m.conductivity = parse_curve(s.child("conductivity"));
  m.heat_capacity = parse_curve(s.child("heat_capacity"));
  Section pc = s.child("phase_change");
  m.phase_change.solidus = pc.number("solidus");
  m.phase_change.liquidus = pc.number("liquidus");
  m.phase_change.sharpness = pc.positive("sharpness");
  if (!(m.phase_change.liquidus > m.phase_change.solidus)) {
    throw ConfigError(pc.field("liquidus"), "must exceed the solidus");
  }
  pc.finish();
  if (s.has("anisotropy")) {
    Section a = s.child("anisotropy");
    AnisotropyModel an;
    const auto theta = a.numbers("theta", 3);
    for (int i = 0; i < 3; ++i) {
      if (!(theta[i] > 0.0)) throw ConfigError(a.field("theta"), "entries must be > 0");
      an.theta[i] = theta[i];
    }
    an.ramp_start = a.number("ramp_start");
    an.ramp_end = a.number("ramp_end");
    if (!(an.ramp_end > an.ramp_start)) throw ConfigError(a.field("ramp_end"), "must exceed ramp_start");
    a.finish();
    m.anisotropy = an;
  }
  s.finish();
  return m;
}

void parse_source(Section s, RunConfig& rc) {
  const std::string model = s.string("model");
  const double power = s.nonnegative("power");
  const double absorptivity = s.number("absorptivity");
  if (!(absorptivity > 0.0 && absorptivity <= 1.0)) {
    throw ConfigError(s.field("absorptivity"), "must lie in (0, 1]");
  }
  // Model-specific keys are always recognised so a merged config can switch models.
  for (const char* k : {"a", "c_front", "c_rear", "f_front", "f_rear", "ff_fr", "profile", "d4sigma", "spacing"}) {
    s.has(k);
  }
  if (model == "goldak") {
    rc.origin.kind = SourceKind::Goldak;
    GoldakSpec g;
    g.power = power;
    g.absorptivity = absorptivity;
    g.a = s.positive("a");
    g.c_front = s.positive("c_front");
    g.c_rear = s.positive("c_rear");
    if (s.has("ff_fr")) {
      const double ratio = s.positive("ff_fr");
      std::tie(g.f_front, g.f_rear) = resolve_fractions(ratio);
    } else {
      g.f_front = s.positive("f_front");
      g.f_rear = s.positive("f_rear");
      if (std::abs(g.f_front + g.f_rear - 2.0) > 1e-9) {
        throw ConfigError(s.field("f_rear"), "f_front + f_rear must equal 2");
      }
    }
    rc.simulation.source.model = g;
  } else if (model == "measured") {
    rc.origin.kind = SourceKind::Measured;
    rc.origin.profile = s.string("profile");
    try {
      rc.simulation.source.model = load_profile(rc.origin.profile, power, absorptivity);
    } catch (const InvalidInput& e) {
      throw ConfigError(s.field("profile"), e.what());
    }
  } else if (model == "gaussian") {
    rc.origin.kind = SourceKind::Gaussian;
    rc.origin.d4sigma = s.positive("d4sigma");
    rc.origin.spacing = s.has("spacing") ? s.nonnegative("spacing") : 0.0;
    rc.simulation.source.model = gaussian_profile(rc.origin.d4sigma, power, absorptivity, rc.origin.spacing);
  } else {
    throw ConfigError(s.field("model"), "must be goldak, measured or gaussian");
  }

  Section p = s.child("path");
  ScanPath& path = rc.simulation.source.path;
  const auto start = p.numbers("start", 2);
  const auto dir = p.numbers("direction", 2);
  path.start = {start[0], start[1]};
  path.direction = {dir[0], dir[1]};
  if (std::abs(std::hypot(dir[0], dir[1]) - 1.0) > 1e-9) {
    throw ConfigError(p.field("direction"), "must be a unit vector");
  }
  path.speed = p.positive("speed");
  path.start_time = p.nonnegative("start_time");
  path.length = p.nonnegative("length");
  p.finish();
  s.finish();
}

GridSpec parse_grid(Section s) {
  GridSpec g;
  Section d = s.child("domain");
  g.domain.width = d.positive("width");
  g.domain.depth = d.positive("depth");
  g.domain.length = d.positive("length");
  d.finish();
  g.coarse_spacing = s.positive("coarse_spacing");
  g.growth = s.number("growth");
  if (!(g.growth > 1.0 && g.growth <= kMaxCellRatio)) {
    throw ConfigError(s.field("growth"), "must lie in (1, 1.5]");
  }
  if (s.has("bands")) {
    Section b = s.child("bands");
    for (int axis = 0; axis < 3; ++axis) {
      if (!b.has(axis_key(axis))) continue;
      Section band = b.child(axis_key(axis));
      RefinementBand r;
      r.lo = band.number("lo");
      r.hi = band.number("hi");
      r.spacing = band.positive("spacing");
      if (!(r.hi > r.lo)) throw ConfigError(band.field("hi"), "must exceed lo");
      if (r.lo < g.domain.lo(axis) - 1e-12 || r.hi > g.domain.hi(axis) + 1e-12) {
        throw ConfigError(band.field("lo"), "band must lie inside the domain");
      }
      band.finish();
      g.bands[axis] = r;
    }
    b.finish();
  }
  s.finish();
  return g;
}

}  // namespace

json to_json(const RunConfig& rc) {
  const SimulationConfig& c = rc.simulation;
  json material = {
      {"density", c.material.density},
      {"latent_heat", c.material.latent_heat},
      {"conductivity", curve_json(c.material.conductivity)},
      {"heat_capacity", curve_json(c.material.heat_capacity)},
      {"phase_change",
       {{"solidus", c.material.phase_change.solidus},
        {"liquidus", c.material.phase_change.liquidus},
        {"sharpness", c.material.phase_change.sharpness}}},
  };
  if (c.material.anisotropy) {
    const auto& a = *c.material.anisotropy;
    material["anisotropy"] = {{"theta", a.theta}, {"ramp_start", a.ramp_start}, {"ramp_end", a.ramp_end}};
  }

  json source = {{"model", kind_name(rc.origin.kind)}};
  if (const auto* g = std::get_if<GoldakSpec>(&c.source.model)) {
    source["power"] = g->power;
    source["absorptivity"] = g->absorptivity;
    source["a"] = g->a;
    source["c_front"] = g->c_front;
    source["c_rear"] = g->c_rear;
    source["f_front"] = g->f_front;
    source["f_rear"] = g->f_rear;
  } else {
    const auto& p = std::get<MeasuredProfile>(c.source.model);
    source["power"] = p.power();
    source["absorptivity"] = p.absorptivity();
    if (rc.origin.kind == SourceKind::Measured) {
      source["profile"] = rc.origin.profile.string();
    } else {
      source["d4sigma"] = rc.origin.d4sigma;
      source["spacing"] = rc.origin.spacing;
    }
  }
  const ScanPath& path = c.source.path;
  source["path"] = {{"start", {path.start.x, path.start.z}},
                    {"direction", {path.direction.x, path.direction.z}},
                    {"speed", path.speed},
                    {"start_time", path.start_time},
                    {"length", path.length}};

  json bands = json::object();
  for (int axis = 0; axis < 3; ++axis) {
    if (const auto& b = c.grid.bands[axis]) {
      bands[axis_key(axis)] = {{"lo", b->lo}, {"hi", b->hi}, {"spacing", b->spacing}};
    }
  }
  json grid = {{"domain",
                {{"width", c.grid.domain.width},
                 {"depth", c.grid.domain.depth},
                 {"length", c.grid.domain.length}}},
               {"coarse_spacing", c.grid.coarse_spacing},
               {"growth", c.grid.growth},
               {"bands", bands}};

  json boundary = {{"emissivity", c.emissivity},
                   {"stefan_boltzmann", c.stefan_boltzmann},
                   {"initial_temperature", c.initial_temperature},
                   {"ambient_temperature", c.ambient_temperature}};

  json solver = {{"end_time", c.end_time},
                 {"newton_tolerance", c.newton.relative_tolerance},
                 {"newton_max_iterations", c.newton.max_iterations},
                 {"linear_tolerance", c.newton.linear_tolerance},
                 {"max_backtracks", c.newton.max_backtracks},
                 {"max_step_halvings", c.newton.max_step_halvings},
                 {"snapshot_times", c.snapshots.times},
                 {"snapshot_every", c.snapshots.every_n_steps}};
  if (c.time_step) solver["dt"] = *c.time_step;

  const MeasureSpec& m = rc.measure;
  json metrics = {{"melt_isotherm", m.settings.melt_isotherm},
                  {"stations", m.settings.stations},
                  {"samples_per_line", m.settings.samples_per_line},
                  {"tolerance", m.settings.tolerance},
                  {"contour_subdivision", m.settings.contour_subdivision},
                  {"cooling_high", m.cooling.T_high},
                  {"cooling_low", m.cooling.T_low},
                  {"travel", m.travel},
                  {"min_travel", m.min_travel}};

  return {{"material", material}, {"source", source}, {"grid", grid},
          {"boundary", boundary}, {"solver", solver}, {"metrics", metrics}};
}

RunConfig config_from_json(const json& patch) {
  if (!patch.is_object()) throw ConfigError("config", "must be a JSON object");
  json merged = to_json(default_run_config());
  // Solver end time follows the scan path unless given explicitly.
  merged["solver"].erase("end_time");
  merged.merge_patch(patch);

  RunConfig rc;
  Section root(merged, "");
  rc.simulation.material = parse_material(root.child("material"));
  parse_source(root.child("source"), rc);
  rc.simulation.grid = parse_grid(root.child("grid"));

  Section b = root.child("boundary");
  rc.simulation.emissivity = b.number("emissivity");
  rc.simulation.stefan_boltzmann = b.number("stefan_boltzmann");
  rc.simulation.initial_temperature = b.number("initial_temperature");
  rc.simulation.ambient_temperature = b.number("ambient_temperature");
  b.finish();

  Section s = root.child("solver");
  SimulationConfig& c = rc.simulation;
  c.time_step = s.optional_number("dt");
  c.end_time = s.has("end_time") ? s.number("end_time") : c.source.path.end_time();
  c.newton.relative_tolerance = s.number("newton_tolerance");
  c.newton.max_iterations = static_cast<int>(s.integer("newton_max_iterations"));
  c.newton.linear_tolerance = s.positive("linear_tolerance");
  c.newton.max_backtracks = static_cast<int>(s.integer("max_backtracks"));
  c.newton.max_step_halvings = static_cast<int>(s.integer("max_step_halvings"));
  if (c.newton.max_backtracks < 0) throw ConfigError(s.field("max_backtracks"), "must be >= 0");
  if (c.newton.max_step_halvings < 0) throw ConfigError(s.field("max_step_halvings"), "must be >= 0");
  c.snapshots.times = s.numbers("snapshot_times");
  for (double t : c.snapshots.times) {
    if (!(t >= 0.0)) throw ConfigError(s.field("snapshot_times"), "times must be >= 0");
  }
  const long long every = s.integer("snapshot_every");
  if (every < 0) throw ConfigError(s.field("snapshot_every"), "must be >= 0");
  c.snapshots.every_n_steps = static_cast<std::size_t>(every);
  s.finish();

  Section m = root.child("metrics");
  MeasureSpec& ms = rc.measure;
  ms.settings.melt_isotherm = m.number("melt_isotherm");
  const long long stations = m.integer("stations");
  const long long samples = m.integer("samples_per_line");
  if (stations < 3) throw ConfigError(m.field("stations"), "must be >= 3");
  if (samples < 2) throw ConfigError(m.field("samples_per_line"), "must be >= 2");
  ms.settings.stations = static_cast<std::size_t>(stations);
  ms.settings.samples_per_line = static_cast<std::size_t>(samples);
  ms.settings.tolerance = m.number("tolerance");
  ms.settings.contour_subdivision = static_cast<int>(m.integer("contour_subdivision"));
  ms.cooling.T_high = m.number("cooling_high");
  ms.cooling.T_low = m.number("cooling_low");
  ms.travel = m.positive("travel");
  ms.min_travel = m.nonnegative("min_travel");
  if (ms.min_travel > ms.travel) throw ConfigError(m.field("min_travel"), "must not exceed travel");
  m.finish();
  root.finish();

  ms.settings.validate();
  ms.cooling.validate();
  c.validate();
  return rc;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open file");
  try {
    return json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string(), std::string("malformed JSON: ") + e.what());
  }
}

RunConfig load_config(const std::vector<fs::path>& files) {
  json patch = json::object();
  for (const auto& f : files) {
    json j = read_json_file(f);
    if (j.is_object() && j.value("tool", "") == "meltpool" && j.contains("config")) {
      j = j.at("config");
      if (!j.is_object()) throw ConfigError(f.string() + ":config", "manifest holds more than one config");
    }
    if (!j.is_object()) throw ConfigError(f.string(), "must contain a JSON object");
    patch.merge_patch(j);
  }
  return config_from_json(patch);
}

json parameter_fragment(const SimulationConfig& cfg, const std::vector<Parameter>& params) {
  json out = json::object();
  for (Parameter p : params) {
    switch (p) {
      case Parameter::Absorptivity:
        out["source"]["absorptivity"] = get_parameter(cfg, p);
        break;
      case Parameter::Emissivity:
        out["boundary"]["emissivity"] = cfg.emissivity;
        break;
      case Parameter::FrontRearRatio:
      case Parameter::RearFrontRadiusRatio: {
        const auto& g = std::get<GoldakSpec>(cfg.source.model);
        out["source"]["f_front"] = g.f_front;
        out["source"]["f_rear"] = g.f_rear;
        out["source"]["c_rear"] = g.c_rear;
        break;
      }
      case Parameter::Sharpness:
        out["material"]["phase_change"]["sharpness"] = cfg.material.phase_change.sharpness;
        break;
      case Parameter::ThetaX:
      case Parameter::ThetaY:
      case Parameter::ThetaZ: {
        const AnisotropyModel a = cfg.material.anisotropy.value_or(AnisotropyModel{});
        out["material"]["anisotropy"] = {
            {"theta", a.theta}, {"ramp_start", a.ramp_start}, {"ramp_end", a.ramp_end}};
        break;
      }
    }
  }
  return out;
}

RunOutcome execute_run(RunConfig rc, const ProgressCallback& progress) {
  const ScanPath& path = rc.simulation.source.path;
  std::optional<double> gate = path.start_time + rc.measure.travel / path.speed;
  if (*gate > rc.simulation.end_time + 1e-15) {
    gate.reset();
  } else {
    auto& times = rc.simulation.snapshots.times;
    if (std::find(times.begin(), times.end(), *gate) == times.end()) times.push_back(*gate);
  }
  RunOutcome out;
  out.result = simulate(rc.simulation, progress);
  for (const auto& f : out.result.snapshots.fields) {
    if (f.time <= path.start_time) continue;
    const double travel = std::min((f.time - path.start_time) * path.speed, path.length);
    if (travel < rc.measure.min_travel - 1e-9) continue;
    out.history.push_back(measure(f, scan_geometry(path, f.time), rc.measure.cooling, rc.measure.settings));
    if (gate && f.time == *gate) out.gated = out.history.back();
  }
  out.energy_balance = energy_balance(out.result, rc.simulation.material);
  return out;
}

json RunManifest::to_json() const {
  return {{"tool", tool},
          {"version", version},
          {"command", command},
          {"grid_preset", grid_preset},
          {"wall_seconds", wall_seconds},
          {"config", config},
          {"files", files}};
}

void RunManifest::write(const fs::path& dir) const {
  std::ofstream out(dir / "manifest.json");
  if (!out) throw InvalidInput("cannot write " + (dir / "manifest.json").string());
  out << to_json().dump(2) << '\n';
}

}  // namespace meltpool
