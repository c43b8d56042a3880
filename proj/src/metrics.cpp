#include "meltpool/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

#include "meltpool/error.hpp"

namespace meltpool {

namespace {

Point3 along(Point3 a, Point3 unit, double s) {
  return {a.x + s * unit.x, a.y + s * unit.y, a.z + s * unit.z};
}

// Parameter range [lo, hi] for which origin + s * unit stays inside the grid.
std::pair<double, double> clip(const GradedGrid& g, Point3 origin, Point3 unit) {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double d = unit[a];
    const double o = origin[a];
    const double c0 = g.coords(a).front();
    const double c1 = g.coords(a).back();
    if (std::abs(d) < 1e-14) {
      if (o < c0 || o > c1) return {0.0, -1.0};
      continue;
    }
    double s0 = (c0 - o) / d;
    double s1 = (c1 - o) / d;
    if (s0 > s1) std::swap(s0, s1);
    lo = std::max(lo, s0);
    hi = std::min(hi, s1);
  }
  return {lo, hi};
}

struct Interval {
  double lo;
  double hi;
};

// Runs of T >= T_iso along a line of length `length` from its crossings.
std::vector<Interval> above_intervals(const std::vector<Crossing>& xs, bool start_above,
                                      double length) {
  std::vector<Interval> out;
  bool inside = start_above;
  double begin = 0.0;
  for (const Crossing& c : xs) {
    if (inside) {
      out.push_back({begin, c.distance});
    } else {
      begin = c.distance;
    }
    inside = !inside;
  }
  if (inside) out.push_back({begin, length});
  return out;
}

// Interval containing `at`, or the one closest to it.
const Interval* nearest_interval(const std::vector<Interval>& iv, double at) {
  const Interval* best = nullptr;
  double best_gap = std::numeric_limits<double>::infinity();
  for (const Interval& i : iv) {
    const double gap = at < i.lo ? i.lo - at : (at > i.hi ? at - i.hi : 0.0);
    if (gap < best_gap) {
      best_gap = gap;
      best = &i;
    }
  }
  return best;
}

// Golden-section maximisation of f on [a, b].
double golden_max(const std::function<double(double)>& f, double a, double b, double tol,
                  double& best_x) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - r * (b - a);
  double d = a + r * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  if (fc >= fd) {
    best_x = c;
    return fc;
  }
  best_x = d;
  return fd;
}

// Frame attached to the beam: s along the scan, u transverse, y vertical.
struct BeamFrame {
  Point3 origin;
  Point3 scan;
  Point3 transverse;

  explicit BeamFrame(const ScanGeometry& g)
      : origin{g.beam.x, 0.0, g.beam.z},
        scan{g.direction.x, 0.0, g.direction.z},
        transverse{g.direction.z, 0.0, -g.direction.x} {}

  Point3 at(double s, double u, double y) const {
    return {origin.x + s * scan.x + u * transverse.x, y, origin.z + s * scan.z + u * transverse.z};
  }
};

struct LineScan {
  std::vector<Crossing> crossings;
  std::vector<Interval> intervals;  // distances from the line start
  double start = 0.0;               // parameter of the line start
  double length = 0.0;
};

LineScan scan_line(const TemperatureField& field, Point3 origin, Point3 unit, double T_iso,
                   const MetricSettings& st, bool forward_only = false) {
  LineScan out;
  auto [lo, hi] = clip(*field.grid, origin, unit);
  if (forward_only) lo = std::max(lo, 0.0);
  if (!(hi > lo)) return out;
  out.start = lo;
  out.length = hi - lo;
  const Point3 a = along(origin, unit, lo);
  const Point3 b = along(origin, unit, hi);
  out.crossings = isotherm_crossings(field, a, b, T_iso, st.samples_per_line, st.tolerance);
  out.intervals = above_intervals(out.crossings, interpolate(field, a) >= T_iso, out.length);
  return out;
}

}  // namespace

ScanGeometry scan_geometry(const ScanPath& path, double time) {
  path.validate();
  return {beam_center(path, time).center, path.direction, path.speed};
}

std::vector<Crossing> isotherm_crossings(const TemperatureField& field, Point3 a, Point3 b,
                                         double T_iso, std::size_t samples, double tolerance) {
  const GradedGrid& g = *field.grid;
  const Point3 d{b.x - a.x, b.y - a.y, b.z - a.z};
  const double length = std::sqrt(d.x * d.x + d.y * d.y + d.z * d.z);
  if (!(length > 0.0)) return {};
  const Point3 unit{d.x / length, d.y / length, d.z / length};
  if (samples < 2) samples = 2;
  if (!(tolerance > 0.0)) throw InvalidInput("isotherm_crossings: tolerance must be positive");

  std::vector<double> params;
  params.reserve(samples + g.nodes(0) + g.nodes(1) + g.nodes(2));
  for (std::size_t i = 0; i < samples; ++i) {
    params.push_back(length * static_cast<double>(i) / static_cast<double>(samples - 1));
  }
  // The interpolant is smooth between grid planes, so every plane crossing is
  // a sample point.
  for (int axis = 0; axis < 3; ++axis) {
    if (std::abs(unit[axis]) < 1e-14) continue;
    for (double c : g.coords(axis)) {
      const double s = (c - a[axis]) / unit[axis];
      if (s > 0.0 && s < length) params.push_back(s);
    }
  }
  std::sort(params.begin(), params.end());
  params.erase(std::unique(params.begin(), params.end(),
                           [length](double p, double q) { return q - p <= 1e-12 * length; }),
               params.end());

  const auto value = [&](double s) { return interpolate(field, along(a, unit, s)) - T_iso; };
  std::vector<Crossing> out;
  double prev_s = params.front();
  double prev_v = value(prev_s);
  for (std::size_t i = 1; i < params.size(); ++i) {
    const double s = params[i];
    const double v = value(s);
    const bool was_above = prev_v >= 0.0;
    if (was_above != (v >= 0.0)) {
      double lo = prev_s;
      double hi = s;
      while (hi - lo > tolerance) {
        const double mid = 0.5 * (lo + hi);
        if ((value(mid) >= 0.0) == was_above) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      const double at = 0.5 * (lo + hi);
      out.push_back({at, along(a, unit, at), !was_above});
    }
    prev_s = s;
    prev_v = v;
  }
  return out;
}

void MetricSettings::validate() const {
  if (stations < 3) throw ConfigError("metrics.stations", "must be >= 3");
  if (samples_per_line < 2) throw ConfigError("metrics.samples_per_line", "must be >= 2");
  if (!(tolerance > 0.0)) throw ConfigError("metrics.tolerance", "must be > 0");
  if (contour_subdivision < 1) throw ConfigError("metrics.contour_subdivision", "must be >= 1");
}

PoolDimensions melt_pool_dimensions(const TemperatureField& field, const ScanGeometry& scan,
                                    const MetricSettings& st) {
  st.validate();
  field.validate();
  const BeamFrame frame(scan);
  const double T_m = st.melt_isotherm;
  PoolDimensions out;

  const LineScan centre = scan_line(field, frame.origin, frame.scan, T_m, st);
  const Interval* pool = nearest_interval(centre.intervals, -centre.start);
  if (!pool) return out;
  out.empty = false;
  out.rear = centre.start + pool->lo;
  out.front = centre.start + pool->hi;
  out.length = 1000.0 * (pool->hi - pool->lo);

  const auto width_at = [&](double s) {
    const LineScan line = scan_line(field, frame.at(s, 0.0, 0.0), frame.transverse, T_m, st);
    const Interval* iv = nearest_interval(line.intervals, -line.start);
    return iv ? iv->hi - iv->lo : 0.0;
  };
  const Point3 down{0.0, -1.0, 0.0};
  const auto depth_at = [&](double s) {
    const Point3 top = frame.at(s, 0.0, 0.0);
    if (interpolate(field, top) < T_m) return 0.0;
    const LineScan line = scan_line(field, top, down, T_m, st, true);
    return line.crossings.empty() ? line.length : line.crossings.front().distance;
  };

  const auto search = [&](const std::function<double(double)>& f, double& station) {
    const std::size_t n = st.stations;
    const double step = (out.front - out.rear) / static_cast<double>(n - 1);
    std::size_t best = 0;
    double best_v = -1.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double v = f(out.rear + step * static_cast<double>(k));
      if (v > best_v) {
        best_v = v;
        best = k;
      }
    }
    const double a = out.rear + step * static_cast<double>(best == 0 ? 0 : best - 1);
    const double b = out.rear + step * static_cast<double>(std::min(best + 1, n - 1));
    station = out.rear + step * static_cast<double>(best);
    double x = station;
    const double refined = golden_max(f, a, b, st.tolerance, x);
    if (refined > best_v) {
      station = x;
      return refined;
    }
    return best_v;
  };
  out.width = 1000.0 * search(width_at, out.width_station);
  out.depth = 1000.0 * search(depth_at, out.depth_station);
  return out;
}

void CoolingRateDefinition::validate() const {
  if (!(T_low > 0.0 && T_high > T_low)) {
    throw ConfigError("metrics.cooling_rate", "requires T_high > T_low > 0");
  }
}

double cooling_rate(const TemperatureField& field, const CoolingRateDefinition& defn,
                    const ScanGeometry& scan, const MetricSettings& st) {
  defn.validate();
  st.validate();
  if (!(scan.speed > 0.0)) throw InvalidInput("cooling_rate: speed must be positive");
  const BeamFrame frame(scan);
  const LineScan centre = scan_line(field, frame.origin, frame.scan, defn.T_high, st);
  const Interval* pool = nearest_interval(centre.intervals, -centre.start);
  if (!pool) {
    std::ostringstream msg;
    msg << "cooling_rate: no " << defn.T_high << " degC crossing on the scan line";
    throw MetricError(msg.str());
  }
  if (pool->lo <= 0.0) {
    std::ostringstream msg;
    msg << "cooling_rate: the " << defn.T_high
        << " degC region reaches the domain edge; no trailing crossing";
    throw MetricError(msg.str());
  }
  const double rear = centre.start + pool->lo;
  const Point3 from = frame.at(rear, 0.0, 0.0);
  const Point3 back{-frame.scan.x, 0.0, -frame.scan.z};
  const LineScan wake = scan_line(field, from, back, defn.T_low, st, true);
  // Skip a crossing at the start point itself, which can only occur when the
  // two isotherms coincide within the tolerance.
  for (const Crossing& c : wake.crossings) {
    const double dd = c.distance + wake.start;
    if (dd > st.tolerance) return (defn.T_high - defn.T_low) / dd * scan.speed;
  }
  std::ostringstream msg;
  msg << "cooling_rate: no " << defn.T_low << " degC crossing in the wake behind the "
      << defn.T_high << " degC trailing edge";
  throw MetricError(msg.str());
}

MeltPoolMetrics measure(const TemperatureField& field, const ScanGeometry& scan,
                        const CoolingRateDefinition& defn, const MetricSettings& st) {
  const PoolDimensions dims = melt_pool_dimensions(field, scan, st);
  MeltPoolMetrics m;
  m.length = dims.length;
  m.width = dims.width;
  m.depth = dims.depth;
  m.empty = dims.empty;
  m.time = field.time;
  m.melt_isotherm = st.melt_isotherm;
  if (!dims.empty) m.cooling_rate = cooling_rate(field, defn, scan, st);
  return m;
}

const TemperatureField& quasi_steady_snapshot(const SnapshotStore& store, const ScanPath& path,
                                              double travel, double min_travel) {
  const TemperatureField& f = store.nearest(path.start_time + travel / path.speed);
  const double reached = (f.time - path.start_time) * path.speed;
  if (reached < min_travel - 1e-9) {
    std::ostringstream msg;
    msg << "no quasi-steady snapshot: nearest to " << travel << " mm of travel has only "
        << reached << " mm (minimum " << min_travel << " mm)";
    throw MetricError(msg.str());
  }
  return f;
}

double Contour::area() const {
  double a = 0.0;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    a += points[i].u * points[i + 1].y - points[i + 1].u * points[i].y;
  }
  return 0.5 * std::abs(a);
}

double Contour::width() const {
  if (points.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(points.begin(), points.end(),
                                            [](const auto& p, const auto& q) { return p.u < q.u; });
  return hi->u - lo->u;
}

double Contour::depth() const {
  if (points.empty()) return 0.0;
  double lowest = 0.0;
  for (const auto& p : points) lowest = std::min(lowest, p.y);
  return -lowest;
}

Contour cross_section_contour(const TemperatureField& field, const ScanGeometry& scan,
                              double station, double T_melt, int subdivision) {
  if (subdivision < 1) throw InvalidInput("cross_section_contour: subdivision must be >= 1");
  const GradedGrid& g = *field.grid;
  int plane_axis;
  int u_axis;
  if (std::abs(scan.direction.x) < 1e-12) {
    plane_axis = 2;
    u_axis = 0;
  } else if (std::abs(scan.direction.z) < 1e-12) {
    plane_axis = 0;
    u_axis = 2;
  } else {
    throw InvalidInput("cross_section_contour: scan direction must follow a grid axis");
  }
  if (station < g.coords(plane_axis).front() || station > g.coords(plane_axis).back()) {
    throw InvalidInput("cross_section_contour: station outside the domain");
  }

  const auto refine = [subdivision](const std::vector<double>& c) {
    std::vector<double> out;
    for (std::size_t i = 0; i + 1 < c.size(); ++i) {
      for (int s = 0; s < subdivision; ++s) {
        out.push_back(c[i] + (c[i + 1] - c[i]) * s / subdivision);
      }
    }
    out.push_back(c.back());
    return out;
  };
  const std::vector<double> us = refine(g.coords(u_axis));
  const std::vector<double> ys = refine(g.coords(1));
  const std::size_t nu = us.size();
  const std::size_t ny = ys.size();
  std::vector<double> v(nu * ny);
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nu; ++i) {
      Point3 p;
      if (plane_axis == 2) {
        p = {us[i], ys[j], station};
      } else {
        p = {station, ys[j], us[i]};
      }
      v[i + nu * j] = interpolate(field, p) - T_melt;
    }
  }

  // Vertices live on sample-grid edges: horizontal edge (i, j)-(i+1, j) has id
  // 2 (i + nu j), vertical edge (i, j)-(i, j+1) has id 2 (i + nu j) + 1.
  const auto h_edge = [nu](std::size_t i, std::size_t j) { return 2 * (i + nu * j); };
  const auto v_edge = [nu](std::size_t i, std::size_t j) { return 2 * (i + nu * j) + 1; };
  std::map<std::size_t, ContourPoint> vertex;
  const auto cut = [&](std::size_t id) {
    if (vertex.count(id)) return;
    const std::size_t base = id / 2;
    const std::size_t i = base % nu;
    const std::size_t j = base / nu;
    const bool horizontal = id % 2 == 0;
    const std::size_t i2 = horizontal ? i + 1 : i;
    const std::size_t j2 = horizontal ? j : j + 1;
    const double va = v[i + nu * j];
    const double vb = v[i2 + nu * j2];
    const double t = va / (va - vb);
    vertex[id] = {us[i] + t * (us[i2] - us[i]), ys[j] + t * (ys[j2] - ys[j])};
  };
  std::multimap<std::size_t, std::size_t> links;
  std::vector<std::pair<std::size_t, std::size_t>> segments;
  const auto add = [&](std::size_t e0, std::size_t e1) {
    cut(e0);
    cut(e1);
    links.emplace(e0, segments.size());
    links.emplace(e1, segments.size());
    segments.emplace_back(e0, e1);
  };

  for (std::size_t j = 0; j + 1 < ny; ++j) {
    for (std::size_t i = 0; i + 1 < nu; ++i) {
      const double c[4] = {v[i + nu * j], v[i + 1 + nu * j], v[i + 1 + nu * (j + 1)],
                           v[i + nu * (j + 1)]};
      const std::size_t e[4] = {h_edge(i, j), v_edge(i + 1, j), h_edge(i, j + 1), v_edge(i, j)};
      bool in[4];
      int count = 0;
      for (int k = 0; k < 4; ++k) {
        in[k] = c[k] >= 0.0;
        count += in[k];
      }
      if (count == 0 || count == 4) continue;
      if (in[0] == in[2] && in[1] == in[3]) {
        const bool centre = 0.25 * (c[0] + c[1] + c[2] + c[3]) >= 0.0;
        if (in[0] == centre) {
          add(e[0], e[1]);  // isolate corners 1 and 3
          add(e[2], e[3]);
        } else {
          add(e[3], e[0]);  // isolate corners 0 and 2
          add(e[1], e[2]);
        }
        continue;
      }
      std::vector<std::size_t> crossed;
      for (int k = 0; k < 4; ++k) {
        if (in[k] != in[(k + 1) % 4]) crossed.push_back(e[k]);
      }
      add(crossed[0], crossed[1]);
    }
  }

  // Chain segments, starting from chain ends so open chains come out whole.
  std::vector<bool> used(segments.size(), false);
  std::vector<std::vector<std::size_t>> chains;
  const auto walk = [&](std::size_t start_vertex) {
    std::vector<std::size_t> chain{start_vertex};
    std::size_t current = start_vertex;
    while (true) {
      bool moved = false;
      const auto range = links.equal_range(current);
      for (auto it = range.first; it != range.second; ++it) {
        if (used[it->second]) continue;
        used[it->second] = true;
        const auto& seg = segments[it->second];
        current = seg.first == current ? seg.second : seg.first;
        chain.push_back(current);
        moved = true;
        break;
      }
      if (!moved) break;
    }
    return chain;
  };
  for (const auto& [id, _] : vertex) {
    if (links.count(id) == 1) {
      const auto it = links.find(id);
      if (!used[it->second]) chains.push_back(walk(id));
    }
  }
  for (std::size_t s = 0; s < segments.size(); ++s) {
    if (!used[s]) chains.push_back(walk(segments[s].first));
  }

  Contour best;
  double best_area = -1.0;
  for (const auto& chain : chains) {
    Contour c;
    for (std::size_t id : chain) c.points.push_back(vertex[id]);
    if (c.points.front().u != c.points.back().u || c.points.front().y != c.points.back().y) {
      c.points.push_back(c.points.front());
    }
    const double a = c.area();
    if (a > best_area) {
      best_area = a;
      best = std::move(c);
    }
  }
  return best;
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const MeltPoolMetrics> rows) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << "time,length_um,width_um,depth_um,cooling_rate,melt_isotherm,empty\n";
  out.precision(10);
  for (const auto& m : rows) {
    out << m.time << ',' << m.length << ',' << m.width << ',' << m.depth << ',' << m.cooling_rate
        << ',' << m.melt_isotherm << ',' << (m.empty ? 1 : 0) << '\n';
  }
}

void write_contour_csv(const std::filesystem::path& path, const Contour& contour) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << "u,y\n";
  out.precision(10);
  for (const auto& p : contour.points) out << p.u << ',' << p.y << '\n';
}

}  // namespace meltpool
