#include "meltpool/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "meltpool/error.hpp"

namespace meltpool {

void DomainBox::validate() const {
  if (!(width > 0.0 && depth > 0.0 && length > 0.0)) {
    throw InvalidInput("domain: all extents must be positive");
  }
}

double DomainBox::lo(int axis) const {
  switch (axis) {
    case 0: return -0.5 * width;
    case 1: return -depth;
    default: return 0.0;
  }
}

double DomainBox::hi(int axis) const {
  switch (axis) {
    case 0: return 0.5 * width;
    case 1: return 0.0;
    default: return length;
  }
}

GradedGrid::GradedGrid(std::array<std::vector<double>, 3> coords, GridSpec spec)
    : coords_(std::move(coords)), spec_(std::move(spec)) {
  for (int a = 0; a < 3; ++a) {
    if (coords_[a].size() < 3) throw InvalidInput("grid: every axis needs at least two cells");
    for (std::size_t i = 1; i < coords_[a].size(); ++i) {
      if (!(coords_[a][i] > coords_[a][i - 1])) {
        throw InvalidInput("grid: node coordinates must be strictly increasing");
      }
    }
  }
}

double GradedGrid::min_spacing(int axis) const {
  double h = coords_[axis][1] - coords_[axis][0];
  for (std::size_t i = 1; i + 1 < coords_[axis].size(); ++i) {
    h = std::min(h, coords_[axis][i + 1] - coords_[axis][i]);
  }
  return h;
}

double GradedGrid::min_spacing() const {
  return std::min({min_spacing(0), min_spacing(1), min_spacing(2)});
}

bool GradedGrid::contains(Point3 p) const {
  for (int a = 0; a < 3; ++a) {
    const double tol = 1e-12 * (coords_[a].back() - coords_[a].front());
    if (p[a] < coords_[a].front() - tol || p[a] > coords_[a].back() + tol) return false;
  }
  return true;
}

std::pair<std::size_t, double> GradedGrid::locate(int axis, double value) const {
  const auto& c = coords_[axis];
  auto it = std::upper_bound(c.begin(), c.end(), value);
  std::size_t cell = it == c.begin() ? 0 : static_cast<std::size_t>(it - c.begin()) - 1;
  cell = std::min(cell, c.size() - 2);
  const double t = (value - c[cell]) / (c[cell + 1] - c[cell]);
  return {cell, std::clamp(t, 0.0, 1.0)};
}

namespace {

// Cell sizes filling `length` next to a neighbour of size `h0`, growing by
// `growth` up to `cap`. The sequence is rescaled uniformly to fit exactly.
std::vector<double> grade(double length, double h0, double cap, double growth,
                          const char* axis_name) {
  std::vector<double> sizes;
  if (length <= 1e-12 * std::max(1.0, h0)) return sizes;
  double sum = 0.0;
  double s = h0;
  while (sum < length) {
    s = std::min(s * growth, std::max(cap, h0));
    sizes.push_back(s);
    sum += s;
  }
  // Candidate A keeps all cells and shrinks them, so no cell exceeds the cap;
  // candidate B drops the last cell and stretches the rest, used only when A
  // would break the ratio to the neighbour.
  struct Candidate {
    std::size_t count;
    double scale;
  };
  std::vector<Candidate> candidates{{sizes.size(), length / sum}};
  if (sizes.size() > 1) candidates.push_back({sizes.size() - 1, length / (sum - sizes.back())});
  std::optional<Candidate> best;
  for (const Candidate& c : candidates) {
    const double first_ratio = sizes.front() * c.scale / h0;
    if (first_ratio > kMaxCellRatio || first_ratio < 1.0 / kMaxCellRatio) continue;
    if (!best) best = c;
  }
  if (!best) {
    std::ostringstream msg;
    msg << "grid " << axis_name << ": region of length " << length
        << " mm next to the refinement band cannot be graded from " << h0
        << " mm with adjacent-cell ratio <= " << kMaxCellRatio;
    throw InvalidInput(msg.str());
  }
  sizes.resize(best->count);
  for (double& v : sizes) v *= best->scale;
  return sizes;
}

}  // namespace

std::vector<double> build_axis(double lo, double hi, double coarse,
                               const std::optional<RefinementBand>& band, double growth,
                               const char* axis_name) {
  if (!(hi > lo)) throw InvalidInput(std::string("grid ") + axis_name + ": empty axis");
  if (!(coarse > 0.0)) throw InvalidInput(std::string("grid ") + axis_name + ": spacing must be positive");
  if (!(growth > 1.0 && growth <= kMaxCellRatio)) {
    throw InvalidInput(std::string("grid ") + axis_name + ": growth must lie in (1, 1.5]");
  }
  const double length = hi - lo;
  std::vector<double> nodes;

  const auto uniform = [](double a, double b, double h) {
    const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil((b - a) / h - 1e-9)));
    std::vector<double> sizes(n, (b - a) / static_cast<double>(n));
    return sizes;
  };

  std::vector<double> sizes;
  if (!band || band->spacing >= coarse) {
    sizes = uniform(lo, hi, coarse);
  } else {
    if (!(band->spacing > 0.0)) {
      throw InvalidInput(std::string("grid ") + axis_name + ": band spacing must be positive");
    }
    const double tol = 1e-12 * length;
    if (band->lo < lo - tol || band->hi > hi + tol || !(band->hi > band->lo)) {
      throw InvalidInput(std::string("grid ") + axis_name + ": refinement band must lie inside the domain");
    }
    const double b0 = std::max(band->lo, lo);
    const double b1 = std::min(band->hi, hi);
    const std::vector<double> core = uniform(b0, b1, band->spacing);
    const double h = core.front();
    std::vector<double> left = grade(b0 - lo, h, coarse, growth, axis_name);
    const std::vector<double> right = grade(hi - b1, h, coarse, growth, axis_name);
    std::reverse(left.begin(), left.end());
    sizes = left;
    sizes.insert(sizes.end(), core.begin(), core.end());
    sizes.insert(sizes.end(), right.begin(), right.end());
  }
  if (sizes.size() < 2) {
    throw InvalidInput(std::string("grid ") + axis_name + ": axis resolves to a single cell");
  }
  nodes.reserve(sizes.size() + 1);
  nodes.push_back(lo);
  for (double s : sizes) nodes.push_back(nodes.back() + s);
  nodes.back() = hi;
  return nodes;
}

std::shared_ptr<const GradedGrid> build_grid(const GridSpec& spec) {
  spec.domain.validate();
  static constexpr const char* names[3] = {"x", "y", "z"};
  std::array<std::vector<double>, 3> coords;
  for (int a = 0; a < 3; ++a) {
    coords[a] = build_axis(spec.domain.lo(a), spec.domain.hi(a), spec.coarse_spacing,
                           spec.bands[a], spec.growth, names[a]);
  }
  return std::make_shared<const GradedGrid>(std::move(coords), spec);
}

TemperatureField::TemperatureField(std::shared_ptr<const GradedGrid> g, double initial, double t)
    : grid(std::move(g)), values(grid->node_count(), initial), time(t) {}

void TemperatureField::validate() const {
  if (!grid) throw InvalidInput("temperature field: missing grid");
  if (values.size() != grid->node_count()) {
    throw InvalidInput("temperature field: value count does not match the grid");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw InvalidInput("temperature field: non-finite value");
  }
}

double interpolate(const TemperatureField& field, Point3 p) {
  const GradedGrid& g = *field.grid;
  if (!g.contains(p)) {
    std::ostringstream msg;
    msg << "interpolate: point (" << p.x << ", " << p.y << ", " << p.z << ") is outside the domain";
    throw InvalidInput(msg.str());
  }
  const auto [i, u] = g.locate(0, p.x);
  const auto [j, v] = g.locate(1, p.y);
  const auto [k, w] = g.locate(2, p.z);
  const std::size_t sx = 1;
  const std::size_t sy = g.nodes(0);
  const std::size_t sz = g.nodes(0) * g.nodes(1);
  const double* c = &field.values[g.index(i, j, k)];
  // Convex weights keep nodal values exact at u, v, w in {0, 1}.
  const double iu = 1.0 - u;
  const double iv = 1.0 - v;
  const double c00 = iu * c[0] + u * c[sx];
  const double c10 = iu * c[sy] + u * c[sy + sx];
  const double c01 = iu * c[sz] + u * c[sz + sx];
  const double c11 = iu * c[sz + sy] + u * c[sz + sy + sx];
  const double c0 = iv * c00 + v * c10;
  const double c1 = iv * c01 + v * c11;
  return (1.0 - w) * c0 + w * c1;
}

void write_vtk(const std::filesystem::path& path, const TemperatureField& field) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  const GradedGrid& g = *field.grid;
  out << "# vtk DataFile Version 3.0\n"
      << "temperature t=" << field.time << "\n"
      << "ASCII\nDATASET STRUCTURED_GRID\n"
      << "DIMENSIONS " << g.nodes(0) << ' ' << g.nodes(1) << ' ' << g.nodes(2) << '\n'
      << "POINTS " << g.node_count() << " double\n";
  out.precision(9);
  for (std::size_t k = 0; k < g.nodes(2); ++k) {
    for (std::size_t j = 0; j < g.nodes(1); ++j) {
      for (std::size_t i = 0; i < g.nodes(0); ++i) {
        out << g.coords(0)[i] << ' ' << g.coords(1)[j] << ' ' << g.coords(2)[k] << '\n';
      }
    }
  }
  out << "POINT_DATA " << g.node_count() << "\nSCALARS temperature double 1\n"
      << "LOOKUP_TABLE default\n";
  out.precision(10);
  for (double v : field.values) out << v << '\n';
}

void write_samples_csv(const std::filesystem::path& path, const TemperatureField& field,
                       std::span<const Point3> points) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << "x,y,z,temperature\n";
  out.precision(12);
  for (const Point3& p : points) {
    out << p.x << ',' << p.y << ',' << p.z << ',' << interpolate(field, p) << '\n';
  }
}

}  // namespace meltpool
