#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace meltpool {

/// Plate domain. Axis convention: x transverse, y depth, z along the scan.
/// x spans [-width/2, width/2], y spans [-depth, 0] with the top surface at
/// y = 0, and z spans [0, length].
struct DomainBox {
  double width = 2.0;   // mm
  double depth = 1.0;   // mm
  double length = 4.0;  // mm

  void validate() const;
  double lo(int axis) const;
  double hi(int axis) const;
};

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
};

/// Region of one axis meshed uniformly at a spacing no larger than `spacing`.
struct RefinementBand {
  double lo = 0.0;
  double hi = 0.0;
  double spacing = 0.0125;
};

struct GridSpec {
  DomainBox domain;
  double coarse_spacing = 0.2;                        // mm
  std::array<std::optional<RefinementBand>, 3> bands;  // per axis
  double growth = 1.3;                                // target ratio outside bands
};

/// Largest allowed size ratio between neighbouring cells.
inline constexpr double kMaxCellRatio = 1.5;

/// Tensor-product grid with per-axis sorted node coordinates.
class GradedGrid {
 public:
  GradedGrid(std::array<std::vector<double>, 3> coords, GridSpec spec);

  const std::vector<double>& coords(int axis) const { return coords_[axis]; }
  std::size_t nodes(int axis) const { return coords_[axis].size(); }
  std::size_t cells(int axis) const { return coords_[axis].size() - 1; }
  std::size_t node_count() const { return nodes(0) * nodes(1) * nodes(2); }
  std::size_t cell_count() const { return cells(0) * cells(1) * cells(2); }

  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
    return i + nodes(0) * (j + nodes(1) * k);
  }
  Point3 node(std::size_t i, std::size_t j, std::size_t k) const {
    return {coords_[0][i], coords_[1][j], coords_[2][k]};
  }

  double min_spacing(int axis) const;
  double min_spacing() const;
  const GridSpec& spec() const { return spec_; }
  bool contains(Point3 p) const;

  /// Cell containing `value` along `axis` and the local coordinate in [0, 1].
  /// Requires the value to lie within the axis range.
  std::pair<std::size_t, double> locate(int axis, double value) const;

 private:
  std::array<std::vector<double>, 3> coords_;
  GridSpec spec_;
};

/// Node coordinates along one axis. Throws InvalidInput when the grading is
/// infeasible or the axis would have fewer than two cells.
std::vector<double> build_axis(double lo, double hi, double coarse,
                               const std::optional<RefinementBand>& band, double growth,
                               const char* axis_name = "axis");

std::shared_ptr<const GradedGrid> build_grid(const GridSpec& spec);

/// Nodal temperatures on a grid at one instant.
struct TemperatureField {
  std::shared_ptr<const GradedGrid> grid;
  std::vector<double> values;  // degC, one per node
  double time = 0.0;           // s

  TemperatureField() = default;
  TemperatureField(std::shared_ptr<const GradedGrid> g, double initial, double t = 0.0);

  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return values[grid->index(i, j, k)];
  }
  void validate() const;
};

/// Trilinear interpolation inside the containing cell; throws for points
/// outside the domain.
double interpolate(const TemperatureField& field, Point3 p);

/// Legacy ASCII VTK structured grid with a `temperature` point array.
void write_vtk(const std::filesystem::path& path, const TemperatureField& field);

/// CSV `x,y,z,temperature` rows for the given sample points.
void write_samples_csv(const std::filesystem::path& path, const TemperatureField& field,
                       std::span<const Point3> points);

}  // namespace meltpool
