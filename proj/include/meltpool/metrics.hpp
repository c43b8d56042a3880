#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "meltpool/grid.hpp"
#include "meltpool/heat_source.hpp"
#include "meltpool/solver.hpp"

namespace meltpool {

/// Beam position and motion at the instant of a snapshot.
struct ScanGeometry {
  SurfacePoint beam;
  SurfacePoint direction{0.0, 1.0};
  double speed = 800.0;  // mm/s
};

ScanGeometry scan_geometry(const ScanPath& path, double time);

struct Crossing {
  double distance = 0.0;  // from the segment start, mm
  Point3 point;
  bool rising = false;  // temperature increases across the crossing in the line direction
};

/// Isotherm crossings along the segment a -> b, ordered by distance. The line
/// is sampled at `samples` uniform points plus every grid plane it crosses,
/// and each sign change is refined by bisection to `tolerance` mm.
std::vector<Crossing> isotherm_crossings(const TemperatureField& field, Point3 a, Point3 b,
                                         double T_iso, std::size_t samples = 400,
                                         double tolerance = 1e-5);

struct MetricSettings {
  double melt_isotherm = 1290.0;    // degC
  std::size_t stations = 200;       // along the pool for width and depth
  std::size_t samples_per_line = 400;
  double tolerance = 1e-5;          // bisection tolerance, mm
  int contour_subdivision = 4;      // sub-cells per grid cell edge in the cross-section

  void validate() const;
};

/// Melt-pool extents in micrometres plus where they were found.
struct PoolDimensions {
  double length = 0.0;
  double width = 0.0;
  double depth = 0.0;
  bool empty = true;
  double rear = 0.0;           // scan-line distance of the trailing edge from the beam, mm (negative behind)
  double front = 0.0;          // same for the leading edge
  double width_station = 0.0;  // signed distance from the beam of the widest cross-section, mm
  double depth_station = 0.0;  // same for the deepest cross-section
};

PoolDimensions melt_pool_dimensions(const TemperatureField& field, const ScanGeometry& scan,
                                    const MetricSettings& settings = {});

struct CoolingRateDefinition {
  double T_high = 1290.0;  // degC
  double T_low = 1000.0;   // degC; 1190 for the AMMT cases

  void validate() const;
};

/// (T_high - T_low) / dd * v, where dd is the distance on the top-surface scan
/// line between the trailing T_high crossing of the pool and the next T_low
/// crossing behind it. Throws MetricError naming a missing crossing.
double cooling_rate(const TemperatureField& field, const CoolingRateDefinition& defn,
                    const ScanGeometry& scan, const MetricSettings& settings = {});

struct MeltPoolMetrics {
  double length = 0.0;        // um
  double width = 0.0;         // um
  double depth = 0.0;         // um
  double cooling_rate = 0.0;  // degC/s, 0 for an empty pool
  double time = 0.0;          // snapshot time, s
  double melt_isotherm = 1290.0;
  bool empty = true;
};

MeltPoolMetrics measure(const TemperatureField& field, const ScanGeometry& scan,
                        const CoolingRateDefinition& defn, const MetricSettings& settings = {});

/// Snapshot nearest to `travel` mm of beam travel. Throws MetricError when that
/// snapshot has less than `min_travel` mm of travel.
const TemperatureField& quasi_steady_snapshot(const SnapshotStore& store, const ScanPath& path,
                                              double travel = 2.5, double min_travel = 2.0);

/// Point in a cross-section plane: `u` transverse (mm), `y` depth coordinate (mm, <= 0).
struct ContourPoint {
  double u = 0.0;
  double y = 0.0;
};

struct Contour {
  std::vector<ContourPoint> points;  // closed: the first point is repeated at the end
  double area() const;               // mm^2
  double width() const;              // mm
  double depth() const;              // mm, measured from the top surface
  bool empty() const { return points.empty(); }
};

/// Melt isotherm in the plane perpendicular to the scan at the given absolute
/// scan-axis coordinate (z for a scan along z, x for a scan along x), by
/// marching squares on interpolated samples. Open chains that end on the top
/// surface are closed along it. Returns the chain of largest area.
Contour cross_section_contour(const TemperatureField& field, const ScanGeometry& scan,
                              double station, double T_melt = 1290.0, int subdivision = 4);

void write_metrics_csv(const std::filesystem::path& path, std::span<const MeltPoolMetrics> rows);
void write_contour_csv(const std::filesystem::path& path, const Contour& contour);

}  // namespace meltpool
