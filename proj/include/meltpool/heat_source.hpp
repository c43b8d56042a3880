#pragma once

#include <filesystem>
#include <utility>
#include <variant>
#include <vector>

namespace meltpool {

/// Point on the top surface (y = 0): x transverse, z along the nominal scan axis.
struct SurfacePoint {
  double x = 0.0;  // mm
  double z = 0.0;  // mm
};

/// Straight laser track on the top surface.
struct ScanPath {
  SurfacePoint start;
  SurfacePoint direction{0.0, 1.0};  // unit vector in the (x, z) plane
  double speed = 800.0;              // mm/s
  double start_time = 0.0;           // s
  double length = 3.0;               // mm

  void validate() const;
  double end_time() const { return start_time + length / speed; }
};

struct BeamState {
  SurfacePoint center;
  bool active = true;  // false once the beam has travelled the full length
};

/// Beam position at time t; the position is capped at the path end and the
/// source is reported inactive from there on. Throws for t before the start.
BeamState beam_center(const ScanPath& path, double t);

/// Double-elliptical surface flux with separate front and rear quadrants.
struct GoldakSpec {
  double power = 195.0;        // Q, W
  double absorptivity = 0.38;  // eta
  double a = 0.05;             // transverse radius, mm
  double c_front = 0.05;       // mm
  double c_rear = 0.05;        // mm
  double f_front = 1.0;
  double f_rear = 1.0;

  void validate() const;
};

/// Splits power fractions so that f_front / f_rear == ratio and their sum is 2.
std::pair<double, double> resolve_fractions(double ratio);

/// Goldak flux in W/mm^2 at `point` for a beam at `center` moving along
/// `direction`. Points with nonnegative along-track offset use the front
/// quadrant.
double goldak_flux(const GoldakSpec& spec, SurfacePoint point, SurfacePoint center,
                   SurfacePoint direction = {0.0, 1.0});

/// Gridded beam intensity, normalized to unit trapezoidal integral and scaled
/// by power * absorptivity on evaluation. The grid is centred on the beam and
/// its axes are the lab x (columns) and z (rows) axes.
class MeasuredProfile {
 public:
  MeasuredProfile() = default;

  /// `raw` is row-major with nx values per row and ny rows; any nonnegative scale.
  MeasuredProfile(std::size_t nx, std::size_t ny, double dx, double dy, std::vector<double> raw,
                  double power, double absorptivity);

  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  double dx() const { return dx_; }
  double dy() const { return dy_; }
  double power() const { return power_; }
  double absorptivity() const { return absorptivity_; }
  void set_power(double power, double absorptivity);

  /// Half extents of the footprint along x and z.
  double half_width_x() const { return 0.5 * dx_ * static_cast<double>(nx_ - 1); }
  double half_width_z() const { return 0.5 * dy_ * static_cast<double>(ny_ - 1); }

  /// Normalized intensity (1/mm^2) at an offset from the beam centre.
  double shape(double offset_x, double offset_z) const;

  /// Trapezoidal integral of the normalized shape (1 up to rounding).
  double trapezoid_integral() const;

  const std::vector<double>& normalized() const { return shape_; }

 private:
  std::size_t nx_ = 0;
  std::size_t ny_ = 0;
  double dx_ = 0.0;
  double dy_ = 0.0;
  std::vector<double> shape_;
  double power_ = 0.0;
  double absorptivity_ = 0.0;
};

/// Bilinear interpolation of the profile around `center`; zero outside the footprint.
double measured_flux(const MeasuredProfile& profile, SurfacePoint point, SurfacePoint center);

/// Sampled circular Gaussian with the given D4sigma diameter (mm), used as a
/// stand-in when no measured profile file is available.
MeasuredProfile gaussian_profile(double d4sigma, double power, double absorptivity,
                                 double spacing = 0.0);

/// Text format: `nx ny dx dy` on the first line, then nx*ny intensities.
MeasuredProfile load_profile(const std::filesystem::path& path, double power,
                             double absorptivity);
void save_profile(const std::filesystem::path& path, const MeasuredProfile& profile);

using SourceModel = std::variant<GoldakSpec, MeasuredProfile>;

struct HeatSource {
  SourceModel model;
  ScanPath path;
};

/// Flux of either model at a point, for a beam at `center` moving along `direction`.
double surface_flux(const SourceModel& model, SurfacePoint point, SurfacePoint center,
                    SurfacePoint direction);

/// Absorbed power Q * eta of a model.
double absorbed_power(const SourceModel& model);

/// Axis-aligned footprint outside which the flux is negligible (< 1e-10 of peak),
/// given as half extents behind/ahead along z and to either side along x, for a
/// beam moving along +z or -z.
struct Footprint {
  double half_x = 0.0;
  double behind = 0.0;
  double ahead = 0.0;
  double resolution = 0.0;  // smallest length scale of the flux
};
Footprint source_footprint(const SourceModel& model);

/// Independent quadrature of the flux over the top surface, in W.
double total_power(const SourceModel& model);

}  // namespace meltpool
