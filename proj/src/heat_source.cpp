#include "meltpool/heat_source.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "meltpool/error.hpp"

namespace meltpool {

namespace {

// exp(-2 u^2) < 1e-10 beyond this many radii.
constexpr double kGoldakCutoff = 3.5;

}  // namespace

void ScanPath::validate() const {
  if (!(speed > 0.0)) throw InvalidInput("scan path: speed must be positive");
  if (!(length >= 0.0)) throw InvalidInput("scan path: length must be nonnegative");
  const double norm = std::hypot(direction.x, direction.z);
  if (std::abs(norm - 1.0) > 1e-9) throw InvalidInput("scan path: direction must be a unit vector");
}

BeamState beam_center(const ScanPath& path, double t) {
  if (t < path.start_time) throw InvalidInput("beam_center: time before scan start");
  const double travel = path.speed * (t - path.start_time);
  const bool active = travel <= path.length;
  const double s = active ? travel : path.length;
  return {{path.start.x + path.direction.x * s, path.start.z + path.direction.z * s}, active};
}

void GoldakSpec::validate() const {
  if (!(power >= 0.0)) throw InvalidInput("goldak: power must be nonnegative");
  if (!(absorptivity > 0.0 && absorptivity <= 1.0)) {
    throw InvalidInput("goldak: absorptivity must lie in (0, 1]");
  }
  if (!(a > 0.0 && c_front > 0.0 && c_rear > 0.0)) {
    throw InvalidInput("goldak: radii must be positive");
  }
  if (!(f_front > 0.0 && f_rear > 0.0)) throw InvalidInput("goldak: fractions must be positive");
  if (std::abs(f_front + f_rear - 2.0) > 1e-9) {
    throw InvalidInput("goldak: front and rear fractions must sum to 2");
  }
}

std::pair<double, double> resolve_fractions(double ratio) {
  if (!(ratio > 0.0) || !std::isfinite(ratio)) {
    throw InvalidInput("resolve_fractions: ratio must be positive and finite");
  }
  return {2.0 * ratio / (1.0 + ratio), 2.0 / (1.0 + ratio)};
}

double goldak_flux(const GoldakSpec& spec, SurfacePoint point, SurfacePoint center,
                   SurfacePoint direction) {
  const double ox = point.x - center.x;
  const double oz = point.z - center.z;
  const double along = ox * direction.x + oz * direction.z;
  const double across = -ox * direction.z + oz * direction.x;
  const bool front = along >= 0.0;
  const double f = front ? spec.f_front : spec.f_rear;
  const double c = front ? spec.c_front : spec.c_rear;
  const double absorbed = spec.power * spec.absorptivity;
  const double amplitude = 2.0 * absorbed * f / (std::numbers::pi * spec.a * c);
  return amplitude *
         std::exp(-2.0 * (along * along / (c * c) + across * across / (spec.a * spec.a)));
}

MeasuredProfile::MeasuredProfile(std::size_t nx, std::size_t ny, double dx, double dy,
                                 std::vector<double> raw, double power, double absorptivity)
    : nx_(nx), ny_(ny), dx_(dx), dy_(dy), shape_(std::move(raw)) {
  if (nx_ < 2 || ny_ < 2) throw InvalidInput("measured profile: need at least 2x2 samples");
  if (!(dx_ > 0.0 && dy_ > 0.0)) throw InvalidInput("measured profile: spacing must be positive");
  if (shape_.size() != nx_ * ny_) {
    throw InvalidInput("measured profile: expected " + std::to_string(nx_ * ny_) +
                       " intensities, got " + std::to_string(shape_.size()));
  }
  for (double v : shape_) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw InvalidInput("measured profile: intensities must be finite and nonnegative");
    }
  }
  const double integral = trapezoid_integral();
  if (!(integral > 0.0)) throw InvalidInput("measured profile: intensities are all zero");
  for (double& v : shape_) v /= integral;
  set_power(power, absorptivity);
}

void MeasuredProfile::set_power(double power, double absorptivity) {
  if (!(power >= 0.0)) throw InvalidInput("measured profile: power must be nonnegative");
  if (!(absorptivity > 0.0 && absorptivity <= 1.0)) {
    throw InvalidInput("measured profile: absorptivity must lie in (0, 1]");
  }
  power_ = power;
  absorptivity_ = absorptivity;
}

double MeasuredProfile::trapezoid_integral() const {
  double sum = 0.0;
  for (std::size_t j = 0; j < ny_; ++j) {
    const double wy = (j == 0 || j + 1 == ny_) ? 0.5 : 1.0;
    for (std::size_t i = 0; i < nx_; ++i) {
      const double wx = (i == 0 || i + 1 == nx_) ? 0.5 : 1.0;
      sum += wx * wy * shape_[j * nx_ + i];
    }
  }
  return sum * dx_ * dy_;
}

double MeasuredProfile::shape(double offset_x, double offset_z) const {
  const double u = (offset_x + half_width_x()) / dx_;
  const double v = (offset_z + half_width_z()) / dy_;
  const double umax = static_cast<double>(nx_ - 1);
  const double vmax = static_cast<double>(ny_ - 1);
  if (!(u >= 0.0 && u <= umax && v >= 0.0 && v <= vmax)) return 0.0;
  const auto i = std::min(static_cast<std::size_t>(u), nx_ - 2);
  const auto j = std::min(static_cast<std::size_t>(v), ny_ - 2);
  const double fu = u - static_cast<double>(i);
  const double fv = v - static_cast<double>(j);
  const double* row0 = &shape_[j * nx_ + i];
  const double* row1 = row0 + nx_;
  return (1.0 - fv) * ((1.0 - fu) * row0[0] + fu * row0[1]) +
         fv * ((1.0 - fu) * row1[0] + fu * row1[1]);
}

double measured_flux(const MeasuredProfile& profile, SurfacePoint point, SurfacePoint center) {
  const double absorbed = profile.power() * profile.absorptivity();
  return absorbed * profile.shape(point.x - center.x, point.z - center.z);
}

MeasuredProfile gaussian_profile(double d4sigma, double power, double absorptivity,
                                 double spacing) {
  if (!(d4sigma > 0.0)) throw InvalidInput("gaussian profile: D4sigma must be positive");
  const double sigma = 0.25 * d4sigma;
  if (spacing <= 0.0) spacing = sigma / 4.0;
  const auto half = static_cast<std::size_t>(std::ceil(6.0 * sigma / spacing));
  const std::size_t n = 2 * half + 1;
  std::vector<double> raw(n * n);
  for (std::size_t j = 0; j < n; ++j) {
    const double z = (static_cast<double>(j) - static_cast<double>(half)) * spacing;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = (static_cast<double>(i) - static_cast<double>(half)) * spacing;
      raw[j * n + i] = std::exp(-(x * x + z * z) / (2.0 * sigma * sigma));
    }
  }
  return MeasuredProfile(n, n, spacing, spacing, std::move(raw), power, absorptivity);
}

MeasuredProfile load_profile(const std::filesystem::path& path, double power,
                             double absorptivity) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open profile file " + path.string());
  std::size_t nx = 0;
  std::size_t ny = 0;
  double dx = 0.0;
  double dy = 0.0;
  if (!(in >> nx >> ny >> dx >> dy)) {
    throw InvalidInput(path.string() + ": first line must be `nx ny dx dy`");
  }
  std::vector<double> raw;
  raw.reserve(nx * ny);
  double v = 0.0;
  while (in >> v) raw.push_back(v);
  if (!in.eof()) throw InvalidInput(path.string() + ": non-numeric intensity value");
  return MeasuredProfile(nx, ny, dx, dy, std::move(raw), power, absorptivity);
}

void save_profile(const std::filesystem::path& path, const MeasuredProfile& profile) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write profile file " + path.string());
  out.precision(17);
  out << profile.nx() << ' ' << profile.ny() << ' ' << profile.dx() << ' ' << profile.dy()
      << '\n';
  const auto& v = profile.normalized();
  for (std::size_t j = 0; j < profile.ny(); ++j) {
    for (std::size_t i = 0; i < profile.nx(); ++i) {
      out << v[j * profile.nx() + i] << (i + 1 == profile.nx() ? '\n' : ' ');
    }
  }
}

double surface_flux(const SourceModel& model, SurfacePoint point, SurfacePoint center,
                    SurfacePoint direction) {
  if (const auto* g = std::get_if<GoldakSpec>(&model)) {
    return goldak_flux(*g, point, center, direction);
  }
  return measured_flux(std::get<MeasuredProfile>(model), point, center);
}

double absorbed_power(const SourceModel& model) {
  if (const auto* g = std::get_if<GoldakSpec>(&model)) return g->power * g->absorptivity;
  const auto& p = std::get<MeasuredProfile>(model);
  return p.power() * p.absorptivity();
}

Footprint source_footprint(const SourceModel& model) {
  if (const auto* g = std::get_if<GoldakSpec>(&model)) {
    return {kGoldakCutoff * g->a, kGoldakCutoff * g->c_rear, kGoldakCutoff * g->c_front,
            std::min({g->a, g->c_front, g->c_rear})};
  }
  const auto& p = std::get<MeasuredProfile>(model);
  // The grid is not rotated with the scan direction, so take the larger
  // half-extent in every direction.
  const double hx = p.half_width_x();
  const double hz = p.half_width_z();
  const double h = std::max(hx, hz);
  return {h, h, h, std::min(p.dx(), p.dy())};
}

namespace {

double trapezoid_2d(double x0, double x1, double z0, double z1, std::size_t nx,
                    std::size_t nz, const auto& f) {
  const double hx = (x1 - x0) / static_cast<double>(nx);
  const double hz = (z1 - z0) / static_cast<double>(nz);
  double sum = 0.0;
  for (std::size_t j = 0; j <= nz; ++j) {
    const double wz = (j == 0 || j == nz) ? 0.5 : 1.0;
    const double z = z0 + hz * static_cast<double>(j);
    for (std::size_t i = 0; i <= nx; ++i) {
      const double wx = (i == 0 || i == nx) ? 0.5 : 1.0;
      sum += wx * wz * f(x0 + hx * static_cast<double>(i), z);
    }
  }
  return sum * hx * hz;
}

}  // namespace

double total_power(const SourceModel& model) {
  const SurfacePoint center{0.0, 0.0};
  const SurfacePoint dir{0.0, 1.0};
  if (const auto* g = std::get_if<GoldakSpec>(&model)) {
    // Each quadrant is integrated separately so the junction discontinuity sits
    // on a grid line; 6 radii leaves a tail below 1e-31. The rear quadrant's
    // junction samples are taken just behind the centre.
    const double behind = std::nextafter(0.0, -1.0);
    const auto front = [&](double x, double z) { return goldak_flux(*g, {x, z}, center, dir); };
    const auto rear = [&](double x, double z) {
      return goldak_flux(*g, {x, std::min(z, behind)}, center, dir);
    };
    const double xr = 6.0 * g->a;
    return trapezoid_2d(-xr, xr, 0.0, 6.0 * g->c_front, 800, 800, front) +
           trapezoid_2d(-xr, xr, -6.0 * g->c_rear, 0.0, 800, 800, rear);
  }
  // The profile grid refined 4x; trapezoid is exact for the bilinear interpolant.
  const auto& p = std::get<MeasuredProfile>(model);
  const auto flux = [&](double x, double z) { return measured_flux(p, {x, z}, center); };
  const double hx = p.half_width_x();
  const double hz = p.half_width_z();
  return trapezoid_2d(-hx, hx, -hz, hz, 4 * (p.nx() - 1), 4 * (p.ny() - 1), flux);
}

}  // namespace meltpool
