#include "meltpool/material.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "meltpool/error.hpp"

namespace meltpool {

PropertyCurve::PropertyCurve(std::vector<Knot> knots, Extrapolation policy)
    : knots_(std::move(knots)), policy_(policy) {
  if (knots_.size() < 2) {
    throw InvalidInput("property curve needs at least two knots");
  }
  for (std::size_t i = 0; i < knots_.size(); ++i) {
    if (!std::isfinite(knots_[i].temperature) || !std::isfinite(knots_[i].value)) {
      throw InvalidInput("property curve knots must be finite");
    }
    if (i > 0 && !(knots_[i].temperature > knots_[i - 1].temperature)) {
      throw InvalidInput("property curve knot temperatures must be strictly increasing");
    }
  }
  cumulative_.assign(knots_.size(), 0.0);
  for (std::size_t i = 1; i < knots_.size(); ++i) {
    const double dT = knots_[i].temperature - knots_[i - 1].temperature;
    cumulative_[i] = cumulative_[i - 1] + 0.5 * dT * (knots_[i].value + knots_[i - 1].value);
  }
}

PropertyCurve PropertyCurve::constant(double value) {
  return PropertyCurve({{0.0, value}, {1.0, value}}, Extrapolation::HoldLast);
}

std::size_t PropertyCurve::segment(double T) const {
  // Index s of the segment [knots_[s], knots_[s+1]] containing T, clamped to
  // the end segments.
  const auto it = std::upper_bound(knots_.begin(), knots_.end(), T,
                                   [](double t, const Knot& k) { return t < k.temperature; });
  const auto idx = static_cast<std::size_t>(std::distance(knots_.begin(), it));
  if (idx == 0) return 0;
  return std::min(idx - 1, knots_.size() - 2);
}

double PropertyCurve::value(double T) const {
  const Knot& first = knots_.front();
  const Knot& last = knots_.back();
  if (policy_ == Extrapolation::HoldLast) {
    if (T <= first.temperature) return first.value;
    if (T >= last.temperature) return last.value;
  }
  const std::size_t s = segment(T);
  const Knot& a = knots_[s];
  const Knot& b = knots_[s + 1];
  if (T == a.temperature) return a.value;
  if (T == b.temperature) return b.value;
  const double w = (T - a.temperature) / (b.temperature - a.temperature);
  return a.value + w * (b.value - a.value);
}

double PropertyCurve::slope(double T) const {
  if (policy_ == Extrapolation::HoldLast &&
      (T < knots_.front().temperature || T > knots_.back().temperature)) {
    return 0.0;
  }
  const std::size_t s = segment(T);
  const Knot& a = knots_[s];
  const Knot& b = knots_[s + 1];
  return (b.value - a.value) / (b.temperature - a.temperature);
}

double PropertyCurve::antiderivative(double T) const {
  const Knot& first = knots_.front();
  const Knot& last = knots_.back();
  if (policy_ == Extrapolation::HoldLast) {
    if (T <= first.temperature) return first.value * (T - first.temperature);
    if (T >= last.temperature) return cumulative_.back() + last.value * (T - last.temperature);
  }
  const std::size_t s = segment(T);
  const Knot& a = knots_[s];
  const double m = (knots_[s + 1].value - a.value) / (knots_[s + 1].temperature - a.temperature);
  const double d = T - a.temperature;
  return cumulative_[s] + d * (a.value + 0.5 * m * d);
}

double PropertyCurve::min_value() const {
  double lo = knots_.front().value;
  for (const Knot& k : knots_) lo = std::min(lo, k.value);
  return lo;
}

PropertyCurve load_property_curve(const std::filesystem::path& path, Extrapolation policy) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open property curve file " + path.string());
  std::string line;
  std::getline(in, line);  // header
  std::vector<Knot> knots;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    Knot k{};
    if (!(fields >> k.temperature >> k.value)) {
      throw InvalidInput(path.string() + ":" + std::to_string(line_no) +
                         ": expected two numeric columns");
    }
    knots.push_back(k);
  }
  return PropertyCurve(std::move(knots), policy);
}

void PhaseChangeModel::validate() const {
  if (!(solidus < liquidus)) throw InvalidInput("phase change: solidus must be below liquidus");
  if (!(sharpness > 0.0)) throw InvalidInput("phase change: sharpness must be positive");
}

double phase_fraction(const PhaseChangeModel& pc, double T) {
  const double mid = 0.5 * (pc.solidus + pc.liquidus);
  const double scale = 2.0 * pc.sharpness / (pc.liquidus - pc.solidus);
  const double f = 0.5 * (std::tanh(scale * (T - mid)) + 1.0);
  return std::clamp(f, 0.0, 1.0);
}

double phase_fraction_derivative(const PhaseChangeModel& pc, double T) {
  const double mid = 0.5 * (pc.solidus + pc.liquidus);
  const double scale = 2.0 * pc.sharpness / (pc.liquidus - pc.solidus);
  const double th = std::tanh(scale * (T - mid));
  return 0.5 * scale * (1.0 - th * th);
}

void AnisotropyModel::validate() const {
  for (double t : theta) {
    if (!(t > 0.0) || !std::isfinite(t)) throw InvalidInput("anisotropy: theta must be positive");
  }
  if (!(ramp_start < ramp_end)) {
    throw InvalidInput("anisotropy: ramp start must be below ramp end");
  }
}

std::array<double, 3> AnisotropyModel::scaling(double T) const {
  if (T <= ramp_start) return {1.0, 1.0, 1.0};
  if (T >= ramp_end) return theta;
  const double w = (T - ramp_start) / (ramp_end - ramp_start);
  return {1.0 + w * (theta[0] - 1.0), 1.0 + w * (theta[1] - 1.0), 1.0 + w * (theta[2] - 1.0)};
}

std::array<double, 3> AnisotropyModel::scaling_slope(double T) const {
  if (T <= ramp_start || T >= ramp_end) return {0.0, 0.0, 0.0};
  const double inv = 1.0 / (ramp_end - ramp_start);
  return {(theta[0] - 1.0) * inv, (theta[1] - 1.0) * inv, (theta[2] - 1.0) * inv};
}

void MaterialModel::validate() const {
  if (!(density > 0.0)) throw InvalidInput("material: density must be positive");
  if (!(latent_heat >= 0.0)) throw InvalidInput("material: latent heat must be nonnegative");
  if (conductivity.knots().empty() || heat_capacity.knots().empty()) {
    throw InvalidInput("material: conductivity and heat capacity curves are required");
  }
  if (!(conductivity.min_value() > 0.0) || !(heat_capacity.min_value() > 0.0)) {
    throw InvalidInput("material: curve values must be positive");
  }
  // A linearly extended curve may still turn negative far outside its knots.
  for (const auto* curve : {&conductivity, &heat_capacity}) {
    if (curve->policy() == Extrapolation::LinearExtend &&
        (curve->value(-273.15) <= 0.0 || curve->value(5000.0) <= 0.0)) {
      throw InvalidInput("material: linear extension makes a curve nonpositive in [-273, 5000] degC");
    }
  }
  phase_change.validate();
  if (anisotropy) anisotropy->validate();
}

double apparent_volumetric_capacity(const MaterialModel& m, double T) {
  return m.density * m.heat_capacity.value(T) +
         m.density * m.latent_heat * phase_fraction_derivative(m.phase_change, T);
}

ConductivityTensor conductivity_tensor(const MaterialModel& m, double T) {
  const double k = m.conductivity.value(T);
  if (!m.anisotropy) return {k, k, k};
  const auto s = m.anisotropy->scaling(T);
  return {k * s[0], k * s[1], k * s[2]};
}

ConductivityTensor conductivity_tensor_slope(const MaterialModel& m, double T) {
  const double dk = m.conductivity.slope(T);
  if (!m.anisotropy) return {dk, dk, dk};
  const double k = m.conductivity.value(T);
  const auto s = m.anisotropy->scaling(T);
  const auto ds = m.anisotropy->scaling_slope(T);
  return {dk * s[0] + k * ds[0], dk * s[1] + k * ds[1], dk * s[2] + k * ds[2]};
}

double volumetric_enthalpy(const MaterialModel& m, double T) {
  return m.density * (m.heat_capacity.antiderivative(T) +
                      m.latent_heat * phase_fraction(m.phase_change, T));
}

PropertyCurve in625_conductivity(Extrapolation policy) {
  // W/(m degC) from the datasheet, converted to W/(mm degC).
  const std::vector<Knot> per_metre = {{21, 9.8},   {38, 10.1},  {93, 10.8},  {204, 12.5},
                                       {316, 14.1}, {427, 15.7}, {538, 17.5}, {649, 19.0},
                                       {760, 20.8}, {871, 22.8}};
  std::vector<Knot> knots;
  knots.reserve(per_metre.size());
  for (const Knot& k : per_metre) knots.push_back({k.temperature, k.value * 1e-3});
  return PropertyCurve(std::move(knots), policy);
}

PropertyCurve in625_heat_capacity(Extrapolation policy) {
  return PropertyCurve({{21, 410},
                        {93, 427},
                        {204, 456},
                        {316, 481},
                        {427, 511},
                        {538, 536},
                        {649, 565},
                        {760, 590},
                        {871, 620},
                        {982, 645},
                        {1093, 670}},
                       policy);
}

MaterialModel in625(Extrapolation policy) {
  MaterialModel m;
  m.density = 8.44e-6;
  m.latent_heat = 2.8e5;
  m.conductivity = in625_conductivity(policy);
  m.heat_capacity = in625_heat_capacity(policy);
  m.phase_change = PhaseChangeModel{1290.0, 1350.0, 3.0};
  return m;
}

}  // namespace meltpool
