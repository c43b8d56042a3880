#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <vector>

namespace meltpool {

// Unit system throughout: mm, s, W, kg, degC.

enum class Extrapolation { HoldLast, LinearExtend };

struct Knot {
  double temperature;  // degC
  double value;
};

/// Piecewise-linear property curve over temperature.
///
/// Knot temperatures must be strictly increasing (at least two knots). Outside
/// the knot range the curve either holds the end value or continues the slope
/// of the end segment, on both sides.
class PropertyCurve {
 public:
  PropertyCurve() = default;
  explicit PropertyCurve(std::vector<Knot> knots,
                         Extrapolation policy = Extrapolation::HoldLast);

  /// Constant curve, useful for verification problems.
  static PropertyCurve constant(double value);

  double value(double T) const;
  double slope(double T) const;

  /// Integral of the curve from the first knot temperature to T.
  double antiderivative(double T) const;

  const std::vector<Knot>& knots() const { return knots_; }
  Extrapolation policy() const { return policy_; }
  double min_value() const;

 private:
  std::size_t segment(double T) const;

  std::vector<Knot> knots_;
  std::vector<double> cumulative_;  // antiderivative at each knot
  Extrapolation policy_ = Extrapolation::HoldLast;
};

/// Reads a two-column CSV (temperature degC, value) with a one-line header.
PropertyCurve load_property_curve(const std::filesystem::path& path,
                                  Extrapolation policy = Extrapolation::HoldLast);

/// Regularized solid-to-liquid transition between solidus and liquidus.
struct PhaseChangeModel {
  double solidus = 1290.0;   // degC
  double liquidus = 1350.0;  // degC
  double sharpness = 3.0;    // dimensionless S

  void validate() const;
};

/// Liquid fraction in [0, 1]: 1/2 [tanh(2S/(Tl-Ts) (T - (Ts+Tl)/2)) + 1].
double phase_fraction(const PhaseChangeModel& pc, double T);
double phase_fraction_derivative(const PhaseChangeModel& pc, double T);

/// Per-axis conductivity scaling that ramps linearly from 1 at `ramp_start`
/// to `theta[i]` at `ramp_end`.
///
/// Axis order is (scan direction, in-plane transverse, depth); the solver maps
/// these onto grid axes.
struct AnisotropyModel {
  double ramp_start = 871.0;   // last measured conductivity temperature
  double ramp_end = 1290.0;    // fully scaled at the solidus by default
  std::array<double, 3> theta = {1.0, 1.0, 1.0};

  void validate() const;
  std::array<double, 3> scaling(double T) const;
  std::array<double, 3> scaling_slope(double T) const;
};

struct MaterialModel {
  double density = 8.44e-6;      // kg/mm^3
  double latent_heat = 2.8e5;    // J/kg
  PropertyCurve conductivity;    // W/(mm degC)
  PropertyCurve heat_capacity;   // J/(kg degC)
  PhaseChangeModel phase_change;
  std::optional<AnisotropyModel> anisotropy;

  void validate() const;
};

/// Diagonal conductivity in the (scan, transverse, depth) frame.
using ConductivityTensor = std::array<double, 3>;

/// rho c(T) + rho L df/dT in J/(mm^3 degC).
double apparent_volumetric_capacity(const MaterialModel& m, double T);

ConductivityTensor conductivity_tensor(const MaterialModel& m, double T);
ConductivityTensor conductivity_tensor_slope(const MaterialModel& m, double T);

/// Volumetric enthalpy rho (int c dT + L f_pc(T)) in J/mm^3, relative to the
/// first heat-capacity knot. Its temperature derivative is the apparent capacity.
double volumetric_enthalpy(const MaterialModel& m, double T);

/// IN625 reference curves (Special Metals datasheet values up to 871 degC for
/// conductivity and 1093 degC for heat capacity). Replaceable input.
PropertyCurve in625_conductivity(Extrapolation policy = Extrapolation::HoldLast);
PropertyCurve in625_heat_capacity(Extrapolation policy = Extrapolation::HoldLast);
MaterialModel in625(Extrapolation policy = Extrapolation::HoldLast);

}  // namespace meltpool
