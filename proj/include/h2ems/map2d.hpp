#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace h2ems {

/// Lower heating value of hydrogen, used to convert fuel-rate maps to
/// efficiency contours.
constexpr double kHydrogenLhvJPerKg = 120.0e6;

struct InvalidCalibration : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class MapKind : std::uint8_t { EngineFuel, EngineNox, MotorLoss, GeneratorLoss };

std::string to_string(MapKind kind);
MapKind map_kind_from_string(const std::string& name);

/// Gridded 2-D component characteristic (speed x torque -> rate or loss).
/// Immutable after construction; lookup is pure and safe under concurrent reads.
class ComponentMap2D {
 public:
  ComponentMap2D(MapKind kind, std::vector<double> speed_axis,
                 std::vector<double> torque_axis, std::vector<double> values);

  MapKind kind() const { return kind_; }
  const std::vector<double>& speed_axis() const { return speed_; }
  const std::vector<double>& torque_axis() const { return torque_; }

  /// Node value at (torque row, speed column).
  double at(std::size_t torque_idx, std::size_t speed_idx) const {
    return values_[torque_idx * speed_.size() + speed_idx];
  }

  bool in_range(double omega, double torque) const {
    return omega >= speed_.front() && omega <= speed_.back() &&
           torque >= torque_.front() && torque <= torque_.back();
  }

  /// Bilinear interpolation; exact on grid nodes. Returns nullopt outside the
  /// bounding box (callers treat such controls as infeasible, never clamped).
  std::optional<double> lookup(double omega, double torque) const;

 private:
  MapKind kind_;
  std::vector<double> speed_;
  std::vector<double> torque_;
  std::vector<double> values_;  // row-major, one row per torque node
};

/// Per-speed linear interpolation over a sampled curve.
double interp_curve(const std::vector<double>& x, const std::vector<double>& y, double xi);

struct EngineLimits {
  double omega_min = 0.0;  // idle, rad/s
  double omega_max = 0.0;  // rad/s
  std::vector<double> speed_axis;
  std::vector<double> torque_max_curve;    // N*m per speed node
  std::vector<double> ultra_lean_isoline;  // N*m per speed node

  double max_torque(double omega) const {
    return interp_curve(speed_axis, torque_max_curve, omega);
  }
  double isoline_torque(double omega) const {
    return interp_curve(speed_axis, ultra_lean_isoline, omega);
  }
};

struct MachineLimits {
  double omega_max = 0.0;
  std::vector<double> speed_axis;
  std::vector<double> torque_max_curve;  // symmetric limit, N*m

  double max_torque(double omega) const {
    return interp_curve(speed_axis, torque_max_curve, omega);
  }
};

/// Calibration parameters for the synthetic engine maps. The published study
/// only anchors a handful of numbers (163 kW rated power, sub-2 mg/s
/// ultra-lean NOx, efficiency droop above ~230 rad/s, poor efficiency below
/// ~45 N*m); everything else here is a documented calibration choice.
struct EngineMapParams {
  double rated_power_w = 163.0e3;
  double peak_torque_nm = 330.0;
  double omega_min = 80.0;
  double omega_max = 600.0;
  double speed_step = 10.0;
  double torque_step = 6.0;

  // Willans-type indicated efficiency e(omega) with droop on both ends.
  double peak_indicated_efficiency = 0.48;
  double low_speed_knee = 140.0;
  double high_speed_knee = 230.0;
  double low_speed_droop = 1.0e-5;   // per (rad/s)^2 below the low knee
  double high_speed_droop = 1.3e-6;  // per (rad/s)^2 above the high knee

  // Friction torque, defines the idle fuel floor and low-load inefficiency.
  double friction_torque_nm = 18.0;
  double friction_torque_slope = 0.015;  // N*m per rad/s

  // NOx model: sextic floor below the ultra-lean isoline, quadratic blow-up
  // above it.
  double lean_floor_mg_s = 0.02;
  double lean_rise_mg_s = 1.78;  // floor + rise = value reached at the isoline
  double isoline_base_nm = 100.0;
  double isoline_knee = 150.0;     // rad/s
  double isoline_slope = -0.14;    // N*m per rad/s beyond the knee
  double steep_gain_mg_s = 400.0;  // added over the remaining torque range
};

struct EngineMaps {
  ComponentMap2D fuel;  // kg/s
  ComponentMap2D nox;   // mg/s
  EngineLimits limits;
};

/// Parametric stand-in for the unpublished test-bench maps.
/// Throws InvalidCalibration when rated power cannot lie on the torque curve.
EngineMaps synthesize_engine_maps(const EngineMapParams& params = {});

struct MachineMaps {
  ComponentMap2D motor_loss;      // W
  ComponentMap2D generator_loss;  // W, identical map (same make and model)
  MachineLimits limits;
};

/// Electric machine loss maps: quadratic in torque plus a speed-dependent
/// term, symmetric in torque sign. Motor and generator share one model.
MachineMaps synthesize_machine_maps(double rated_power_w = 173.0e3);

/// All component characteristics one drivetrain evaluation needs.
struct MapSet {
  EngineMaps engine;
  MachineMaps machine;
};

MapSet synthesize_default_maps();

// CSV map files: header rows `# kind`, `# speed_axis`, `# torque_axis`, then
// the value matrix row-per-torque. 17 significant digits; bit-exact round trip.
void write_map_csv(const ComponentMap2D& map, const std::string& path);
ComponentMap2D read_map_csv(const std::string& path);

void write_engine_limits_csv(const EngineLimits& limits, const std::string& path);
EngineLimits read_engine_limits_csv(const std::string& path);

/// Writes/reads the full map set into a directory (fixed file names).
void write_map_dir(const MapSet& maps, const std::string& dir);
MapSet read_map_dir(const std::string& dir);

}  // namespace h2ems
