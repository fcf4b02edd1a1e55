#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "h2ems/map2d.hpp"

namespace h2ems {

enum class ArchKind : std::uint8_t { Base, Parallel, Series, Mixed };

/// Driving mode. Series: engine on, decoupled, generator produces
/// electricity. Parallel: engine on, coupled to the wheels. Ev: engine off.
enum class Mode : std::uint8_t { Series = 1, Parallel = 2, Ev = 3 };

std::string to_string(ArchKind kind);
ArchKind arch_kind_from_string(const std::string& name);

/// Seven-speed gearbox with speed-encoded gear selection: gear i is engaged
/// while v < upshift_speeds[i-1], the last gear above all thresholds.
struct GearTable {
  std::vector<double> ratios;
  std::vector<double> upshift_speeds;  // m/s, size ratios.size() - 1

  int gear_for(double v) const {
    for (std::size_t i = 0; i < upshift_speeds.size(); ++i)
      if (v < upshift_speeds[i]) return static_cast<int>(i) + 1;
    return static_cast<int>(ratios.size());
  }
  double ratio(int gear) const { return ratios.at(static_cast<std::size_t>(gear) - 1); }
};

struct ArchitectureSpec {
  ArchKind kind = ArchKind::Base;

  double m_base = 1300.0;  // kg
  double m_elec = 0.0;     // kg, additional electric equipment

  double r_w = 0.3;  // wheel radius, m

  // Resistive force c0 + c1 v + c2 v^2 (zero at standstill).
  double c0 = 132.0;
  double c1 = 0.0;
  double c2 = 0.7121;

  double gamma_fd = 3.2;
  double gamma_mot = 2.6;
  double gamma_gen = 1.6;
  double gamma_e_mix = 0.83662;
  GearTable gearbox;  // base/parallel only

  double eta_fd = 0.97;
  double eta_gb_mot = 0.96;
  double eta_gb_gen = 0.96;
  double eta_gb_e = 0.96;

  std::vector<Mode> allowed_modes;

  double total_mass() const { return m_base + m_elec; }
  bool has_motor() const { return kind != ArchKind::Base; }
  bool has_generator() const {
    return kind == ArchKind::Series || kind == ArchKind::Mixed;
  }
  bool has_battery() const { return kind != ArchKind::Base; }
  bool uses_gearbox() const {
    return kind == ArchKind::Base || kind == ArchKind::Parallel;
  }
  bool mode_allowed(Mode m) const {
    for (Mode a : allowed_modes)
      if (a == m) return true;
    return false;
  }
  /// Engine transmission ratio from the torque-split node; gear is 1-based
  /// and ignored for series/mixed.
  double engine_ratio(int gear) const {
    return uses_gearbox() ? gearbox.ratio(gear) : gamma_e_mix;
  }

  static ArchitectureSpec make(ArchKind kind);
};

/// Thevenin battery with V_oc linear in SoC.
struct BatterySpec {
  double q_max = 11.0 * 3.6e6 / 230.0;  // coulomb, from 11 kWh at 230 V
  double r_i = 0.05;                    // ohm
  double alpha_bat = 50.0;              // V per unit SoC
  double beta_bat = 200.0;              // V
  double p_aux = 300.0;                 // W, constant auxiliary draw
  double soc_min = 0.3;
  double soc_max = 0.9;

  double v_oc(double soc) const { return alpha_bat * soc + beta_bat; }
};

/// One realization of the control vector [T_gen, omega_gen, q, M].
/// When engine_torque is set (parallel mode) it overrides q as the
/// authoritative engine-shaft torque and q is derived for reporting.
struct ControlDecision {
  Mode mode = Mode::Ev;
  double q = 1.0;
  double t_gen = 0.0;      // N*m, negative when absorbing engine torque
  double omega_gen = 0.0;  // rad/s, free only in series mode
  int gear = 0;            // 1-based, base/parallel only (0 = from speed table)
  bool has_engine_torque = false;
  double engine_torque = 0.0;  // N*m at the engine shaft
};

enum class InfeasibleReason : std::uint8_t {
  None,
  ModeNotAllowed,
  EngineSpeedRange,
  ComponentLimit,
  BatteryPowerLimit,
  MapRange,
  InvalidControl,
};

struct StageOutcome {
  bool feasible = false;
  InfeasibleReason reason = InfeasibleReason::None;

  double mdot_fuel = 0.0;  // kg/s
  double mdot_nox = 0.0;   // mg/s
  double soc_rate = 0.0;   // 1/s
  double p_batt = 0.0;     // W, positive = discharging
  double i_batt = 0.0;     // A

  bool engine_on = false;
  double omega_e = 0.0, t_e = 0.0;
  double omega_mot = 0.0, t_mot = 0.0;
  double omega_gen = 0.0, t_gen = 0.0;
  double t_brake_wheel = 0.0;  // N*m at the wheel, always <= 0
  double t_req = 0.0;          // N*m at the wheel
  double q = 1.0;
  Mode mode = Mode::Ev;
  int gear = 0;
};

struct Speeds {
  double omega_w = 0.0, omega_mot = 0.0, omega_e = 0.0, omega_gen = 0.0;
};

struct EngineSpeedRange : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ComponentLimit : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BatteryPowerLimit : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Wheel torque request from drag, grade and inertia. Drag is zero at
/// standstill.
double torque_request(const ArchitectureSpec& spec, double v, double a, double grade);

/// Component speeds for a control; throws EngineSpeedRange when the engine
/// would leave [omega_min, omega_max] (infeasible control). Below idle in
/// parallel mode the engine is held at idle (launch clutch slip).
Speeds rotational_speeds(const ArchitectureSpec& spec, const EngineLimits& limits,
                         double v, const ControlDecision& u);

struct TorqueSplit {
  double t_mot = 0.0;    // N*m at the motor shaft
  double t_e_req = 0.0;  // N*m requested from the engine-generator unit
  double t_e = 0.0;      // N*m the engine has to deliver
  double t_gen = 0.0;    // N*m at the generator shaft
};

/// Torque split for a validated control; throws ComponentLimit when a
/// component torque curve is exceeded.
TorqueSplit split_torque(const ArchitectureSpec& spec, const MapSet& maps,
                         double t_req, double v, const ControlDecision& u);

struct ElectricPathResult {
  double p_b = 0.0;      // W at the battery terminals
  double i_b = 0.0;      // A
  double soc_rate = 0.0; // 1/s
};

/// Battery power, current and SoC rate for given machine operating points;
/// throws BatteryPowerLimit when the discharge demand exceeds the battery
/// capability (negative discriminant).
ElectricPathResult electric_path(const MapSet& maps, const BatterySpec& battery,
                                 double soc, double t_mot, double omega_mot,
                                 double t_gen, double omega_gen);

/// Evaluates one (state, control, step) triple. Never throws; infeasible
/// controls are reported through the flag for optimizer throughput.
StageOutcome evaluate_stage(const ArchitectureSpec& spec, const MapSet& maps,
                            const BatterySpec& battery, double soc, double v,
                            double a, double grade, const ControlDecision& u);

namespace detail {

/// SoC-independent part of a stage evaluation (everything but the battery
/// conversion). p_batt is the terminal power demand handed to the battery.
struct MechStage {
  bool feasible = false;
  InfeasibleReason reason = InfeasibleReason::None;
  StageOutcome outcome;  // battery fields left zero
};

MechStage evaluate_mechanical(const ArchitectureSpec& spec, const MapSet& maps,
                              double p_aux, double v, double a, double grade,
                              const ControlDecision& u);

/// Closed-form Thevenin step: current and SoC rate for a terminal power.
/// Returns false when the discriminant is negative.
bool battery_step(const BatterySpec& battery, double soc, double p_b, double& i_b,
                  double& soc_rate);

}  // namespace detail

}  // namespace h2ems
