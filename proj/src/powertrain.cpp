#include "h2ems/powertrain.hpp"

#include <cmath>

namespace h2ems {

namespace {

constexpr double kGravity = 9.81;
constexpr double kTorqueTol = 1e-9;

// Reflects a torque across a gear stage in the request direction (from the
// output side to the input side). Efficiency divides for positive (traction)
// torque and multiplies for negative (braking) torque.
double reflect_request(double torque, double ratio, double eta) {
  return torque >= 0.0 ? torque / (ratio * eta) : torque * eta / ratio;
}

// Reflects a delivered torque from the input side back to the output side;
// inverse of reflect_request for the same sign.
double reflect_delivered(double torque, double ratio, double eta) {
  return torque >= 0.0 ? torque * ratio * eta : torque * ratio / eta;
}

}  // namespace

std::string to_string(ArchKind kind) {
  switch (kind) {
    case ArchKind::Base: return "base";
    case ArchKind::Parallel: return "parallel";
    case ArchKind::Series: return "series";
    case ArchKind::Mixed: return "mixed";
  }
  return "?";
}

ArchKind arch_kind_from_string(const std::string& name) {
  if (name == "base") return ArchKind::Base;
  if (name == "parallel") return ArchKind::Parallel;
  if (name == "series") return ArchKind::Series;
  if (name == "mixed") return ArchKind::Mixed;
  throw ParseError("unknown architecture: " + name);
}

ArchitectureSpec ArchitectureSpec::make(ArchKind kind) {
  ArchitectureSpec spec;
  spec.kind = kind;
  spec.gearbox.ratios = {3.80, 2.60, 1.90, 1.42, 1.08, 0.85, 0.70};
  // Upshift near 310 rad/s engine speed: v_i = 310 r_w / (gamma_fd gamma_i).
  spec.gearbox.upshift_speeds = {7.64, 11.16, 15.28, 20.44, 26.88, 34.19};
  switch (kind) {
    case ArchKind::Base:
      spec.m_elec = 0.0;
      spec.allowed_modes = {Mode::Parallel};
      break;
    case ArchKind::Parallel:
      spec.m_elec = 160.0;
      spec.allowed_modes = {Mode::Parallel, Mode::Ev};
      break;
    case ArchKind::Series:
      spec.m_elec = 200.0;
      spec.allowed_modes = {Mode::Series, Mode::Ev};
      break;
    case ArchKind::Mixed:
      spec.m_elec = 200.0;
      spec.allowed_modes = {Mode::Series, Mode::Parallel, Mode::Ev};
      break;
  }
  return spec;
}

double torque_request(const ArchitectureSpec& spec, double v, double a, double grade) {
  const double drag = v > 0.0 ? spec.c0 + spec.c1 * v + spec.c2 * v * v : 0.0;
  const double m = spec.total_mass();
  const double force = drag + m * kGravity * std::sin(grade) + m * a;
  return force * spec.r_w;
}

namespace {

// Shared speed computation; returns false on engine speed range violations.
bool compute_speeds(const ArchitectureSpec& spec, const EngineLimits& limits,
                    double v, const ControlDecision& u, Speeds& s, int& gear_out) {
  s.omega_w = v / spec.r_w;
  s.omega_mot = spec.has_motor() ? s.omega_w * spec.gamma_fd * spec.gamma_mot : 0.0;
  gear_out = 0;
  switch (u.mode) {
    case Mode::Parallel: {
      const int gear =
          spec.uses_gearbox() ? (u.gear > 0 ? u.gear : spec.gearbox.gear_for(v)) : 0;
      gear_out = gear;
      const double ratio = spec.engine_ratio(gear);
      // Below idle the launch clutch slips and the engine runs at idle.
      s.omega_e = std::max(s.omega_w * spec.gamma_fd * ratio, limits.omega_min);
      if (s.omega_e > limits.omega_max) return false;
      s.omega_gen = spec.has_generator() ? s.omega_e * spec.gamma_gen : 0.0;
      return true;
    }
    case Mode::Series: {
      s.omega_gen = u.omega_gen;
      s.omega_e = u.omega_gen / spec.gamma_gen;
      return s.omega_e >= limits.omega_min - 1e-9 &&
             s.omega_e <= limits.omega_max + 1e-9;
    }
    case Mode::Ev:
      s.omega_e = 0.0;
      s.omega_gen = 0.0;
      return true;
  }
  return false;
}

}  // namespace

Speeds rotational_speeds(const ArchitectureSpec& spec, const EngineLimits& limits,
                         double v, const ControlDecision& u) {
  Speeds s;
  int gear = 0;
  if (!compute_speeds(spec, limits, v, u, s, gear))
    throw EngineSpeedRange("engine speed outside [omega_min, omega_max]");
  return s;
}

namespace detail {

bool battery_step(const BatterySpec& battery, double soc, double p_b, double& i_b,
                  double& soc_rate) {
  const double v_oc = battery.v_oc(soc);
  const double disc = v_oc * v_oc - 4.0 * battery.r_i * p_b;
  if (disc < 0.0) return false;
  i_b = (v_oc - std::sqrt(disc)) / (2.0 * battery.r_i);
  const double p_sb = p_b + battery.r_i * i_b * i_b;
  soc_rate = -p_sb / (battery.q_max * v_oc);
  return true;
}

MechStage evaluate_mechanical(const ArchitectureSpec& spec, const MapSet& maps,
                              double p_aux, double v, double a, double grade,
                              const ControlDecision& u) {
  MechStage st;
  StageOutcome& out = st.outcome;
  out.mode = u.mode;
  out.q = u.q;
  out.t_req = torque_request(spec, v, a, grade);

  auto fail = [&](InfeasibleReason r) {
    st.feasible = false;
    st.reason = r;
    out.feasible = false;
    out.reason = r;
    return st;
  };

  if (!spec.mode_allowed(u.mode)) return fail(InfeasibleReason::ModeNotAllowed);

  // Base vehicle: engine idling is prevented; negative or zero requests open
  // the clutch, shut the engine off, and use the friction brakes.
  if (spec.kind == ArchKind::Base && out.t_req <= 0.0) {
    out.t_brake_wheel = std::min(out.t_req, 0.0);
    out.feasible = true;
    st.feasible = true;
    return st;
  }

  Speeds s;
  int gear = 0;
  if (!compute_speeds(spec, maps.engine.limits, v, u, s, gear))
    return fail(InfeasibleReason::EngineSpeedRange);
  out.gear = gear;
  out.omega_e = s.omega_e;
  out.omega_mot = s.omega_mot;
  out.omega_gen = s.omega_gen;

  const double t_req_fd = reflect_request(out.t_req, spec.gamma_fd, spec.eta_fd);

  // Control invariants: q is free in parallel mode only; a positive request in
  // series/EV mode must be carried entirely by the motor (q = 1), while a
  // braking request may be shared with the friction brakes (q in [0, 1]).
  if (u.mode != Mode::Parallel) {
    if (t_req_fd > 0.0 && u.q != 1.0 && !u.has_engine_torque)
      return fail(InfeasibleReason::InvalidControl);
    if (u.q < 0.0 || u.q > 1.0) return fail(InfeasibleReason::InvalidControl);
  }
  if (u.mode == Mode::Ev && u.t_gen != 0.0)
    return fail(InfeasibleReason::InvalidControl);
  if (u.t_gen != 0.0 && !spec.has_generator())
    return fail(InfeasibleReason::InvalidControl);
  if (u.t_gen > 0.0) return fail(InfeasibleReason::InvalidControl);

  double t_mot_req_node = 0.0;
  double t_e = 0.0;
  double t_gen = u.t_gen;

  switch (u.mode) {
    case Mode::Ev:
      t_mot_req_node = u.q * t_req_fd;
      break;
    case Mode::Series:
      t_mot_req_node = (t_req_fd >= 0.0 ? 1.0 : u.q) * t_req_fd;
      if (u.has_engine_torque) {
        t_e = u.engine_torque;
        t_gen = -t_e * spec.eta_gb_gen / spec.gamma_gen;
      } else {
        t_e = -t_gen * spec.gamma_gen / spec.eta_gb_gen;
      }
      break;
    case Mode::Parallel: {
      const double gamma_e = spec.engine_ratio(gear);
      if (u.has_engine_torque) {
        t_e = u.engine_torque;
        const double t_eg_unit = t_e + t_gen * spec.gamma_gen / spec.eta_gb_gen;
        if (t_eg_unit < -kTorqueTol) return fail(InfeasibleReason::InvalidControl);
        const double t_eg_node = reflect_delivered(t_eg_unit, gamma_e, spec.eta_gb_e);
        t_mot_req_node = t_req_fd - t_eg_node;
        out.q = t_req_fd != 0.0 ? t_mot_req_node / t_req_fd : 1.0;
      } else {
        t_mot_req_node = u.q * t_req_fd;
        const double t_eg_req_node = (1.0 - u.q) * t_req_fd;
        const double t_eg_unit = reflect_request(t_eg_req_node, gamma_e, spec.eta_gb_e);
        t_e = t_eg_unit - t_gen * spec.gamma_gen / spec.eta_gb_gen;
      }
      break;
    }
  }

  // Motor branch with friction-brake slack on the regenerative side.
  double t_mot = 0.0;
  if (spec.has_motor()) {
    t_mot = reflect_request(t_mot_req_node, spec.gamma_mot, spec.eta_gb_mot);
    if (s.omega_mot > maps.machine.limits.omega_max)
      return fail(InfeasibleReason::ComponentLimit);
    const double lim = maps.machine.limits.max_torque(s.omega_mot);
    if (t_mot > lim + kTorqueTol) return fail(InfeasibleReason::ComponentLimit);
    if (t_mot < -lim) t_mot = -lim;
  } else if (std::abs(t_mot_req_node) > kTorqueTol) {
    return fail(InfeasibleReason::InvalidControl);
  }
  out.t_mot = t_mot;

  // Engine branch.
  const bool engine_on = u.mode != Mode::Ev;
  out.engine_on = engine_on;
  if (engine_on) {
    if (t_e < -kTorqueTol) return fail(InfeasibleReason::ComponentLimit);
    t_e = std::max(t_e, 0.0);
    if (t_e > maps.engine.limits.max_torque(s.omega_e) + kTorqueTol)
      return fail(InfeasibleReason::ComponentLimit);
    const auto fuel = maps.engine.fuel.lookup(s.omega_e, t_e);
    const auto nox = maps.engine.nox.lookup(s.omega_e, t_e);
    if (!fuel || !nox) return fail(InfeasibleReason::MapRange);
    out.mdot_fuel = *fuel;
    out.mdot_nox = *nox;
    out.t_e = t_e;
  }

  // Generator branch (series always, parallel only on the mixed drivetrain).
  double p_gen_s = 0.0;
  if (spec.has_generator() && engine_on) {
    const double glim = maps.machine.limits.max_torque(s.omega_gen);
    if (std::abs(t_gen) > glim + kTorqueTol)
      return fail(InfeasibleReason::ComponentLimit);
    const auto gloss = maps.machine.generator_loss.lookup(s.omega_gen, t_gen);
    if (!gloss) return fail(InfeasibleReason::MapRange);
    p_gen_s = t_gen * s.omega_gen + *gloss;
    out.t_gen = t_gen;
  }

  // Electric source power and terminal demand.
  if (spec.has_battery()) {
    double p_mot_s = 0.0;
    if (spec.has_motor()) {
      const auto mloss = maps.machine.motor_loss.lookup(s.omega_mot, t_mot);
      if (!mloss) return fail(InfeasibleReason::MapRange);
      p_mot_s = t_mot * s.omega_mot + *mloss;
    }
    out.p_batt = p_mot_s + p_gen_s + p_aux;
  }

  // Friction brakes absorb whatever negative residual the driveline leaves.
  double t_eg_node = 0.0;
  if (u.mode == Mode::Parallel) {
    const double t_eg_unit = t_e + t_gen * spec.gamma_gen / spec.eta_gb_gen;
    t_eg_node = reflect_delivered(t_eg_unit, spec.engine_ratio(gear), spec.eta_gb_e);
  }
  const double t_mot_node = reflect_delivered(t_mot, spec.gamma_mot, spec.eta_gb_mot);
  const double t_node = t_eg_node + t_mot_node;
  const double t_wheel = out.t_req >= 0.0 ? t_node * spec.gamma_fd * spec.eta_fd
                                          : t_node * spec.gamma_fd / spec.eta_fd;
  double t_brake = out.t_req - t_wheel;
  const double tol = kTorqueTol * std::max(1.0, std::abs(out.t_req));
  if (t_brake > 1e3 * tol) return fail(InfeasibleReason::InvalidControl);
  out.t_brake_wheel = std::min(t_brake, 0.0);

  out.feasible = true;
  st.feasible = true;
  return st;
}

}  // namespace detail

TorqueSplit split_torque(const ArchitectureSpec& spec, const MapSet& maps,
                         double t_req, double v, const ControlDecision& u) {
  const double t_req_fd = reflect_request(t_req, spec.gamma_fd, spec.eta_fd);
  TorqueSplit split;
  split.t_gen = u.mode == Mode::Ev ? 0.0 : u.t_gen;
  const double q = u.mode == Mode::Parallel ? u.q : 1.0;
  const double t_mot_req_node = q * t_req_fd;
  split.t_e_req = (1.0 - q) * t_req_fd;
  split.t_mot = reflect_request(t_mot_req_node, spec.gamma_mot, spec.eta_gb_mot);
  if (u.mode == Mode::Parallel) {
    const int gear = spec.uses_gearbox()
                         ? (u.gear > 0 ? u.gear : spec.gearbox.gear_for(v))
                         : 0;
    const double t_eg_unit =
        reflect_request(split.t_e_req, spec.engine_ratio(gear), spec.eta_gb_e);
    split.t_e = t_eg_unit - split.t_gen * spec.gamma_gen / spec.eta_gb_gen;
  } else if (u.mode == Mode::Series) {
    split.t_e = -split.t_gen * spec.gamma_gen / spec.eta_gb_gen;
  } else {
    split.t_e = 0.0;
  }

  const Speeds s = rotational_speeds(spec, maps.engine.limits, v, u);
  if (spec.has_motor() &&
      std::abs(split.t_mot) > maps.machine.limits.max_torque(s.omega_mot) + kTorqueTol)
    throw ComponentLimit("motor torque exceeds its limit curve");
  if (u.mode != Mode::Ev &&
      (split.t_e < -kTorqueTol ||
       split.t_e > maps.engine.limits.max_torque(s.omega_e) + kTorqueTol))
    throw ComponentLimit("engine torque exceeds its limit curve");
  if (spec.has_generator() && u.mode != Mode::Ev &&
      std::abs(split.t_gen) > maps.machine.limits.max_torque(s.omega_gen) + kTorqueTol)
    throw ComponentLimit("generator torque exceeds its limit curve");
  return split;
}

ElectricPathResult electric_path(const MapSet& maps, const BatterySpec& battery,
                                 double soc, double t_mot, double omega_mot,
                                 double t_gen, double omega_gen) {
  const auto mloss = maps.machine.motor_loss.lookup(omega_mot, t_mot);
  const auto gloss = maps.machine.generator_loss.lookup(omega_gen, t_gen);
  if (!mloss || !gloss) throw ComponentLimit("machine operating point outside map");
  const double p_mot_s = t_mot * omega_mot + *mloss;
  const double p_gen_s = t_gen * omega_gen + *gloss;
  ElectricPathResult r;
  r.p_b = p_mot_s + p_gen_s + battery.p_aux;
  if (!detail::battery_step(battery, soc, r.p_b, r.i_b, r.soc_rate))
    throw BatteryPowerLimit("discharge demand exceeds battery capability");
  return r;
}

StageOutcome evaluate_stage(const ArchitectureSpec& spec, const MapSet& maps,
                            const BatterySpec& battery, double soc, double v,
                            double a, double grade, const ControlDecision& u) {
  detail::MechStage st = detail::evaluate_mechanical(
      spec, maps, spec.has_battery() ? battery.p_aux : 0.0, v, a, grade, u);
  if (!st.feasible) return st.outcome;
  if (spec.has_battery()) {
    if (!detail::battery_step(battery, soc, st.outcome.p_batt, st.outcome.i_batt,
                              st.outcome.soc_rate)) {
      st.outcome.feasible = false;
      st.outcome.reason = InfeasibleReason::BatteryPowerLimit;
      return st.outcome;
    }
  }
  return st.outcome;
}

}  // namespace h2ems
