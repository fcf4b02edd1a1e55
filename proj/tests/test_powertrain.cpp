#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "h2ems/map2d.hpp"
#include "h2ems/powertrain.hpp"

using namespace h2ems;

namespace {

const MapSet& maps() {
  static const MapSet m = synthesize_default_maps();
  return m;
}

// Delivered wheel torque recomputed from an outcome's component operating
// points; the friction brake absorbs the (non-positive) remainder.
double wheel_torque_from_outcome(const ArchitectureSpec& spec, const StageOutcome& o) {
  auto deliver = [](double t, double ratio, double eta) {
    return t >= 0.0 ? t * ratio * eta : t * ratio / eta;
  };
  double t_node = deliver(o.t_mot, spec.gamma_mot, spec.eta_gb_mot);
  if (o.mode == Mode::Parallel && o.engine_on) {
    const double t_eg_unit = o.t_e + o.t_gen * spec.gamma_gen / spec.eta_gb_gen;
    t_node += deliver(t_eg_unit, spec.engine_ratio(o.gear), spec.eta_gb_e);
  }
  const double t_wheel = o.t_req >= 0.0 ? t_node * spec.gamma_fd * spec.eta_fd
                                        : t_node * spec.gamma_fd / spec.eta_fd;
  return t_wheel + o.t_brake_wheel;
}

ArchitectureSpec unity_spec(ArchKind kind) {
  ArchitectureSpec s = ArchitectureSpec::make(kind);
  s.eta_fd = s.eta_gb_mot = s.eta_gb_gen = s.eta_gb_e = 1.0;
  return s;
}

}  // namespace

TEST_CASE("torque request: drag vanishes at standstill, masses differ per arch") {
  const auto base = ArchitectureSpec::make(ArchKind::Base);
  const auto par = ArchitectureSpec::make(ArchKind::Parallel);
  const auto ser = ArchitectureSpec::make(ArchKind::Series);
  const auto mix = ArchitectureSpec::make(ArchKind::Mixed);

  CHECK(base.total_mass() == 1300.0);
  CHECK(par.total_mass() == 1460.0);
  CHECK(ser.total_mass() == 1500.0);
  CHECK(mix.total_mass() == 1500.0);

  CHECK(torque_request(base, 0.0, 0.0, 0.0) == 0.0);
  // Pure inertia at standstill.
  CHECK(torque_request(par, 0.0, 2.0, 0.0) ==
        doctest::Approx(1460.0 * 2.0 * 0.3).epsilon(1e-12));
  // Hand value: (c0 + c2 v^2 + m a) r_w at 10 m/s, 1 m/s^2, flat.
  const double hand = (132.0 + 0.7121 * 100.0 + 1300.0 * 1.0) * 0.3;
  CHECK(torque_request(base, 10.0, 1.0, 0.0) == doctest::Approx(hand).epsilon(1e-12));
  // Grade adds m g sin(grade) r_w.
  CHECK(torque_request(base, 10.0, 1.0, 0.05) ==
        doctest::Approx(hand + 1300.0 * 9.81 * std::sin(0.05) * 0.3).epsilon(1e-12));
}

TEST_CASE("142 km/h cruise wheel torque anchor") {
  const auto mix = ArchitectureSpec::make(ArchKind::Mixed);
  const double v = 142.0 / 3.6;
  const double t_req = torque_request(mix, v, 0.0, 0.0);
  CHECK(t_req == doctest::Approx(372.0).epsilon(0.02));
}

TEST_CASE("rotational speeds per mode") {
  const auto mix = ArchitectureSpec::make(ArchKind::Mixed);
  const auto& limits = maps().engine.limits;

  ControlDecision ev;
  ev.mode = Mode::Ev;
  const Speeds s0 = rotational_speeds(mix, limits, 0.0, ev);
  CHECK(s0.omega_w == 0.0);
  CHECK(s0.omega_mot == 0.0);
  CHECK(s0.omega_e == 0.0);
  CHECK(s0.omega_gen == 0.0);

  // Series: engine speed is the free generator speed over its ratio.
  ControlDecision ser;
  ser.mode = Mode::Series;
  ser.omega_gen = 480.0;
  const Speeds s1 = rotational_speeds(mix, limits, 10.0, ser);
  CHECK(s1.omega_e == doctest::Approx(300.0).epsilon(1e-12));
  CHECK(s1.omega_gen == 480.0);
  CHECK(s1.omega_mot == doctest::Approx(10.0 / 0.3 * 3.2 * 2.6).epsilon(1e-12));

  ser.omega_gen = 2000.0;  // engine would exceed its speed range
  CHECK_THROWS_AS(rotational_speeds(mix, limits, 10.0, ser), EngineSpeedRange);

  // Mixed parallel at 142 km/h hits the published engine-speed anchor.
  ControlDecision par;
  par.mode = Mode::Parallel;
  const Speeds s2 = rotational_speeds(mix, limits, 142.0 / 3.6, par);
  CHECK(s2.omega_e == doctest::Approx(352.0).epsilon(0.01));

  // Below-idle wheel speed: launch clutch slips, engine held at idle.
  const auto parallel = ArchitectureSpec::make(ArchKind::Parallel);
  const Speeds s3 = rotational_speeds(parallel, limits, 1.0, par);
  CHECK(s3.omega_e == limits.omega_min);

  // Gearbox architectures overspeed the engine at extreme vehicle speed.
  CHECK_THROWS_AS(rotational_speeds(parallel, limits, 100.0, par), EngineSpeedRange);
}

TEST_CASE("speed-encoded gear selection") {
  const auto base = ArchitectureSpec::make(ArchKind::Base);
  CHECK(base.gearbox.gear_for(0.0) == 1);
  CHECK(base.gearbox.gear_for(7.63) == 1);
  CHECK(base.gearbox.gear_for(7.65) == 2);
  CHECK(base.gearbox.gear_for(50.0) == 7);
  for (double v = 0.0; v < 45.0; v += 0.05) {
    const int g = base.gearbox.gear_for(v);
    // Engaged engine speed stays under the upshift point plus one step.
    const double omega = v / base.r_w * base.gamma_fd * base.gearbox.ratio(g);
    if (g < 7) CHECK(omega < 315.0);
  }
}

TEST_CASE("torque split: EV carries everything on the motor") {
  const auto mix = unity_spec(ArchKind::Mixed);
  ControlDecision u;
  u.mode = Mode::Ev;
  const TorqueSplit sp = split_torque(mix, maps(), 300.0, 15.0, u);
  CHECK(sp.t_e == 0.0);
  CHECK(sp.t_e_req == 0.0);
  CHECK(sp.t_gen == 0.0);
  // Unity efficiencies: motor torque is the request over both ratios.
  CHECK(sp.t_mot == doctest::Approx(300.0 / (3.2 * 2.6)).epsilon(1e-12));
}

TEST_CASE("torque split: q = 0 routes the full request to the engine") {
  auto par = unity_spec(ArchKind::Parallel);
  ControlDecision u;
  u.mode = Mode::Parallel;
  u.q = 0.0;
  u.gear = 5;  // ratio 1.08
  const double t_req = 250.0;
  const TorqueSplit sp = split_torque(par, maps(), t_req, 25.0, u);
  CHECK(sp.t_mot == 0.0);
  CHECK(sp.t_e == doctest::Approx(t_req / (3.2 * 1.08)).epsilon(1e-12));
  // Power balance at unity efficiency: engine power equals wheel power.
  const double omega_w = 25.0 / 0.3;
  const double omega_e = omega_w * 3.2 * 1.08;
  CHECK(sp.t_e * omega_e == doctest::Approx(t_req * omega_w).epsilon(1e-12));
}

TEST_CASE("torque split: generator load raises the engine torque") {
  auto mix = unity_spec(ArchKind::Mixed);
  ControlDecision u;
  u.mode = Mode::Series;
  u.omega_gen = 480.0;
  u.t_gen = -50.0;
  const TorqueSplit sp = split_torque(mix, maps(), 100.0, 10.0, u);
  CHECK(sp.t_e == doctest::Approx(50.0 * 1.6).epsilon(1e-12));
  CHECK(sp.t_gen == -50.0);
  // The motor still covers the whole wheel request.
  CHECK(sp.t_mot == doctest::Approx(100.0 / (3.2 * 2.6)).epsilon(1e-12));
}

TEST_CASE("torque split honours the component limit curves") {
  const auto mix = ArchitectureSpec::make(ArchKind::Mixed);
  ControlDecision u;
  u.mode = Mode::Ev;
  // 350 N*m motor limit, reflected to the wheel through both ratios.
  CHECK_THROWS_AS(split_torque(mix, maps(), 4000.0, 15.0, u), ComponentLimit);

  ControlDecision ser;
  ser.mode = Mode::Series;
  ser.omega_gen = 480.0;
  ser.t_gen = -400.0;  // beyond the 350 N*m machine curve
  CHECK_THROWS_AS(split_torque(mix, maps(), 0.0, 10.0, ser), ComponentLimit);
}

TEST_CASE("battery step: closed form satisfies the circuit equation") {
  BatterySpec bat;
  CHECK(bat.q_max == doctest::Approx(11.0 * 3.6e6 / 230.0).epsilon(1e-12));
  CHECK(bat.v_oc(0.6) == doctest::Approx(230.0).epsilon(1e-12));

  std::mt19937 rng(11);
  std::uniform_real_distribution<double> up(-6.0e4, 2.0e5);
  std::uniform_real_distribution<double> us(0.3, 0.9);
  for (int i = 0; i < 2000; ++i) {
    const double p_b = up(rng), soc = us(rng);
    double i_b = 0.0, rate = 0.0;
    if (!detail::battery_step(bat, soc, p_b, i_b, rate)) {
      CHECK(p_b > bat.v_oc(soc) * bat.v_oc(soc) / (4.0 * bat.r_i) - 1.0);
      continue;
    }
    // Terminal power: V_oc I - R I^2 = P_b.
    CHECK(bat.v_oc(soc) * i_b - bat.r_i * i_b * i_b ==
          doctest::Approx(p_b).epsilon(1e-9));
    // Source power over capacity, with discharge draining the store.
    const double p_sb = p_b + bat.r_i * i_b * i_b;
    CHECK(rate == doctest::Approx(-p_sb / (bat.q_max * bat.v_oc(soc))).epsilon(1e-12));
    if (p_b > 0.0) CHECK(rate < 0.0);
    if (p_b < -1.0) CHECK(rate > 0.0);
  }

  double i_b = 1.0, rate = 1.0;
  REQUIRE(detail::battery_step(bat, 0.6, 0.0, i_b, rate));
  CHECK(i_b == 0.0);
  CHECK(rate == 0.0);
}

TEST_CASE("electric path rejects over-limit discharge") {
  const auto mix = ArchitectureSpec::make(ArchKind::Mixed);
  (void)mix;
  BatterySpec bat;
  // 300 N*m at 1200 rad/s demands far beyond V_oc^2 / 4R.
  CHECK_THROWS_AS(electric_path(maps(), bat, 0.6, 300.0, 1200.0, 0.0, 0.0),
                  BatteryPowerLimit);
  const ElectricPathResult r = electric_path(maps(), bat, 0.6, 0.0, 0.0, 0.0, 0.0);
  CHECK(r.p_b == doctest::Approx(bat.p_aux).epsilon(1e-12));
}

TEST_CASE("stage evaluation matches an independent straight-line recomputation") {
  // Mixed drivetrain, parallel mode with load-point shifting: every number is
  // recomputed here from the published relations.
  const auto mix = ArchitectureSpec::make(ArchKind::Mixed);
  BatterySpec bat;
  const double v = 20.0, a = 0.3, grade = 0.01, soc = 0.65;

  ControlDecision u;
  u.mode = Mode::Parallel;
  u.has_engine_torque = true;
  u.engine_torque = 120.0;
  const StageOutcome o = evaluate_stage(mix, maps(), bat, soc, v, a, grade, u);
  REQUIRE(o.feasible);

  const double m = 1500.0;
  const double t_req = (132.0 + 0.7121 * v * v + m * 9.81 * std::sin(grade) + m * a) * 0.3;
  CHECK(o.t_req == doctest::Approx(t_req).epsilon(1e-12));

  const double omega_w = v / 0.3;
  const double omega_e = std::max(omega_w * 3.2 * 0.83662, 80.0);
  CHECK(o.omega_e == doctest::Approx(omega_e).epsilon(1e-12));
  CHECK(o.omega_mot == doctest::Approx(omega_w * 3.2 * 2.6).epsilon(1e-12));

  const double t_req_fd = t_req / (3.2 * 0.97);
  const double t_eg_node = 120.0 * 0.83662 * 0.96;
  const double t_mot_node = t_req_fd - t_eg_node;
  const double t_mot = t_mot_node >= 0.0 ? t_mot_node / (2.6 * 0.96)
                                         : t_mot_node * 0.96 / 2.6;
  CHECK(o.t_mot == doctest::Approx(t_mot).epsilon(1e-10));
  CHECK(o.t_e == doctest::Approx(120.0).epsilon(1e-12));
  CHECK(o.q == doctest::Approx(t_mot_node / t_req_fd).epsilon(1e-10));

  const double fuel = maps().engine.fuel.lookup(omega_e, 120.0).value();
  const double nox = maps().engine.nox.lookup(omega_e, 120.0).value();
  CHECK(o.mdot_fuel == doctest::Approx(fuel).epsilon(1e-12));
  CHECK(o.mdot_nox == doctest::Approx(nox).epsilon(1e-12));

  const double mloss =
      maps().machine.motor_loss.lookup(o.omega_mot, t_mot).value();
  // The generator idles on the engine shaft: zero torque, spin loss only.
  const double omega_gen = omega_e * 1.6;
  const double gloss =
      maps().machine.generator_loss.lookup(omega_gen, 0.0).value();
  const double p_b = t_mot * o.omega_mot + mloss + gloss + bat.p_aux;
  CHECK(o.p_batt == doctest::Approx(p_b).epsilon(1e-10));

  const double v_oc = 50.0 * soc + 200.0;
  const double i_b = (v_oc - std::sqrt(v_oc * v_oc - 4.0 * 0.05 * p_b)) / (2.0 * 0.05);
  CHECK(o.i_batt == doctest::Approx(i_b).epsilon(1e-10));
  CHECK(o.soc_rate ==
        doctest::Approx(-(p_b + 0.05 * i_b * i_b) / (bat.q_max * v_oc)).epsilon(1e-10));

  // Wheel torque balance closes exactly.
  CHECK(wheel_torque_from_outcome(mix, o) ==
        doctest::Approx(t_req).epsilon(1e-10));
  CHECK(o.t_brake_wheel <= 0.0);
}

TEST_CASE("base vehicle: non-positive requests burn nothing") {
  const auto base = ArchitectureSpec::make(ArchKind::Base);
  BatterySpec bat;
  ControlDecision u;
  u.mode = Mode::Parallel;
  u.q = 0.0;
  for (double v : {0.0, 5.0, 20.0}) {
    const StageOutcome o = evaluate_stage(base, maps(), bat, 0.7, v, -3.0, 0.0, u);
    REQUIRE(o.feasible);
    CHECK(o.mdot_fuel == 0.0);
    CHECK(o.mdot_nox == 0.0);
    CHECK(o.p_batt == 0.0);
    CHECK(o.t_brake_wheel == doctest::Approx(o.t_req).epsilon(1e-12));
  }
}

TEST_CASE("disallowed modes are reported infeasible, never evaluated") {
  BatterySpec bat;
  ControlDecision ser;
  ser.mode = Mode::Series;
  ser.omega_gen = 480.0;
  for (ArchKind k : {ArchKind::Base, ArchKind::Parallel}) {
    const auto spec = ArchitectureSpec::make(k);
    const StageOutcome o = evaluate_stage(spec, maps(), bat, 0.7, 10.0, 0.0, 0.0, ser);
    CHECK_FALSE(o.feasible);
    CHECK(o.reason == InfeasibleReason::ModeNotAllowed);
  }
  ControlDecision par;
  par.mode = Mode::Parallel;
  const auto series = ArchitectureSpec::make(ArchKind::Series);
  CHECK_FALSE(evaluate_stage(series, maps(), bat, 0.7, 10.0, 0.0, 0.0, par).feasible);
}

TEST_CASE("invalid controls are rejected") {
  const auto mix = ArchitectureSpec::make(ArchKind::Mixed);
  BatterySpec bat;

  ControlDecision u;
  u.mode = Mode::Ev;
  u.q = 0.5;  // partial traction split is only valid when braking
  CHECK(evaluate_stage(mix, maps(), bat, 0.7, 10.0, 0.5, 0.0, u).reason ==
        InfeasibleReason::InvalidControl);

  u.q = 1.0;
  u.t_gen = -10.0;  // no generator torque with the engine off
  CHECK(evaluate_stage(mix, maps(), bat, 0.7, 10.0, 0.5, 0.0, u).reason ==
        InfeasibleReason::InvalidControl);

  ControlDecision g;
  g.mode = Mode::Series;
  g.omega_gen = 480.0;
  g.t_gen = 10.0;  // generator may only absorb torque
  CHECK(evaluate_stage(mix, maps(), bat, 0.7, 10.0, 0.0, 0.0, g).reason ==
        InfeasibleReason::InvalidControl);
}

TEST_CASE("randomized driveability: feasible stages always close the torque balance") {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> uv(0.0, 40.0);
  std::uniform_real_distribution<double> ua(-3.0, 3.0);
  std::uniform_real_distribution<double> ug(-0.08, 0.08);
  std::uniform_real_distribution<double> uq(0.0, 1.0);
  std::uniform_real_distribution<double> ute(0.0, 330.0);
  std::uniform_real_distribution<double> uog(128.0, 960.0);
  std::uniform_int_distribution<int> umode(1, 3);
  std::uniform_int_distribution<int> uarch(0, 3);
  BatterySpec bat;

  int feasible = 0;
  for (int i = 0; i < 20000; ++i) {
    const auto spec = ArchitectureSpec::make(static_cast<ArchKind>(uarch(rng)));
    ControlDecision u;
    u.mode = static_cast<Mode>(umode(rng));
    const double v = uv(rng), a = ua(rng), grade = ug(rng);
    if (u.mode == Mode::Parallel) {
      u.has_engine_torque = true;
      u.engine_torque = ute(rng);
    } else if (u.mode == Mode::Series) {
      u.omega_gen = uog(rng);
      u.has_engine_torque = true;
      u.engine_torque = ute(rng);
    } else if (torque_request(spec, v, a, grade) < 0.0) {
      u.q = uq(rng);
    }
    const StageOutcome o = evaluate_stage(spec, maps(), bat, 0.6, v, a, grade, u);
    if (!o.feasible) continue;
    ++feasible;
    const double delivered = wheel_torque_from_outcome(spec, o);
    const double tol = 1e-9 * std::max(1.0, std::abs(o.t_req));
    CHECK(std::abs(delivered - o.t_req) <= tol);
    CHECK(o.t_brake_wheel <= 0.0);
    if (o.engine_on) CHECK(o.mdot_fuel > 0.0);
  }
  CHECK(feasible > 2000);  // the sampler must actually exercise feasible space
}
