#include "h2ems/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace h2ems {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Front points ordered for interpolation: NOx descending, ties by lower H2.
std::vector<const ParetoPoint*> by_nox_desc(const ParetoFront& front) {
  std::vector<const ParetoPoint*> pts;
  for (const auto& p : front.points) pts.push_back(&p);
  std::stable_sort(pts.begin(), pts.end(),
                   [](const ParetoPoint* a, const ParetoPoint* b) {
                     if (a->nox_mg != b->nox_mg) return a->nox_mg > b->nox_mg;
                     return a->h2_kg < b->h2_kg;
                   });
  return pts;
}

/// Calibration at a NOx target by linear interpolation between the adjacent
/// front points; invalid when the whole front lies above the target.
Calibration at_nox_target(const ParetoFront& front, double target) {
  Calibration c;
  const auto pts = by_nox_desc(front);
  if (pts.empty()) return c;
  if (pts.front()->nox_mg <= target) {
    // Even the most NOx-heavy point already meets the target.
    c = Calibration{true, false, pts.front()->mu, pts.front()->h2_kg,
                    pts.front()->nox_mg};
    return c;
  }
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const auto *hi = pts[i], *lo = pts[i + 1];
    if (lo->nox_mg <= target && target <= hi->nox_mg) {
      const double span = hi->nox_mg - lo->nox_mg;
      const double t = span > 0.0 ? (target - lo->nox_mg) / span : 0.0;
      c.valid = true;
      c.interpolated = true;
      c.mu = lo->mu + t * (hi->mu - lo->mu);
      c.nox_mg = target;
      c.h2_kg = lo->h2_kg + t * (hi->h2_kg - lo->h2_kg);
      return c;
    }
  }
  return c;  // target below the reachable minimum
}

Calibration from_point(const ParetoPoint& p) {
  return Calibration{true, false, p.mu, p.h2_kg, p.nox_mg};
}

}  // namespace

Baseline compute_baseline(const MapSet& maps, const BatterySpec& battery,
                          const DrivingMission& mission) {
  const ArchitectureSpec spec = ArchitectureSpec::make(ArchKind::Base);
  Baseline base;
  Trajectory& tr = base.trajectory;
  tr.soc.push_back(0.7);
  for (std::size_t k = 0; k + 1 < mission.size(); ++k) {
    ControlDecision u;
    u.mode = Mode::Parallel;
    u.q = 0.0;
    TrajectoryStep st;
    st.u = u;
    st.outcome = evaluate_stage(spec, maps, battery, 0.7, mission.v[k],
                                mission.a[k], mission.grade[k], u);
    if (!st.outcome.feasible) throw InfeasibleError(k);
    base.h2_kg += st.outcome.mdot_fuel * mission.dt;
    base.nox_mg += st.outcome.mdot_nox * mission.dt;
    tr.steps.push_back(std::move(st));
    tr.soc.push_back(0.7);
  }
  tr.h2_kg = base.h2_kg;
  tr.nox_mg = base.nox_mg;
  tr.cost = base.h2_kg;
  return base;
}

KpiReport extract_calibrations(const ParetoFront& front, const Baseline& base,
                               double nox_target_fraction,
                               double dash_target_fraction) {
  KpiReport r;
  if (front.points.empty()) return r;

  r.s_star = front.s_star >= 0 ? from_point(front.points[front.s_star])
                               : from_point(front.points.front());
  r.s_square = front.s_square >= 0 ? from_point(front.points[front.s_square])
                                   : from_point(front.points.back());

  if (!(base.h2_kg > 0.0) || !(base.nox_mg > 0.0)) {
    // Degenerate mission; the fractions are undefined markers.
    r.dh2_add = r.dh2 = r.fx_reduction = kNan;
    return r;
  }
  r.defined = true;

  r.s_triangle = at_nox_target(front, nox_target_fraction * base.nox_mg);
  r.s_dash = at_nox_target(front, dash_target_fraction * base.nox_mg);
  r.s_triangle_reachable = r.s_triangle.valid;

  const Calibration& tri = r.s_triangle.valid ? r.s_triangle : r.s_square;
  r.dh2_add = 1.0 - r.s_star.h2_kg / tri.h2_kg;
  r.dh2 = 1.0 - tri.h2_kg / base.h2_kg;
  r.fx_reduction = 1.0 - r.s_square.nox_mg / base.nox_mg;
  return r;
}

OperatingStats operating_point_stats(const Trajectory& traj,
                                     const EngineLimits& limits, double dt) {
  OperatingStats s;
  if (traj.steps.empty()) return s;

  std::map<int, int> mode_counts;
  std::map<std::pair<long, long>, int> points;
  int engine_on = 0, above_isoline = 0;
  for (const auto& st : traj.steps) {
    const StageOutcome& o = st.outcome;
    ++mode_counts[static_cast<int>(o.mode)];
    if (o.engine_on) {
      ++engine_on;
      ++points[{std::lround(o.omega_e), std::lround(o.t_e)}];
      if (o.t_e > limits.isoline_torque(o.omega_e) + 1e-9) ++above_isoline;
    }
    if (o.mode == Mode::Ev && o.p_batt > 0.0) s.ev_energy_mj += o.p_batt * dt / 1e6;
  }
  const double n = static_cast<double>(traj.steps.size());
  for (const auto& [mode, count] : mode_counts) s.mode_share[mode] = count / n;
  for (const auto& [key, count] : points)
    s.engine_points.emplace_back(static_cast<double>(key.first),
                                 static_cast<double>(key.second), count);
  s.isoline_exceedance = engine_on > 0 ? static_cast<double>(above_isoline) / engine_on
                                       : 0.0;
  return s;
}

nlohmann::ordered_json make_report(const std::string& mission,
                                   const std::string& architecture,
                                   const Baseline& base, const ParetoFront& front,
                                   const KpiReport& kpis,
                                   const OperatingStats& stats) {
  nlohmann::ordered_json j;
  j["mission"] = mission;
  j["architecture"] = architecture;
  j["baseline"] = {{"h2_kg", base.h2_kg}, {"nox_mg", base.nox_mg}};

  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& p : front.points) {
    nlohmann::ordered_json e;
    e["mu"] = p.mu;
    e["h2_kg"] = p.h2_kg;
    e["nox_mg"] = p.nox_mg;
    e["h2_norm"] = base.h2_kg > 0.0 ? p.h2_kg / base.h2_kg : kNan;
    e["nox_norm"] = base.nox_mg > 0.0 ? p.nox_mg / base.nox_mg : kNan;
    arr.push_back(std::move(e));
  }
  j["front"] = std::move(arr);

  j["kpis"] = {{"dh2_add", kpis.dh2_add},
               {"dh2", kpis.dh2},
               {"fx_reduction", kpis.fx_reduction},
               {"s_triangle_reachable", kpis.s_triangle_reachable}};

  nlohmann::ordered_json mode_share;
  for (const auto& [mode, share] : stats.mode_share)
    mode_share[std::to_string(mode)] = share;
  j["stats"] = {{"mode_share", std::move(mode_share)},
                {"ev_energy_mj", stats.ev_energy_mj},
                {"isoline_exceedance", stats.isoline_exceedance}};
  return j;
}

void write_front_csv(const ParetoFront& front, const Baseline& base,
                     const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ParseError("cannot open for writing: " + path);
  os << "mu,h2_kg,nox_mg,h2_norm,nox_norm,dominated\n";
  for (const auto& p : front.points) {
    os << fmt17(p.mu) << ',' << fmt17(p.h2_kg) << ',' << fmt17(p.nox_mg) << ',';
    os << (base.h2_kg > 0.0 ? fmt17(p.h2_kg / base.h2_kg) : "nan") << ',';
    os << (base.nox_mg > 0.0 ? fmt17(p.nox_mg / base.nox_mg) : "nan") << ',';
    os << (p.dominated ? 1 : 0) << "\n";
  }
}

void write_trace_csv(const Trajectory& traj, double dt, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ParseError("cannot open for writing: " + path);
  os << "time_s,soc,mode,gear,omega_e,t_e,omega_mot,t_mot,omega_gen,t_gen,"
        "t_brake_wheel,t_req,mdot_fuel_kg_s,mdot_nox_mg_s,p_batt_w\n";
  for (std::size_t k = 0; k < traj.steps.size(); ++k) {
    const StageOutcome& o = traj.steps[k].outcome;
    os << fmt17(dt * static_cast<double>(k)) << ',' << fmt17(traj.soc[k]) << ','
       << static_cast<int>(o.mode) << ',' << o.gear << ',' << fmt17(o.omega_e)
       << ',' << fmt17(o.t_e) << ',' << fmt17(o.omega_mot) << ',' << fmt17(o.t_mot)
       << ',' << fmt17(o.omega_gen) << ',' << fmt17(o.t_gen) << ','
       << fmt17(o.t_brake_wheel) << ',' << fmt17(o.t_req) << ','
       << fmt17(o.mdot_fuel) << ',' << fmt17(o.mdot_nox) << ',' << fmt17(o.p_batt)
       << "\n";
  }
}

}  // namespace h2ems
