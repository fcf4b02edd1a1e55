#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "h2ems/dp.hpp"

namespace h2ems {

/// Totals of the base vehicle on a mission; used to normalize every front.
struct Baseline {
  double h2_kg = 0.0;
  double nox_mg = 0.0;
  Trajectory trajectory;
};

/// Deterministic base-vehicle simulation (no optimization DOF beyond the
/// speed-encoded gears). Throws InfeasibleError when the engine cannot meet a
/// torque request.
Baseline compute_baseline(const MapSet& maps, const BatterySpec& battery,
                          const DrivingMission& mission);

/// One named calibration on (or interpolated between) front points.
struct Calibration {
  bool valid = false;
  bool interpolated = false;
  double mu = 0.0;
  double h2_kg = 0.0;
  double nox_mg = 0.0;
};

struct KpiReport {
  /// False when the baseline totals are zero; the fractions are NaN then.
  bool defined = false;
  bool s_triangle_reachable = false;

  double dh2_add = 0.0;       // 1 - H2(S*)/H2(S-triangle), extra H2 for low NOx
  double dh2 = 0.0;           // 1 - H2(S-triangle)/H2_base, hybridization saving
  double fx_reduction = 0.0;  // 1 - NOx(S-square)/NOx_base

  Calibration s_star;      // mu = 0, H2-optimal
  Calibration s_triangle;  // NOx <= target fraction of baseline
  Calibration s_square;    // NOx saturation point
  Calibration s_dash;      // fixed intermediate NOx target
};

/// Selects the named calibrations and computes the KPI fractions. When the
/// NOx target is unreachable, the triangle KPIs fall back to the saturation
/// point and are flagged.
KpiReport extract_calibrations(const ParetoFront& front, const Baseline& base,
                               double nox_target_fraction = 0.10,
                               double dash_target_fraction = 0.50);

struct OperatingStats {
  std::map<int, double> mode_share;  // mode index -> share of steps
  /// Occurrence counts of engine operating points, rounded to a 1 rad/s x
  /// 1 N*m grid.
  std::vector<std::tuple<double, double, int>> engine_points;
  double ev_energy_mj = 0.0;        // positive electric energy in EV mode
  double isoline_exceedance = 0.0;  // engine-on share above the ultra-lean line
};

OperatingStats operating_point_stats(const Trajectory& traj, const EngineLimits& limits,
                                     double dt);

/// Report JSON per the fixed schema; non-finite fractions serialize as null.
nlohmann::ordered_json make_report(const std::string& mission,
                                   const std::string& architecture,
                                   const Baseline& base, const ParetoFront& front,
                                   const KpiReport& kpis, const OperatingStats& stats);

void write_front_csv(const ParetoFront& front, const Baseline& base,
                     const std::string& path);
void write_trace_csv(const Trajectory& traj, double dt, const std::string& path);

}  // namespace h2ems
