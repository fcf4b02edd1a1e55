#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "h2ems/map2d.hpp"
#include "h2ems/mission.hpp"
#include "h2ems/powertrain.hpp"

namespace h2ems {

struct InfeasibleError : std::runtime_error {
  explicit InfeasibleError(std::size_t k)
      : std::runtime_error("no feasible control sequence; first empty-value "
                           "time index " +
                           std::to_string(k)),
        time_index(k) {}
  std::size_t time_index;
};

struct TooLarge : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DpConfig {
  int soc_grid_points = 201;  // over [battery.soc_min, battery.soc_max]
  double initial_soc = 0.7;
  double terminal_soc = 0.7;
  double terminal_band = -1.0;  // SoC units; < 0 means one grid cell

  double engine_torque_step = 2.0;   // N*m
  int generator_speed_count = 16;    // engine-speed grid size in series mode

  std::vector<double> mu_list;  // kg H2 per mg NOx; empty -> default schedule

  /// Round the SoC dynamics to the grid so DP and the exhaustive oracle
  /// search the identical finite problem (test instrumentation).
  bool round_to_grid = false;

  /// Drop stage controls that are (fuel, NOx)-dominated by another control
  /// with near-identical battery power. Exactness bounded by the bin width.
  bool prune_stage_entries = true;
  double prune_bin_width_w = 250.0;

  int threads = 0;  // 0 = auto (hardware, or 1 if H2EMS_NO_PARALLEL=1)
};

/// 0 followed by count-1 log-spaced weights on [1e-6, 1e-1].
std::vector<double> default_mu_schedule(int count = 25);

/// One control candidate with its SoC-independent stage evaluation.
struct StageEntry {
  float fuel = 0.0f;       // kg/s
  float nox = 0.0f;        // mg/s
  float p_b = 0.0f;        // W at the battery terminals (0 without battery)
  float t_e = 0.0f;        // N*m
  float omega_gen = 0.0f;  // rad/s (series mode)
  float q = 1.0f;
  std::uint8_t mode = 3;
  std::uint8_t gear = 0;
  std::uint8_t has_engine_torque = 0;

  ControlDecision to_control() const;
};

/// Per-time-step feasible control candidates, sorted by the DP tie-break key
/// (NOx, |T_gen| via engine torque, mode) so a strict less-than scan realizes
/// deterministic tie-breaking.
struct StageTable {
  double dt = 1.0;
  std::vector<std::vector<StageEntry>> stages;  // size = mission.size() - 1
};

StageTable build_stage_table(const ArchitectureSpec& spec, const MapSet& maps,
                             const BatterySpec& battery, const DrivingMission& mission,
                             const DpConfig& cfg);

struct TrajectoryStep {
  ControlDecision u;
  StageOutcome outcome;
};

struct Trajectory {
  double mu = 0.0;
  double h2_kg = 0.0;
  double nox_mg = 0.0;
  double cost = 0.0;  // sum (mdot_fuel + mu * mdot_nox) dt
  std::vector<double> soc;  // one per mission sample
  std::vector<TrajectoryStep> steps;
};

/// Backward value iteration on the SoC grid with stage cost
/// (mdot_fuel + mu * mdot_nox) dt, linear interpolation of the cost-to-go,
/// and a forward pass that re-optimizes controls at the continuous SoC.
/// Throws InfeasibleError when the terminal band is unreachable.
Trajectory solve_dp(const ArchitectureSpec& spec, const MapSet& maps,
                    const BatterySpec& battery, const DrivingMission& mission,
                    double mu, const DpConfig& cfg);

/// Exhaustive enumeration over the same stage table with grid-rounded
/// dynamics; throws TooLarge above 1e6 sequences. cfg.round_to_grid must be
/// set so both searches visit the identical finite problem.
Trajectory brute_force_oracle(const ArchitectureSpec& spec, const MapSet& maps,
                              const BatterySpec& battery,
                              const DrivingMission& mission, double mu,
                              const DpConfig& cfg);

struct ParetoPoint {
  double mu = 0.0;
  double h2_kg = 0.0;
  double nox_mg = 0.0;
  bool dominated = false;  // flagged, never deleted
  Trajectory trajectory;
};

struct ParetoFront {
  std::vector<ParetoPoint> points;  // sorted by mu
  int s_star = -1;    // mu = 0 point
  int s_square = -1;  // NOx saturation point
};

/// One solve per weight; weights whose solve is infeasible are skipped. A
/// front with at least one feasible point is still returned.
ParetoFront sweep_pareto(const ArchitectureSpec& spec, const MapSet& maps,
                         const BatterySpec& battery, const DrivingMission& mission,
                         const DpConfig& cfg);

}  // namespace h2ems
