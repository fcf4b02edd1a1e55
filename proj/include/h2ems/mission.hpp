#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "h2ems/map2d.hpp"

namespace h2ems {

struct NonMonotonicTime : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NegativeSpeed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Time-gridded speed/grade profile on a uniform dt. Immutable after
/// construction; acceleration is the forward difference of v (last sample 0).
struct DrivingMission {
  std::string name;
  double dt = 1.0;                // s
  std::vector<double> v;          // m/s
  std::vector<double> grade;      // rad
  std::vector<double> a;          // m/s^2, derived
  std::vector<double> altitude;   // m, derived (empty when no grade data)

  std::size_t size() const { return v.size(); }
  double duration() const { return dt * static_cast<double>(v.size() - 1); }
  double distance() const;  // sum v dt
};

/// Builds the derived arrays (a from v, altitude from grade) and validates the
/// invariants. v and grade must have equal length >= 2.
DrivingMission finalize_mission(std::string name, double dt, std::vector<double> v,
                                std::vector<double> grade);

/// Loads a mission CSV with header columns time_s, speed_mps (or speed_kmh)
/// and optionally grade_rad, grade_percent, or altitude_m, then linearly
/// resamples to a uniform dt.
DrivingMission load_mission(const std::string& path, double resample_dt = 1.0);

/// Acceleration ramp followed by a 142 km/h cruise on flat road; every sample
/// after the first has a positive torque request.
DrivingMission make_highway_cycle(double accel_duration = 50.0,
                                  double cruise_duration = 680.0);

/// Constant-speed climb on a fixed grade until the integrated altitude gain
/// reaches climb_m, with periodic hairpin slowdowns, then a flat stop.
DrivingMission make_mountain_cycle(double climb_m = 1270.0, double cruise_kmh = 70.0,
                                   int hairpin_slowdowns = 6);

/// Bundled 1800-sample generic mixed-load cycle (urban stop-and-go, rural,
/// highway segments) built from public-domain style speed breakpoints.
DrivingMission make_mixed_load_cycle();

/// Dispatch by builtin name: "highway", "mountain", "mixed-load".
DrivingMission builtin_mission(const std::string& name);

}  // namespace h2ems
