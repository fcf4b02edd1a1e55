#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "h2ems/mission.hpp"
#include "h2ems/powertrain.hpp"

using namespace h2ems;
namespace fs = std::filesystem;

namespace {

fs::path write_csv(const char* tag, const std::string& body) {
  const fs::path p = fs::temp_directory_path() / (std::string("h2ems_cyc_") + tag + ".csv");
  std::ofstream(p) << body;
  return p;
}

}  // namespace

TEST_CASE("standstill file: zero speed, zero acceleration") {
  const auto p = write_csv("still", "time_s,speed_mps\n0,0\n1,0\n2,0\n");
  const DrivingMission m = load_mission(p.string());
  REQUIRE(m.size() == 3);
  for (double v : m.v) CHECK(v == 0.0);
  for (double a : m.a) CHECK(a == 0.0);
  CHECK(m.distance() == 0.0);
  fs::remove(p);
}

TEST_CASE("km/h column is converted") {
  const auto p = write_csv("kmh", "time_s,speed_kmh\n0,142\n1,142\n");
  const DrivingMission m = load_mission(p.string());
  CHECK(m.v[0] == doctest::Approx(142.0 / 3.6).epsilon(1e-12));
  fs::remove(p);
}

TEST_CASE("grade is recovered from an altitude column") {
  // 10 m/s with altitude rising 0.5 m/s -> grade atan(0.05).
  std::string body = "time_s,speed_mps,altitude_m\n";
  for (int t = 0; t <= 20; ++t)
    body += std::to_string(t) + ",10," + std::to_string(0.5 * t) + "\n";
  const auto p = write_csv("alt", body);
  const DrivingMission m = load_mission(p.string());
  for (std::size_t k = 1; k + 1 < m.size(); ++k)
    CHECK(m.grade[k] == doctest::Approx(std::atan(0.05)).epsilon(1e-9));
  // Integrated altitude closes on the source profile.
  CHECK(m.altitude.back() == doctest::Approx(10.0).epsilon(0.02));
  fs::remove(p);
}

TEST_CASE("grade_percent column converts to radians") {
  const auto p = write_csv("pct", "time_s,speed_mps,grade_percent\n0,10,5\n1,10,5\n");
  const DrivingMission m = load_mission(p.string());
  CHECK(m.grade[0] == doctest::Approx(std::atan(0.05)).epsilon(1e-12));
  fs::remove(p);
}

TEST_CASE("resampling keeps endpoints and distance") {
  std::string body = "time_s,speed_mps\n";
  for (int t = 0; t <= 60; t += 3)
    body += std::to_string(t) + "," + std::to_string(10.0 + 5.0 * std::sin(0.2 * t)) + "\n";
  const auto p = write_csv("res", body);

  const DrivingMission fine = load_mission(p.string(), 1.0);
  CHECK(fine.dt == 1.0);
  CHECK(fine.size() == 61);
  // std::to_string wrote 6 decimals, hence the loose endpoint tolerance.
  CHECK(fine.v.front() == doctest::Approx(10.0).epsilon(1e-6));
  CHECK(fine.v.back() == doctest::Approx(10.0 + 5.0 * std::sin(12.0)).epsilon(1e-6));

  // Trapezoid distance of the source breakpoints.
  double ref = 0.0;
  double prev = 10.0;
  for (int t = 3; t <= 60; t += 3) {
    const double cur = 10.0 + 5.0 * std::sin(0.2 * t);
    ref += 0.5 * (prev + cur) * 3.0;
    prev = cur;
  }
  // The sample sum overshoots the trapezoid integral by half the end speeds.
  CHECK(fine.distance() == doctest::Approx(ref + 0.5 * (10.0 + fine.v.back())).epsilon(0.001));

  // A non-divisor step still lands exactly on the final sample.
  const DrivingMission coarse = load_mission(p.string(), 7.0);
  CHECK(coarse.v.back() == doctest::Approx(fine.v.back()).epsilon(1e-12));
  fs::remove(p);
}

TEST_CASE("parser rejects malformed input") {
  const auto bad_time = write_csv("t", "time_s,speed_mps\n0,5\n2,5\n1,5\n");
  CHECK_THROWS_AS(load_mission(bad_time.string()), NonMonotonicTime);
  const auto neg = write_csv("neg", "time_s,speed_mps\n0,5\n1,-1\n");
  CHECK_THROWS_AS(load_mission(neg.string()), NegativeSpeed);
  const auto nocol = write_csv("noc", "time_s,foo\n0,5\n1,5\n");
  CHECK_THROWS_AS(load_mission(nocol.string()), ParseError);
  const auto badnum = write_csv("num", "time_s,speed_mps\n0,5\n1,abc\n");
  CHECK_THROWS_AS(load_mission(badnum.string()), ParseError);
  const auto single = write_csv("one", "time_s,speed_mps\n0,5\n");
  CHECK_THROWS_AS(load_mission(single.string()), ParseError);
  CHECK_THROWS_AS(load_mission("/nonexistent/mission.csv"), ParseError);
  for (const auto& p : {bad_time, neg, nocol, badnum, single}) fs::remove(p);
}

TEST_CASE("highway cycle: ramp then sustained 142 km/h cruise") {
  const DrivingMission m = make_highway_cycle();
  CHECK(m.dt == 1.0);
  CHECK(m.size() == 731);
  CHECK(m.v.front() == 0.0);
  CHECK(m.v.back() == doctest::Approx(142.0 / 3.6).epsilon(1e-12));

  const auto mix = ArchitectureSpec::make(ArchKind::Mixed);
  int cruise = 0;
  for (std::size_t k = 1; k + 1 < m.size(); ++k) {
    CHECK(torque_request(mix, m.v[k], m.a[k], m.grade[k]) > 0.0);
    if (m.a[k] == 0.0 && m.v[k] == m.v.back()) ++cruise;
  }
  CHECK(cruise >= 675);
  // Cruise request sits on the published 372 N*m anchor.
  const double t_cruise = torque_request(mix, m.v.back(), 0.0, 0.0);
  CHECK(t_cruise == doctest::Approx(372.0).epsilon(0.02));
}

TEST_CASE("mountain cycle climbs the full profile with hairpin slowdowns") {
  const DrivingMission m = make_mountain_cycle();
  CHECK(m.altitude.back() >= 1270.0);
  CHECK(m.v.back() == 0.0);

  const double v_c = 70.0 / 3.6;
  int at_cruise = 0, at_creep = 0;
  for (std::size_t k = 35; k + 30 < m.size(); ++k) {
    if (std::abs(m.v[k] - v_c) < 1e-9) ++at_cruise;
    if (std::abs(m.v[k] - 7.0) < 1e-9) ++at_creep;
  }
  CHECK(at_cruise > 300);
  CHECK(at_creep >= 6 * 4);  // six slowdowns, several creep seconds each

  // Without hairpins the climb is constant speed: zero acceleration between
  // the launch ramp and the final descent to rest.
  const DrivingMission flat = make_mountain_cycle(1270.0, 70.0, 0);
  for (std::size_t k = 30; k + 26 < flat.size(); ++k) CHECK(flat.a[k] == 0.0);
  CHECK(flat.altitude.back() >= 1270.0);
}

TEST_CASE("mixed-load cycle shape") {
  const DrivingMission m = make_mixed_load_cycle();
  CHECK(m.size() == 1800);
  CHECK(m.dt == 1.0);
  CHECK(m.v.front() == 0.0);
  CHECK(m.v.back() == 0.0);

  int stops = 0;
  bool moving = false;
  double v_max = 0.0;
  for (std::size_t k = 0; k < m.size(); ++k) {
    CHECK(m.v[k] >= 0.0);
    v_max = std::max(v_max, m.v[k]);
    if (m.v[k] > 0.5) moving = true;
    else if (moving) {
      ++stops;
      moving = false;
    }
  }
  CHECK(stops >= 10);  // urban stop-and-go section
  CHECK(v_max == doctest::Approx(25.0).epsilon(0.01));  // 90 km/h highway leg

  // Acceleration is the forward difference of the speed trace.
  for (std::size_t k = 0; k + 1 < m.size(); ++k)
    CHECK(m.a[k] == doctest::Approx((m.v[k + 1] - m.v[k]) / m.dt).epsilon(1e-12));
  CHECK(m.a.back() == 0.0);
}

TEST_CASE("builtin mission registry") {
  CHECK(builtin_mission("highway").name == "highway");
  CHECK(builtin_mission("mountain").name == "mountain");
  CHECK(builtin_mission("mixed-load").name == "mixed-load");
  CHECK_THROWS_AS(builtin_mission("nope"), ParseError);
}
