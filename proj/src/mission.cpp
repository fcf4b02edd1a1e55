#include "h2ems/mission.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace h2ems {

namespace {

constexpr double kKmhToMps = 1.0 / 3.6;

double lerp_at(const std::vector<double>& x, const std::vector<double>& y, double xi) {
  if (xi <= x.front()) return y.front();
  if (xi >= x.back()) return y.back();
  const auto it = std::upper_bound(x.begin(), x.end(), xi);
  const std::size_t i = static_cast<std::size_t>(it - x.begin()) - 1;
  const double t = (xi - x[i]) / (x[i + 1] - x[i]);
  return y[i] + t * (y[i + 1] - y[i]);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    // Trim surrounding whitespace.
    const auto b = tok.find_first_not_of(" \t\r");
    const auto e = tok.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : tok.substr(b, e - b + 1));
  }
  return out;
}

/// Piecewise-linear speed profile sampled at 1 Hz; breakpoint times are
/// integer seconds, speeds in km/h.
DrivingMission from_breakpoints(std::string name,
                                const std::vector<std::pair<double, double>>& pts) {
  std::vector<double> bt, bv;
  for (const auto& [t, kmh] : pts) {
    bt.push_back(t);
    bv.push_back(kmh * kKmhToMps);
  }
  const int n = static_cast<int>(std::llround(bt.back())) + 1;
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) v[static_cast<std::size_t>(k)] = lerp_at(bt, bv, k);
  std::vector<double> grade(v.size(), 0.0);
  return finalize_mission(std::move(name), 1.0, std::move(v), std::move(grade));
}

}  // namespace

double DrivingMission::distance() const {
  double d = 0.0;
  for (double vk : v) d += vk * dt;
  return d;
}

DrivingMission finalize_mission(std::string name, double dt, std::vector<double> v,
                                std::vector<double> grade) {
  if (v.size() < 2 || v.size() != grade.size())
    throw ParseError("mission needs >= 2 samples with matching grade array");
  if (!(dt > 0.0)) throw ParseError("mission dt must be positive");
  for (double vk : v)
    if (vk < 0.0) throw NegativeSpeed("mission contains a negative speed");

  DrivingMission m;
  m.name = std::move(name);
  m.dt = dt;
  m.v = std::move(v);
  m.grade = std::move(grade);
  m.a.resize(m.v.size(), 0.0);
  for (std::size_t k = 0; k + 1 < m.v.size(); ++k)
    m.a[k] = (m.v[k + 1] - m.v[k]) / dt;
  m.altitude.resize(m.v.size(), 0.0);
  for (std::size_t k = 0; k + 1 < m.v.size(); ++k)
    m.altitude[k + 1] = m.altitude[k] + m.v[k] * std::sin(m.grade[k]) * dt;
  return m;
}

DrivingMission load_mission(const std::string& path, double resample_dt) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open mission file: " + path);
  std::string line;
  if (!std::getline(is, line)) throw ParseError("empty mission file: " + path);
  const auto header = split_csv(line);

  auto col = [&](const std::string& name) -> int {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  };
  const int c_time = col("time_s");
  const int c_mps = col("speed_mps");
  const int c_kmh = col("speed_kmh");
  const int c_rad = col("grade_rad");
  const int c_pct = col("grade_percent");
  const int c_alt = col("altitude_m");
  if (c_time < 0) throw ParseError("missing time_s column in " + path);
  if (c_mps < 0 && c_kmh < 0)
    throw ParseError("missing speed_mps/speed_kmh column in " + path);

  std::vector<double> t, v, g, alt;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto row = split_csv(line);
    if (row.size() < header.size())
      throw ParseError(path + ": short row at line " + std::to_string(lineno));
    auto num = [&](int c) {
      try {
        return std::stod(row[static_cast<std::size_t>(c)]);
      } catch (const std::exception&) {
        throw ParseError(path + ": bad number at line " + std::to_string(lineno));
      }
    };
    t.push_back(num(c_time));
    const double speed = c_mps >= 0 ? num(c_mps) : num(c_kmh) * kKmhToMps;
    if (speed < 0.0)
      throw NegativeSpeed(path + ": negative speed at line " + std::to_string(lineno));
    v.push_back(speed);
    if (c_rad >= 0) g.push_back(num(c_rad));
    else if (c_pct >= 0) g.push_back(std::atan(num(c_pct) / 100.0));
    if (c_alt >= 0) alt.push_back(num(c_alt));
  }
  if (t.size() < 2) throw ParseError("mission needs >= 2 samples: " + path);
  for (std::size_t i = 1; i < t.size(); ++i)
    if (!(t[i] > t[i - 1]))
      throw NonMonotonicTime(path + ": time not strictly increasing");

  // Grade from altitude by central difference over distance.
  if (g.empty() && !alt.empty()) {
    std::vector<double> dist(t.size(), 0.0);
    for (std::size_t i = 1; i < t.size(); ++i)
      dist[i] = dist[i - 1] + 0.5 * (v[i] + v[i - 1]) * (t[i] - t[i - 1]);
    g.resize(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
      const std::size_t lo = i > 0 ? i - 1 : 0;
      const std::size_t hi = i + 1 < t.size() ? i + 1 : t.size() - 1;
      const double dd = dist[hi] - dist[lo];
      g[i] = dd > 0.0 ? std::atan((alt[hi] - alt[lo]) / dd) : 0.0;
    }
  }
  if (g.empty()) g.assign(t.size(), 0.0);

  // Uniform resampling; the final source sample is always kept so endpoint
  // speeds are preserved exactly.
  const double span = t.back() - t.front();
  const auto steps =
      static_cast<std::size_t>(std::ceil(span / resample_dt - 1e-9));
  std::vector<double> rv(steps + 1), rg(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    const double tk = std::min(t.front() + resample_dt * static_cast<double>(k),
                               t.back());
    rv[k] = lerp_at(t, v, tk);
    rg[k] = lerp_at(t, g, tk);
  }
  return finalize_mission(path, resample_dt, std::move(rv), std::move(rg));
}

DrivingMission make_highway_cycle(double accel_duration, double cruise_duration) {
  const double v_cruise = 142.0 * kKmhToMps;
  // Ramp eases off near the top so the request stays within engine limits.
  const std::vector<double> frac = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  const std::vector<double> ramp_v = {0.0, 15.0, 26.0, 33.0, 37.0, v_cruise};
  const double total = accel_duration + cruise_duration;
  const auto n = static_cast<std::size_t>(std::llround(total)) + 1;
  std::vector<double> v(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double tk = static_cast<double>(k);
    v[k] = tk < accel_duration ? lerp_at(frac, ramp_v, tk / accel_duration)
                               : v_cruise;
  }
  std::vector<double> grade(n, 0.0);
  return finalize_mission("highway", 1.0, std::move(v), std::move(grade));
}

DrivingMission make_mountain_cycle(double climb_m, double cruise_kmh,
                                   int hairpin_slowdowns) {
  const double v_c = cruise_kmh * kKmhToMps;
  const double climb_grade = 0.075;  // rad
  const double ramp_s = 30.0;
  const int hairpin_period = 150;  // s between slowdown starts

  std::vector<double> v, grade;
  auto push = [&](double speed, double g) {
    v.push_back(speed);
    grade.push_back(g);
  };

  for (int k = 0; k < static_cast<int>(ramp_s); ++k)
    push(v_c * k / ramp_s, 0.0);

  double altitude = 0.0;
  int hairpins_done = 0;
  int phase = 0;  // seconds into the current hairpin period
  while (altitude < climb_m) {
    double speed = v_c;
    if (hairpins_done < hairpin_slowdowns) {
      // 123 s cruise, 10 s deceleration, 5 s creep, 12 s recovery.
      if (phase >= 123 && phase < 133)
        speed = v_c + (7.0 - v_c) * (phase - 123 + 1) / 10.0;
      else if (phase >= 133 && phase < 138)
        speed = 7.0;
      else if (phase >= 138 && phase < 150)
        speed = 7.0 + (v_c - 7.0) * (phase - 138 + 1) / 12.0;
      if (++phase >= hairpin_period) {
        phase = 0;
        ++hairpins_done;
      }
    }
    push(speed, climb_grade);
    altitude += speed * std::sin(climb_grade);
  }

  const double v_top = v.back();
  for (int k = 1; k <= 20; ++k) push(std::max(0.0, v_top * (1.0 - k / 20.0)), 0.0);
  for (int k = 0; k < 5; ++k) push(0.0, 0.0);

  return finalize_mission("mountain", 1.0, std::move(v), std::move(grade));
}

DrivingMission make_mixed_load_cycle() {
  // Urban stop-and-go with hard launches, rural with overtakes, then a
  // 90 km/h highway stretch; 1800 samples.
  static const std::vector<std::pair<double, double>> pts = {
      {0, 0},     {5, 0},     {9, 40},    {12, 55},   {35, 55},   {43, 0},
      {50, 0},    {54, 43},   {58, 58},   {80, 58},   {88, 0},    {95, 0},
      {99, 42},   {125, 42},  {130, 20},  {134, 52},  {158, 52},  {166, 0},
      {173, 0},   {177, 38},  {181, 56},  {205, 56},  {213, 0},   {220, 0},
      {224, 45},  {250, 45},  {258, 0},   {265, 0},   {269, 40},  {273, 58},
      {276, 65},  {300, 65},  {309, 0},   {316, 0},   {320, 44},  {345, 44},
      {353, 0},   {360, 0},   {364, 42},  {368, 60},  {392, 60},  {400, 0},
      {407, 0},   {411, 36},  {416, 58},  {440, 58},  {448, 0},   {455, 0},
      {459, 45},  {463, 62},  {490, 62},  {499, 0},   {506, 0},   {510, 40},
      {514, 57},  {540, 57},  {548, 0},   {555, 0},   {559, 46},  {585, 46},
      {592, 20},  {596, 50},  {620, 50},  {628, 0},   {640, 0},   {646, 50},
      {656, 75},  {700, 75},  {710, 60},  {745, 60},  {750, 85},  {780, 85},
      {790, 65},  {830, 65},  {835, 88},  {865, 88},  {875, 70},  {920, 70},
      {925, 90},  {950, 90},  {962, 55},  {1000, 55}, {1005, 78}, {1040, 78},
      {1050, 62}, {1090, 62}, {1095, 84}, {1130, 84}, {1150, 75}, {1165, 90},
      {1540, 90}, {1560, 70}, {1580, 88}, {1620, 88}, {1655, 60}, {1680, 30},
      {1700, 30}, {1720, 0},  {1799, 0},
  };
  DrivingMission m = from_breakpoints("mixed-load", pts);
  return m;
}

DrivingMission builtin_mission(const std::string& name) {
  if (name == "highway") return make_highway_cycle();
  if (name == "mountain") return make_mountain_cycle();
  if (name == "mixed-load") return make_mixed_load_cycle();
  throw ParseError("unknown builtin mission: " + name);
}

}  // namespace h2ems
