#include "h2ems/map2d.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace h2ems {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

bool strictly_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] > v[i - 1])) return false;
  return true;
}

// Index of the cell containing x; axis strictly increasing, x in range.
std::size_t cell_index(const std::vector<double>& axis, double x) {
  auto it = std::upper_bound(axis.begin(), axis.end(), x);
  std::size_t i = static_cast<std::size_t>(it - axis.begin());
  if (i == 0) return 0;
  if (i >= axis.size()) return axis.size() - 2;
  return i - 1;
}

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<double> parse_double_list(const std::string& s, const char* what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw ParseError(std::string("bad number in ") + what + ": " + tok);
    }
  }
  return out;
}

}  // namespace

std::string to_string(MapKind kind) {
  switch (kind) {
    case MapKind::EngineFuel: return "EngineFuel";
    case MapKind::EngineNox: return "EngineNOx";
    case MapKind::MotorLoss: return "MotorLoss";
    case MapKind::GeneratorLoss: return "GeneratorLoss";
  }
  return "?";
}

MapKind map_kind_from_string(const std::string& name) {
  if (name == "EngineFuel") return MapKind::EngineFuel;
  if (name == "EngineNOx") return MapKind::EngineNox;
  if (name == "MotorLoss") return MapKind::MotorLoss;
  if (name == "GeneratorLoss") return MapKind::GeneratorLoss;
  throw ParseError("unknown map kind: " + name);
}

ComponentMap2D::ComponentMap2D(MapKind kind, std::vector<double> speed_axis,
                               std::vector<double> torque_axis,
                               std::vector<double> values)
    : kind_(kind),
      speed_(std::move(speed_axis)),
      torque_(std::move(torque_axis)),
      values_(std::move(values)) {
  require(speed_.size() >= 2 && torque_.size() >= 2, "map axes need >= 2 nodes");
  require(strictly_increasing(speed_), "speed axis must be strictly increasing");
  require(strictly_increasing(torque_), "torque axis must be strictly increasing");
  require(values_.size() == speed_.size() * torque_.size(),
          "value matrix does not match axes");
  for (double v : values_)
    require(std::isfinite(v) && v >= 0.0, "map values must be finite and >= 0");
}

std::optional<double> ComponentMap2D::lookup(double omega, double torque) const {
  if (!in_range(omega, torque)) return std::nullopt;
  const std::size_t i = cell_index(speed_, omega);
  const std::size_t j = cell_index(torque_, torque);
  const double x0 = speed_[i], x1 = speed_[i + 1];
  const double y0 = torque_[j], y1 = torque_[j + 1];
  const double tx = (omega - x0) / (x1 - x0);
  const double ty = (torque - y0) / (y1 - y0);
  const double v00 = at(j, i), v01 = at(j, i + 1);
  const double v10 = at(j + 1, i), v11 = at(j + 1, i + 1);
  const double lo = v00 + tx * (v01 - v00);
  const double hi = v10 + tx * (v11 - v10);
  return lo + ty * (hi - lo);
}

double interp_curve(const std::vector<double>& x, const std::vector<double>& y,
                    double xi) {
  if (xi <= x.front()) return y.front();
  if (xi >= x.back()) return y.back();
  const std::size_t i = cell_index(x, xi);
  const double t = (xi - x[i]) / (x[i + 1] - x[i]);
  return y[i] + t * (y[i + 1] - y[i]);
}

EngineMaps synthesize_engine_maps(const EngineMapParams& p) {
  if (!(p.omega_min > 0) || !(p.omega_max > p.omega_min))
    throw InvalidCalibration("engine speed range is empty");
  if (p.rated_power_w > p.peak_torque_nm * p.omega_max)
    throw InvalidCalibration(
        "rated power inconsistent with peak torque and speed range");

  std::vector<double> speed;
  for (double w = p.omega_min; w < p.omega_max + 0.5 * p.speed_step; w += p.speed_step)
    speed.push_back(std::min(w, p.omega_max));
  std::vector<double> torque;
  for (double t = 0.0; t < p.peak_torque_nm + 0.5 * p.torque_step; t += p.torque_step)
    torque.push_back(std::min(t, p.peak_torque_nm));

  auto indicated_eff = [&](double w) {
    double e = p.peak_indicated_efficiency;
    const double lo = std::max(0.0, p.low_speed_knee - w);
    const double hi = std::max(0.0, w - p.high_speed_knee);
    e -= p.low_speed_droop * lo * lo + p.high_speed_droop * hi * hi;
    return e;
  };
  auto friction_torque = [&](double w) {
    return p.friction_torque_nm + p.friction_torque_slope * w;
  };
  auto isoline = [&](double w) {
    return p.isoline_base_nm + p.isoline_slope * std::max(0.0, w - p.isoline_knee);
  };

  std::vector<double> fuel(speed.size() * torque.size());
  std::vector<double> nox(speed.size() * torque.size());
  for (std::size_t j = 0; j < torque.size(); ++j) {
    for (std::size_t i = 0; i < speed.size(); ++i) {
      const double w = speed[i], t = torque[j];
      const double p_loss = friction_torque(w) * w;
      fuel[j * speed.size() + i] =
          (t * w + p_loss) / (indicated_eff(w) * kHydrogenLhvJPerKg);

      const double t_lean = isoline(w);
      double rate;
      if (t <= t_lean) {
        const double x = t / t_lean;
        const double x2 = x * x;
        rate = p.lean_floor_mg_s + p.lean_rise_mg_s * x2 * x2 * x2;
      } else {
        const double x = (t - t_lean) / (p.peak_torque_nm - t_lean);
        rate = p.lean_floor_mg_s + p.lean_rise_mg_s + p.steep_gain_mg_s * x * x;
      }
      nox[j * speed.size() + i] = rate;
    }
  }

  EngineLimits limits;
  limits.omega_min = p.omega_min;
  limits.omega_max = p.omega_max;
  limits.speed_axis = speed;
  for (double w : speed) {
    limits.torque_max_curve.push_back(std::min(p.peak_torque_nm, p.rated_power_w / w));
    limits.ultra_lean_isoline.push_back(isoline(w));
  }
  for (std::size_t i = 0; i < speed.size(); ++i)
    if (limits.ultra_lean_isoline[i] > limits.torque_max_curve[i])
      throw InvalidCalibration("ultra-lean isoline exceeds the max-torque curve");

  return EngineMaps{
      ComponentMap2D(MapKind::EngineFuel, speed, torque, std::move(fuel)),
      ComponentMap2D(MapKind::EngineNox, speed, torque, std::move(nox)),
      std::move(limits)};
}

MachineMaps synthesize_machine_maps(double rated_power_w) {
  const double omega_max = 1300.0;
  const double peak_torque = 350.0;
  const double loss_torque_coeff = 0.25;    // W per (N*m)^2
  const double loss_speed_coeff = 1.4e-3;   // W per (rad/s)^2

  std::vector<double> speed;
  for (double w = 0.0; w <= omega_max + 1e-9; w += 50.0) speed.push_back(w);
  std::vector<double> torque;
  for (double t = -360.0; t <= 360.0 + 1e-9; t += 24.0) torque.push_back(t);

  std::vector<double> loss(speed.size() * torque.size());
  for (std::size_t j = 0; j < torque.size(); ++j)
    for (std::size_t i = 0; i < speed.size(); ++i)
      loss[j * speed.size() + i] = loss_torque_coeff * torque[j] * torque[j] +
                                   loss_speed_coeff * speed[i] * speed[i];

  MachineLimits limits;
  limits.omega_max = omega_max;
  limits.speed_axis = speed;
  for (double w : speed)
    limits.torque_max_curve.push_back(
        w > 0 ? std::min(peak_torque, rated_power_w / w) : peak_torque);

  ComponentMap2D motor(MapKind::MotorLoss, speed, torque, loss);
  ComponentMap2D gen(MapKind::GeneratorLoss, std::move(speed), std::move(torque),
                     std::move(loss));
  return MachineMaps{std::move(motor), std::move(gen), std::move(limits)};
}

MapSet synthesize_default_maps() {
  return MapSet{synthesize_engine_maps(), synthesize_machine_maps()};
}

void write_map_csv(const ComponentMap2D& map, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ParseError("cannot open for writing: " + path);
  os << "# kind: " << to_string(map.kind()) << "\n";
  os << "# speed_axis: ";
  for (std::size_t i = 0; i < map.speed_axis().size(); ++i)
    os << (i ? "," : "") << fmt17(map.speed_axis()[i]);
  os << "\n# torque_axis: ";
  for (std::size_t i = 0; i < map.torque_axis().size(); ++i)
    os << (i ? "," : "") << fmt17(map.torque_axis()[i]);
  os << "\n";
  for (std::size_t j = 0; j < map.torque_axis().size(); ++j) {
    for (std::size_t i = 0; i < map.speed_axis().size(); ++i)
      os << (i ? "," : "") << fmt17(map.at(j, i));
    os << "\n";
  }
}

ComponentMap2D read_map_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open map file: " + path);
  std::string line;
  auto header_value = [&](const char* prefix) {
    if (!std::getline(is, line)) throw ParseError("truncated map file: " + path);
    const std::string pre(prefix);
    if (line.rfind(pre, 0) != 0)
      throw ParseError("expected header '" + pre + "' in " + path);
    return line.substr(pre.size());
  };
  const MapKind kind = map_kind_from_string(header_value("# kind: "));
  const auto speed = parse_double_list(header_value("# speed_axis: "), "speed_axis");
  const auto torque = parse_double_list(header_value("# torque_axis: "), "torque_axis");
  std::vector<double> values;
  values.reserve(speed.size() * torque.size());
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto row = parse_double_list(line, "value row");
    if (row.size() != speed.size())
      throw ParseError("value row width mismatch in " + path);
    values.insert(values.end(), row.begin(), row.end());
  }
  if (values.size() != speed.size() * torque.size())
    throw ParseError("value matrix height mismatch in " + path);
  return ComponentMap2D(kind, speed, torque, std::move(values));
}

void write_engine_limits_csv(const EngineLimits& limits, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ParseError("cannot open for writing: " + path);
  os << "# omega_min: " << fmt17(limits.omega_min) << "\n";
  os << "# omega_max: " << fmt17(limits.omega_max) << "\n";
  os << "speed,torque_max,ultra_lean_isoline\n";
  for (std::size_t i = 0; i < limits.speed_axis.size(); ++i)
    os << fmt17(limits.speed_axis[i]) << ',' << fmt17(limits.torque_max_curve[i])
       << ',' << fmt17(limits.ultra_lean_isoline[i]) << "\n";
}

EngineLimits read_engine_limits_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open limits file: " + path);
  EngineLimits limits;
  std::string line;
  if (!std::getline(is, line) || line.rfind("# omega_min: ", 0) != 0)
    throw ParseError("bad limits header in " + path);
  limits.omega_min = std::stod(line.substr(13));
  if (!std::getline(is, line) || line.rfind("# omega_max: ", 0) != 0)
    throw ParseError("bad limits header in " + path);
  limits.omega_max = std::stod(line.substr(13));
  std::getline(is, line);  // column header
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto row = parse_double_list(line, "limits row");
    if (row.size() != 3) throw ParseError("bad limits row in " + path);
    limits.speed_axis.push_back(row[0]);
    limits.torque_max_curve.push_back(row[1]);
    limits.ultra_lean_isoline.push_back(row[2]);
  }
  if (limits.speed_axis.size() < 2) throw ParseError("empty limits file: " + path);
  return limits;
}

void write_map_dir(const MapSet& maps, const std::string& dir) {
  write_map_csv(maps.engine.fuel, dir + "/engine_fuel.csv");
  write_map_csv(maps.engine.nox, dir + "/engine_nox.csv");
  write_map_csv(maps.machine.motor_loss, dir + "/motor_loss.csv");
  write_map_csv(maps.machine.generator_loss, dir + "/generator_loss.csv");
  write_engine_limits_csv(maps.engine.limits, dir + "/engine_limits.csv");
  // Machine limits reuse the engine limits format with a zero isoline column.
  EngineLimits m;
  m.omega_min = 0.0;
  m.omega_max = maps.machine.limits.omega_max;
  m.speed_axis = maps.machine.limits.speed_axis;
  m.torque_max_curve = maps.machine.limits.torque_max_curve;
  m.ultra_lean_isoline.assign(m.speed_axis.size(), 0.0);
  write_engine_limits_csv(m, dir + "/machine_limits.csv");
}

MapSet read_map_dir(const std::string& dir) {
  MapSet maps{
      EngineMaps{read_map_csv(dir + "/engine_fuel.csv"),
                 read_map_csv(dir + "/engine_nox.csv"),
                 read_engine_limits_csv(dir + "/engine_limits.csv")},
      MachineMaps{read_map_csv(dir + "/motor_loss.csv"),
                  read_map_csv(dir + "/generator_loss.csv"), MachineLimits{}}};
  const EngineLimits m = read_engine_limits_csv(dir + "/machine_limits.csv");
  maps.machine.limits.omega_max = m.omega_max;
  maps.machine.limits.speed_axis = m.speed_axis;
  maps.machine.limits.torque_max_curve = m.torque_max_curve;
  return maps;
}

}  // namespace h2ems
