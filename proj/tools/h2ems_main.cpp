#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "h2ems/analysis.hpp"
#include "h2ems/dp.hpp"
#include "h2ems/map2d.hpp"
#include "h2ems/mission.hpp"
#include "h2ems/powertrain.hpp"

namespace fs = std::filesystem;
using namespace h2ems;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitInternal = 3;

struct Options {
  std::vector<std::string> archs;
  std::string mission = "mixed-load";
  std::string maps = "synthetic";
  int mu_count = 25;
  int soc_points = 201;
  std::string out = "h2ems_out";
  double nox_target = 0.10;
  int threads = 0;
  double torque_step = 2.0;
  double p_aux = 300.0;
};

void add_common_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--arch", o.archs,
                  "Architecture (base|parallel|series|mixed), repeatable");
  cmd->add_option("--mission", o.mission, "Mission CSV path or builtin name");
  cmd->add_option("--maps", o.maps, "Map directory or 'synthetic'");
  cmd->add_option("--mu-count", o.mu_count, "Number of NOx weights (incl. 0)");
  cmd->add_option("--soc-points", o.soc_points, "SoC grid points");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--nox-target", o.nox_target, "NOx target fraction of baseline");
  cmd->add_option("--threads", o.threads, "Worker threads (0 = auto)");
  cmd->add_option("--torque-step", o.torque_step, "Engine torque grid step, N*m");
  cmd->add_option("--p-aux", o.p_aux, "Constant auxiliary power, W");
}

MapSet load_maps(const Options& o) {
  if (o.maps == "synthetic") return synthesize_default_maps();
  return read_map_dir(o.maps);
}

DrivingMission load_mission_arg(const Options& o) {
  if (o.mission == "highway" || o.mission == "mountain" || o.mission == "mixed-load")
    return builtin_mission(o.mission);
  return load_mission(o.mission);
}

DpConfig make_dp_config(const Options& o) {
  DpConfig cfg;
  cfg.soc_grid_points = o.soc_points;
  cfg.engine_torque_step = o.torque_step;
  cfg.mu_list = default_mu_schedule(o.mu_count);
  cfg.threads = o.threads;
  return cfg;
}

void write_json(const nlohmann::ordered_json& j, const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw ParseError("cannot open for writing: " + path.string());
  os << j.dump(2) << "\n";
}

void write_sidecar(const Options& o, const fs::path& dir) {
  nlohmann::ordered_json j;
  j["missions"] = o.mission;
  j["maps"] = o.maps;
  j["architectures"] = o.archs;
  j["mu_count"] = o.mu_count;
  j["soc_points"] = o.soc_points;
  j["nox_target"] = o.nox_target;
  j["torque_step"] = o.torque_step;
  j["p_aux"] = o.p_aux;
  write_json(j, dir / "run_meta.json");
}

int cmd_baseline(Options& o) {
  const MapSet maps = load_maps(o);
  BatterySpec battery;
  battery.p_aux = o.p_aux;
  const DrivingMission mission = load_mission_arg(o);

  Baseline base;
  try {
    base = compute_baseline(maps, battery, mission);
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: base vehicle cannot meet the request at time index "
              << e.time_index << "\n";
    return kExitInfeasible;
  }

  fs::create_directories(o.out);
  nlohmann::ordered_json j;
  j["mission"] = mission.name;
  j["h2_kg"] = base.h2_kg;
  j["nox_mg"] = base.nox_mg;
  write_json(j, fs::path(o.out) / "baseline.json");
  write_trace_csv(base.trajectory, mission.dt, (fs::path(o.out) / "baseline_trace.csv").string());
  write_sidecar(o, o.out);
  std::cout << "baseline: H2 " << base.h2_kg << " kg, NOx " << base.nox_mg
            << " mg -> " << o.out << "\n";
  return kExitOk;
}

struct ArchResult {
  ParetoFront front;
  KpiReport kpis;
};

int run_fronts(Options& o, const char* merged_name) {
  if (o.archs.empty()) o.archs = {"mixed"};
  const MapSet maps = load_maps(o);
  BatterySpec battery;
  battery.p_aux = o.p_aux;
  const DrivingMission mission = load_mission_arg(o);
  const DpConfig cfg = make_dp_config(o);

  Baseline base;
  try {
    base = compute_baseline(maps, battery, mission);
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: base vehicle cannot meet the request at time index "
              << e.time_index << "\n";
    return kExitInfeasible;
  }

  std::map<std::string, ArchResult> results;
  for (const std::string& name : o.archs) {
    const ArchitectureSpec spec = ArchitectureSpec::make(arch_kind_from_string(name));
    try {
      ArchResult r;
      r.front = sweep_pareto(spec, maps, battery, mission, cfg);
      r.kpis = extract_calibrations(r.front, base, o.nox_target);
      results[name] = std::move(r);
      std::cout << name << ": " << results[name].front.points.size()
                << " front points\n";
    } catch (const InfeasibleError& e) {
      std::cerr << name << ": infeasible at time index " << e.time_index << "\n";
    }
  }
  if (results.empty()) return kExitInfeasible;

  fs::create_directories(o.out);
  const fs::path dir(o.out);

  for (const auto& [name, r] : results) {
    write_front_csv(r.front, base, (dir / ("front_" + name + ".csv")).string());

    const ParetoFront& f = r.front;
    const Trajectory* s_square =
        f.s_square >= 0 ? &f.points[static_cast<std::size_t>(f.s_square)].trajectory
                        : nullptr;
    OperatingStats stats;
    if (s_square)
      stats = operating_point_stats(*s_square, maps.engine.limits, mission.dt);
    write_json(make_report(mission.name, name, base, f, r.kpis, stats),
               dir / ("report_" + name + ".json"));

    auto trace = [&](const Trajectory& t, const std::string& tag) {
      write_trace_csv(t, mission.dt,
                      (dir / ("trace_" + name + "_" + tag + ".csv")).string());
    };
    if (f.s_star >= 0) trace(f.points[static_cast<std::size_t>(f.s_star)].trajectory, "s_star");
    if (s_square) trace(*s_square, "s_square");
    if (r.kpis.s_triangle_reachable) {
      // Trace of the cheapest solved point meeting the NOx target.
      const double target = o.nox_target * base.nox_mg;
      const ParetoPoint* pick = nullptr;
      for (const auto& p : f.points)
        if (p.nox_mg <= target && (!pick || p.mu < pick->mu)) pick = &p;
      if (pick) trace(pick->trajectory, "s_triangle");
    }
  }

  if (merged_name) {
    std::ofstream os(dir / merged_name);
    os << "architecture,mu,h2_kg,nox_mg,h2_norm,nox_norm\n";
    for (const auto& [name, r] : results)
      for (const auto& p : r.front.points) {
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      name.c_str(), p.mu, p.h2_kg, p.nox_mg,
                      base.h2_kg > 0 ? p.h2_kg / base.h2_kg : 0.0,
                      base.nox_mg > 0 ? p.nox_mg / base.nox_mg : 0.0);
        os << buf;
      }
  }
  write_sidecar(o, dir);
  return kExitOk;
}

int cmd_export_maps(Options& o) {
  const MapSet maps = load_maps(o);
  fs::create_directories(o.out);
  write_map_dir(maps, o.out);
  std::cout << "maps written to " << o.out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"H2 powertrain potential study: baselines and H2/NOx Pareto fronts"};
  app.set_config("--config", "", "Config file with long-option keys");

  Options o;
  auto* baseline = app.add_subcommand("baseline", "Simulate the base vehicle");
  auto* pareto = app.add_subcommand("pareto", "Sweep NOx weights into a Pareto front");
  auto* compare = app.add_subcommand("compare", "Merge fronts of several architectures");
  auto* export_maps = app.add_subcommand("export-maps", "Write the map set as CSV");
  for (CLI::App* cmd : {baseline, pareto, compare, export_maps})
    add_common_flags(cmd, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (baseline->parsed()) return cmd_baseline(o);
    if (pareto->parsed()) return run_fronts(o, nullptr);
    if (compare->parsed()) return run_fronts(o, "compare.csv");
    if (export_maps->parsed()) return cmd_export_maps(o);
    // Zero-argument demo: mixed architecture on the bundled mixed-load cycle.
    o.archs = {"mixed"};
    return run_fronts(o, nullptr);
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible problem at time index " << e.time_index << "\n";
    return kExitInfeasible;
  } catch (const NonMonotonicTime& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NegativeSpeed& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
