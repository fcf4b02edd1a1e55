#include "h2ems/dp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace h2ems {

namespace {

constexpr double kBig = 1e30;
constexpr double kBigThresh = 1e29;


struct SocGrid {
  double lo = 0.0, hi = 1.0, cell = 1.0;
  int n = 2;

  double at(int i) const { return lo + cell * i; }
  int nearest(double s) const {
    int i = static_cast<int>(std::lround((s - lo) / cell));
    return std::clamp(i, 0, n - 1);
  }
};

SocGrid make_grid(const BatterySpec& battery, const DpConfig& cfg) {
  SocGrid g;
  g.lo = battery.soc_min;
  g.hi = battery.soc_max;
  g.n = cfg.soc_grid_points;
  g.cell = (g.hi - g.lo) / (g.n - 1);
  return g;
}

void enumerate_controls(const ArchitectureSpec& spec, const MapSet& maps,
                        const DpConfig& cfg, double v, double t_req,
                        std::vector<ControlDecision>& out) {
  out.clear();
  if (spec.kind == ArchKind::Base) {
    ControlDecision u;
    u.mode = Mode::Parallel;
    u.q = 0.0;
    out.push_back(u);
    return;
  }
  const EngineLimits& el = maps.engine.limits;
  const double step = cfg.engine_torque_step;
  for (Mode m : spec.allowed_modes) {
    switch (m) {
      case Mode::Ev: {
        ControlDecision u;
        u.mode = Mode::Ev;
        u.q = 1.0;
        out.push_back(u);
        if (t_req < 0.0)
          for (double q : {0.5, 0.0}) {
            u.q = q;
            out.push_back(u);
          }
        break;
      }
      case Mode::Parallel: {
        const int gear = spec.uses_gearbox() ? spec.gearbox.gear_for(v) : 0;
        const double omega_e = std::max(
            v / spec.r_w * spec.gamma_fd * spec.engine_ratio(gear), el.omega_min);
        if (omega_e > el.omega_max) break;
        const double tmax = el.max_torque(omega_e);
        ControlDecision u;
        u.mode = Mode::Parallel;
        u.gear = gear;
        u.has_engine_torque = true;
        double t = 0.0;
        for (; t < tmax - 1e-9; t += step) {
          u.engine_torque = t;
          out.push_back(u);
        }
        u.engine_torque = tmax;
        out.push_back(u);
        break;
      }
      case Mode::Series: {
        const int g = std::max(cfg.generator_speed_count, 2);
        for (int i = 0; i < g; ++i) {
          const double omega_e =
              el.omega_min + (el.omega_max - el.omega_min) * i / (g - 1);
          const double tmax = el.max_torque(omega_e);
          ControlDecision u;
          u.mode = Mode::Series;
          u.q = 1.0;
          u.omega_gen = omega_e * spec.gamma_gen;
          u.has_engine_torque = true;
          double t = step;
          for (; t < tmax - 1e-9; t += step) {
            u.engine_torque = t;
            out.push_back(u);
          }
          u.engine_torque = tmax;
          out.push_back(u);
        }
        break;
      }
    }
  }
}

// Deterministic tie-break key: lower NOx, then lower |T_gen|, then lower mode
// index; the trailing fields only pin a total order.
struct SortKey {
  double nox, abs_t_gen, fuel, p_b, t_e, omega_gen, q;
  int mode;

  bool operator<(const SortKey& o) const {
    auto tup = [](const SortKey& k) {
      return std::tie(k.nox, k.abs_t_gen, k.mode, k.fuel, k.p_b, k.t_e,
                      k.omega_gen, k.q);
    };
    return tup(*this) < tup(o);
  }
};

}  // namespace

std::vector<double> default_mu_schedule(int count) {
  std::vector<double> mus = {0.0};
  const int n = count - 1;
  for (int j = 0; j < n; ++j) {
    const double ex = n == 1 ? -1.0 : -6.0 + 5.0 * j / (n - 1);
    mus.push_back(std::pow(10.0, ex));
  }
  return mus;
}

ControlDecision StageEntry::to_control() const {
  ControlDecision u;
  u.mode = static_cast<Mode>(mode);
  u.q = q;
  u.gear = gear;
  u.omega_gen = omega_gen;
  u.has_engine_torque = has_engine_torque != 0;
  u.engine_torque = t_e;
  return u;
}

StageTable build_stage_table(const ArchitectureSpec& spec, const MapSet& maps,
                             const BatterySpec& battery, const DrivingMission& mission,
                             const DpConfig& cfg) {
  StageTable table;
  table.dt = mission.dt;
  const std::size_t n_stages = mission.size() - 1;
  table.stages.resize(n_stages);
  const double p_aux = spec.has_battery() ? battery.p_aux : 0.0;

  std::vector<ControlDecision> controls;
  struct Cand {
    StageEntry entry;
    SortKey key;
  };
  std::vector<Cand> cands;

  for (std::size_t k = 0; k < n_stages; ++k) {
    const double v = mission.v[k], a = mission.a[k], grade = mission.grade[k];
    enumerate_controls(spec, maps, cfg, v, torque_request(spec, v, a, grade),
                       controls);
    cands.clear();
    for (const ControlDecision& u : controls) {
      const detail::MechStage st =
          detail::evaluate_mechanical(spec, maps, p_aux, v, a, grade, u);
      if (!st.feasible) continue;
      const StageOutcome& o = st.outcome;
      Cand c;
      c.entry.fuel = static_cast<float>(o.mdot_fuel);
      c.entry.nox = static_cast<float>(o.mdot_nox);
      c.entry.p_b = static_cast<float>(o.p_batt);
      c.entry.t_e = static_cast<float>(o.t_e);
      c.entry.omega_gen = static_cast<float>(u.omega_gen);
      c.entry.q = static_cast<float>(u.q);
      c.entry.mode = static_cast<std::uint8_t>(u.mode);
      c.entry.gear = static_cast<std::uint8_t>(u.gear);
      c.entry.has_engine_torque = u.has_engine_torque ? 1 : 0;
      c.key = SortKey{o.mdot_nox, std::abs(o.t_gen),  o.mdot_fuel,
                      o.p_batt,   o.t_e,              u.omega_gen,
                      u.q,        static_cast<int>(u.mode)};
      cands.push_back(c);
    }

    if (cfg.prune_stage_entries && cands.size() > 8) {
      // Bin by battery power; within a bin keep only the (fuel, NOx) Pareto
      // set. Exactness is bounded by the bin width (tiny next-SoC error).
      std::sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) {
        return std::tie(x.key.p_b, x.key.fuel, x.key.nox, x.key) <
               std::tie(y.key.p_b, y.key.fuel, y.key.nox, y.key);
      });
      std::vector<Cand> kept;
      std::size_t i = 0;
      while (i < cands.size()) {
        const double bin_lo = cands[i].key.p_b;
        std::size_t j = i;
        while (j < cands.size() &&
               cands[j].key.p_b < bin_lo + cfg.prune_bin_width_w)
          ++j;
        std::vector<Cand> bin(cands.begin() + i, cands.begin() + j);
        std::sort(bin.begin(), bin.end(), [](const Cand& x, const Cand& y) {
          return std::tie(x.key.fuel, x.key.nox, x.key) <
                 std::tie(y.key.fuel, y.key.nox, y.key);
        });
        double best_nox = kBig;
        for (const Cand& c : bin)
          if (c.key.nox < best_nox) {
            kept.push_back(c);
            best_nox = c.key.nox;
          }
        i = j;
      }
      cands = std::move(kept);
    }

    std::stable_sort(cands.begin(), cands.end(),
                     [](const Cand& x, const Cand& y) { return x.key < y.key; });
    auto& stage = table.stages[k];
    stage.reserve(cands.size());
    for (const Cand& c : cands) stage.push_back(c.entry);
  }
  return table;
}

namespace {

struct MuSolve {
  double mu = 0.0;
  bool feasible = false;
  std::size_t infeasible_index = 0;
  Trajectory traj;
};

/// Backward value iteration for a batch of weights sharing one transition
/// precomputation per stage, followed by one forward pass per weight.
void solve_batch(const ArchitectureSpec& spec, const MapSet& maps,
                 const BatterySpec& battery, const DrivingMission& mission,
                 const StageTable& table, const DpConfig& cfg,
                 std::vector<MuSolve>& batch) {
  const SocGrid grid = make_grid(battery, cfg);
  const double band = cfg.terminal_band < 0.0 ? grid.cell : cfg.terminal_band;
  const double band_lo = cfg.terminal_soc - 1e-12;
  const double band_hi = cfg.terminal_soc + band + 1e-12;
  const double dt = table.dt;
  const std::size_t n_stages = table.stages.size();
  const int p = grid.n;
  const std::size_t m_count = batch.size();

  // Cost-to-go per weight; row k holds the optimal suffix cost from sample k.
  std::vector<std::vector<double>> j_tab(
      m_count, std::vector<double>(n_stages * static_cast<std::size_t>(p), kBig));

  auto in_band = [&](double s) { return s >= band_lo && s <= band_hi; };

  // Backward-feasible SoC corridor per sample: a node can carry a finite
  // cost-to-go only if the terminal band is actually reachable from it, and
  // blending across the corridor edge (where one neighbouring node holds the
  // infeasibility sentinel) must not manufacture reachability. The corridor
  // is found by inverting the monotone SoC transition of each control.
  const double teps = 1e-12;
  std::vector<double> flo(n_stages + 1, kBig), fhi(n_stages + 1, -kBig);
  flo[n_stages] = band_lo;
  fhi[n_stages] = band_hi;

  auto s2_of = [&](double s, double p_b, bool& ok) {
    double i_b, rate;
    ok = detail::battery_step(battery, s, p_b, i_b, rate);
    return ok ? s + rate * dt : 0.0;
  };

  // Widen [flo[k], fhi[k]] with the SoC interval that control power p_b maps
  // into the stage-(k+1) corridor.
  auto widen_corridor = [&](std::size_t k, double p_b) {
    const double lo1 = flo[k + 1], hi1 = fhi[k + 1];
    double lo = grid.lo, hi = grid.hi;
    bool ok_hi = false, ok_lo = false;
    const double s2hi = s2_of(hi, p_b, ok_hi);
    if (!ok_hi) return;  // open-circuit voltage too low at every SoC
    double s2lo = s2_of(lo, p_b, ok_lo);
    if (!ok_lo) {  // validity boundary grows with SoC: bisect for it
      double a = lo, b = hi;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (a + b);
        bool ok = false;
        s2_of(mid, p_b, ok);
        (ok ? b : a) = mid;
      }
      lo = b;
      s2lo = s2_of(lo, p_b, ok_lo);
    }
    if (s2lo > hi1 + teps || s2hi < lo1 - teps) return;
    double a = lo;
    if (s2lo < lo1) {
      double x = lo, y = hi;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (x + y);
        bool ok = false;
        const double v = s2_of(mid, p_b, ok);
        if (!ok || v < lo1) x = mid;
        else y = mid;
      }
      a = y;
    }
    double b = hi;
    if (s2hi > hi1) {
      double x = lo, y = hi;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (x + y);
        bool ok = false;
        const double v = s2_of(mid, p_b, ok);
        if (ok && v <= hi1) x = mid;
        else y = mid;
      }
      b = x;
    }
    flo[k] = std::min(flo[k], a);
    fhi[k] = std::max(fhi[k], b);
  };

  // Cost-to-go at a continuous SoC inside the corridor. Nodes outside the
  // corridor hold the sentinel, so near the corridor edge the interpolation
  // anchors on the boundary value (computed exactly each stage) instead of
  // flatly extending the nearest interior node, which would bias the policy.
  auto suffix_eval = [&](const double* row, double jlo1, double jhi1,
                         double lo1, double hi1, double s2) -> double {
    if (s2 < lo1 - teps || s2 > hi1 + teps) return kBig;
    s2 = std::clamp(s2, lo1, hi1);
    const int c = std::clamp(
        static_cast<int>((s2 - grid.lo) / grid.cell), 0, p - 2);
    double x0 = grid.at(c), y0 = row[c];
    double x1 = x0 + grid.cell, y1 = row[c + 1];
    if (y0 >= kBigThresh) { x0 = lo1; y0 = jlo1; }
    if (y1 >= kBigThresh) { x1 = hi1; y1 = jhi1; }
    const bool fin0 = y0 < kBigThresh, fin1 = y1 < kBigThresh;
    if (!fin0 && !fin1) return kBig;
    if (!fin0) return y1;
    if (!fin1) return y0;
    if (x1 <= x0 + 1e-15) return std::min(y0, y1);
    const double f = std::clamp((s2 - x0) / (x1 - x0), 0.0, 1.0);
    return y0 + f * (y1 - y0);
  };

  std::vector<std::int32_t> idx;
  std::vector<float> frac;
  std::vector<double> soc_nodes(static_cast<std::size_t>(p));
  for (int i = 0; i < p; ++i) soc_nodes[static_cast<std::size_t>(i)] = grid.at(i);

  // Cost-to-go at the corridor edges, per weight and sample index. At the
  // horizon the terminal cost inside the band is zero.
  std::vector<std::vector<double>> j_lo(m_count,
                                        std::vector<double>(n_stages + 1, kBig));
  std::vector<std::vector<double>> j_hi = j_lo;
  for (std::size_t m = 0; m < m_count; ++m)
    j_lo[m][n_stages] = j_hi[m][n_stages] = 0.0;

  std::vector<double> edge_s2_lo, edge_s2_hi;  // per-entry edge transitions

  for (std::size_t k = n_stages; k-- > 0;) {
    const auto& es = table.stages[k];
    const std::size_t e_count = es.size();
    const bool last = k + 1 == n_stages;
    idx.assign(e_count * static_cast<std::size_t>(p), -1);
    frac.assign(e_count * static_cast<std::size_t>(p), 0.0f);

    if (!cfg.round_to_grid) {
      for (std::size_t e = 0; e < e_count; ++e) widen_corridor(k, es[e].p_b);
      edge_s2_lo.assign(e_count, kBig);
      edge_s2_hi.assign(e_count, kBig);
      for (std::size_t e = 0; e < e_count; ++e) {
        bool ok = false;
        if (flo[k] < kBigThresh) {
          const double s2 = s2_of(flo[k], es[e].p_b, ok);
          if (ok && s2 >= grid.lo && s2 <= grid.hi) edge_s2_lo[e] = s2;
        }
        if (fhi[k] > -kBigThresh) {
          const double s2 = s2_of(fhi[k], es[e].p_b, ok);
          if (ok && s2 >= grid.lo && s2 <= grid.hi) edge_s2_hi[e] = s2;
        }
      }
    }

    for (std::size_t e = 0; e < e_count; ++e) {
      const double p_b = es[e].p_b;
      std::int32_t* id = &idx[e * static_cast<std::size_t>(p)];
      float* fr = &frac[e * static_cast<std::size_t>(p)];
      for (int i = 0; i < p; ++i) {
        double i_b, rate;
        if (!detail::battery_step(battery, soc_nodes[static_cast<std::size_t>(i)],
                                  p_b, i_b, rate))
          continue;
        double s2 = soc_nodes[static_cast<std::size_t>(i)] + rate * dt;
        if (s2 < grid.lo || s2 > grid.hi) continue;
        if (cfg.round_to_grid) s2 = grid.at(grid.nearest(s2));
        if (last) {
          if (in_band(s2)) id[i] = 0;
        } else if (cfg.round_to_grid) {
          // Exact node transition; no interpolation (frac stays zero).
          id[i] = grid.nearest(s2);
        } else {
          if (s2 < flo[k + 1] - teps || s2 > fhi[k + 1] + teps) continue;
          const int c = std::min(static_cast<int>((s2 - grid.lo) / grid.cell), p - 2);
          id[i] = c;
          fr[i] = static_cast<float>((s2 - grid.at(c)) / grid.cell);
        }
      }
    }

    for (std::size_t m = 0; m < m_count; ++m) {
      double* jk = &j_tab[m][k * static_cast<std::size_t>(p)];
      const double* jn = last ? nullptr : jk + p;
      const double jlo1 = last ? 0.0 : j_lo[m][k + 1];
      const double jhi1 = last ? 0.0 : j_hi[m][k + 1];
      std::fill(jk, jk + p, kBig);
      for (std::size_t e = 0; e < e_count; ++e) {
        const double w = (static_cast<double>(es[e].fuel) +
                          batch[m].mu * static_cast<double>(es[e].nox)) *
                         dt;
        const std::int32_t* id = &idx[e * static_cast<std::size_t>(p)];
        const float* fr = &frac[e * static_cast<std::size_t>(p)];
        if (last) {
          for (int i = 0; i < p; ++i)
            if (id[i] >= 0 && w < jk[i]) jk[i] = w;
        } else {
          for (int i = 0; i < p; ++i) {
            const int c = id[i];
            if (c < 0) continue;
            double suffix;
            if (cfg.round_to_grid) {
              suffix = jn[c];
            } else {
              const double s2 =
                  grid.at(c) + static_cast<double>(fr[i]) * grid.cell;
              suffix = suffix_eval(jn, jlo1, jhi1, flo[k + 1], fhi[k + 1], s2);
            }
            if (suffix >= kBigThresh) continue;
            const double cost = w + suffix;
            if (cost < jk[i]) jk[i] = cost;
          }
        }
      }

      if (!cfg.round_to_grid) {
        // Bellman update at the two corridor-edge states.
        double lo_best = kBig, hi_best = kBig;
        for (std::size_t e = 0; e < e_count; ++e) {
          const double w = (static_cast<double>(es[e].fuel) +
                            batch[m].mu * static_cast<double>(es[e].nox)) *
                           dt;
          if (edge_s2_lo[e] < kBigThresh) {
            const double s2 = edge_s2_lo[e];
            const double suffix =
                last ? (in_band(s2) ? 0.0 : kBig)
                     : suffix_eval(jn, jlo1, jhi1, flo[k + 1], fhi[k + 1], s2);
            if (suffix < kBigThresh && w + suffix < lo_best) lo_best = w + suffix;
          }
          if (edge_s2_hi[e] < kBigThresh) {
            const double s2 = edge_s2_hi[e];
            const double suffix =
                last ? (in_band(s2) ? 0.0 : kBig)
                     : suffix_eval(jn, jlo1, jhi1, flo[k + 1], fhi[k + 1], s2);
            if (suffix < kBigThresh && w + suffix < hi_best) hi_best = w + suffix;
          }
        }
        j_lo[m][k] = lo_best;
        j_hi[m][k] = hi_best;
      }
    }
  }

  // Forward passes: re-optimize each step at the actual continuous SoC.
  for (std::size_t m = 0; m < m_count; ++m) {
    MuSolve& out = batch[m];
    const double mu = out.mu;
    double soc = cfg.initial_soc;
    if (cfg.round_to_grid) soc = grid.at(grid.nearest(soc));

    Trajectory tr;
    tr.mu = mu;
    tr.soc.push_back(soc);
    std::vector<double> step_w;
    bool failed = false;

    for (std::size_t k = 0; k < n_stages && !failed; ++k) {
      const auto& es = table.stages[k];
      const bool last = k + 1 == n_stages;
      const double* jn =
          last ? nullptr : &j_tab[m][(k + 1) * static_cast<std::size_t>(p)];
      double best = kBig, best_next = soc;
      std::ptrdiff_t best_e = -1;
      for (std::size_t e = 0; e < es.size(); ++e) {
        double i_b, rate;
        if (!detail::battery_step(battery, soc, es[e].p_b, i_b, rate)) continue;
        double s2 = soc + rate * dt;
        if (s2 < grid.lo || s2 > grid.hi) continue;
        if (cfg.round_to_grid) s2 = grid.at(grid.nearest(s2));
        double suffix = 0.0;
        if (last) {
          if (!in_band(s2)) continue;
        } else if (cfg.round_to_grid) {
          suffix = jn[grid.nearest(s2)];
          if (suffix >= kBigThresh) continue;
        } else {
          suffix = suffix_eval(jn, j_lo[m][k + 1], j_hi[m][k + 1], flo[k + 1],
                               fhi[k + 1], s2);
          if (suffix >= kBigThresh) continue;
        }
        const double w = (static_cast<double>(es[e].fuel) +
                          mu * static_cast<double>(es[e].nox)) *
                         dt;
        const double cost = w + suffix;
        if (cost < best) {
          best = cost;
          best_e = static_cast<std::ptrdiff_t>(e);
          best_next = s2;
        }
      }
      if (best_e < 0) {
        out.feasible = false;
        out.infeasible_index = k;
        failed = true;
        break;
      }
      const StageEntry& e = es[static_cast<std::size_t>(best_e)];
      TrajectoryStep st;
      st.u = e.to_control();
      st.outcome = evaluate_stage(spec, maps, battery, soc, mission.v[k],
                                  mission.a[k], mission.grade[k], st.u);
      tr.h2_kg += st.outcome.mdot_fuel * dt;
      tr.nox_mg += st.outcome.mdot_nox * dt;
      step_w.push_back((static_cast<double>(e.fuel) +
                        mu * static_cast<double>(e.nox)) *
                       dt);
      tr.steps.push_back(std::move(st));
      soc = best_next;
      tr.soc.push_back(soc);
    }
    if (failed) continue;

    // Suffix-order summation matches the backward recursion's association.
    double cost = 0.0;
    for (std::size_t i = step_w.size(); i-- > 0;) cost += step_w[i];
    tr.cost = cost;
    out.traj = std::move(tr);
    out.feasible = true;
  }
}

int resolve_threads(const DpConfig& cfg) {
  if (const char* env = std::getenv("H2EMS_NO_PARALLEL");
      env && std::string(env) == "1")
    return 1;
  if (cfg.threads > 0) return cfg.threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

std::vector<MuSolve> solve_all(const ArchitectureSpec& spec, const MapSet& maps,
                               const BatterySpec& battery,
                               const DrivingMission& mission, const DpConfig& cfg,
                               const std::vector<double>& mus) {
  const StageTable table = build_stage_table(spec, maps, battery, mission, cfg);
  std::vector<MuSolve> solves(mus.size());
  for (std::size_t i = 0; i < mus.size(); ++i) solves[i].mu = mus[i];

  const int threads =
      std::min<int>(resolve_threads(cfg), static_cast<int>(mus.size()));
  if (threads <= 1) {
    solve_batch(spec, maps, battery, mission, table, cfg, solves);
    return solves;
  }

  // Contiguous weight chunks; each worker runs an independent solve, so the
  // result is schedule-independent.
  std::vector<std::thread> workers;
  const std::size_t per = (mus.size() + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const std::size_t lo = static_cast<std::size_t>(t) * per;
    if (lo >= mus.size()) break;
    const std::size_t hi = std::min(mus.size(), lo + per);
    workers.emplace_back([&, lo, hi] {
      std::vector<MuSolve> chunk(solves.begin() + lo, solves.begin() + hi);
      solve_batch(spec, maps, battery, mission, table, cfg, chunk);
      std::copy(chunk.begin(), chunk.end(), solves.begin() + lo);
    });
  }
  for (auto& w : workers) w.join();
  return solves;
}

}  // namespace

Trajectory solve_dp(const ArchitectureSpec& spec, const MapSet& maps,
                    const BatterySpec& battery, const DrivingMission& mission,
                    double mu, const DpConfig& cfg) {
  DpConfig single = cfg;
  single.threads = 1;
  auto solves = solve_all(spec, maps, battery, mission, single, {mu});
  if (!solves[0].feasible) throw InfeasibleError(solves[0].infeasible_index);
  return std::move(solves[0].traj);
}

Trajectory brute_force_oracle(const ArchitectureSpec& spec, const MapSet& maps,
                              const BatterySpec& battery,
                              const DrivingMission& mission, double mu,
                              const DpConfig& cfg) {
  DpConfig rcfg = cfg;
  rcfg.round_to_grid = true;
  const StageTable table = build_stage_table(spec, maps, battery, mission, rcfg);
  const SocGrid grid = make_grid(battery, rcfg);
  const double band = rcfg.terminal_band < 0.0 ? grid.cell : rcfg.terminal_band;
  const double band_lo = rcfg.terminal_soc - 1e-12;
  const double band_hi = rcfg.terminal_soc + band + 1e-12;
  const std::size_t n_stages = table.stages.size();

  double sequences = 1.0;
  for (const auto& s : table.stages) {
    sequences *= static_cast<double>(std::max<std::size_t>(s.size(), 1));
    if (sequences > 1e6)
      throw TooLarge("enumeration bound of 1e6 control sequences exceeded");
  }

  std::vector<std::size_t> choice(n_stages), best_choice;
  std::vector<double> w_path(n_stages);
  std::vector<double> soc_path(n_stages + 1);
  soc_path[0] = grid.at(grid.nearest(cfg.initial_soc));
  double best_cost = kBig;
  std::size_t deepest = 0;

  // Depth-first enumeration; sequence costs are summed suffix-first so the
  // floating-point association matches the DP recursion exactly.
  auto dfs = [&](auto&& self, std::size_t k) -> void {
    if (k == n_stages) {
      const double s = soc_path[k];
      if (s < band_lo || s > band_hi) return;
      double cost = 0.0;
      for (std::size_t i = n_stages; i-- > 0;) cost += w_path[i];
      if (cost < best_cost) {
        best_cost = cost;
        best_choice = choice;
      }
      return;
    }
    deepest = std::max(deepest, k);
    const auto& es = table.stages[k];
    for (std::size_t e = 0; e < es.size(); ++e) {
      double i_b, rate;
      if (!detail::battery_step(battery, soc_path[k], es[e].p_b, i_b, rate))
        continue;
      double s2 = soc_path[k] + rate * table.dt;
      if (s2 < grid.lo || s2 > grid.hi) continue;
      s2 = grid.at(grid.nearest(s2));
      choice[k] = e;
      w_path[k] = (static_cast<double>(es[e].fuel) +
                   mu * static_cast<double>(es[e].nox)) *
                  table.dt;
      soc_path[k + 1] = s2;
      self(self, k + 1);
    }
  };
  dfs(dfs, 0);
  if (best_choice.empty() && best_cost >= kBig) throw InfeasibleError(deepest);

  Trajectory tr;
  tr.mu = mu;
  double soc = soc_path[0];
  tr.soc.push_back(soc);
  std::vector<double> ws;
  for (std::size_t k = 0; k < n_stages; ++k) {
    const StageEntry& e = table.stages[k][best_choice[k]];
    TrajectoryStep st;
    st.u = e.to_control();
    st.outcome = evaluate_stage(spec, maps, battery, soc, mission.v[k],
                                mission.a[k], mission.grade[k], st.u);
    tr.h2_kg += st.outcome.mdot_fuel * table.dt;
    tr.nox_mg += st.outcome.mdot_nox * table.dt;
    ws.push_back((static_cast<double>(e.fuel) + mu * static_cast<double>(e.nox)) *
                 table.dt);
    tr.steps.push_back(std::move(st));
    double i_b, rate;
    detail::battery_step(battery, soc, e.p_b, i_b, rate);
    soc = grid.at(grid.nearest(soc + rate * table.dt));
    tr.soc.push_back(soc);
  }
  double cost = 0.0;
  for (std::size_t i = ws.size(); i-- > 0;) cost += ws[i];
  tr.cost = cost;
  return tr;
}

ParetoFront sweep_pareto(const ArchitectureSpec& spec, const MapSet& maps,
                         const BatterySpec& battery, const DrivingMission& mission,
                         const DpConfig& cfg) {
  std::vector<double> mus = cfg.mu_list.empty() ? default_mu_schedule() : cfg.mu_list;
  std::sort(mus.begin(), mus.end());

  auto solves = solve_all(spec, maps, battery, mission, cfg, mus);

  std::vector<Trajectory> pool;
  for (auto& s : solves)
    if (s.feasible) pool.push_back(std::move(s.traj));
  if (pool.empty()) throw InfeasibleError(solves[0].infeasible_index);

  // Every solved trajectory is feasible under every weight, so each weight is
  // assigned the cheapest trajectory across the whole sweep. This only
  // improves the weighted cost and makes the front monotone in the weight
  // even when individual solves carry interpolation noise.
  ParetoFront front;
  for (double mu : mus) {
    std::size_t best = 0;
    double best_cost = kBig;
    for (std::size_t j = 0; j < pool.size(); ++j) {
      const double c = pool[j].h2_kg + mu * pool[j].nox_mg;
      if (c < best_cost) {
        best_cost = c;
        best = j;
      }
    }
    ParetoPoint pt;
    pt.mu = mu;
    pt.h2_kg = pool[best].h2_kg;
    pt.nox_mg = pool[best].nox_mg;
    pt.trajectory = pool[best];
    pt.trajectory.mu = mu;
    pt.trajectory.cost = best_cost;
    front.points.push_back(std::move(pt));
  }

  for (std::size_t i = 0; i < front.points.size(); ++i)
    for (std::size_t j = 0; j < front.points.size(); ++j) {
      if (i == j) continue;
      const auto& a = front.points[i];
      const auto& b = front.points[j];
      if (b.h2_kg <= a.h2_kg && b.nox_mg <= a.nox_mg &&
          (b.h2_kg < a.h2_kg || b.nox_mg < a.nox_mg)) {
        front.points[i].dominated = true;
        break;
      }
    }

  for (std::size_t i = 0; i < front.points.size(); ++i)
    if (front.points[i].mu == 0.0) front.s_star = static_cast<int>(i);

  front.s_square = static_cast<int>(front.points.size()) - 1;
  for (std::size_t i = front.points.size(); i-- > 1;) {
    const double prev = front.points[i - 1].nox_mg;
    const double diff = std::abs(front.points[i].nox_mg - prev);
    if (prev == 0.0 ? diff == 0.0 : diff < 1e-3 * prev) {
      front.s_square = static_cast<int>(i);
      break;
    }
  }
  return front;
}

}  // namespace h2ems
