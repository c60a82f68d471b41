#include "acuc/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "acuc/evaluator.hpp"
#include "acuc/reserves.hpp"
#include "acuc/uc.hpp"

namespace acuc {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

BoundInterval intersect(BoundInterval a, BoundInterval b) {
  return {std::max(a.lo, b.lo), std::min(a.hi, b.hi)};
}

}  // namespace

TightenedBounds ramp_tighten(const Device& dev, double p_prev, bool u_on_prev,
                             bool u_on_t, bool u_su_t, double d_t,
                             BoundInterval feasible,
                             std::optional<BoundInterval> override_iv) {
  RampEnvelope env = ramp_envelope(dev, p_prev, u_on_prev, u_on_t, u_su_t, d_t);
  BoundInterval reach = intersect({env.lo, env.hi}, feasible);
  if (reach.lo > reach.hi) {
    // Round-off level gap between the envelope and the feasible set.
    double mid = 0.5 * (reach.lo + reach.hi);
    reach.lo = reach.hi = mid;
  }
  TightenedBounds out;
  if (!override_iv) {
    out.bounds = reach;
    return out;
  }
  BoundInterval cut = intersect(reach, *override_iv);
  if (cut.lo <= cut.hi) {
    out.bounds = cut;
    return out;
  }
  // Conflict: the reserve override excludes every reachable point. Clamp to
  // the reachable endpoint nearest the override interval.
  out.conflict = true;
  double point = override_iv->lo > reach.hi ? reach.hi : reach.lo;
  out.bounds = {point, point};
  return out;
}

std::vector<std::vector<BoundInterval>> reachable_bounds(
    const Case& c, const CommitmentSchedule& cs) {
  const int T = c.time_grid.periods();
  const int nd = (int)c.devices.size();
  std::vector<std::vector<BoundInterval>> out(
      (size_t)nd, std::vector<BoundInterval>((size_t)T));
  for (int j = 0; j < nd; ++j) {
    const Device& dev = c.devices[(size_t)j];
    for (int t = T - 1; t >= 0; --t) {
      const bool on = cs.on[(size_t)j][(size_t)t] != 0;
      BoundInterval stat = on ? BoundInterval{dev.pmin_at(t), dev.pmax_at(t)}
                              : BoundInterval{0.0, 0.0};
      if (t == T - 1) {
        out[(size_t)j][(size_t)t] = stat;
        continue;
      }
      // Movement allowed from t into t+1 under the commitment at t+1.
      const bool on_next = cs.on[(size_t)j][(size_t)t + 1] != 0;
      const bool su_next = cs.su[(size_t)j][(size_t)t + 1] != 0;
      const double d_next = c.time_grid.durations[(size_t)t + 1];
      const double on_f = on_next ? 1.0 : 0.0;
      const double su_f = su_next ? 1.0 : 0.0;
      const double up_move =
          d_next * (dev.p_ru * (on_f - su_f) + dev.p_ru_su * (su_f + 1.0 - on_f));
      const double down_move =
          d_next * (dev.p_rd * on_f + dev.p_rd_sd * (1.0 - on_f));
      const BoundInterval& next = out[(size_t)j][(size_t)t + 1];
      BoundInterval from_next{next.lo - up_move, next.hi + down_move};
      BoundInterval cut = intersect(stat, from_next);
      if (cut.lo > cut.hi) {
        // The schedule itself satisfied the ramp rows, so any gap here is
        // round-off; collapse to its midpoint.
        double mid = 0.5 * (cut.lo + cut.hi);
        cut.lo = cut.hi = mid;
      }
      out[(size_t)j][(size_t)t] = cut;
    }
  }
  return out;
}

std::vector<std::vector<double>> ramp_project(
    const Case& c, const CommitmentSchedule& cs,
    const std::vector<std::vector<double>>& p) {
  const int T = c.time_grid.periods();
  const int nd = (int)c.devices.size();
  auto reach = reachable_bounds(c, cs);
  std::vector<std::vector<double>> out = p;
  for (int j = 0; j < nd; ++j) {
    const Device& dev = c.devices[(size_t)j];
    double prev = dev.initial_on ? dev.initial_p : 0.0;
    bool prev_on = dev.initial_on;
    for (int t = 0; t < T; ++t) {
      const bool on = cs.on[(size_t)j][(size_t)t] != 0;
      const bool su = cs.su[(size_t)j][(size_t)t] != 0;
      if (!on) {
        out[(size_t)j][(size_t)t] = 0.0;
        prev = 0.0;
        prev_on = false;
        continue;
      }
      RampEnvelope env = ramp_envelope(dev, prev, prev_on, on, su,
                                       c.time_grid.durations[(size_t)t]);
      BoundInterval box =
          intersect({env.lo, env.hi}, reach[(size_t)j][(size_t)t]);
      if (box.lo > box.hi) {
        double mid = 0.5 * (box.lo + box.hi);
        box.lo = box.hi = mid;
      }
      out[(size_t)j][(size_t)t] =
          std::min(std::max(p[(size_t)j][(size_t)t], box.lo), box.hi);
      prev = out[(size_t)j][(size_t)t];
      prev_on = true;
    }
  }
  return out;
}

namespace {

// Clip the scheduled active reserves of one device to the headroom realized
// at the final dispatch, filling by quality rank.
void clip_active_reserves_to_headroom(const Case& c, const CaseIndex& ix,
                                      const CommitmentSchedule& cs,
                                      const std::vector<std::vector<double>>& p,
                                      ReserveState& st) {
  const int T = c.time_grid.periods();
  for (size_t j = 0; j < c.devices.size(); ++j) {
    const Device& dev = c.devices[j];
    for (int t = 0; t < T; ++t) {
      const bool on = cs.on[j][(size_t)t] != 0;
      for (ReserveDirection dir :
           {ReserveDirection::Up, ReserveDirection::Down}) {
        double budget =
            on ? std::max(0.0, headroom(dev, p[j][(size_t)t], on, t, dir)) : 0.0;
        for (int k : ix.cascade(PowerKind::Active, dir)) {
          double take = std::min(st.r[j][(size_t)k][(size_t)t], budget);
          st.r[j][(size_t)k][(size_t)t] = std::max(0.0, take);
          budget -= take;
        }
      }
    }
  }
}

struct OpfOutcome {
  AcOpfResult result;
  std::vector<int> online;  // device ids in problem order
  double seconds = 0.0;
};

}  // namespace

std::pair<FullSolution, RunStats> run(const Case& c, const RunOptions& options) {
  if (options.algorithm < 1 || options.algorithm > 4)
    throw std::invalid_argument("algorithm must be 1, 2, 3, or 4");
  if (options.gamma < 0.0 || options.gamma > 1.0)
    throw std::invalid_argument("gamma must lie in [0, 1]");
  if (options.thread_count < 1)
    throw std::invalid_argument("thread_count must be >= 1");

  const auto t_total = Clock::now();
  const int T = c.time_grid.periods();
  CaseIndex ix = build_index(c);
  RunStats stats;
  stats.algorithm = options.algorithm;
  stats.thread_count = options.thread_count;

  // Stage 1: copper-plate scheduling with the zonal reserve model.
  const auto t_uc = Clock::now();
  UcOptions uc_opts;
  uc_opts.mip.gap_tol = options.uc_gap_tol;
  uc_opts.mip.time_limit_s = options.uc_time_limit_s;
  uc_opts.mip.node_limit = options.uc_node_limit;
  UcResult uc = solve_copperplate_uc(c, ix, uc_opts);
  stats.uc_time_s = seconds_since(t_uc);
  stats.uc_gap = uc.gap;
  stats.uc_status = (int)uc.status;
  if (uc.status == MipStatus::Infeasible || uc.status == MipStatus::Limit)
    throw std::runtime_error("scheduling stage produced no incumbent");

  // Stage 2: reserve-driven bound tightening.
  std::optional<BoundOverrides> overrides;
  if (options.algorithm == 1)
    overrides = tighten_bounds_from_reserves(c, ix, uc, 1.0, options.apply_guard);
  else if (options.algorithm >= 3)
    overrides =
        tighten_bounds_from_reserves(c, ix, uc, options.gamma, options.apply_guard);

  // Stage 3: per-period AC-OPF.
  auto reach = reachable_bounds(c, uc.commitment);
  std::vector<OpfOutcome> outcomes((size_t)T);
  stats.opf_time_per_period.assign((size_t)T, 0.0);
  stats.opf_iterations.assign((size_t)T, 0);

  auto build_problem = [&](int t, bool sequential,
                           const std::vector<double>* p_prev,
                           const std::vector<std::uint8_t>* on_prev) {
    AcOpfProblem prob;
    prob.c = &c;
    prob.ix = &ix;
    prob.t = t;
    prob.soft_line_limits = options.soft_line_limits;
    for (size_t j = 0; j < c.devices.size(); ++j) {
      if (uc.commitment.on[j][(size_t)t] == 0) continue;
      const Device& dev = c.devices[j];
      AcOpfDevice od;
      od.device = (int)j;
      std::optional<BoundInterval> ov;
      if (overrides && overrides->has((int)j, t))
        ov = BoundInterval{overrides->p_lo[j][(size_t)t],
                           overrides->p_hi[j][(size_t)t]};
      if (sequential) {
        TightenedBounds tb = ramp_tighten(
            dev, (*p_prev)[j], (*on_prev)[j] != 0,
            uc.commitment.on[j][(size_t)t] != 0,
            uc.commitment.su[j][(size_t)t] != 0,
            c.time_grid.durations[(size_t)t], reach[j][(size_t)t], ov);
        if (tb.conflict) ++stats.bound_conflicts;
        od.p_lo = tb.bounds.lo;
        od.p_hi = tb.bounds.hi;
      } else {
        BoundInterval stat{dev.pmin_at(t), dev.pmax_at(t)};
        BoundInterval box = ov ? intersect(stat, *ov) : stat;
        if (box.lo > box.hi) box.lo = box.hi = 0.5 * (box.lo + box.hi);
        od.p_lo = box.lo;
        od.p_hi = box.hi;
      }
      od.q_lo = dev.qmin_at(t);
      od.q_hi = dev.qmax_at(t);
      prob.online.push_back(od);
    }
    return prob;
  };

  const auto t_opf = Clock::now();
  if (options.algorithm <= 3) {
    // Sequential sweep with ramp tightening from the settled dispatch.
    std::vector<double> p_prev(c.devices.size(), 0.0);
    std::vector<std::uint8_t> on_prev(c.devices.size(), 0);
    for (size_t j = 0; j < c.devices.size(); ++j) {
      p_prev[j] = c.devices[j].initial_on ? c.devices[j].initial_p : 0.0;
      on_prev[j] = c.devices[j].initial_on ? 1 : 0;
    }
    for (int t = 0; t < T; ++t) {
      const auto t0 = Clock::now();
      AcOpfProblem prob = build_problem(t, true, &p_prev, &on_prev);
      OpfOutcome& oc = outcomes[(size_t)t];
      for (const auto& od : prob.online) oc.online.push_back(od.device);
      oc.result = solve_acopf(prob, options.opf);
      oc.seconds = seconds_since(t0);
      std::fill(p_prev.begin(), p_prev.end(), 0.0);
      for (size_t k = 0; k < oc.online.size(); ++k)
        p_prev[(size_t)oc.online[k]] = oc.result.p[k];
      for (size_t j = 0; j < c.devices.size(); ++j)
        on_prev[j] = uc.commitment.on[j][(size_t)t];
    }
  } else {
    // Parallel fan-out over periods; subproblems share nothing and results
    // assemble by index, so the outcome is thread-count independent.
    std::atomic<int> next{0};
    auto worker = [&]() {
      while (true) {
        int t = next.fetch_add(1);
        if (t >= T) break;
        const auto t0 = Clock::now();
        AcOpfProblem prob = build_problem(t, false, nullptr, nullptr);
        OpfOutcome& oc = outcomes[(size_t)t];
        for (const auto& od : prob.online) oc.online.push_back(od.device);
        oc.result = solve_acopf(prob, options.opf);
        oc.seconds = seconds_since(t0);
      }
    };
    std::vector<std::thread> pool;
    const int n = std::min(options.thread_count, T);
    pool.reserve((size_t)n);
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  stats.opf_time_total_s = seconds_since(t_opf);
  for (int t = 0; t < T; ++t) {
    stats.opf_time_per_period[(size_t)t] = outcomes[(size_t)t].seconds;
    stats.opf_iterations[(size_t)t] = outcomes[(size_t)t].result.iterations;
  }

  // Assemble the dispatch.
  FullSolution sol;
  sol.meta.algorithm = options.algorithm;
  sol.meta.gamma = options.algorithm == 1 ? 1.0
                   : options.algorithm == 2 ? 0.0
                                            : options.gamma;
  sol.commitment = uc.commitment;
  sol.dispatch.p.assign(c.devices.size(), std::vector<double>((size_t)T, 0.0));
  sol.dispatch.q.assign(c.devices.size(), std::vector<double>((size_t)T, 0.0));
  sol.dispatch.v.assign(c.buses.size(), std::vector<double>((size_t)T, 1.0));
  sol.dispatch.theta.assign(c.buses.size(), std::vector<double>((size_t)T, 0.0));
  for (int t = 0; t < T; ++t) {
    const OpfOutcome& oc = outcomes[(size_t)t];
    for (size_t k = 0; k < oc.online.size(); ++k) {
      sol.dispatch.p[(size_t)oc.online[k]][(size_t)t] = oc.result.p[k];
      sol.dispatch.q[(size_t)oc.online[k]][(size_t)t] = oc.result.q[k];
    }
    for (size_t b = 0; b < c.buses.size(); ++b) {
      sol.dispatch.v[b][(size_t)t] = oc.result.v[b];
      sol.dispatch.theta[b][(size_t)t] = oc.result.theta[b];
    }
  }

  // Stage 4 (algorithm 4 only): restore ramp feasibility by projection.
  if (options.algorithm == 4) {
    const auto t0 = Clock::now();
    sol.dispatch.p = ramp_project(c, uc.commitment, sol.dispatch.p);
    stats.projection_time_s = seconds_since(t0);
  }

  // Stage 5: reserves.
  const auto t_res = Clock::now();
  if (options.algorithm == 1) {
    // Scheduled real reserves are kept (clipped to realized headroom where
    // the guard skipped a device); reactive reserves fill greedily.
    ReserveState greedy_q = greedy_allocate(c, ix, uc.commitment,
                                            sol.dispatch.p, sol.dispatch.q,
                                            PowerKind::Reactive);
    ReserveState st = uc.reserves;
    for (size_t j = 0; j < c.devices.size(); ++j) {
      for (PowerKind pk : {PowerKind::Reactive}) {
        for (ReserveDirection dir :
             {ReserveDirection::Up, ReserveDirection::Down}) {
          for (int k : ix.cascade(pk, dir))
            st.r[j][(size_t)k] = greedy_q.r[j][(size_t)k];
        }
      }
    }
    clip_active_reserves_to_headroom(c, ix, uc.commitment, sol.dispatch.p, st);
    st.shortfall = reserve_economics(c, ix, st).shortfall;
    sol.reserves = st;
  } else if (options.algorithm == 2) {
    sol.reserves = greedy_allocate(c, ix, uc.commitment, sol.dispatch.p,
                                   sol.dispatch.q);
  } else {
    sol.reserves = redispatch_reserves(c, ix, uc.commitment, sol.dispatch.p,
                                       sol.dispatch.q, options.thread_count);
  }
  stats.reserve_time_s = seconds_since(t_res);

  stats.total_time_s = seconds_since(t_total);
  stats.objective = evaluate(c, sol).objective;
  sol.meta.bound_conflicts = stats.bound_conflicts;
  return {std::move(sol), stats};
}

}  // namespace acuc
