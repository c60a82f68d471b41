#include "acuc/reserves.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "acuc/evaluator.hpp"

namespace acuc {

namespace {

double reactive_room(const Device& dev, double q, bool on, int t,
                     ReserveDirection dir) {
  const double u = on ? 1.0 : 0.0;
  const bool toward_max = (dev.kind == DeviceKind::Producer)
                              ? (dir == ReserveDirection::Up)
                              : (dir == ReserveDirection::Down);
  return toward_max ? dev.qmax_at(t) * u - q : q - dev.qmin_at(t) * u;
}

ReserveState empty_state(const Case& c) {
  ReserveState st;
  const size_t T = (size_t)c.time_grid.periods();
  st.r.assign(c.devices.size(),
              std::vector<std::vector<double>>(c.products.size(),
                                               std::vector<double>(T, 0.0)));
  st.shortfall.assign(
      c.zones.size(), std::vector<std::vector<double>>(
                          c.products.size(), std::vector<double>(T, 0.0)));
  return st;
}

}  // namespace

ReserveState greedy_allocate(const Case& c, const CaseIndex& ix,
                             const CommitmentSchedule& commitment,
                             const std::vector<std::vector<double>>& p,
                             const std::vector<std::vector<double>>& q,
                             std::optional<PowerKind> kind) {
  const int T = c.time_grid.periods();
  ReserveState st = empty_state(c);
  for (size_t j = 0; j < c.devices.size(); ++j) {
    const Device& dev = c.devices[j];
    for (int t = 0; t < T; ++t) {
      const bool on = commitment.on[j][(size_t)t] != 0;
      if (!on) continue;
      for (PowerKind pk : {PowerKind::Active, PowerKind::Reactive}) {
        if (kind && *kind != pk) continue;
        for (ReserveDirection dir :
             {ReserveDirection::Up, ReserveDirection::Down}) {
          double budget =
              pk == PowerKind::Active
                  ? headroom(dev, p[j][(size_t)t], on, t, dir)
                  : reactive_room(dev, q[j][(size_t)t], on, t, dir);
          budget = std::max(0.0, budget);
          for (int k : ix.cascade(pk, dir)) {
            if (budget <= 0.0) break;
            double take =
                std::min(budget, dev.reserve_cap_for(c.products[(size_t)k].id));
            if (take <= 0.0) continue;
            st.r[j][(size_t)k][(size_t)t] = take;
            budget -= take;
          }
        }
      }
    }
  }
  st.shortfall = reserve_economics(c, ix, st).shortfall;
  return st;
}

bool local_balance_guard(const Case& c, const CaseIndex& ix,
                         const CommitmentSchedule& commitment, int device,
                         double up_reserve, double down_reserve, int t) {
  if (up_reserve <= 0.0 && down_reserve <= 0.0) return true;
  const Device& dev = c.devices[(size_t)device];
  const bool on = commitment.on[(size_t)device][(size_t)t] != 0;
  if (!on) return false;  // offline devices cannot hold fixed reserve

  // Forced power range after fixing the reserves, as a net injection.
  double plo, phi;
  if (dev.kind == DeviceKind::Producer) {
    plo = dev.pmin_at(t) + down_reserve;
    phi = dev.pmax_at(t) - up_reserve;
  } else {
    plo = dev.pmin_at(t) + up_reserve;
    phi = dev.pmax_at(t) - down_reserve;
  }
  double inj_lo = dev.kind == DeviceKind::Producer ? plo : -phi;
  double inj_hi = dev.kind == DeviceKind::Producer ? phi : -plo;

  // What the bus can absorb: adjacent line ratings plus the ranges of the
  // co-located devices.
  const int bus = ix.device_bus[(size_t)device];
  double line_cap = 0.0;
  for (int l : ix.lines_from_bus[(size_t)bus])
    if (c.lines[(size_t)l].in_service) line_cap += c.lines[(size_t)l].s_max;
  for (int l : ix.lines_to_bus[(size_t)bus])
    if (c.lines[(size_t)l].in_service) line_cap += c.lines[(size_t)l].s_max;
  double others_lo = 0.0, others_hi = 0.0;
  auto add_device = [&](int other) {
    if (other == device) return;
    const Device& od = c.devices[(size_t)other];
    if (commitment.on[(size_t)other][(size_t)t] == 0) return;
    if (od.kind == DeviceKind::Producer) {
      others_lo += od.pmin_at(t);
      others_hi += od.pmax_at(t);
    } else {
      others_lo += -od.pmax_at(t);
      others_hi += -od.pmin_at(t);
    }
  };
  for (int other : ix.producers_at_bus[(size_t)bus]) add_device(other);
  for (int other : ix.consumers_at_bus[(size_t)bus]) add_device(other);

  const double ex_lo = -others_hi - line_cap;
  const double ex_hi = -others_lo + line_cap;
  return inj_lo <= ex_hi + 1e-12 && inj_hi >= ex_lo - 1e-12;
}

BoundOverrides tighten_bounds_from_reserves(const Case& c, const CaseIndex& ix,
                                            const UcResult& uc, double gamma,
                                            bool apply_guard) {
  const int T = c.time_grid.periods();
  const int nd = (int)c.devices.size();
  BoundOverrides out;
  out.p_lo.assign((size_t)nd, std::vector<double>((size_t)T, 1.0));
  out.p_hi.assign((size_t)nd, std::vector<double>((size_t)T, 0.0));
  if (gamma <= 0.0) return out;

  // Penalty-weighted value of the scheduled active reserves per device.
  std::vector<std::pair<double, int>> value((size_t)nd);
  for (int j = 0; j < nd; ++j) {
    double v = 0.0;
    int zone = ix.zone_of_device(j, PowerKind::Active);
    for (ReserveDirection dir : {ReserveDirection::Up, ReserveDirection::Down}) {
      for (int k : ix.cascade(PowerKind::Active, dir)) {
        double pen = zone >= 0 ? c.zones[(size_t)zone].penalty_for(
                                     c.products[(size_t)k].id)
                               : 0.0;
        for (int t = 0; t < T; ++t)
          v += c.time_grid.durations[(size_t)t] * pen *
               uc.reserves.r[(size_t)j][(size_t)k][(size_t)t];
      }
    }
    value[(size_t)j] = {v, j};
  }
  std::vector<int> providers;
  for (int j = 0; j < nd; ++j)
    if (value[(size_t)j].first > 0.0) providers.push_back(j);
  if (providers.empty()) return out;
  std::sort(providers.begin(), providers.end(), [&value](int a, int b) {
    if (value[(size_t)a].first != value[(size_t)b].first)
      return value[(size_t)a].first > value[(size_t)b].first;
    return a < b;
  });
  const int keep =
      (int)std::ceil(gamma * (double)providers.size() - 1e-12);
  providers.resize(std::min<size_t>(providers.size(), (size_t)std::max(0, keep)));

  for (int j : providers) {
    const Device& dev = c.devices[(size_t)j];
    std::vector<double> up((size_t)T, 0.0), down((size_t)T, 0.0);
    for (int t = 0; t < T; ++t) {
      for (int k : ix.cascade(PowerKind::Active, ReserveDirection::Up))
        up[(size_t)t] += uc.reserves.r[(size_t)j][(size_t)k][(size_t)t];
      for (int k : ix.cascade(PowerKind::Active, ReserveDirection::Down))
        down[(size_t)t] += uc.reserves.r[(size_t)j][(size_t)k][(size_t)t];
    }
    bool admissible = true;
    if (apply_guard) {
      for (int t = 0; t < T && admissible; ++t)
        admissible = local_balance_guard(c, ix, uc.commitment, j, up[(size_t)t],
                                         down[(size_t)t], t);
    }
    if (!admissible) continue;
    out.tightened_devices.push_back(j);
    for (int t = 0; t < T; ++t) {
      if (uc.commitment.on[(size_t)j][(size_t)t] == 0) continue;
      double lo, hi;
      if (dev.kind == DeviceKind::Producer) {
        lo = dev.pmin_at(t) + down[(size_t)t];
        hi = dev.pmax_at(t) - up[(size_t)t];
      } else {
        lo = dev.pmin_at(t) + up[(size_t)t];
        hi = dev.pmax_at(t) - down[(size_t)t];
      }
      if (lo > hi) {
        double mid = 0.5 * (lo + hi);
        lo = hi = mid;
        ++out.clamped_intervals;
      }
      out.p_lo[(size_t)j][(size_t)t] = lo;
      out.p_hi[(size_t)j][(size_t)t] = hi;
    }
  }
  return out;
}

LinearProgram build_reserve_lp(const Case& c, const CaseIndex& ix,
                               const CommitmentSchedule& commitment,
                               const std::vector<std::vector<double>>& p,
                               const std::vector<std::vector<double>>& q, int t,
                               ReserveLpMap& map) {
  const int nd = (int)c.devices.size();
  const int np = (int)c.products.size();
  const int nz = (int)c.zones.size();
  const double d_t = c.time_grid.durations[(size_t)t];
  map = ReserveLpMap{};
  map.np = np;
  map.r.assign((size_t)(nd * np), -1);
  map.shortfall.assign((size_t)(nz * np), -1);

  LinearProgram lp;
  for (int j = 0; j < nd; ++j) {
    const Device& dev = c.devices[(size_t)j];
    const bool on = commitment.on[(size_t)j][(size_t)t] != 0;
    for (int k = 0; k < np; ++k) {
      double cap = on ? dev.reserve_cap_for(c.products[(size_t)k].id) : 0.0;
      map.r[(size_t)map.jk(j, k)] = lp.add_var(
          0.0, cap, dev.reserve_cost_for(c.products[(size_t)k].id) * d_t);
    }
    if (!on) continue;
    for (PowerKind pk : {PowerKind::Active, PowerKind::Reactive}) {
      for (ReserveDirection dir :
           {ReserveDirection::Up, ReserveDirection::Down}) {
        const auto& cascade = ix.cascade(pk, dir);
        if (cascade.empty()) continue;
        double budget = pk == PowerKind::Active
                            ? headroom(dev, p[(size_t)j][(size_t)t], on, t, dir)
                            : reactive_room(dev, q[(size_t)j][(size_t)t], on, t, dir);
        budget = std::max(0.0, budget);
        LinearProgram::Row row;
        for (int k : cascade)
          row.coeffs.emplace_back(map.r[(size_t)map.jk(j, k)], 1.0);
        row.lo = -kInf;
        row.hi = budget;
        row.name = "headroom";
        lp.add_row(std::move(row));
      }
    }
  }
  for (int z = 0; z < nz; ++z) {
    const ReserveZone& zone = c.zones[(size_t)z];
    for (ReserveDirection dir : {ReserveDirection::Up, ReserveDirection::Down}) {
      const auto& cascade = ix.cascade(zone.power_kind, dir);
      double cum_req = 0.0;
      std::vector<int> cum_vars;
      for (int k : cascade) {
        const std::string& pid = c.products[(size_t)k].id;
        cum_req += zone.requirement_at(pid, t);
        for (int dev : ix.zone_devices[(size_t)z])
          cum_vars.push_back(map.r[(size_t)map.jk(dev, k)]);
        int sf = lp.add_var(0.0, kInf, zone.penalty_for(pid) * d_t);
        map.shortfall[(size_t)map.zk(z, k)] = sf;
        LinearProgram::Row row;
        for (int vr : cum_vars) row.coeffs.emplace_back(vr, 1.0);
        row.coeffs.emplace_back(sf, 1.0);
        row.lo = cum_req;
        row.hi = kInf;
        row.name = "cascade";
        lp.add_row(std::move(row));
      }
    }
  }
  return lp;
}

ReserveState redispatch_reserves(const Case& c, const CaseIndex& ix,
                                 const CommitmentSchedule& commitment,
                                 const std::vector<std::vector<double>>& p,
                                 const std::vector<std::vector<double>>& q,
                                 int thread_count) {
  const int T = c.time_grid.periods();
  const int np = (int)c.products.size();
  ReserveState st = empty_state(c);

  auto solve_period = [&](int t) {
    ReserveLpMap map;
    LinearProgram lp = build_reserve_lp(c, ix, commitment, p, q, t, map);
    LpSolution sol = solve_lp(lp);
    // Shortfalls make the model feasible by construction; anything else is
    // an internal error worth surfacing loudly in debug builds.
    for (size_t j = 0; j < c.devices.size(); ++j) {
      for (int k = 0; k < np; ++k) {
        int vr = map.r[(size_t)map.jk((int)j, k)];
        if (vr >= 0)
          st.r[j][(size_t)k][(size_t)t] = std::max(0.0, sol.x[(size_t)vr]);
      }
      // Exact repair: scale a direction down if round-off nudged it past
      // the headroom computed from the stored dispatch.
      const Device& dev = c.devices[j];
      const bool on = commitment.on[j][(size_t)t] != 0;
      for (PowerKind pk : {PowerKind::Active, PowerKind::Reactive}) {
        for (ReserveDirection dir :
             {ReserveDirection::Up, ReserveDirection::Down}) {
          double budget =
              on ? std::max(0.0, pk == PowerKind::Active
                                     ? headroom(dev, p[j][(size_t)t], on, (int)t, dir)
                                     : reactive_room(dev, q[j][(size_t)t], on,
                                                     (int)t, dir))
                 : 0.0;
          double sum = 0.0;
          for (int k : ix.cascade(pk, dir)) sum += st.r[j][(size_t)k][(size_t)t];
          if (sum > budget && sum > 0.0) {
            double scale = budget / sum;
            for (int k : ix.cascade(pk, dir))
              st.r[j][(size_t)k][(size_t)t] *= scale;
          }
        }
      }
    }
  };

  if (thread_count <= 1 || T == 1) {
    for (int t = 0; t < T; ++t) solve_period(t);
  } else {
    std::atomic<int> next{0};
    auto worker = [&]() {
      while (true) {
        int t = next.fetch_add(1);
        if (t >= T) break;
        solve_period(t);
      }
    };
    std::vector<std::thread> pool;
    const int n = std::min(thread_count, T);
    pool.reserve((size_t)n);
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  st.shortfall = reserve_economics(c, ix, st).shortfall;
  return st;
}

}  // namespace acuc
