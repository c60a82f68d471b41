#include "acuc/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "acuc/acopf.hpp"

namespace acuc {

namespace {

constexpr double kHardTol = 1e-8;

double reactive_headroom(const Device& dev, double q, bool on, int t,
                         ReserveDirection dir) {
  const double u = on ? 1.0 : 0.0;
  const bool toward_max = (dev.kind == DeviceKind::Producer)
                              ? (dir == ReserveDirection::Up)
                              : (dir == ReserveDirection::Down);
  return toward_max ? dev.qmax_at(t) * u - q : q - dev.qmin_at(t) * u;
}

struct EconomicTerms {
  double value = 0.0, cost = 0.0, commitment = 0.0;
};

EconomicTerms device_economics(const Case& c, const CommitmentSchedule& cs,
                               const std::vector<std::vector<double>>& p) {
  EconomicTerms out;
  const int T = c.time_grid.periods();
  for (size_t j = 0; j < c.devices.size(); ++j) {
    const Device& dev = c.devices[j];
    for (int t = 0; t < T; ++t) {
      const double d_t = c.time_grid.durations[(size_t)t];
      double z = curve_value(dev.cost_at(t), p[j][(size_t)t]);
      if (dev.kind == DeviceKind::Producer)
        out.cost += d_t * z;
      else
        out.value += d_t * z;
      out.commitment += dev.su_cost * cs.su[j][(size_t)t] +
                        dev.sd_cost * cs.sd[j][(size_t)t] +
                        dev.on_cost * d_t * cs.on[j][(size_t)t];
    }
  }
  return out;
}

}  // namespace

ReserveEconomics reserve_economics(const Case& c, const CaseIndex& ix,
                                   const ReserveState& reserves) {
  ReserveEconomics out;
  const int T = c.time_grid.periods();
  const size_t np = c.products.size();
  for (size_t j = 0; j < reserves.r.size(); ++j) {
    const Device& dev = c.devices[j];
    for (size_t k = 0; k < np && k < reserves.r[j].size(); ++k) {
      double rate = dev.reserve_cost_for(c.products[k].id);
      if (rate == 0.0) continue;
      for (int t = 0; t < T; ++t)
        out.procurement_cost +=
            c.time_grid.durations[(size_t)t] * rate * reserves.r[j][k][(size_t)t];
    }
  }

  out.shortfall.assign(
      c.zones.size(),
      std::vector<std::vector<double>>(np, std::vector<double>((size_t)T, 0.0)));
  for (size_t z = 0; z < c.zones.size(); ++z) {
    const ReserveZone& zone = c.zones[z];
    for (ReserveDirection dir : {ReserveDirection::Up, ReserveDirection::Down}) {
      const auto& cascade = ix.cascade(zone.power_kind, dir);
      for (int t = 0; t < T; ++t) {
        const double d_t = c.time_grid.durations[(size_t)t];
        double cum_req = 0.0, cum_prov = 0.0;
        for (int kp : cascade) {
          const std::string& pid = c.products[(size_t)kp].id;
          cum_req += zone.requirement_at(pid, t);
          for (int dev : ix.zone_devices[z])
            cum_prov += reserves.r[(size_t)dev][(size_t)kp][(size_t)t];
          double deficit = std::max(0.0, cum_req - cum_prov);
          out.shortfall[z][(size_t)kp][(size_t)t] = deficit;
          out.shortfall_penalty += d_t * zone.penalty_for(pid) * deficit;
        }
      }
    }
  }
  return out;
}

std::vector<Violation> check_hard(const Case& c, const FullSolution& sol) {
  std::vector<Violation> out;
  auto add = [&out](std::string where, std::string msg) {
    out.push_back({std::move(where), std::move(msg)});
  };
  const int T = c.time_grid.periods();
  CaseIndex ix = build_index(c);

  for (size_t j = 0; j < c.devices.size(); ++j) {
    const Device& dev = c.devices[j];
    const auto& on = sol.commitment.on[j];
    const auto& su = sol.commitment.su[j];
    const auto& sd = sol.commitment.sd[j];
    int prev_on = dev.initial_on ? 1 : 0;
    double prev_p = dev.initial_p;
    for (int t = 0; t < T; ++t) {
      std::ostringstream loc;
      loc << "device " << dev.id << " t=" << t;
      if (su[(size_t)t] + sd[(size_t)t] > 1)
        add(loc.str(), "start-up and shut-down in the same period");
      if ((int)on[(size_t)t] - prev_on != (int)su[(size_t)t] - (int)sd[(size_t)t])
        add(loc.str(), "transition logic violated");
      const double p = sol.dispatch.p[j][(size_t)t];
      const double q = sol.dispatch.q[j][(size_t)t];
      if (on[(size_t)t]) {
        if (p < dev.pmin_at(t) - kHardTol || p > dev.pmax_at(t) + kHardTol)
          add(loc.str(), "online real power outside bounds");
        if (q < dev.qmin_at(t) - kHardTol || q > dev.qmax_at(t) + kHardTol)
          add(loc.str(), "online reactive power outside bounds");
      } else {
        if (std::fabs(p) > kHardTol)
          add(loc.str(), "offline device carries real power");
        if (std::fabs(q) > kHardTol)
          add(loc.str(), "offline device carries reactive power");
      }
      const double d_t = c.time_grid.durations[(size_t)t];
      RampEnvelope env = ramp_envelope(dev, prev_p, prev_on != 0,
                                       on[(size_t)t] != 0, su[(size_t)t] != 0, d_t);
      if (p < env.lo - kHardTol || p > env.hi + kHardTol)
        add(loc.str(), "ramping constraint violated");

      // Headroom with the stored reserves.
      for (PowerKind kind : {PowerKind::Active, PowerKind::Reactive}) {
        for (ReserveDirection dir :
             {ReserveDirection::Up, ReserveDirection::Down}) {
          double sum = 0.0;
          for (int kp : ix.cascade(kind, dir))
            sum += sol.reserves.r[j][(size_t)kp][(size_t)t];
          double room = kind == PowerKind::Active
                            ? headroom(dev, p, on[(size_t)t] != 0, t, dir)
                            : reactive_headroom(dev, q, on[(size_t)t] != 0, t, dir);
          if (sum > room + kHardTol)
            add(loc.str(), kind == PowerKind::Active
                               ? "active reserve exceeds headroom"
                               : "reactive reserve exceeds headroom");
        }
      }
      prev_on = on[(size_t)t];
      prev_p = p;
    }
    for (size_t k = 0; k < c.products.size(); ++k) {
      for (int t = 0; t < T; ++t) {
        if (sol.reserves.r[j][k][(size_t)t] < -kHardTol) {
          add("device " + dev.id + " t=" + std::to_string(t),
              "negative reserve on product " + c.products[k].id);
        }
      }
    }
  }

  for (size_t b = 0; b < c.buses.size(); ++b) {
    const Bus& bus = c.buses[b];
    for (int t = 0; t < T; ++t) {
      double v = sol.dispatch.v[b][(size_t)t];
      if (v < bus.v_min - kHardTol || v > bus.v_max + kHardTol)
        add("bus " + bus.id + " t=" + std::to_string(t),
            "voltage magnitude outside bounds");
    }
  }
  return out;
}

EvaluationReport evaluate(const Case& c, const FullSolution& sol,
                          std::optional<double> reference_objective) {
  const int T = c.time_grid.periods();
  if ((int)sol.commitment.periods() != T ||
      sol.commitment.devices() != (int)c.devices.size() ||
      sol.dispatch.v.size() != c.buses.size())
    throw std::invalid_argument("solution dimensions disagree with the case");

  CaseIndex ix = build_index(c);
  EvaluationReport rep;
  EconomicTerms econ = device_economics(c, sol.commitment, sol.dispatch.p);
  rep.energy_value = econ.value;
  rep.energy_cost = econ.cost;
  rep.commitment_cost = econ.commitment;

  ReserveEconomics res = reserve_economics(c, ix, sol.reserves);
  rep.reserve_procurement_cost = res.procurement_cost;
  rep.reserve_shortfall_penalty = res.shortfall_penalty;

  // Network penalties from recomputed flows and residuals.
  std::vector<double> pd(c.devices.size()), qd(c.devices.size());
  std::vector<double> vb(c.buses.size()), tb(c.buses.size());
  for (int t = 0; t < T; ++t) {
    const double d_t = c.time_grid.durations[(size_t)t];
    for (size_t j = 0; j < c.devices.size(); ++j) {
      pd[j] = sol.dispatch.p[j][(size_t)t];
      qd[j] = sol.dispatch.q[j][(size_t)t];
    }
    for (size_t b = 0; b < c.buses.size(); ++b) {
      vb[b] = sol.dispatch.v[b][(size_t)t];
      tb[b] = sol.dispatch.theta[b][(size_t)t];
    }
    BalanceResidual resid = balance_residual(c, ix, t, pd, qd, vb, tb);
    for (size_t b = 0; b < c.buses.size(); ++b) {
      rep.p_penalty += d_t * c.balance_penalty * std::fabs(resid.dp[b]);
      rep.q_penalty += d_t * c.balance_penalty * std::fabs(resid.dq[b]);
    }
    for (size_t l = 0; l < c.lines.size(); ++l) {
      const auto& line = c.lines[l];
      if (!line.in_service) continue;
      BranchFlows fl = branch_flows(vb[(size_t)ix.line_from[l]],
                                    vb[(size_t)ix.line_to[l]],
                                    tb[(size_t)ix.line_from[l]],
                                    tb[(size_t)ix.line_to[l]], line, true);
      double apparent = std::max(std::hypot(fl.p_fr, fl.q_fr),
                                 std::hypot(fl.p_to, fl.q_to));
      rep.line_overload_penalty +=
          d_t * c.line_overload_penalty * std::max(0.0, apparent - line.s_max);
    }
  }

  rep.objective = rep.energy_value - rep.energy_cost - rep.commitment_cost -
                  rep.reserve_procurement_cost - rep.reserve_shortfall_penalty -
                  rep.p_penalty - rep.q_penalty - rep.line_overload_penalty;
  rep.hard_violations = check_hard(c, sol);
  if (reference_objective)
    rep.gap_percent = (*reference_objective - rep.objective) /
                      std::fabs(*reference_objective) * 100.0;
  return rep;
}

EvaluationReport evaluate_copperplate(
    const Case& c, const CommitmentSchedule& commitment,
    const std::vector<std::vector<double>>& p,
    const std::vector<std::vector<double>>& q, const ReserveState& reserves) {
  const int T = c.time_grid.periods();
  CaseIndex ix = build_index(c);
  EvaluationReport rep;
  EconomicTerms econ = device_economics(c, commitment, p);
  rep.energy_value = econ.value;
  rep.energy_cost = econ.cost;
  rep.commitment_cost = econ.commitment;
  ReserveEconomics res = reserve_economics(c, ix, reserves);
  rep.reserve_procurement_cost = res.procurement_cost;
  rep.reserve_shortfall_penalty = res.shortfall_penalty;
  for (int t = 0; t < T; ++t) {
    const double d_t = c.time_grid.durations[(size_t)t];
    double dp = 0.0, dq = 0.0;
    for (size_t j = 0; j < c.devices.size(); ++j) {
      double sign = c.devices[j].kind == DeviceKind::Producer ? 1.0 : -1.0;
      dp += sign * p[j][(size_t)t];
      if (!q.empty()) dq += sign * q[j][(size_t)t];
    }
    rep.p_penalty += d_t * c.balance_penalty * std::fabs(dp);
    rep.q_penalty += d_t * c.balance_penalty * std::fabs(dq);
  }
  rep.objective = rep.energy_value - rep.energy_cost - rep.commitment_cost -
                  rep.reserve_procurement_cost - rep.reserve_shortfall_penalty -
                  rep.p_penalty - rep.q_penalty;
  return rep;
}

}  // namespace acuc
