#include "acuc/uc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace acuc {

PwlDelta build_pwl_delta(LinearProgram& lp, const CostCurve& curve, int p_var,
                         double obj_scale) {
  PwlDelta out;
  double prev = obj_scale >= 0.0 ? -kInf : kInf;
  for (const auto& blk : curve) {
    const bool ok = obj_scale >= 0.0 ? blk.rate >= prev - 1e-12
                                     : blk.rate <= prev + 1e-12;
    if (!ok)
      throw std::invalid_argument(
          "non-convex cost curve for the delta formulation");
    prev = blk.rate;
    out.block_vars.push_back(lp.add_var(0.0, blk.width, obj_scale * blk.rate));
  }
  LinearProgram::Row row;
  row.coeffs.emplace_back(p_var, 1.0);
  for (int b : out.block_vars) row.coeffs.emplace_back(b, -1.0);
  row.lo = row.hi = 0.0;
  row.name = "pwl_link";
  out.link_row = lp.add_row(std::move(row));
  return out;
}

MipProblem build_uc_mip(const Case& c, const CaseIndex& ix,
                        const UcBuildOptions& options, UcVarMap& map) {
  const int T = c.time_grid.periods();
  const int nd = (int)c.devices.size();
  const int np = (int)c.products.size();
  const int nz = (int)c.zones.size();
  map = UcVarMap{};
  map.T = T;
  map.nd = nd;
  map.np = np;
  map.nz = nz;
  map.u_on.assign((size_t)(nd * T), -1);
  map.u_su.assign((size_t)(nd * T), -1);
  map.u_sd.assign((size_t)(nd * T), -1);
  map.p.assign((size_t)(nd * T), -1);
  map.q.assign((size_t)(nd * T), -1);
  map.r.assign((size_t)(nd * np * T), -1);
  map.shortfall.assign((size_t)(nz * np * T), -1);

  MipProblem prob;
  LinearProgram& lp = prob.lp;

  auto product_active = [&](int k) {
    return c.products[(size_t)k].power_kind == PowerKind::Active;
  };
  auto product_enabled = [&](int k) {
    if (!options.include_reserves) return false;
    if (!product_active(k) && !options.include_reactive) return false;
    return true;
  };

  for (int j = 0; j < nd; ++j) {
    const Device& dev = c.devices[(size_t)j];
    const double sign = dev.kind == DeviceKind::Producer ? 1.0 : -1.0;
    for (int t = 0; t < T; ++t) {
      const double d_t = c.time_grid.durations[(size_t)t];
      int von = lp.add_var(0.0, 1.0, dev.on_cost * d_t);
      int vsu = lp.add_var(0.0, 1.0, dev.su_cost);
      int vsd = lp.add_var(0.0, 1.0, dev.sd_cost);
      prob.binaries.push_back(von);
      prob.binaries.push_back(vsu);
      prob.binaries.push_back(vsd);
      map.u_on[(size_t)map.jt(j, t)] = von;
      map.u_su[(size_t)map.jt(j, t)] = vsu;
      map.u_sd[(size_t)map.jt(j, t)] = vsd;

      int vp = lp.add_var(0.0, dev.pmax_at(t), 0.0);
      map.p[(size_t)map.jt(j, t)] = vp;
      build_pwl_delta(lp, dev.cost_at(t), vp, sign * d_t);

      // Semicontinuity: u_on*p_min <= p <= u_on*p_max.
      lp.add_row({{{vp, 1.0}, {von, -dev.pmax_at(t)}}, -kInf, 0.0, "p_hi"});
      lp.add_row({{{vp, 1.0}, {von, -dev.pmin_at(t)}}, 0.0, kInf, "p_lo"});

      if (options.include_reactive) {
        int vq = lp.add_var(std::min(0.0, dev.qmin_at(t)),
                            std::max(0.0, dev.qmax_at(t)), 0.0);
        map.q[(size_t)map.jt(j, t)] = vq;
        lp.add_row({{{vq, 1.0}, {von, -dev.qmax_at(t)}}, -kInf, 0.0, "q_hi"});
        lp.add_row({{{vq, 1.0}, {von, -dev.qmin_at(t)}}, 0.0, kInf, "q_lo"});
      }

      // Transition logic; u_on[-1] is the initial status.
      if (t == 0) {
        lp.add_row({{{von, 1.0}, {vsu, -1.0}, {vsd, 1.0}},
                    dev.initial_on ? 1.0 : 0.0,
                    dev.initial_on ? 1.0 : 0.0,
                    "transition"});
      } else {
        int von_prev = map.u_on[(size_t)map.jt(j, t - 1)];
        lp.add_row({{{von, 1.0}, {von_prev, -1.0}, {vsu, -1.0}, {vsd, 1.0}},
                    0.0, 0.0, "transition"});
      }
      lp.add_row({{{vsu, 1.0}, {vsd, 1.0}}, -kInf, 1.0, "su_sd"});

      // Ramping, skipped for unbounded rates.
      const bool finite_up = dev.p_ru < kInf && dev.p_ru_su < kInf;
      const bool finite_dn = dev.p_rd < kInf && dev.p_rd_sd < kInf;
      if (finite_up) {
        LinearProgram::Row row;
        row.coeffs.emplace_back(vp, 1.0);
        double rhs = d_t * dev.p_ru_su;
        if (t > 0)
          row.coeffs.emplace_back(map.p[(size_t)map.jt(j, t - 1)], -1.0);
        else
          rhs += dev.initial_on ? dev.initial_p : 0.0;
        row.coeffs.emplace_back(von, -d_t * (dev.p_ru - dev.p_ru_su));
        row.coeffs.emplace_back(vsu, d_t * (dev.p_ru - dev.p_ru_su));
        row.lo = -kInf;
        row.hi = rhs;
        row.name = "ramp_up";
        lp.add_row(std::move(row));
      }
      if (finite_dn) {
        LinearProgram::Row row;
        row.coeffs.emplace_back(vp, 1.0);
        double rhs = -d_t * dev.p_rd_sd;
        if (t > 0)
          row.coeffs.emplace_back(map.p[(size_t)map.jt(j, t - 1)], -1.0);
        else
          rhs += dev.initial_on ? dev.initial_p : 0.0;
        row.coeffs.emplace_back(von, d_t * (dev.p_rd - dev.p_rd_sd));
        row.lo = rhs;
        row.hi = kInf;
        row.name = "ramp_down";
        lp.add_row(std::move(row));
      }

      if (options.include_reserves) {
        for (int k = 0; k < np; ++k) {
          if (!product_enabled(k)) continue;
          const auto& prod = c.products[(size_t)k];
          double cap = dev.reserve_cap_for(prod.id);
          double cost = dev.reserve_cost_for(prod.id);
          int vr = lp.add_var(0.0, cap, cost * d_t);
          map.r[(size_t)map.jkt(j, k, t)] = vr;
        }
        // Headroom rows per (kind, direction).
        struct Combo {
          PowerKind kind;
          ReserveDirection dir;
        };
        for (const Combo combo :
             {Combo{PowerKind::Active, ReserveDirection::Up},
              Combo{PowerKind::Active, ReserveDirection::Down},
              Combo{PowerKind::Reactive, ReserveDirection::Up},
              Combo{PowerKind::Reactive, ReserveDirection::Down}}) {
          if (combo.kind == PowerKind::Reactive && !options.include_reactive)
            continue;
          const auto& cascade = ix.cascade(combo.kind, combo.dir);
          if (cascade.empty()) continue;
          std::vector<int> vars;
          for (int k : cascade) {
            int vr = map.r[(size_t)map.jkt(j, k, t)];
            if (vr >= 0) vars.push_back(vr);
          }
          if (vars.empty()) continue;
          const bool active = combo.kind == PowerKind::Active;
          int base = active ? vp : map.q[(size_t)map.jt(j, t)];
          const bool toward_max = (dev.kind == DeviceKind::Producer)
                                      ? (combo.dir == ReserveDirection::Up)
                                      : (combo.dir == ReserveDirection::Down);
          LinearProgram::Row row;
          row.coeffs.emplace_back(base, 1.0);
          double bound_coef =
              active ? (toward_max ? dev.pmax_at(t) : dev.pmin_at(t))
                     : (toward_max ? dev.qmax_at(t) : dev.qmin_at(t));
          row.coeffs.emplace_back(von, -bound_coef);
          for (int vr : vars)
            row.coeffs.emplace_back(vr, toward_max ? 1.0 : -1.0);
          if (toward_max) {
            row.lo = -kInf;
            row.hi = 0.0;  // base + sum r <= bound*u
          } else {
            row.lo = 0.0;  // base - sum r >= bound*u
            row.hi = kInf;
          }
          row.name = "headroom";
          lp.add_row(std::move(row));
        }
      }
    }
  }

  // Copper-plate balances.
  for (int t = 0; t < T; ++t) {
    LinearProgram::Row prow;
    for (int j = 0; j < nd; ++j) {
      double sign = c.devices[(size_t)j].kind == DeviceKind::Producer ? 1.0 : -1.0;
      prow.coeffs.emplace_back(map.p[(size_t)map.jt(j, t)], sign);
    }
    prow.lo = prow.hi = 0.0;
    prow.name = "p_balance";
    lp.add_row(std::move(prow));
    if (options.include_reactive) {
      LinearProgram::Row qrow;
      for (int j = 0; j < nd; ++j) {
        double sign =
            c.devices[(size_t)j].kind == DeviceKind::Producer ? 1.0 : -1.0;
        qrow.coeffs.emplace_back(map.q[(size_t)map.jt(j, t)], sign);
      }
      qrow.lo = qrow.hi = 0.0;
      qrow.name = "q_balance";
      lp.add_row(std::move(qrow));
    }
  }

  // Zonal reserve cascades with shortfall slacks.
  if (options.include_reserves) {
    for (int z = 0; z < nz; ++z) {
      const ReserveZone& zone = c.zones[(size_t)z];
      if (zone.power_kind == PowerKind::Reactive && !options.include_reactive)
        continue;
      for (ReserveDirection dir :
           {ReserveDirection::Up, ReserveDirection::Down}) {
        const auto& cascade = ix.cascade(zone.power_kind, dir);
        for (int t = 0; t < T; ++t) {
          const double d_t = c.time_grid.durations[(size_t)t];
          double cum_req = 0.0;
          std::vector<int> cum_vars;
          for (int k : cascade) {
            const std::string& pid = c.products[(size_t)k].id;
            cum_req += zone.requirement_at(pid, t);
            for (int dev : ix.zone_devices[(size_t)z]) {
              int vr = map.r[(size_t)map.jkt(dev, k, t)];
              if (vr >= 0) cum_vars.push_back(vr);
            }
            int sf = lp.add_var(0.0, kInf, zone.penalty_for(pid) * d_t);
            map.shortfall[(size_t)map.zkt(z, k, t)] = sf;
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
    }
  }

  return prob;
}

UcResult solve_copperplate_uc(const Case& c, const CaseIndex& ix,
                              const UcOptions& options) {
  UcVarMap map;
  MipProblem prob = build_uc_mip(c, ix, options.build, map);
  MipSolution mip = solve_mip(prob, options.mip);

  UcResult out;
  out.status = mip.status;
  out.gap = mip.gap;
  const int T = map.T, nd = map.nd, np = map.np, nz = map.nz;
  out.commitment.on.assign((size_t)nd, std::vector<std::uint8_t>((size_t)T, 0));
  out.commitment.su = out.commitment.on;
  out.commitment.sd = out.commitment.on;
  out.p.assign((size_t)nd, std::vector<double>((size_t)T, 0.0));
  out.q.assign((size_t)nd, std::vector<double>((size_t)T, 0.0));
  out.reserves.r.assign(
      (size_t)nd, std::vector<std::vector<double>>(
                      (size_t)np, std::vector<double>((size_t)T, 0.0)));
  out.reserves.shortfall.assign(
      (size_t)nz, std::vector<std::vector<double>>(
                      (size_t)np, std::vector<double>((size_t)T, 0.0)));
  if (mip.status == MipStatus::Infeasible || mip.status == MipStatus::Limit)
    return out;

  const auto& x = mip.x;
  for (int j = 0; j < nd; ++j) {
    for (int t = 0; t < T; ++t) {
      out.commitment.on[(size_t)j][(size_t)t] =
          x[(size_t)map.u_on[(size_t)map.jt(j, t)]] > 0.5;
      out.commitment.su[(size_t)j][(size_t)t] =
          x[(size_t)map.u_su[(size_t)map.jt(j, t)]] > 0.5;
      out.commitment.sd[(size_t)j][(size_t)t] =
          x[(size_t)map.u_sd[(size_t)map.jt(j, t)]] > 0.5;
      out.p[(size_t)j][(size_t)t] = x[(size_t)map.p[(size_t)map.jt(j, t)]];
      int vq = map.q[(size_t)map.jt(j, t)];
      if (vq >= 0) out.q[(size_t)j][(size_t)t] = x[(size_t)vq];
      for (int k = 0; k < np; ++k) {
        int vr = map.r[(size_t)map.jkt(j, k, t)];
        if (vr >= 0)
          out.reserves.r[(size_t)j][(size_t)k][(size_t)t] =
              std::max(0.0, x[(size_t)vr]);
      }
    }
  }
  for (int z = 0; z < nz; ++z)
    for (int k = 0; k < np; ++k)
      for (int t = 0; t < T; ++t) {
        int sf = map.shortfall[(size_t)map.zkt(z, k, t)];
        if (sf >= 0)
          out.reserves.shortfall[(size_t)z][(size_t)k][(size_t)t] =
              std::max(0.0, x[(size_t)sf]);
      }
  out.objective = -mip.objective;
  return out;
}

}  // namespace acuc
