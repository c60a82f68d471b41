#include "acuc/acopf.hpp"

#include <cstdio>
#include <cstdlib>

#include <algorithm>
#include <cassert>
#include <cmath>

#include "acuc/sparse_lu.hpp"

namespace acuc {

BranchFlows branch_flows(double v_fr, double v_to, double th_fr, double th_to,
                         const AcLine& line, bool u_on) {
  BranchFlows out;
  if (!u_on || !line.in_service) return out;
  const double c = std::cos(th_fr - th_to);
  const double s = std::sin(th_fr - th_to);
  const double vfvt = v_fr * v_to;
  const double g = line.g_sr, b = line.b_sr;
  out.p_fr = (g + line.g_fr) * v_fr * v_fr + (-g * c - b * s) * vfvt;
  out.q_fr = -(b + line.b_fr + line.b_ch / 2.0) * v_fr * v_fr +
             (b * c - g * s) * vfvt;
  out.p_to = (g + line.g_to) * v_to * v_to + (-g * c + b * s) * vfvt;
  out.q_to = -(b + line.b_to + line.b_ch / 2.0) * v_to * v_to +
             (b * c + g * s) * vfvt;
  return out;
}

FlowDerivatives branch_flow_derivatives(FlowQuantity which, double v_fr,
                                        double v_to, double th_fr,
                                        double th_to, const AcLine& line,
                                        bool u_on) {
  FlowDerivatives out;
  if (!u_on || !line.in_service) return out;
  const double g = line.g_sr, b = line.b_sr;
  double A = 0.0, B1 = 0.0, B2 = 0.0;
  bool on_from = true;  // quadratic term on v_fr or v_to
  switch (which) {
    case FlowQuantity::PFrom:
      A = g + line.g_fr;
      B1 = -g;
      B2 = -b;
      on_from = true;
      break;
    case FlowQuantity::QFrom:
      A = -(b + line.b_fr + line.b_ch / 2.0);
      B1 = b;
      B2 = -g;
      on_from = true;
      break;
    case FlowQuantity::PTo:
      A = g + line.g_to;
      B1 = -g;
      B2 = b;
      on_from = false;
      break;
    case FlowQuantity::QTo:
      A = -(b + line.b_to + line.b_ch / 2.0);
      B1 = b;
      B2 = g;
      on_from = false;
      break;
  }
  const double c = std::cos(th_fr - th_to);
  const double s = std::sin(th_fr - th_to);
  const double phi = B1 * c + B2 * s;
  const double dphi = -B1 * s + B2 * c;
  const double vq = on_from ? v_fr : v_to;
  const double vfvt = v_fr * v_to;

  out.value = A * vq * vq + phi * vfvt;
  // Order: [v_fr, v_to, th_fr, th_to].
  out.grad[0] = (on_from ? 2.0 * A * v_fr : 0.0) + phi * v_to;
  out.grad[1] = (on_from ? 0.0 : 2.0 * A * v_to) + phi * v_fr;
  out.grad[2] = dphi * vfvt;
  out.grad[3] = -dphi * vfvt;

  auto& H = out.hess;
  H[0][0] = on_from ? 2.0 * A : 0.0;
  H[1][1] = on_from ? 0.0 : 2.0 * A;
  H[0][1] = H[1][0] = phi;
  H[0][2] = H[2][0] = dphi * v_to;
  H[0][3] = H[3][0] = -dphi * v_to;
  H[1][2] = H[2][1] = dphi * v_fr;
  H[1][3] = H[3][1] = -dphi * v_fr;
  H[2][2] = H[3][3] = -phi * vfvt;
  H[2][3] = H[3][2] = phi * vfvt;
  return out;
}

BalanceResidual balance_residual(const Case& c, const CaseIndex& ix, int t,
                                 const std::vector<double>& p_dev,
                                 const std::vector<double>& q_dev,
                                 const std::vector<double>& v_bus,
                                 const std::vector<double>& theta_bus) {
  const size_t nb = c.buses.size();
  BalanceResidual out;
  out.dp.assign(nb, 0.0);
  out.dq.assign(nb, 0.0);
  for (size_t d = 0; d < c.devices.size(); ++d) {
    const double sign = c.devices[d].kind == DeviceKind::Producer ? 1.0 : -1.0;
    const size_t bus = (size_t)ix.device_bus[d];
    out.dp[bus] += sign * p_dev[d];
    out.dq[bus] += sign * q_dev[d];
  }
  for (size_t l = 0; l < c.lines.size(); ++l) {
    const auto& line = c.lines[l];
    if (!line.in_service) continue;
    const size_t f = (size_t)ix.line_from[l];
    const size_t to = (size_t)ix.line_to[l];
    BranchFlows fl = branch_flows(v_bus[f], v_bus[to], theta_bus[f],
                                  theta_bus[to], line, true);
    out.dp[f] -= fl.p_fr;
    out.dq[f] -= fl.q_fr;
    out.dp[to] -= fl.p_to;
    out.dq[to] -= fl.q_to;
  }
  (void)t;
  return out;
}

void recompute_derived_dispatch(const Case& c, const CaseIndex& ix,
                                DispatchState& d) {
  const int T = c.time_grid.periods();
  const size_t nl = c.lines.size();
  const size_t nb = c.buses.size();
  auto sized = [T](std::vector<std::vector<double>>& field, size_t n) {
    field.assign(n, std::vector<double>((size_t)T, 0.0));
  };
  sized(d.p_fr, nl);
  sized(d.q_fr, nl);
  sized(d.p_to, nl);
  sized(d.q_to, nl);
  sized(d.p_mismatch, nb);
  sized(d.q_mismatch, nb);
  std::vector<double> pd(c.devices.size()), qd(c.devices.size());
  std::vector<double> vb(nb), tb(nb);
  for (int t = 0; t < T; ++t) {
    for (size_t j = 0; j < c.devices.size(); ++j) {
      pd[j] = d.p[j][(size_t)t];
      qd[j] = d.q[j][(size_t)t];
    }
    for (size_t b = 0; b < nb; ++b) {
      vb[b] = d.v[b][(size_t)t];
      tb[b] = d.theta[b][(size_t)t];
    }
    for (size_t l = 0; l < nl; ++l) {
      const auto& line = c.lines[l];
      BranchFlows fl =
          branch_flows(vb[(size_t)ix.line_from[l]], vb[(size_t)ix.line_to[l]],
                       tb[(size_t)ix.line_from[l]], tb[(size_t)ix.line_to[l]],
                       line, line.in_service);
      d.p_fr[l][(size_t)t] = fl.p_fr;
      d.q_fr[l][(size_t)t] = fl.q_fr;
      d.p_to[l][(size_t)t] = fl.p_to;
      d.q_to[l][(size_t)t] = fl.q_to;
    }
    BalanceResidual res = balance_residual(c, ix, t, pd, qd, vb, tb);
    for (size_t b = 0; b < nb; ++b) {
      d.p_mismatch[b][(size_t)t] = res.dp[b];
      d.q_mismatch[b][(size_t)t] = res.dq[b];
    }
  }
}

// ---------------------------------------------------------------------------
// NLP assembly
// ---------------------------------------------------------------------------

namespace {

constexpr double kFixedTol = 1e-12;

struct VarRef {
  int idx = -1;       // solver variable, or -1 when fixed
  double value = 0.0; // fixed value when idx < 0
};

}  // namespace

class AcOpfModel {
 public:
  const AcOpfProblem& prob;
  const Case& c;
  const CaseIndex& ix;
  double d_t;

  int nv = 0;  // solver variables
  int nc = 0;  // equality constraints
  std::vector<double> lo, hi, start, grad;  // per solver variable

  std::vector<VarRef> v_bus, th_bus;                 // per bus
  std::vector<VarRef> p_dev, q_dev;                  // per online device
  std::vector<std::vector<VarRef>> delta_dev;        // per online device block
  std::vector<int> sp_bus, sm_bus, sqp_bus, sqm_bus; // slack vars per bus
  std::vector<int> sigma_line, wfr_line, wto_line;   // soft limit vars per line
  std::vector<int> active_lines;                     // in-service line ids

  std::vector<int> pbal_row, qbal_row;  // per bus
  std::vector<int> delta_row;           // per online device
  std::vector<int> lim_fr_row, lim_to_row;

  // Static (linear) parts of each constraint row.
  std::vector<std::vector<std::pair<int, double>>> static_jac;

  explicit AcOpfModel(const AcOpfProblem& problem)
      : prob(problem), c(*problem.c), ix(*problem.ix) {
    d_t = c.time_grid.durations[(size_t)prob.t];
    build();
  }

  int new_var(double l, double h, double x0, double g = 0.0) {
    lo.push_back(l);
    hi.push_back(h);
    start.push_back(x0);
    grad.push_back(g);
    return nv++;
  }

  VarRef bounded_var(double l, double h, double x0, double g = 0.0) {
    if (h - l <= kFixedTol) return {-1, 0.5 * (l + h)};
    return {new_var(l, h, std::min(std::max(x0, l), h), g), 0.0};
  }

  void build() {
    const size_t nb = c.buses.size();
    v_bus.resize(nb);
    th_bus.resize(nb);
    for (size_t b = 0; b < nb; ++b) {
      v_bus[b] = bounded_var(c.buses[b].v_min, c.buses[b].v_max, 1.0);
      if ((int)b == ix.reference_bus)
        th_bus[b] = {-1, 0.0};  // angle reference pins the rotation
      else
        th_bus[b] = {new_var(-kInf, kInf, 0.0), 0.0};
    }

    const size_t nk = prob.online.size();
    p_dev.resize(nk);
    q_dev.resize(nk);
    delta_dev.resize(nk);
    for (size_t k = 0; k < nk; ++k) {
      const auto& od = prob.online[k];
      const Device& dev = c.devices[(size_t)od.device];
      p_dev[k] = bounded_var(od.p_lo, od.p_hi, 0.5 * (od.p_lo + od.p_hi));
      q_dev[k] = bounded_var(od.q_lo, od.q_hi, 0.5 * (od.q_lo + od.q_hi));
      const double sign = dev.kind == DeviceKind::Producer ? 1.0 : -1.0;
      const CostCurve& curve = dev.cost_at(prob.t);
      // Seed blocks with a greedy fill of the starting power.
      double fill = p_dev[k].idx >= 0 ? start[(size_t)p_dev[k].idx]
                                      : p_dev[k].value;
      delta_dev[k].resize(curve.size());
      for (size_t bkt = 0; bkt < curve.size(); ++bkt) {
        double take = std::min(std::max(fill, 0.0), curve[bkt].width);
        fill -= take;
        delta_dev[k][bkt] = bounded_var(0.0, curve[bkt].width, take,
                                        sign * d_t * curve[bkt].rate);
      }
    }

    sp_bus.resize(nb);
    sm_bus.resize(nb);
    sqp_bus.resize(nb);
    sqm_bus.resize(nb);
    const double pen = d_t * c.balance_penalty;
    for (size_t b = 0; b < nb; ++b) {
      sp_bus[b] = new_var(0.0, kInf, 0.01, pen);
      sm_bus[b] = new_var(0.0, kInf, 0.01, pen);
      sqp_bus[b] = new_var(0.0, kInf, 0.01, pen);
      sqm_bus[b] = new_var(0.0, kInf, 0.01, pen);
    }

    for (size_t l = 0; l < c.lines.size(); ++l)
      if (c.lines[l].in_service) active_lines.push_back((int)l);

    if (prob.soft_line_limits) {
      sigma_line.assign(c.lines.size(), -1);
      wfr_line.assign(c.lines.size(), -1);
      wto_line.assign(c.lines.size(), -1);
      const double open = d_t * c.line_overload_penalty;
      for (int l : active_lines) {
        sigma_line[(size_t)l] = new_var(0.0, kInf, 0.01, open);
        wfr_line[(size_t)l] = new_var(0.0, kInf, 1.0, 0.0);
        wto_line[(size_t)l] = new_var(0.0, kInf, 1.0, 0.0);
      }
    }

    // Constraint rows: delta links, then p/q balances, then soft limits.
    delta_row.assign(nk, -1);
    for (size_t k = 0; k < nk; ++k) delta_row[k] = nc++;
    pbal_row.resize(nb);
    qbal_row.resize(nb);
    for (size_t b = 0; b < nb; ++b) {
      pbal_row[b] = nc++;
      qbal_row[b] = nc++;
    }
    if (prob.soft_line_limits) {
      lim_fr_row.assign(c.lines.size(), -1);
      lim_to_row.assign(c.lines.size(), -1);
      for (int l : active_lines) {
        lim_fr_row[(size_t)l] = nc++;
        lim_to_row[(size_t)l] = nc++;
      }
    }

    static_jac.assign((size_t)nc, {});
    auto put = [this](int row, const VarRef& ref, double coef) {
      if (ref.idx >= 0) static_jac[(size_t)row].emplace_back(ref.idx, coef);
    };
    for (size_t k = 0; k < nk; ++k) {
      put(delta_row[k], p_dev[k], 1.0);
      for (const auto& dv : delta_dev[k]) put(delta_row[k], dv, -1.0);
      const auto& od = prob.online[k];
      const double sign =
          c.devices[(size_t)od.device].kind == DeviceKind::Producer ? 1.0 : -1.0;
      const size_t bus = (size_t)ix.device_bus[(size_t)od.device];
      put(pbal_row[bus], p_dev[k], sign);
      put(qbal_row[bus], q_dev[k], sign);
    }
    for (size_t b = 0; b < nb; ++b) {
      static_jac[(size_t)pbal_row[b]].emplace_back(sp_bus[b], -1.0);
      static_jac[(size_t)pbal_row[b]].emplace_back(sm_bus[b], 1.0);
      static_jac[(size_t)qbal_row[b]].emplace_back(sqp_bus[b], -1.0);
      static_jac[(size_t)qbal_row[b]].emplace_back(sqm_bus[b], 1.0);
    }
    if (prob.soft_line_limits) {
      for (int l : active_lines) {
        static_jac[(size_t)lim_fr_row[(size_t)l]].emplace_back(
            wfr_line[(size_t)l], 1.0);
        static_jac[(size_t)lim_to_row[(size_t)l]].emplace_back(
            wto_line[(size_t)l], 1.0);
      }
    }
  }

  double value_of(const VarRef& ref, const std::vector<double>& x) const {
    return ref.idx >= 0 ? x[(size_t)ref.idx] : ref.value;
  }

  // Constant part of each delta row from fixed variables.
  double fixed_residual_delta(size_t k) const {
    double r = 0.0;
    if (p_dev[k].idx < 0) r += p_dev[k].value;
    for (const auto& dv : delta_dev[k])
      if (dv.idx < 0) r -= dv.value;
    return r;
  }
  double fixed_residual_pbal(size_t bus) const {
    double r = 0.0;
    for (size_t k = 0; k < prob.online.size(); ++k) {
      const auto& od = prob.online[k];
      if ((size_t)ix.device_bus[(size_t)od.device] != bus) continue;
      const double sign =
          c.devices[(size_t)od.device].kind == DeviceKind::Producer ? 1.0 : -1.0;
      if (p_dev[k].idx < 0) r += sign * p_dev[k].value;
    }
    return r;
  }
  double fixed_residual_qbal(size_t bus) const {
    double r = 0.0;
    for (size_t k = 0; k < prob.online.size(); ++k) {
      const auto& od = prob.online[k];
      if ((size_t)ix.device_bus[(size_t)od.device] != bus) continue;
      const double sign =
          c.devices[(size_t)od.device].kind == DeviceKind::Producer ? 1.0 : -1.0;
      if (q_dev[k].idx < 0) r += sign * q_dev[k].value;
    }
    return r;
  }

  // Evaluates constraints, the Jacobian, and (lambda-weighted) Hessian.
  void evaluate(const std::vector<double>& x, std::vector<double>& cons,
                std::vector<std::vector<std::pair<int, double>>>* jac,
                const std::vector<double>* lambda,
                std::vector<std::tuple<int, int, double>>* hess) const {
    cons.assign((size_t)nc, 0.0);
    if (jac) *jac = static_jac;

    // Linear parts.
    for (int r = 0; r < nc; ++r) {
      double acc = 0.0;
      for (const auto& [j, a] : static_jac[(size_t)r]) acc += a * x[(size_t)j];
      cons[(size_t)r] = acc;
    }
    for (size_t k = 0; k < prob.online.size(); ++k)
      cons[(size_t)delta_row[k]] += fixed_residual_delta(k);
    for (size_t b = 0; b < c.buses.size(); ++b) {
      cons[(size_t)pbal_row[b]] += fixed_residual_pbal(b);
      cons[(size_t)qbal_row[b]] += fixed_residual_qbal(b);
    }
    if (hess) hess->clear();

    // Flow contributions line by line.
    for (int l : active_lines) {
      const auto& line = c.lines[(size_t)l];
      const size_t f = (size_t)ix.line_from[(size_t)l];
      const size_t to = (size_t)ix.line_to[(size_t)l];
      const double vf = value_of(v_bus[f], x);
      const double vt = value_of(v_bus[to], x);
      const double tf = value_of(th_bus[f], x);
      const double tt = value_of(th_bus[to], x);
      const int vars[4] = {v_bus[f].idx, v_bus[to].idx, th_bus[f].idx,
                           th_bus[to].idx};

      const FlowQuantity quants[4] = {FlowQuantity::PFrom, FlowQuantity::QFrom,
                                      FlowQuantity::PTo, FlowQuantity::QTo};
      const int rows[4] = {pbal_row[f], qbal_row[f], pbal_row[to],
                           qbal_row[to]};
      FlowDerivatives der[4];
      for (int qi = 0; qi < 4; ++qi)
        der[qi] = branch_flow_derivatives(quants[qi], vf, vt, tf, tt, line, true);

      for (int qi = 0; qi < 4; ++qi) {
        cons[(size_t)rows[qi]] -= der[qi].value;
        if (jac) {
          for (int a = 0; a < 4; ++a) {
            if (vars[a] >= 0)
              (*jac)[(size_t)rows[qi]].emplace_back(vars[a],
                                                    -der[qi].grad[(size_t)a]);
          }
        }
      }
      if (hess && lambda) {
        // Lagrangian weights: flows enter the balance rows with -1.
        double w[4];
        for (int qi = 0; qi < 4; ++qi)
          w[qi] = -(*lambda)[(size_t)rows[qi]];
        for (int a = 0; a < 4; ++a) {
          if (vars[a] < 0) continue;
          for (int bb = 0; bb <= a; ++bb) {
            if (vars[bb] < 0) continue;
            double acc = 0.0;
            for (int qi = 0; qi < 4; ++qi)
              acc += w[qi] * der[qi].hess[(size_t)a][(size_t)bb];
            int hi_v = std::max(vars[a], vars[bb]);
            int lo_v = std::min(vars[a], vars[bb]);
            hess->emplace_back(hi_v, lo_v, acc);
          }
        }
      }
      if (prob.soft_line_limits) {
        // (s_max + sigma)^2 >= p^2 + q^2, written side by side with slacks.
        const int sig = sigma_line[(size_t)l];
        const double sigv = x[(size_t)sig];
        const double cap = line.s_max + sigv;
        struct Side {
          int row;
          const FlowDerivatives* pd;
          const FlowDerivatives* qd;
        } sides[2] = {{lim_fr_row[(size_t)l], &der[0], &der[1]},
                      {lim_to_row[(size_t)l], &der[2], &der[3]}};
        for (const auto& side : sides) {
          const double pv = side.pd->value, qv = side.qd->value;
          cons[(size_t)side.row] += pv * pv + qv * qv - cap * cap;
          if (jac) {
            for (int a = 0; a < 4; ++a) {
              if (vars[a] < 0) continue;
              double gsum = 2.0 * pv * side.pd->grad[(size_t)a] +
                            2.0 * qv * side.qd->grad[(size_t)a];
              if (gsum != 0.0)
                (*jac)[(size_t)side.row].emplace_back(vars[a], gsum);
            }
            (*jac)[(size_t)side.row].emplace_back(sig, -2.0 * cap);
          }
          if (hess && lambda) {
            double wl = (*lambda)[(size_t)side.row];
            if (wl != 0.0) {
              for (int a = 0; a < 4; ++a) {
                if (vars[a] < 0) continue;
                for (int bb = 0; bb <= a; ++bb) {
                  if (vars[bb] < 0) continue;
                  double acc =
                      2.0 * (side.pd->grad[(size_t)a] * side.pd->grad[(size_t)bb] +
                             pv * side.pd->hess[(size_t)a][(size_t)bb] +
                             side.qd->grad[(size_t)a] * side.qd->grad[(size_t)bb] +
                             qv * side.qd->hess[(size_t)a][(size_t)bb]);
                  if (acc != 0.0)
                    hess->emplace_back(std::max(vars[a], vars[bb]),
                                       std::min(vars[a], vars[bb]), wl * acc);
                }
              }
              hess->emplace_back(sig, sig, -2.0 * wl);
            }
          }
        }
      }
    }
  }
};

AcOpfEvaluation acopf_variable_space(const AcOpfProblem& problem) {
  AcOpfModel model(problem);
  AcOpfEvaluation out;
  out.num_vars = model.nv;
  out.num_cons = model.nc;
  out.var_lo = model.lo;
  out.var_hi = model.hi;
  out.start = model.start;
  return out;
}

AcOpfDerivatives acopf_derivatives(const AcOpfProblem& problem,
                                   const std::vector<double>& point,
                                   const std::vector<double>& lambda) {
  AcOpfModel model(problem);
  AcOpfDerivatives out;
  out.objective_gradient = model.grad;
  model.evaluate(point, out.constraint_values, &out.jacobian, &lambda,
                 &out.lagrangian_hessian);
  return out;
}

// ---------------------------------------------------------------------------
// Primal-dual interior point on the penalized equality-constrained NLP.
// ---------------------------------------------------------------------------

namespace {

struct IpState {
  std::vector<double> x, lam, zl, zu;
};

double inf_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double a : v) m = std::max(m, std::fabs(a));
  return m;
}

}  // namespace

AcOpfResult solve_acopf(const AcOpfProblem& problem, const AcOpfOptions& options) {
  AcOpfModel model(problem);
  const int nv = model.nv;
  const int nc = model.nc;
  const auto& lo = model.lo;
  const auto& hi = model.hi;

  // Work on a gradient-scaled objective so the balance-penalty multipliers
  // stay O(1); residuals are reported against the original units.
  double grad_inf = 0.0;
  for (double g : model.grad) grad_inf = std::max(grad_inf, std::fabs(g));
  const double obj_scale = grad_inf > 100.0 ? 100.0 / grad_inf : 1.0;
  for (double& g : model.grad) g *= obj_scale;

  IpState st;
  st.x = model.start;
  // Strictly interior start.
  for (int i = 0; i < nv; ++i) {
    if (lo[(size_t)i] > -kInf && hi[(size_t)i] < kInf) {
      double width = hi[(size_t)i] - lo[(size_t)i];
      double pad = std::min(1e-2 * width, 1e-4 * std::max(1.0, width)) + 1e-12;
      pad = std::max(pad, 1e-9 * width);
      st.x[(size_t)i] = std::min(std::max(st.x[(size_t)i], lo[(size_t)i] + pad),
                                 hi[(size_t)i] - pad);
    } else if (lo[(size_t)i] > -kInf) {
      st.x[(size_t)i] = std::max(st.x[(size_t)i], lo[(size_t)i] + 1e-2);
    } else if (hi[(size_t)i] < kInf) {
      st.x[(size_t)i] = std::min(st.x[(size_t)i], hi[(size_t)i] - 1e-2);
    }
  }

  // Seed mismatch slacks so the balance rows start near-feasible.
  {
    std::vector<double> cons;
    model.evaluate(st.x, cons, nullptr, nullptr, nullptr);
    for (size_t b = 0; b < model.c.buses.size(); ++b) {
      double rp = cons[(size_t)model.pbal_row[b]];
      // Row is residual + (-sp + sm); choose slacks to cancel it.
      double sp = st.x[(size_t)model.sp_bus[b]];
      double sm = st.x[(size_t)model.sm_bus[b]];
      double base = rp + sp - sm;  // residual without slack contribution
      st.x[(size_t)model.sp_bus[b]] = std::max(base, 0.0) + 0.01;
      st.x[(size_t)model.sm_bus[b]] = std::max(-base, 0.0) + 0.01;
      double rq = cons[(size_t)model.qbal_row[b]];
      double sqp = st.x[(size_t)model.sqp_bus[b]];
      double sqm = st.x[(size_t)model.sqm_bus[b]];
      double baseq = rq + sqp - sqm;
      st.x[(size_t)model.sqp_bus[b]] = std::max(baseq, 0.0) + 0.01;
      st.x[(size_t)model.sqm_bus[b]] = std::max(-baseq, 0.0) + 0.01;
    }
  }

  double mu = 1e-1;
  st.lam.assign((size_t)nc, 0.0);
  st.zl.assign((size_t)nv, 0.0);
  st.zu.assign((size_t)nv, 0.0);
  for (int i = 0; i < nv; ++i) {
    if (lo[(size_t)i] > -kInf)
      st.zl[(size_t)i] = mu / (st.x[(size_t)i] - lo[(size_t)i]);
    if (hi[(size_t)i] < kInf)
      st.zu[(size_t)i] = mu / (hi[(size_t)i] - st.x[(size_t)i]);
  }

  std::vector<double> cons;
  std::vector<std::vector<std::pair<int, double>>> jac;
  std::vector<std::tuple<int, int, double>> hess;

  auto dual_residual = [&](const std::vector<double>& x,
                           const std::vector<double>& lam,
                           const std::vector<double>& zl,
                           const std::vector<double>& zu,
                           const std::vector<std::vector<std::pair<int, double>>>&
                               jrows) {
    std::vector<double> r = model.grad;
    for (int row = 0; row < nc; ++row) {
      double l = lam[(size_t)row];
      if (l == 0.0) continue;
      for (const auto& [j, a] : jrows[(size_t)row]) r[(size_t)j] += l * a;
    }
    for (int i = 0; i < nv; ++i)
      r[(size_t)i] += -zl[(size_t)i] + zu[(size_t)i];
    (void)x;
    return r;
  };

  double best_primal = kInf, best_dual = kInf;
  IpState best = st;
  double delta_x = 0.0;
  double nu = 1.0;  // merit penalty weight
  int iter = 0;
  int ls_failures = 0;
  double window_dual = kInf;  // stagnation watch, reset every 12 iterations
  int stagnant_windows = 0;

  // Variables that appear in exactly one constraint row, linearly and with
  // no Hessian entries (mismatch slack pairs, cost blocks, reactive
  // dispatch), are condensed out of the KKT solve. Their pivots land on the
  // constraint diagonal, which both shrinks the system and hands the
  // factorization strong entries.
  std::vector<int> cond_row((size_t)nv, -1);
  std::vector<double> cond_coef((size_t)nv, 0.0);
  {
    std::vector<int> count((size_t)nv, 0);
    std::vector<double> coef((size_t)nv, 0.0);
    std::vector<int> row_of((size_t)nv, -1);
    for (int r = 0; r < nc; ++r) {
      for (const auto& [j, a] : model.static_jac[(size_t)r]) {
        ++count[(size_t)j];
        coef[(size_t)j] = a;
        row_of[(size_t)j] = r;
      }
    }
    std::vector<char> dynamic((size_t)nv, 0);
    for (size_t b = 0; b < model.c.buses.size(); ++b) {
      if (model.v_bus[b].idx >= 0) dynamic[(size_t)model.v_bus[b].idx] = 1;
      if (model.th_bus[b].idx >= 0) dynamic[(size_t)model.th_bus[b].idx] = 1;
    }
    if (!model.sigma_line.empty()) {
      for (int l : model.active_lines)
        if (model.sigma_line[(size_t)l] >= 0)
          dynamic[(size_t)model.sigma_line[(size_t)l]] = 1;
    }
    for (int i = 0; i < nv; ++i) {
      bool bounded = lo[(size_t)i] > -kInf || hi[(size_t)i] < kInf;
      if (count[(size_t)i] == 1 && !dynamic[(size_t)i] && bounded) {
        cond_row[(size_t)i] = row_of[(size_t)i];
        cond_coef[(size_t)i] = coef[(size_t)i];
      }
    }
  }
  std::vector<int> red_idx((size_t)nv, -1);
  int nred = 0;
  for (int i = 0; i < nv; ++i)
    if (cond_row[(size_t)i] < 0) red_idx[(size_t)i] = nred++;
  std::vector<int> kkt_order;  // filled from the first assembled pattern

  AcOpfResult result;
  auto barrier_value = [&](const std::vector<double>& x) {
    double phi = 0.0;
    for (int i = 0; i < nv; ++i) {
      phi += model.grad[(size_t)i] * x[(size_t)i];
      if (lo[(size_t)i] > -kInf) phi -= mu * std::log(x[(size_t)i] - lo[(size_t)i]);
      if (hi[(size_t)i] < kInf) phi -= mu * std::log(hi[(size_t)i] - x[(size_t)i]);
    }
    return phi;
  };
  auto cons_norm1 = [&](const std::vector<double>& cv) {
    double s = 0.0;
    for (double v : cv) s += std::fabs(v);
    return s;
  };

  for (iter = 0; iter < options.max_iter; ++iter) {
    model.evaluate(st.x, cons, &jac, &st.lam, &hess);
    std::vector<double> rd = dual_residual(st.x, st.lam, st.zl, st.zu, jac);
    double primal_inf = inf_norm(cons);
    double dual_inf = inf_norm(rd);
    if (std::getenv("ACUC_IP_DEBUG") && (iter < 6 || iter % 25 == 0))
      std::fprintf(stderr, "iter=%d primal=%.2e dual=%.2e mu=%.2e\n", iter,
                   primal_inf, dual_inf / obj_scale, mu);

    if (primal_inf < best_primal ||
        (primal_inf <= best_primal + 1e-12 && dual_inf < best_dual)) {
      best_primal = primal_inf;
      best_dual = dual_inf;
      best = st;
    }
    if (primal_inf <= options.primal_tol &&
        dual_inf / obj_scale <= options.dual_tol && mu <= 1e-5) {
      result.converged = true;
      break;
    }

    // Barrier update: scaled KKT error against the current mu.
    double compl_inf = 0.0;
    for (int i = 0; i < nv; ++i) {
      if (lo[(size_t)i] > -kInf)
        compl_inf = std::max(compl_inf,
                             std::fabs(st.zl[(size_t)i] *
                                           (st.x[(size_t)i] - lo[(size_t)i]) -
                                       mu));
      if (hi[(size_t)i] < kInf)
        compl_inf = std::max(compl_inf,
                             std::fabs(st.zu[(size_t)i] *
                                           (hi[(size_t)i] - st.x[(size_t)i]) -
                                       mu));
    }
    double z_norm = 0.0;
    for (int i = 0; i < nv; ++i)
      z_norm += std::fabs(st.zl[(size_t)i]) + std::fabs(st.zu[(size_t)i]);
    for (int r = 0; r < nc; ++r) z_norm += std::fabs(st.lam[(size_t)r]);
    double sd = std::max(100.0, z_norm / std::max(1, nv + nc)) / 100.0;
    double err = std::max({dual_inf / sd, primal_inf, compl_inf / sd});
    if (err <= 10.0 * mu && mu > 1e-9)
      mu = std::max(1e-9, std::min(0.2 * mu, std::pow(mu, 1.5)));
    // Stagnation watch: when the subproblem stops improving (typical near a
    // transfer-limit surface), push the barrier along anyway, and give up
    // on the tail once that stops paying off as well.
    if (iter % 12 == 0) {
      if (dual_inf > 0.9 * window_dual && primal_inf <= options.primal_tol) {
        if (mu > 1e-9) {
          mu = std::max(1e-9, 0.2 * mu);
          ++stagnant_windows;
        } else if (++stagnant_windows >= 4) {
          break;
        }
      } else {
        stagnant_windows = 0;
      }
      window_dual = dual_inf;
    }
    if (stagnant_windows >= 10) break;

    // Dual and primal right-hand sides in the full variable space:
    // r1 = -(grad + J^T lam - mu/(x-l) + mu/(u-x)), r2 = -c.
    std::vector<double> r1((size_t)nv, 0.0);
    for (int i = 0; i < nv; ++i) r1[(size_t)i] = -model.grad[(size_t)i];
    for (int r = 0; r < nc; ++r) {
      double l = st.lam[(size_t)r];
      if (l == 0.0) continue;
      for (const auto& [j, a] : jac[(size_t)r]) r1[(size_t)j] -= l * a;
    }
    for (int i = 0; i < nv; ++i) {
      if (lo[(size_t)i] > -kInf)
        r1[(size_t)i] += mu / (st.x[(size_t)i] - lo[(size_t)i]);
      if (hi[(size_t)i] < kInf)
        r1[(size_t)i] -= mu / (hi[(size_t)i] - st.x[(size_t)i]);
    }

    // KKT on the retained variables, re-assembled whenever the
    // regularization changes: [W + D + dx*I, J_r^T; J_r, -dc*I + S] with S
    // collecting the condensed pivots -a^2/D on the row diagonals.
    const int N = nred + nc;
    std::vector<double> diag_eff((size_t)nv, 0.0);
    SparseLU lu;
    std::vector<double> rhs((size_t)N, 0.0);
    std::vector<double> sol;
    bool ok = false;
    for (int attempt = 0; attempt < 14 && !ok; ++attempt) {
      if (attempt > 0) delta_x = std::max(delta_x * 10.0, 1e-8);
      for (int i = 0; i < nv; ++i) {
        double d = delta_x;
        if (lo[(size_t)i] > -kInf)
          d += st.zl[(size_t)i] / (st.x[(size_t)i] - lo[(size_t)i]);
        if (hi[(size_t)i] < kInf)
          d += st.zu[(size_t)i] / (hi[(size_t)i] - st.x[(size_t)i]);
        diag_eff[(size_t)i] = d;
      }
      std::vector<double> row_extra((size_t)nc, 0.0);
      std::vector<double> r2((size_t)nc, 0.0);
      for (int r = 0; r < nc; ++r) r2[(size_t)r] = -cons[(size_t)r];
      for (int i = 0; i < nv; ++i) {
        int cr = cond_row[(size_t)i];
        if (cr < 0) continue;
        double d = std::max(diag_eff[(size_t)i], 1e-12);
        double a = cond_coef[(size_t)i];
        row_extra[(size_t)cr] -= a * a / d;
        r2[(size_t)cr] -= a * r1[(size_t)i] / d;
      }
      SparseColumns cols((size_t)N);
      for (int i = 0; i < nv; ++i) {
        int ri = red_idx[(size_t)i];
        if (ri >= 0) cols[(size_t)ri].emplace_back(ri, diag_eff[(size_t)i]);
      }
      for (const auto& [a, b, v] : hess) {
        int ra = red_idx[(size_t)a], rb = red_idx[(size_t)b];
        cols[(size_t)rb].emplace_back(ra, v);
        if (ra != rb) cols[(size_t)ra].emplace_back(rb, v);
      }
      for (int r = 0; r < nc; ++r) {
        for (const auto& [j, a] : jac[(size_t)r]) {
          int rj = red_idx[(size_t)j];
          if (rj < 0) continue;
          cols[(size_t)rj].emplace_back(nred + r, a);
          cols[(size_t)(nred + r)].emplace_back(rj, a);
        }
        cols[(size_t)(nred + r)].emplace_back(nred + r,
                                              -1e-8 + row_extra[(size_t)r]);
      }
      for (int i = 0; i < nv; ++i) {
        int ri = red_idx[(size_t)i];
        if (ri >= 0) rhs[(size_t)ri] = r1[(size_t)i];
      }
      for (int r = 0; r < nc; ++r) rhs[(size_t)(nred + r)] = r2[(size_t)r];
      if (kkt_order.empty()) kkt_order = SparseLU::rcm_order(cols);
      ok = lu.factor(cols, 1e-11, &kkt_order);
      if (!ok) continue;
      sol = rhs;
      lu.solve(sol);
      // Directional curvature of the condensed Hessian block; a
      // non-positive value marks an indefinite system that needs more
      // regularization (inertia correction by proxy).
      double curv = 0.0, norm2 = 0.0;
      for (int i = 0; i < nv; ++i) {
        int ri = red_idx[(size_t)i];
        if (ri < 0) continue;
        double di = sol[(size_t)ri];
        curv += diag_eff[(size_t)i] * di * di;
        norm2 += di * di;
      }
      for (const auto& [a, b, v] : hess) {
        int ra = red_idx[(size_t)a], rb = red_idx[(size_t)b];
        curv += (a == b ? 1.0 : 2.0) * v * sol[(size_t)ra] * sol[(size_t)rb];
      }
      if (curv < 1e-10 * norm2 && attempt + 1 < 14) ok = false;
      if (std::getenv("ACUC_IP_DEBUG") && iter < 6)
        std::fprintf(stderr,
                     "  iter=%d attempt=%d ok=%d N=%d fill=%zu dx_reg=%g curv=%.2e\n",
                     iter, attempt, ok ? 1 : 0, N, lu.fill(), delta_x, curv);
    }
    if (!ok) {
      // Bound-projected gradient fallback on the merit function.
      double step = 1e-3;
      for (int i = 0; i < nv; ++i) {
        double g = model.grad[(size_t)i];
        st.x[(size_t)i] -= step * g;
        if (lo[(size_t)i] > -kInf)
          st.x[(size_t)i] = std::max(st.x[(size_t)i], lo[(size_t)i] + 1e-10);
        if (hi[(size_t)i] < kInf)
          st.x[(size_t)i] = std::min(st.x[(size_t)i], hi[(size_t)i] - 1e-10);
      }
      continue;
    }

    std::vector<double> dx((size_t)nv, 0.0);
    std::vector<double> dlam(sol.begin() + nred, sol.end());
    for (int i = 0; i < nv; ++i) {
      int ri = red_idx[(size_t)i];
      if (ri >= 0) {
        dx[(size_t)i] = sol[(size_t)ri];
      } else {
        int cr = cond_row[(size_t)i];
        double d = std::max(diag_eff[(size_t)i], 1e-12);
        dx[(size_t)i] = (r1[(size_t)i] -
                         cond_coef[(size_t)i] * dlam[(size_t)cr]) /
                        d;
      }
    }
    std::vector<double> dzl((size_t)nv, 0.0), dzu((size_t)nv, 0.0);
    for (int i = 0; i < nv; ++i) {
      if (lo[(size_t)i] > -kInf) {
        double s = st.x[(size_t)i] - lo[(size_t)i];
        dzl[(size_t)i] =
            (mu - st.zl[(size_t)i] * dx[(size_t)i]) / s - st.zl[(size_t)i];
      }
      if (hi[(size_t)i] < kInf) {
        double s = hi[(size_t)i] - st.x[(size_t)i];
        dzu[(size_t)i] =
            (mu + st.zu[(size_t)i] * dx[(size_t)i]) / s - st.zu[(size_t)i];
      }
    }

    // Fraction to boundary.
    const double tau = std::max(0.99, 1.0 - mu);
    double alpha_p = 1.0, alpha_z = 1.0;
    for (int i = 0; i < nv; ++i) {
      if (lo[(size_t)i] > -kInf && dx[(size_t)i] < 0.0) {
        double s = st.x[(size_t)i] - lo[(size_t)i];
        alpha_p = std::min(alpha_p, -tau * s / dx[(size_t)i]);
      }
      if (hi[(size_t)i] < kInf && dx[(size_t)i] > 0.0) {
        double s = hi[(size_t)i] - st.x[(size_t)i];
        alpha_p = std::min(alpha_p, tau * s / dx[(size_t)i]);
      }
      if (st.zl[(size_t)i] > 0.0 && dzl[(size_t)i] < 0.0)
        alpha_z = std::min(alpha_z, -tau * st.zl[(size_t)i] / dzl[(size_t)i]);
      if (st.zu[(size_t)i] > 0.0 && dzu[(size_t)i] < 0.0)
        alpha_z = std::min(alpha_z, -tau * st.zu[(size_t)i] / dzu[(size_t)i]);
    }

    // Armijo on the l1 merit function.
    double lam_new_norm = 0.0;
    for (int r = 0; r < nc; ++r)
      lam_new_norm = std::max(lam_new_norm,
                              std::fabs(st.lam[(size_t)r] + dlam[(size_t)r]));
    nu = std::max(nu, 1.1 * lam_new_norm + 1.0);

    double phi0 = barrier_value(st.x) + nu * cons_norm1(cons);
    double gdot = 0.0;
    for (int i = 0; i < nv; ++i) {
      double g = model.grad[(size_t)i];
      if (lo[(size_t)i] > -kInf) g -= mu / (st.x[(size_t)i] - lo[(size_t)i]);
      if (hi[(size_t)i] < kInf) g += mu / (hi[(size_t)i] - st.x[(size_t)i]);
      gdot += g * dx[(size_t)i];
    }
    double pred = gdot - nu * cons_norm1(cons);

    double alpha = alpha_p;
    std::vector<double> x_try((size_t)nv);
    std::vector<double> cons_try;
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls) {
      for (int i = 0; i < nv; ++i)
        x_try[(size_t)i] = st.x[(size_t)i] + alpha * dx[(size_t)i];
      model.evaluate(x_try, cons_try, nullptr, nullptr, nullptr);
      double phi = barrier_value(x_try) + nu * cons_norm1(cons_try);
      if (phi <= phi0 + 1e-4 * alpha * std::min(pred, 0.0) + 1e-12) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      // A rejected direction usually means the Hessian went indefinite;
      // strengthen the regularization before the next attempt.
      alpha = std::min(alpha_p, 1e-8);
      delta_x = std::min(std::max(delta_x * 10.0, 1e-6), 1e8);
      if (++ls_failures > 8) break;
    } else {
      ls_failures = 0;
    }

    for (int i = 0; i < nv; ++i) st.x[(size_t)i] += alpha * dx[(size_t)i];
    for (int r = 0; r < nc; ++r)
      st.lam[(size_t)r] += alpha * dlam[(size_t)r];
    for (int i = 0; i < nv; ++i) {
      st.zl[(size_t)i] += alpha_z * dzl[(size_t)i];
      st.zu[(size_t)i] += alpha_z * dzu[(size_t)i];
      // Safeguard box keeps the multipliers compatible with mu.
      if (lo[(size_t)i] > -kInf) {
        double s = st.x[(size_t)i] - lo[(size_t)i];
        st.zl[(size_t)i] = std::min(std::max(st.zl[(size_t)i], mu / (1e10 * s)),
                                    1e10 * mu / s);
      }
      if (hi[(size_t)i] < kInf) {
        double s = hi[(size_t)i] - st.x[(size_t)i];
        st.zu[(size_t)i] = std::min(std::max(st.zu[(size_t)i], mu / (1e10 * s)),
                                    1e10 * mu / s);
      }
    }
    if (accepted && delta_x > 0.0)
      delta_x = delta_x > 1e-7 ? delta_x / 10.0 : 0.0;
  }

  if (!result.converged) st = best;

  // Extract the dispatch in model space.
  const size_t nb = model.c.buses.size();
  result.v.resize(nb);
  result.theta.resize(nb);
  for (size_t b = 0; b < nb; ++b) {
    result.v[b] = model.value_of(model.v_bus[b], st.x);
    result.theta[b] = model.value_of(model.th_bus[b], st.x);
  }
  result.p.resize(problem.online.size());
  result.q.resize(problem.online.size());
  for (size_t k = 0; k < problem.online.size(); ++k) {
    result.p[k] = model.value_of(model.p_dev[k], st.x);
    result.q[k] = model.value_of(model.q_dev[k], st.x);
  }

  // Derived quantities recomputed exactly.
  result.flows.resize(model.c.lines.size());
  for (size_t l = 0; l < model.c.lines.size(); ++l) {
    const auto& line = model.c.lines[l];
    result.flows[l] = branch_flows(
        result.v[(size_t)model.ix.line_from[l]],
        result.v[(size_t)model.ix.line_to[l]],
        result.theta[(size_t)model.ix.line_from[l]],
        result.theta[(size_t)model.ix.line_to[l]], line, line.in_service);
  }
  std::vector<double> p_full(model.c.devices.size(), 0.0);
  std::vector<double> q_full(model.c.devices.size(), 0.0);
  for (size_t k = 0; k < problem.online.size(); ++k) {
    p_full[(size_t)problem.online[k].device] = result.p[k];
    q_full[(size_t)problem.online[k].device] = result.q[k];
  }
  BalanceResidual res = balance_residual(model.c, model.ix, problem.t, p_full,
                                         q_full, result.v, result.theta);
  result.p_mismatch = res.dp;
  result.q_mismatch = res.dq;

  // Objective: device costs/values plus mismatch penalties at the exact
  // residuals (matching how the evaluator scores a dispatch).
  double obj = 0.0;
  for (size_t k = 0; k < problem.online.size(); ++k) {
    const Device& dev = model.c.devices[(size_t)problem.online[k].device];
    double z = curve_value(dev.cost_at(problem.t), result.p[k]);
    obj += (dev.kind == DeviceKind::Producer ? 1.0 : -1.0) * model.d_t * z;
  }
  for (size_t b = 0; b < nb; ++b)
    obj += model.d_t * model.c.balance_penalty *
           (std::fabs(res.dp[b]) + std::fabs(res.dq[b]));
  if (problem.soft_line_limits) {
    for (int l : model.active_lines) {
      const auto& fl = result.flows[(size_t)l];
      double smax = model.c.lines[(size_t)l].s_max;
      double app = std::max(std::hypot(fl.p_fr, fl.q_fr),
                            std::hypot(fl.p_to, fl.q_to));
      obj += model.d_t * model.c.line_overload_penalty *
             std::max(0.0, app - smax);
    }
  }
  result.objective = obj;
  result.iterations = iter;

  // Final residuals at the returned point.
  model.evaluate(st.x, cons, &jac, nullptr, nullptr);
  std::vector<double> rd = dual_residual(st.x, st.lam, st.zl, st.zu, jac);
  result.primal_residual = inf_norm(cons);
  result.dual_residual = inf_norm(rd) / obj_scale;
  if (result.primal_residual <= options.primal_tol &&
      result.dual_residual <= options.dual_tol)
    result.converged = true;
  return result;
}

}  // namespace acuc
