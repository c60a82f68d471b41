#include "acuc/lp.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <memory>

#include "acuc/sparse_lu.hpp"

namespace acuc {

namespace {

enum class VarState : std::uint8_t { Basic, AtLo, AtHi, Free };

struct Eta {
  int pos;  // basis position replaced
  double diag;
  std::vector<std::pair<int, double>> terms;  // (basis position, value)
};

constexpr double kPivotEps = 1e-9;
constexpr double kDegenStep = 1e-10;
constexpr int kRefactorEvery = 64;
constexpr int kBlandTrigger = 1000;

}  // namespace

struct SimplexSolver::Impl {
  // Problem in column form. Variables 0..n-1 structural, n..n+m-1 slacks.
  int n = 0, m = 0, nv = 0;
  std::vector<int> col_start;
  std::vector<int> col_row;
  std::vector<double> col_val;
  std::vector<double> cost;  // structural costs; slacks are zero
  std::vector<double> lo, hi;
  std::vector<bool> row_removed;  // empty rows handled by presolve
  bool empty_row_infeasible = false;
  LpOptions options;

  // Basis state.
  std::vector<int> basis;          // size m, variable index per position
  std::vector<int> pos_of_var;     // size nv, -1 when nonbasic
  std::vector<VarState> state;     // size nv
  std::vector<double> x;           // size nv, current values
  SparseLU lu;
  std::vector<Eta> etas;
  bool factored = false;
  bool values_dirty = true;

  Impl(const LinearProgram& lp, const LpOptions& opts) : options(opts) {
    n = lp.num_vars;
    m = static_cast<int>(lp.rows.size());
    nv = n + m;
    cost = lp.obj;
    lo = lp.lo;
    hi = lp.hi;
    lo.resize((size_t)nv);
    hi.resize((size_t)nv);
    row_removed.assign((size_t)m, false);
    for (int i = 0; i < m; ++i) {
      lo[(size_t)(n + i)] = lp.rows[(size_t)i].lo;
      hi[(size_t)(n + i)] = lp.rows[(size_t)i].hi;
      if (lp.rows[(size_t)i].coeffs.empty()) {
        row_removed[(size_t)i] = true;
        if (lp.rows[(size_t)i].lo > 0.0 || lp.rows[(size_t)i].hi < 0.0)
          empty_row_infeasible = true;
        // Pin the slack so the trivial row stays consistent.
        lo[(size_t)(n + i)] = 0.0;
        hi[(size_t)(n + i)] = 0.0;
      }
    }
    // Column-compressed copy of A.
    std::vector<int> counts((size_t)n, 0);
    for (const auto& row : lp.rows)
      for (const auto& [j, v] : row.coeffs)
        if (v != 0.0) ++counts[(size_t)j];
    col_start.assign((size_t)n + 1, 0);
    for (int j = 0; j < n; ++j)
      col_start[(size_t)j + 1] = col_start[(size_t)j] + counts[(size_t)j];
    col_row.resize((size_t)col_start[(size_t)n]);
    col_val.resize((size_t)col_start[(size_t)n]);
    std::vector<int> fill((size_t)n, 0);
    for (int i = 0; i < m; ++i) {
      for (const auto& [j, v] : lp.rows[(size_t)i].coeffs) {
        if (v == 0.0) continue;
        int k = col_start[(size_t)j] + fill[(size_t)j]++;
        col_row[(size_t)k] = i;
        col_val[(size_t)k] = v;
      }
    }
    reset_basis();
  }

  void reset_basis() {
    basis.resize((size_t)m);
    pos_of_var.assign((size_t)nv, -1);
    state.assign((size_t)nv, VarState::AtLo);
    x.assign((size_t)nv, 0.0);
    for (int j = 0; j < nv; ++j) {
      if (lo[(size_t)j] > -kInf)
        state[(size_t)j] = VarState::AtLo, x[(size_t)j] = lo[(size_t)j];
      else if (hi[(size_t)j] < kInf)
        state[(size_t)j] = VarState::AtHi, x[(size_t)j] = hi[(size_t)j];
      else
        state[(size_t)j] = VarState::Free, x[(size_t)j] = 0.0;
    }
    for (int i = 0; i < m; ++i) {
      int s = n + i;
      basis[(size_t)i] = s;
      pos_of_var[(size_t)s] = i;
      state[(size_t)s] = VarState::Basic;
    }
    factored = false;
    values_dirty = true;
    etas.clear();
  }

  // Column access helpers; slack columns are single -1 entries.
  template <typename F>
  void for_column(int var, F&& f) const {
    if (var < n) {
      for (int k = col_start[(size_t)var]; k < col_start[(size_t)var + 1]; ++k)
        f(col_row[(size_t)k], col_val[(size_t)k]);
    } else {
      f(var - n, -1.0);
    }
  }

  bool refactor() {
    SparseColumns cols((size_t)m);
    for (int k = 0; k < m; ++k) {
      auto& col = cols[(size_t)k];
      for_column(basis[(size_t)k], [&col](int r, double v) {
        col.emplace_back(r, v);
      });
    }
    etas.clear();
    factored = lu.factor(cols);
    return factored;
  }

  // Solve B z = rhs; rhs indexed by row, result by basis position.
  void ftran(std::vector<double>& vec) const {
    lu.solve(vec);
    for (const auto& e : etas) {
      double t = vec[(size_t)e.pos] / e.diag;
      vec[(size_t)e.pos] = t;
      if (t == 0.0) continue;
      for (const auto& [p, v] : e.terms) vec[(size_t)p] -= v * t;
    }
  }

  // Solve B^T y = rhs; rhs indexed by basis position, result by row.
  void btran(std::vector<double>& vec) const {
    for (auto it = etas.rbegin(); it != etas.rend(); ++it) {
      double acc = vec[(size_t)it->pos];
      for (const auto& [p, v] : it->terms) acc -= v * vec[(size_t)p];
      vec[(size_t)it->pos] = acc / it->diag;
    }
    lu.solve_transpose(vec);
  }

  void refresh_basic_values() {
    std::vector<double> rhs((size_t)m, 0.0);
    for (int j = 0; j < nv; ++j) {
      if (state[(size_t)j] == VarState::Basic) continue;
      double v = x[(size_t)j];
      if (v == 0.0) continue;
      for_column(j, [&rhs, v](int r, double a) { rhs[(size_t)r] -= a * v; });
    }
    ftran(rhs);
    for (int k = 0; k < m; ++k) x[(size_t)basis[(size_t)k]] = rhs[(size_t)k];
    values_dirty = false;
  }

  double infeas_of(int var) const {
    double v = x[(size_t)var];
    if (v < lo[(size_t)var] - options.feas_tol) return lo[(size_t)var] - v;
    if (v > hi[(size_t)var] + options.feas_tol) return v - hi[(size_t)var];
    return 0.0;
  }

  LpSolution solve() {
    LpSolution sol;
    if (empty_row_infeasible) {
      sol.status = LpStatus::Infeasible;
      finalize(sol);
      return sol;
    }
    int iter_limit = options.iter_limit > 0
                         ? options.iter_limit
                         : std::min(400000, 20000 + 30 * (n + m));
    int iters = 0;
    int degen_count = 0;
    bool bland = false;
    int reset_count = 0;

    if (!factored || (int)etas.size() > 0) {
      if (!refactor()) {
        reset_basis();
        refactor();
      }
    }
    refresh_basic_values();

    std::vector<double> pricing((size_t)m);
    std::vector<double> alpha((size_t)m);

    bool phase1 = true;
    while (true) {
      if (iters >= iter_limit) {
        sol.status = LpStatus::IterationLimit;
        sol.iterations = iters;
        finalize(sol);
        return sol;
      }
      // Periodic refactorization keeps the eta file short and the incremental
      // values honest.
      if ((int)etas.size() >= kRefactorEvery) {
        if (!refactor()) {
          if (++reset_count > 3) {
            sol.status = LpStatus::IterationLimit;
            sol.iterations = iters;
            finalize(sol);
            return sol;
          }
          reset_basis();
          refactor();
        }
        refresh_basic_values();
      }

      // Phase detection: any basic out of bounds means phase 1 pricing.
      double total_infeas = 0.0;
      for (int k = 0; k < m; ++k) total_infeas += infeas_of(basis[(size_t)k]);
      phase1 = total_infeas > 0.0;

      // Pricing vector.
      std::fill(pricing.begin(), pricing.end(), 0.0);
      for (int k = 0; k < m; ++k) {
        int var = basis[(size_t)k];
        if (phase1) {
          double v = x[(size_t)var];
          if (v < lo[(size_t)var] - options.feas_tol)
            pricing[(size_t)k] = -1.0;
          else if (v > hi[(size_t)var] + options.feas_tol)
            pricing[(size_t)k] = 1.0;
        } else {
          pricing[(size_t)k] = var < n ? cost[(size_t)var] : 0.0;
        }
      }
      btran(pricing);  // now y by row

      // Entering variable.
      int enter = -1;
      double enter_rc = 0.0;
      double best_score = options.opt_tol;
      for (int j = 0; j < nv; ++j) {
        VarState st = state[(size_t)j];
        if (st == VarState::Basic) continue;
        if (lo[(size_t)j] == hi[(size_t)j]) continue;  // fixed
        double cj = (!phase1 && j < n) ? cost[(size_t)j] : 0.0;
        double dot = 0.0;
        if (j < n) {
          for (int k = col_start[(size_t)j]; k < col_start[(size_t)j + 1]; ++k)
            dot += pricing[(size_t)col_row[(size_t)k]] * col_val[(size_t)k];
        } else {
          dot = -pricing[(size_t)(j - n)];
        }
        double rc = cj - dot;
        bool eligible = false;
        if (st == VarState::AtLo)
          eligible = rc < -options.opt_tol;
        else if (st == VarState::AtHi)
          eligible = rc > options.opt_tol;
        else
          eligible = std::fabs(rc) > options.opt_tol;
        if (!eligible) continue;
        if (bland) {
          enter = j;
          enter_rc = rc;
          break;
        }
        double score = std::fabs(rc);
        if (score > best_score) {
          best_score = score;
          enter = j;
          enter_rc = rc;
        }
      }

      if (enter < 0) {
        if (phase1) {
          sol.status = LpStatus::Infeasible;
          sol.iterations = iters;
          finalize(sol);
          return sol;
        }
        // Optimal: refresh values once more for accuracy and re-verify.
        if (refactor()) refresh_basic_values();
        double resid = 0.0;
        for (int k = 0; k < m; ++k) resid += infeas_of(basis[(size_t)k]);
        if (resid > 0.0 && reset_count <= 3) {
          ++reset_count;
          continue;  // drift detected; resume from phase 1
        }
        sol.status = LpStatus::Optimal;
        sol.iterations = iters;
        finalize(sol);
        return sol;
      }

      // Direction: +1 increases the entering variable.
      double dir = 1.0;
      if (state[(size_t)enter] == VarState::AtHi)
        dir = -1.0;
      else if (state[(size_t)enter] == VarState::Free)
        dir = enter_rc < 0.0 ? 1.0 : -1.0;

      // alpha = B^-1 a_enter.
      std::fill(alpha.begin(), alpha.end(), 0.0);
      for_column(enter, [&alpha](int r, double v) { alpha[(size_t)r] += v; });
      ftran(alpha);

      // Ratio test. Basic k moves at rate -dir*alpha_k per unit step.
      double best_theta = kInf;
      int leave_pos = -1;
      bool leave_to_upper = false;
      // Entering variable's own opposite bound.
      double own_range = hi[(size_t)enter] - lo[(size_t)enter];
      if (own_range < kInf && state[(size_t)enter] != VarState::Free)
        best_theta = own_range;

      for (int k = 0; k < m; ++k) {
        double w = dir * alpha[(size_t)k];
        if (std::fabs(w) <= kPivotEps) continue;
        int var = basis[(size_t)k];
        double xv = x[(size_t)var];
        double lk = lo[(size_t)var], hk = hi[(size_t)var];
        double theta = kInf;
        bool to_upper = false;
        if (phase1 && xv < lk - options.feas_tol) {
          // Infeasible below: blocks only when moving up onto its lower bound.
          if (w < 0.0) theta = (xv - lk) / w;
        } else if (phase1 && xv > hk + options.feas_tol) {
          if (w > 0.0) theta = (xv - hk) / w, to_upper = true;
        } else {
          if (w > 0.0 && lk > -kInf)
            theta = (xv - lk) / w;
          else if (w < 0.0 && hk < kInf)
            theta = (xv - hk) / w, to_upper = true;
        }
        if (theta < -1e-12) theta = 0.0;
        theta = std::max(theta, 0.0);
        if (theta < best_theta - 1e-12) {
          best_theta = theta;
          leave_pos = k;
          leave_to_upper = to_upper;
        } else if (leave_pos >= 0 && theta <= best_theta + 1e-12) {
          // Tie break: Bland wants the lowest variable index, otherwise the
          // largest pivot magnitude for stability (then lowest index).
          int cur = basis[(size_t)leave_pos];
          if (bland) {
            if (var < cur) {
              leave_pos = k;
              leave_to_upper = to_upper;
            }
          } else {
            double cand = std::fabs(alpha[(size_t)k]);
            double curv = std::fabs(alpha[(size_t)leave_pos]);
            if (cand > curv + 1e-12 ||
                (std::fabs(cand - curv) <= 1e-12 && var < cur)) {
              leave_pos = k;
              leave_to_upper = to_upper;
            }
          }
        }
      }

      if (best_theta == kInf) {
        sol.status = phase1 ? LpStatus::Infeasible : LpStatus::Unbounded;
        sol.iterations = iters;
        finalize(sol);
        return sol;
      }

      ++iters;
      if (best_theta <= kDegenStep) {
        if (++degen_count >= kBlandTrigger) bland = true;
      } else {
        degen_count = 0;
        bland = false;
      }

      // Apply the step.
      double step = dir * best_theta;
      for (int k = 0; k < m; ++k) {
        if (alpha[(size_t)k] == 0.0) continue;
        x[(size_t)basis[(size_t)k]] -= step * alpha[(size_t)k];
      }
      if (leave_pos < 0) {
        // Bound flip: entering moves to its opposite bound.
        x[(size_t)enter] += step;
        state[(size_t)enter] =
            dir > 0.0 ? VarState::AtHi : VarState::AtLo;
        x[(size_t)enter] = state[(size_t)enter] == VarState::AtHi
                               ? hi[(size_t)enter]
                               : lo[(size_t)enter];
        continue;
      }

      int leave_var = basis[(size_t)leave_pos];
      x[(size_t)enter] += step;
      x[(size_t)leave_var] = leave_to_upper ? hi[(size_t)leave_var]
                                            : lo[(size_t)leave_var];
      state[(size_t)leave_var] =
          leave_to_upper ? VarState::AtHi : VarState::AtLo;
      if (lo[(size_t)leave_var] <= -kInf && hi[(size_t)leave_var] >= kInf)
        state[(size_t)leave_var] = VarState::Free;
      pos_of_var[(size_t)leave_var] = -1;
      basis[(size_t)leave_pos] = enter;
      pos_of_var[(size_t)enter] = leave_pos;
      state[(size_t)enter] = VarState::Basic;

      Eta e;
      e.pos = leave_pos;
      e.diag = alpha[(size_t)leave_pos];
      for (int k = 0; k < m; ++k) {
        if (k != leave_pos && alpha[(size_t)k] != 0.0)
          e.terms.emplace_back(k, alpha[(size_t)k]);
      }
      etas.push_back(std::move(e));
    }
  }

  void finalize(LpSolution& sol) {
    sol.x.assign((size_t)n, 0.0);
    for (int j = 0; j < n; ++j) sol.x[(size_t)j] = x[(size_t)j];
    sol.objective = 0.0;
    for (int j = 0; j < n; ++j) sol.objective += cost[(size_t)j] * x[(size_t)j];

    // Duals with the true costs, regardless of the phase we stopped in.
    std::vector<double> yb((size_t)m, 0.0);
    for (int k = 0; k < m; ++k) {
      int var = basis[(size_t)k];
      yb[(size_t)k] = var < n ? cost[(size_t)var] : 0.0;
    }
    if (factored) btran(yb);
    sol.row_dual.assign((size_t)m, 0.0);
    for (int i = 0; i < m; ++i)
      sol.row_dual[(size_t)i] = row_removed[(size_t)i] ? 0.0 : yb[(size_t)i];
    sol.reduced_cost.assign((size_t)n, 0.0);
    double dual_obj = 0.0;
    for (int j = 0; j < nv; ++j) {
      double cj = j < n ? cost[(size_t)j] : 0.0;
      double dot = 0.0;
      if (j < n) {
        for (int k = col_start[(size_t)j]; k < col_start[(size_t)j + 1]; ++k)
          dot += sol.row_dual[(size_t)col_row[(size_t)k]] * col_val[(size_t)k];
      } else {
        dot = -sol.row_dual[(size_t)(j - n)];
      }
      double rc = state[(size_t)j] == VarState::Basic ? 0.0 : cj - dot;
      if (j < n) sol.reduced_cost[(size_t)j] = rc;
      if (rc > 0.0 && lo[(size_t)j] > -kInf)
        dual_obj += rc * lo[(size_t)j];
      else if (rc < 0.0 && hi[(size_t)j] < kInf)
        dual_obj += rc * hi[(size_t)j];
    }
    sol.dual_objective = dual_obj;
  }

  void set_var_bounds(int var, double new_lo, double new_hi) {
    lo[(size_t)var] = new_lo;
    hi[(size_t)var] = new_hi;
    if (state[(size_t)var] == VarState::Basic) {
      values_dirty = true;
      return;
    }
    // Re-seat the nonbasic value on a valid bound.
    if (state[(size_t)var] == VarState::AtLo && new_lo > -kInf)
      x[(size_t)var] = new_lo;
    else if (state[(size_t)var] == VarState::AtHi && new_hi < kInf)
      x[(size_t)var] = new_hi;
    else if (new_lo > -kInf)
      state[(size_t)var] = VarState::AtLo, x[(size_t)var] = new_lo;
    else if (new_hi < kInf)
      state[(size_t)var] = VarState::AtHi, x[(size_t)var] = new_hi;
    else
      state[(size_t)var] = VarState::Free, x[(size_t)var] = 0.0;
    values_dirty = true;
  }
};

SimplexSolver::SimplexSolver(const LinearProgram& lp, const LpOptions& options)
    : impl_(std::make_shared<Impl>(lp, options)) {}

void SimplexSolver::set_var_bounds(int var, double lo, double hi) {
  impl_->set_var_bounds(var, lo, hi);
}

void SimplexSolver::reset_bounds(const std::vector<double>& lo,
                                 const std::vector<double>& hi) {
  for (int j = 0; j < impl_->n; ++j)
    impl_->set_var_bounds(j, lo[(size_t)j], hi[(size_t)j]);
}

LpSolution SimplexSolver::solve() { return impl_->solve(); }

LpSolution solve_lp(const LinearProgram& lp, const LpOptions& options) {
  SimplexSolver solver(lp, options);
  return solver.solve();
}

}  // namespace acuc
