#pragma once

#include <memory>
#include <string>
#include <vector>

#include "acuc/model.hpp"  // kInf

namespace acuc {

// Sparse linear program: minimize c'x subject to row_lo <= A x <= row_hi
// and lo <= x <= hi. Infinite bounds are allowed on either side.
struct LinearProgram {
  int num_vars = 0;
  std::vector<double> obj;             // per variable
  std::vector<double> lo, hi;          // per variable
  struct Row {
    std::vector<std::pair<int, double>> coeffs;  // (var, value)
    double lo = -kInf;
    double hi = kInf;
    std::string name;
  };
  std::vector<Row> rows;

  int add_var(double lo_, double hi_, double obj_ = 0.0) {
    obj.push_back(obj_);
    lo.push_back(lo_);
    hi.push_back(hi_);
    return num_vars++;
  }
  int add_row(Row r) {
    rows.push_back(std::move(r));
    return static_cast<int>(rows.size()) - 1;
  }
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

struct LpSolution {
  LpStatus status = LpStatus::IterationLimit;
  std::vector<double> x;              // primal values
  std::vector<double> row_dual;       // y, one per row
  std::vector<double> reduced_cost;   // per variable
  double objective = 0.0;
  // Lower bound from the bound-Lagrangian at the returned duals; equals the
  // objective at optimality up to round-off (weak duality diagnostic).
  double dual_objective = 0.0;
  int iterations = 0;
};

struct LpOptions {
  double feas_tol = 1e-7;
  double opt_tol = 1e-7;
  int iter_limit = 0;  // 0 = automatic (scales with problem size)
};

// Bounded-variable revised simplex over a slack-extended equality form,
// with a sum-of-infeasibilities phase 1 and Bland's rule after 1000
// degenerate pivots. Deterministic: ties break toward the lowest index.
LpSolution solve_lp(const LinearProgram& lp, const LpOptions& options = {});

// Warm-startable interface used by the branch-and-bound search: keeps the
// constraint matrix and factorization machinery alive across re-solves
// with modified variable bounds.
class SimplexSolver {
 public:
  explicit SimplexSolver(const LinearProgram& lp, const LpOptions& options = {});

  void set_var_bounds(int var, double lo, double hi);
  void reset_bounds(const std::vector<double>& lo, const std::vector<double>& hi);

  // Solves from the current basis (initially all-slack).
  LpSolution solve();

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

}  // namespace acuc
