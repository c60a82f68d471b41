#pragma once

#include <vector>

#include "acuc/lp.hpp"

namespace acuc {

// Mixed binary program: an LP plus a set of variables restricted to {0,1}.
struct MipProblem {
  LinearProgram lp;
  std::vector<int> binaries;  // variable indices; bounds must lie in [0,1]
};

enum class MipStatus { Optimal, Feasible, Infeasible, Limit };

struct MipSolution {
  MipStatus status = MipStatus::Limit;
  std::vector<double> x;        // incumbent (binaries exactly integral)
  double objective = kInf;      // incumbent objective (minimization)
  double bound = -kInf;         // best lower bound
  double gap = kInf;            // (objective - bound) / max(1, |objective|)
  int nodes = 0;
  // Objective of each incumbent in discovery order (diagnostics; monotone
  // non-increasing for a minimization search).
  std::vector<double> incumbent_history;
};

struct MipOptions {
  double gap_tol = 1e-4;
  double time_limit_s = 0.0;  // 0 = no limit
  int node_limit = 0;         // 0 = no limit
  double int_tol = 1e-6;
  LpOptions lp;
};

// Branch and bound over LP relaxations: most-fractional branching (ties to
// the lowest variable index), best-bound node selection with depth-first
// diving until the first incumbent. Deterministic for fixed inputs when no
// wall-clock limit binds.
MipSolution solve_mip(const MipProblem& problem, const MipOptions& options = {});

}  // namespace acuc
