#include "acuc/mip.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <memory>

namespace acuc {

namespace {

struct Node {
  // Branching decisions along the path from the root: var -> fixed value.
  std::shared_ptr<const std::map<int, int>> fixes;
  double bound = -kInf;  // parent LP objective
  int id = 0;
};

struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;  // min-heap on bound
    return a.id > b.id;                                // then FIFO
  }
};

double fractionality(double v) {
  double f = v - std::floor(v);
  return std::min(f, 1.0 - f);
}

}  // namespace

MipSolution solve_mip(const MipProblem& problem, const MipOptions& options) {
  using Clock = std::chrono::steady_clock;
  const auto t_start = Clock::now();
  auto out_of_time = [&]() {
    if (options.time_limit_s <= 0.0) return false;
    return std::chrono::duration<double>(Clock::now() - t_start).count() >
           options.time_limit_s;
  };

  MipSolution sol;
  const auto& binaries = problem.binaries;
  SimplexSolver solver(problem.lp, options.lp);

  auto apply_fixes = [&](const std::map<int, int>& fixes) {
    // Restore root bounds on every binary, then apply the node's pattern.
    for (int j : binaries) {
      auto it = fixes.find(j);
      if (it == fixes.end())
        solver.set_var_bounds(j, problem.lp.lo[(size_t)j],
                              problem.lp.hi[(size_t)j]);
      else
        solver.set_var_bounds(j, it->second, it->second);
    }
  };

  std::vector<Node> heap;
  int next_id = 0;
  Node root;
  root.fixes = std::make_shared<const std::map<int, int>>();
  root.id = next_id++;
  heap.push_back(root);
  std::push_heap(heap.begin(), heap.end(), NodeOrder{});

  std::vector<double> incumbent;
  double incumbent_obj = kInf;
  bool have_incumbent = false;
  bool hit_limit = false;
  bool diving = false;
  Node dive_node;

  auto relative_gap = [&](double bound) {
    if (!have_incumbent) return kInf;
    return (incumbent_obj - bound) / std::max(1.0, std::fabs(incumbent_obj));
  };

  double best_bound = -kInf;
  while (true) {
    Node node;
    if (diving) {
      node = dive_node;
      diving = false;
    } else if (!heap.empty()) {
      std::pop_heap(heap.begin(), heap.end(), NodeOrder{});
      node = heap.back();
      heap.pop_back();
    } else {
      break;
    }

    // Global bound: the heap front is the least open bound; the node in hand
    // (or a dive node) may sit below it.
    double frontier = node.bound;
    if (!heap.empty()) frontier = std::min(frontier, heap.front().bound);
    best_bound = std::max(best_bound, std::min(frontier, incumbent_obj));

    if (have_incumbent && node.bound >= incumbent_obj - 1e-12) continue;
    if (have_incumbent && relative_gap(best_bound) <= options.gap_tol) break;
    if (options.node_limit > 0 && sol.nodes >= options.node_limit) {
      hit_limit = true;
      break;
    }
    if (out_of_time()) {
      hit_limit = true;
      break;
    }

    ++sol.nodes;
    apply_fixes(*node.fixes);
    LpSolution lp_sol = solver.solve();
    if (lp_sol.status == LpStatus::Infeasible) continue;
    if (lp_sol.status == LpStatus::Unbounded) {
      // Unbounded relaxation at the root means an unbounded MIP; treat as a
      // limit elsewhere (cannot certify with fixed binaries).
      hit_limit = true;
      break;
    }
    if (lp_sol.status == LpStatus::IterationLimit) {
      hit_limit = true;
      continue;
    }
    if (have_incumbent && lp_sol.objective >= incumbent_obj - 1e-12) continue;

    // Most fractional binary, ties to the lowest index.
    int branch_var = -1;
    double best_frac = options.int_tol;
    for (int j : binaries) {
      double f = fractionality(lp_sol.x[(size_t)j]);
      if (f > best_frac) {
        best_frac = f;
        branch_var = j;
      }
    }

    if (branch_var < 0) {
      // Integral: candidate incumbent.
      if (lp_sol.objective < incumbent_obj - 1e-12) {
        incumbent = lp_sol.x;
        for (int j : binaries)
          incumbent[(size_t)j] = std::round(incumbent[(size_t)j]);
        incumbent_obj = lp_sol.objective;
        have_incumbent = true;
        sol.incumbent_history.push_back(incumbent_obj);
      }
      continue;
    }

    double frac = lp_sol.x[(size_t)branch_var];
    int near = frac >= 0.5 ? 1 : 0;
    auto make_child = [&](int value) {
      Node child;
      auto fixes = std::make_shared<std::map<int, int>>(*node.fixes);
      (*fixes)[branch_var] = value;
      child.fixes = std::move(fixes);
      child.bound = lp_sol.objective;
      child.id = next_id++;
      return child;
    };
    Node child_near = make_child(near);
    Node child_far = make_child(1 - near);
    heap.push_back(child_far);
    std::push_heap(heap.begin(), heap.end(), NodeOrder{});
    if (!have_incumbent) {
      dive_node = child_near;  // depth-first dive until something integral
      diving = true;
    } else {
      heap.push_back(child_near);
      std::push_heap(heap.begin(), heap.end(), NodeOrder{});
    }
  }

  // Final bound bookkeeping.
  double frontier = incumbent_obj;
  if (!heap.empty()) frontier = std::min(frontier, heap.front().bound);
  if (diving) frontier = std::min(frontier, dive_node.bound);
  best_bound = std::max(best_bound, std::min(frontier, incumbent_obj));
  if (!hit_limit && !have_incumbent) {
    sol.status = MipStatus::Infeasible;
    return sol;
  }

  if (have_incumbent) {
    // Polish: fix the binaries and resolve so the continuous part sits on a
    // clean vertex of the integer-fixed LP.
    for (int j : binaries)
      solver.set_var_bounds(j, incumbent[(size_t)j], incumbent[(size_t)j]);
    LpSolution polished = solver.solve();
    if (polished.status == LpStatus::Optimal) {
      sol.x = polished.x;
      for (int j : binaries) sol.x[(size_t)j] = incumbent[(size_t)j];
      sol.objective = polished.objective;
    } else {
      sol.x = incumbent;
      sol.objective = incumbent_obj;
    }
    sol.bound = std::min(best_bound, sol.objective);
    sol.gap = (sol.objective - sol.bound) /
              std::max(1.0, std::fabs(sol.objective));
    sol.status = (!hit_limit && sol.gap <= options.gap_tol)
                     ? MipStatus::Optimal
                     : MipStatus::Feasible;
  } else {
    sol.status = MipStatus::Limit;
    sol.bound = best_bound;
  }
  return sol;
}

}  // namespace acuc
