#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "acuc/acopf.hpp"
#include "acuc/mip.hpp"
#include "acuc/model.hpp"

namespace acuc {

struct RunOptions {
  int algorithm = 3;  // 1..4, matching the decomposition variants
  double gamma = 0.05;
  int thread_count = 1;
  double uc_time_limit_s = 0.0;  // 0 = unlimited (keeps runs deterministic)
  double uc_gap_tol = 1e-4;
  int uc_node_limit = 0;
  AcOpfOptions opf;
  bool apply_guard = true;
  bool soft_line_limits = false;
};

struct RunStats {
  int algorithm = 0;
  int thread_count = 1;
  double uc_time_s = 0.0;
  double opf_time_total_s = 0.0;
  double reserve_time_s = 0.0;
  double projection_time_s = 0.0;
  double io_time_s = 0.0;  // filled by the CLI around file handling
  double total_time_s = 0.0;
  std::vector<double> opf_time_per_period;
  std::vector<int> opf_iterations;
  double uc_gap = kInf;
  int uc_status = 0;  // MipStatus as int for serialization
  int bound_conflicts = 0;
  double objective = 0.0;  // evaluator recomputation of the final solution
};

struct BoundInterval {
  double lo = -kInf;
  double hi = kInf;
};

// Envelope intersection for one device-period: the reachable set from the
// settled previous power, cut down to the given feasible interval and any
// reserve override. An empty cut clamps to the nearest reachable endpoint
// and flags a conflict (ramping wins; the balance penalty absorbs the rest).
struct TightenedBounds {
  BoundInterval bounds;
  bool conflict = false;
};
TightenedBounds ramp_tighten(const Device& dev, double p_prev, bool u_on_prev,
                             bool u_on_t, bool u_su_t, double d_t,
                             BoundInterval feasible,
                             std::optional<BoundInterval> override_iv);

// Backward reachability: per device and period, the sub-interval of the
// semicontinuous bounds from which the remaining commitment pattern stays
// ramp-feasible. Always contains the scheduling-stage trajectory.
std::vector<std::vector<BoundInterval>> reachable_bounds(
    const Case& c, const CommitmentSchedule& cs);

// Forward projection of real power onto the ramp envelopes (powers only;
// voltages and reactive dispatch stay as solved).
std::vector<std::vector<double>> ramp_project(
    const Case& c, const CommitmentSchedule& cs,
    const std::vector<std::vector<double>>& p);

// Executes one of the four decomposition algorithms end to end.
std::pair<FullSolution, RunStats> run(const Case& c, const RunOptions& options);

}  // namespace acuc
