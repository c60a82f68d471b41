#pragma once

#include <array>
#include <optional>
#include <vector>

#include "acuc/model.hpp"

namespace acuc {

// Branch power flows in polar form on the pi model. u_on folds the line
// status in; an out-of-service line carries nothing.
struct BranchFlows {
  double p_fr = 0.0, q_fr = 0.0, p_to = 0.0, q_to = 0.0;
};
BranchFlows branch_flows(double v_fr, double v_to, double th_fr, double th_to,
                         const AcLine& line, bool u_on);

// First and second derivatives of one flow quantity with respect to
// (v_fr, v_to, th_fr, th_to).
struct FlowDerivatives {
  double value = 0.0;
  std::array<double, 4> grad{};
  std::array<std::array<double, 4>, 4> hess{};
};
enum class FlowQuantity { PFrom, QFrom, PTo, QTo };
FlowDerivatives branch_flow_derivatives(FlowQuantity which, double v_fr,
                                        double v_to, double th_fr, double th_to,
                                        const AcLine& line, bool u_on);

// Per-bus power-balance residuals at period t:
//   dp_i = sum(producers) - sum(consumers) - sum(p_fr at i) - sum(p_to at i)
// and the reactive analogue. This is the value a mismatch slack must take.
struct BalanceResidual {
  std::vector<double> dp, dq;  // per bus
};
BalanceResidual balance_residual(const Case& c, const CaseIndex& ix, int t,
                                 const std::vector<double>& p_dev,
                                 const std::vector<double>& q_dev,
                                 const std::vector<double>& v_bus,
                                 const std::vector<double>& theta_bus);

// Fills the flow and mismatch fields of a dispatch from its voltages and
// device powers (the stored fields are always derived, never trusted).
void recompute_derived_dispatch(const Case& c, const CaseIndex& ix,
                                DispatchState& d);

// Single-period AC-OPF with penalized balance slacks. Only online devices
// appear; bounds arrive already tightened by the caller.
struct AcOpfDevice {
  int device = -1;  // index into case devices
  double p_lo = 0.0, p_hi = 0.0;
  double q_lo = 0.0, q_hi = 0.0;
};
struct AcOpfProblem {
  const Case* c = nullptr;
  const CaseIndex* ix = nullptr;
  int t = 0;
  std::vector<AcOpfDevice> online;
  bool soft_line_limits = false;
};

struct AcOpfResult {
  std::vector<double> v, theta;      // per bus
  std::vector<double> p, q;          // per online device (problem order)
  std::vector<BranchFlows> flows;    // per line
  std::vector<double> p_mismatch, q_mismatch;  // per bus
  double objective = 0.0;            // device cost/value plus penalties
  int iterations = 0;
  double primal_residual = kInf;     // max |c(x)| of the NLP at return
  double dual_residual = kInf;       // max stationarity violation
  bool converged = false;
};

struct AcOpfOptions {
  double primal_tol = 1e-3;
  double dual_tol = 1.0;
  int max_iter = 300;
};

// Analytic derivative bundle for one NLP evaluation point, exposed for
// finite-difference verification.
struct AcOpfDerivatives {
  std::vector<double> objective_gradient;                   // per variable
  std::vector<double> constraint_values;                    // per constraint
  std::vector<std::vector<std::pair<int, double>>> jacobian;  // per constraint row
  // Hessian of lambda' c(x) (lower triangle as (i, j, value) with i >= j).
  std::vector<std::tuple<int, int, double>> lagrangian_hessian;
};

class AcOpfModel;  // internal NLP assembly, declared in acopf.cpp

// Builds the NLP for a problem and evaluates derivatives at a point given in
// solver variable order. Used by tests; solve_acopf drives the same code.
struct AcOpfEvaluation {
  int num_vars = 0;
  int num_cons = 0;
  std::vector<double> var_lo, var_hi;
  std::vector<double> start;  // flat-start point
};
AcOpfEvaluation acopf_variable_space(const AcOpfProblem& problem);
AcOpfDerivatives acopf_derivatives(const AcOpfProblem& problem,
                                   const std::vector<double>& point,
                                   const std::vector<double>& lambda);

AcOpfResult solve_acopf(const AcOpfProblem& problem,
                        const AcOpfOptions& options = {});

}  // namespace acuc
