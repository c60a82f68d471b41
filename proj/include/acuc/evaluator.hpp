#pragma once

#include <optional>
#include <vector>

#include "acuc/model.hpp"

namespace acuc {

// Market-surplus scoring with the penalty decomposition reported by the
// tooling: objective = value - costs - penalties, penalties carried as
// negative contributions in the report columns.
struct EvaluationReport {
  double objective = 0.0;
  double energy_value = 0.0;
  double energy_cost = 0.0;
  double commitment_cost = 0.0;
  double reserve_procurement_cost = 0.0;
  double reserve_shortfall_penalty = 0.0;  // >= 0; enters negatively
  double p_penalty = 0.0;
  double q_penalty = 0.0;
  double line_overload_penalty = 0.0;
  std::vector<Violation> hard_violations;
  std::optional<double> gap_percent;  // vs. the reference, when given
};

// Scores a full solution. Flows and mismatches are recomputed from the
// stored voltages; zonal shortfalls are recomputed from the stored reserves.
EvaluationReport evaluate(const Case& c, const FullSolution& sol,
                          std::optional<double> reference_objective = {});

// Hard-constraint check: commitment transitions, semicontinuity, ramping,
// reserve headroom, voltage bounds, reserve nonnegativity (tolerance 1e-8).
std::vector<Violation> check_hard(const Case& c, const FullSolution& sol);

// Copper-plate scoring of a scheduling-stage result: same economics, with
// the balance penalty charged on the per-period aggregate imbalance.
EvaluationReport evaluate_copperplate(
    const Case& c, const CommitmentSchedule& commitment,
    const std::vector<std::vector<double>>& p,
    const std::vector<std::vector<double>>& q, const ReserveState& reserves);

// Procurement cost plus recomputed cascade shortfall penalty of a reserve
// assignment at the stored quantities (both in $).
struct ReserveEconomics {
  double procurement_cost = 0.0;
  double shortfall_penalty = 0.0;
  // Minimal cascade shortfalls per [zone][product][period].
  std::vector<std::vector<std::vector<double>>> shortfall;
};
ReserveEconomics reserve_economics(const Case& c, const CaseIndex& ix,
                                   const ReserveState& reserves);

}  // namespace acuc
