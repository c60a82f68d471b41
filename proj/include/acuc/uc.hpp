#pragma once

#include <vector>

#include "acuc/mip.hpp"
#include "acuc/model.hpp"

namespace acuc {

// Adds the delta-form encoding of a convex piecewise-linear cost to an LP:
// one bounded column per block with objective obj_scale * rate, plus the
// linking row p_var - sum(blocks) = 0. Minimization must fill cheap blocks
// first, so the rates must be convex in the direction of obj_scale; a
// non-convex curve is rejected.
struct PwlDelta {
  std::vector<int> block_vars;
  int link_row = -1;
};
PwlDelta build_pwl_delta(LinearProgram& lp, const CostCurve& curve, int p_var,
                         double obj_scale);

// Variable layout of the scheduling MIP, used to extract solutions and by
// the bound-tightening stages downstream.
struct UcVarMap {
  int T = 0;
  int nd = 0;
  int np = 0;
  int nz = 0;
  std::vector<int> u_on, u_su, u_sd, p, q;  // [j*T + t]; -1 when absent
  std::vector<int> r;                       // [(j*np + k)*T + t]; -1 when absent
  std::vector<int> shortfall;               // [(z*np + k)*T + t]; -1 when absent

  int jt(int j, int t) const { return j * T + t; }
  int jkt(int j, int k, int t) const { return (j * np + k) * T + t; }
  int zkt(int z, int k, int t) const { return (z * np + k) * T + t; }
};

struct UcBuildOptions {
  bool include_reserves = true;
  bool include_reactive = true;
};

MipProblem build_uc_mip(const Case& c, const CaseIndex& ix,
                        const UcBuildOptions& options, UcVarMap& map);

struct UcResult {
  CommitmentSchedule commitment;
  std::vector<std::vector<double>> p, q;  // [device][period]
  ReserveState reserves;
  double objective = 0.0;  // market surplus of the scheduling model
  MipStatus status = MipStatus::Limit;
  double gap = kInf;
};

struct UcOptions {
  UcBuildOptions build;
  MipOptions mip;
};

UcResult solve_copperplate_uc(const Case& c, const CaseIndex& ix,
                              const UcOptions& options = {});

}  // namespace acuc
