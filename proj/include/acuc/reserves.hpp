#pragma once

#include <optional>
#include <vector>

#include "acuc/lp.hpp"
#include "acuc/model.hpp"
#include "acuc/uc.hpp"

namespace acuc {

// Greedy allocation at fixed dispatch: every device fills its headroom into
// products by quality rank (respecting per-product caps) regardless of the
// zonal requirements. Stored shortfalls are the recomputed cascade deficits.
// kind narrows the fill to active or reactive products; nullopt fills both.
ReserveState greedy_allocate(const Case& c, const CaseIndex& ix,
                             const CommitmentSchedule& commitment,
                             const std::vector<std::vector<double>>& p,
                             const std::vector<std::vector<double>>& q,
                             std::optional<PowerKind> kind = {});

// Whether fixing up/down active reserve on a device at period t keeps its
// forced power range inside what the bus can physically exchange (adjacent
// line ratings plus co-located device ranges). Devices with no fixed
// reserve are always admissible.
bool local_balance_guard(const Case& c, const CaseIndex& ix,
                         const CommitmentSchedule& commitment, int device,
                         double up_reserve, double down_reserve, int t);

// Device real-power bound overrides produced by fixing scheduled reserves.
struct BoundOverrides {
  // [device][period]; lo > hi encodes "no override".
  std::vector<std::vector<double>> p_lo, p_hi;
  std::vector<int> tightened_devices;
  int clamped_intervals = 0;

  bool has(int j, int t) const {
    return p_lo[(size_t)j][(size_t)t] <= p_hi[(size_t)j][(size_t)t];
  }
};

// Ranks reserve providers by penalty-weighted reserve value, keeps the top
// ceil(gamma * providers) that pass the local balance guard, and tightens
// their bounds so the scheduled real reserves stay deliverable after the
// OPF stage. gamma = 1 reproduces fixing every provider.
BoundOverrides tighten_bounds_from_reserves(const Case& c, const CaseIndex& ix,
                                            const UcResult& uc, double gamma,
                                            bool apply_guard = true);

// Per-period reserve model at fixed dispatch: minimize procurement cost
// plus shortfall penalties subject to cascades and headroom. Always
// feasible (shortfalls are unbounded).
struct ReserveLpMap {
  std::vector<int> r;          // [(j*np + k)] -> var, -1 when absent
  std::vector<int> shortfall;  // [(z*np + k)] -> var, -1 when absent
  int np = 0;
  int jk(int j, int k) const { return j * np + k; }
  int zk(int z, int k) const { return z * np + k; }
};
LinearProgram build_reserve_lp(const Case& c, const CaseIndex& ix,
                               const CommitmentSchedule& commitment,
                               const std::vector<std::vector<double>>& p,
                               const std::vector<std::vector<double>>& q, int t,
                               ReserveLpMap& map);

// Solves the per-period LPs (independently, optionally across threads) and
// assembles a reserve state by period index.
ReserveState redispatch_reserves(const Case& c, const CaseIndex& ix,
                                 const CommitmentSchedule& commitment,
                                 const std::vector<std::vector<double>>& p,
                                 const std::vector<std::vector<double>>& q,
                                 int thread_count = 1);

}  // namespace acuc
