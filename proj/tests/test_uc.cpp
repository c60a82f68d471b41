#include "acuc/uc.hpp"

#include <cmath>

#include "acuc/case_io.hpp"
#include "acuc/evaluator.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace acuc;

namespace {

// Enumerates every on/off pattern (su/sd implied by transitions), solving
// the LP with binaries fixed; independent of the branch-and-bound path.
double enumerate_uc(const Case& c, const CaseIndex& ix,
                    const UcBuildOptions& build) {
  UcVarMap map;
  MipProblem prob = build_uc_mip(c, ix, build, map);
  const int nd = map.nd, T = map.T;
  const int patterns = 1 << (nd * T);
  double best = kInf;
  for (int mask = 0; mask < patterns; ++mask) {
    LinearProgram lp = prob.lp;
    for (int j = 0; j < nd; ++j) {
      int prev = c.devices[(size_t)j].initial_on ? 1 : 0;
      for (int t = 0; t < T; ++t) {
        int on = (mask >> (j * T + t)) & 1;
        int su = on == 1 && prev == 0;
        int sd = on == 0 && prev == 1;
        auto fix = [&lp](int var, int v) {
          lp.lo[(size_t)var] = v;
          lp.hi[(size_t)var] = v;
        };
        fix(map.u_on[(size_t)map.jt(j, t)], on);
        fix(map.u_su[(size_t)map.jt(j, t)], su);
        fix(map.u_sd[(size_t)map.jt(j, t)], sd);
        prev = on;
      }
    }
    auto sol = solve_lp(lp);
    if (sol.status == LpStatus::Optimal) best = std::min(best, sol.objective);
  }
  return best;
}

Case tiny_case(int T, bool with_reserves) {
  GeneratorSpec spec;
  spec.n_buses = 2;
  spec.n_devices = 2;
  spec.n_periods = T;
  spec.seed = 77;
  Case c = generate_case(spec);
  if (!with_reserves) {
    for (auto& z : c.zones) z.requirement.clear();
  }
  return c;
}

}  // namespace

TEST_CASE("delta blocks reproduce the curve value") {
  SUBCASE("single linear block") {
    LinearProgram lp;
    int p = lp.add_var(4.0, 4.0, 0.0);
    auto delta = build_pwl_delta(lp, {{10.0, 5.0}}, p, 1.0);
    auto sol = solve_lp(lp);
    REQUIRE(sol.status == LpStatus::Optimal);
    CHECK(sol.objective == doctest::Approx(20.0));
    CHECK((int)delta.block_vars.size() == 1);
  }
  SUBCASE("two blocks split greedily") {
    LinearProgram lp;
    int p = lp.add_var(7.0, 7.0, 0.0);
    build_pwl_delta(lp, {{5.0, 1.0}, {5.0, 3.0}}, p, 1.0);
    auto sol = solve_lp(lp);
    REQUIRE(sol.status == LpStatus::Optimal);
    CHECK(sol.objective == doctest::Approx(5.0 * 1.0 + 2.0 * 3.0));
  }
  SUBCASE("zero power costs nothing") {
    LinearProgram lp;
    int p = lp.add_var(0.0, 0.0, 0.0);
    build_pwl_delta(lp, {{5.0, 2.0}, {5.0, 4.0}}, p, 1.0);
    auto sol = solve_lp(lp);
    REQUIRE(sol.status == LpStatus::Optimal);
    CHECK(sol.objective == doctest::Approx(0.0));
  }
  SUBCASE("non-convex curve rejected") {
    LinearProgram lp;
    int p = lp.add_var(0.0, 10.0, 0.0);
    CHECK_THROWS_AS(build_pwl_delta(lp, {{5.0, 3.0}, {5.0, 1.0}}, p, 1.0),
                    std::invalid_argument);
    // Mirrored for maximization-style scale.
    CHECK_THROWS_AS(build_pwl_delta(lp, {{5.0, 1.0}, {5.0, 3.0}}, p, -1.0),
                    std::invalid_argument);
  }
}

TEST_CASE("structure of a one-period two-device model") {
  Case c = tiny_case(1, false);
  c.zones.clear();
  for (auto& b : c.buses) {
    b.active_zone.clear();
    b.reactive_zone.clear();
  }
  CaseIndex ix = build_index(c);
  UcVarMap map;
  UcBuildOptions build;
  build.include_reserves = false;
  build.include_reactive = false;
  MipProblem prob = build_uc_mip(c, ix, build, map);
  // Three binaries per device-period.
  CHECK((int)prob.binaries.size() == 2 * 3);
  // The copper-plate balance row ties producers to consumers.
  bool found_balance = false;
  for (const auto& row : prob.lp.rows) {
    if (row.name != "p_balance") continue;
    found_balance = true;
    CHECK(row.coeffs.size() == 2);
    double s0 = 0.0, s1 = 0.0;
    for (auto [var, coef] : row.coeffs) {
      if (var == map.p[(size_t)map.jt(0, 0)]) s0 = coef;
      if (var == map.p[(size_t)map.jt(1, 0)]) s1 = coef;
    }
    CHECK(s0 * s1 == doctest::Approx(-1.0));  // opposite signs
  }
  CHECK(found_balance);
}

TEST_CASE("cascade rows count matches zones x products x periods") {
  GeneratorSpec spec;
  spec.n_buses = 4;
  spec.n_devices = 4;
  spec.n_periods = 3;
  spec.n_active_zones = 2;
  spec.seed = 3;
  Case c = generate_case(spec);
  CaseIndex ix = build_index(c);
  UcVarMap map;
  MipProblem prob = build_uc_mip(c, ix, {}, map);
  int cascade_rows = 0;
  for (const auto& row : prob.lp.rows)
    if (row.name == "cascade") ++cascade_rows;
  // Active zones carry five products, reactive zones two, per period.
  CHECK(cascade_rows == (2 * 5 + 1 * 2) * 3);
}

TEST_CASE("shortfall absorbs requirements beyond headroom") {
  Case c = tiny_case(1, true);
  // One producer, one consumer. Inflate the up requirement far beyond what
  // the producer can hold.
  double cap = 0.0;
  for (const auto& d : c.devices)
    if (d.kind == DeviceKind::Producer) cap += d.pmax_at(0);
  for (auto& z : c.zones) {
    if (z.power_kind != PowerKind::Active) continue;
    z.requirement.clear();
    z.requirement["rgu"] = {10.0 * cap};
  }
  CaseIndex ix = build_index(c);
  auto res = solve_copperplate_uc(c, ix);
  REQUIRE((res.status == MipStatus::Optimal || res.status == MipStatus::Feasible));
  // Shortfall must cover requirement minus whatever headroom exists.
  double sf = 0.0, provided = 0.0;
  CaseIndex ix2 = build_index(c);
  for (size_t z = 0; z < c.zones.size(); ++z) {
    if (c.zones[z].power_kind != PowerKind::Active) continue;
    for (size_t k = 0; k < c.products.size(); ++k) {
      if (c.products[k].id != "rgu") continue;
      for (int dev : ix2.zone_devices[z])
        provided += res.reserves.r[(size_t)dev][k][0];
      sf += res.reserves.shortfall[z][k][0];
    }
  }
  CHECK(sf == doctest::Approx(10.0 * cap - provided).epsilon(1e-6));
  CHECK(sf > 8.0 * cap);
}

TEST_CASE("tiny schedules match brute force enumeration") {
  std::mt19937_64 rng(123);
  int checked = 0;
  for (int trial = 0; trial < 10; ++trial) {
    GeneratorSpec spec;
    spec.n_buses = 2;
    spec.n_devices = 2;
    spec.n_periods = oracle::uniform_int(rng, 1, 3);
    spec.seed = 1000 + (std::uint64_t)trial;
    spec.load_profile_shape = trial % 2 ? LoadShape::Flat : LoadShape::Diurnal;
    Case c = generate_case(spec);
    for (auto& z : c.zones) z.requirement.clear();
    CaseIndex ix = build_index(c);
    UcOptions opts;
    opts.build.include_reserves = false;
    auto res = solve_copperplate_uc(c, ix, opts);
    REQUIRE(res.status == MipStatus::Optimal);
    double expect = -enumerate_uc(c, ix, opts.build);
    CHECK(std::fabs(res.objective - expect) <=
          1e-6 * (1.0 + std::fabs(expect)));
    ++checked;
  }
  CHECK(checked == 10);
}

TEST_CASE("identical periods commit identically") {
  GeneratorSpec spec;
  spec.n_buses = 2;
  spec.n_devices = 3;
  spec.n_periods = 2;
  spec.seed = 31;
  spec.load_profile_shape = LoadShape::Flat;
  Case c = generate_case(spec);
  for (auto& z : c.zones) z.requirement.clear();
  CaseIndex ix = build_index(c);
  UcOptions opts;
  opts.build.include_reserves = false;
  auto res = solve_copperplate_uc(c, ix, opts);
  REQUIRE(res.status == MipStatus::Optimal);
  for (size_t j = 0; j < c.devices.size(); ++j)
    CHECK(res.commitment.on[j][0] == res.commitment.on[j][1]);
}

TEST_CASE("reserve-free requirements leave the objective unchanged") {
  Case c = tiny_case(2, true);
  for (auto& z : c.zones) z.requirement.clear();
  for (auto& d : c.devices) d.reserve_cost.clear();
  CaseIndex ix = build_index(c);
  UcOptions with;
  with.build.include_reserves = true;
  UcOptions without;
  without.build.include_reserves = false;
  auto a = solve_copperplate_uc(c, ix, with);
  auto b = solve_copperplate_uc(c, ix, without);
  REQUIRE(a.status == MipStatus::Optimal);
  REQUIRE(b.status == MipStatus::Optimal);
  CHECK(std::fabs(a.objective - b.objective) <=
        1e-6 * (1.0 + std::fabs(b.objective)));
}

TEST_CASE("result satisfies the hard checker and the evaluator") {
  GeneratorSpec spec;
  spec.n_buses = 4;
  spec.n_devices = 4;
  spec.n_periods = 4;
  spec.seed = 8;
  Case c = generate_case(spec);
  CaseIndex ix = build_index(c);
  auto res = solve_copperplate_uc(c, ix);
  REQUIRE((res.status == MipStatus::Optimal || res.status == MipStatus::Feasible));

  // Hard replay: commit + dispatch + reserves with flat voltages (the
  // copper-plate stage has no network state).
  FullSolution sol;
  sol.commitment = res.commitment;
  sol.dispatch.p = res.p;
  sol.dispatch.q = res.q;
  sol.dispatch.v.assign(c.buses.size(), std::vector<double>(4, 1.0));
  sol.dispatch.theta.assign(c.buses.size(), std::vector<double>(4, 0.0));
  sol.reserves = res.reserves;
  auto violations = check_hard(c, sol);
  for (const auto& v : violations) INFO(v.where, ": ", v.message);
  CHECK(violations.empty());

  // The evaluator recomputes the same surplus the MIP reported.
  auto rep = evaluate_copperplate(c, res.commitment, res.p, res.q, res.reserves);
  CHECK(std::fabs(rep.objective - res.objective) <=
        1e-6 * (1.0 + std::fabs(res.objective)));

  // Cascade property at the stored reserves.
  for (size_t z = 0; z < c.zones.size(); ++z) {
    const auto& zone = c.zones[z];
    for (ReserveDirection dir : {ReserveDirection::Up, ReserveDirection::Down}) {
      for (int t = 0; t < 4; ++t) {
        double cum_req = 0.0, cum_prov = 0.0;
        for (int k : ix.cascade(zone.power_kind, dir)) {
          cum_req += zone.requirement_at(c.products[(size_t)k].id, t);
          for (int dev : ix.zone_devices[z])
            cum_prov += res.reserves.r[(size_t)dev][(size_t)k][(size_t)t];
          double sf = res.reserves.shortfall[z][(size_t)k][(size_t)t];
          CHECK(cum_prov + sf >= cum_req - 1e-7);
        }
      }
    }
  }
}
