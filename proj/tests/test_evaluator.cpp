#include "acuc/evaluator.hpp"

#include <cmath>

#include "acuc/case_io.hpp"
#include "doctest.h"

using namespace acuc;

namespace {

// Fixed-demand pocket: one producer, one must-run consumer of 0.4 pu.
Case fixed_demand_case() {
  Case c;
  c.time_grid.durations = {1.0, 2.0};
  c.products = {{"rgu", ReserveDirection::Up, PowerKind::Active, 1}};
  c.buses = {{"b1", 0.9, 1.1, true, "", ""}, {"b2", 0.9, 1.1, false, "", ""}};
  AcLine l;
  l.id = "l1";
  l.from_bus = "b1";
  l.to_bus = "b2";
  l.g_sr = 0.0;
  l.b_sr = -8.0;
  l.s_max = 2.0;
  c.lines = {l};
  Device gen;
  gen.id = "g1";
  gen.kind = DeviceKind::Producer;
  gen.bus = "b1";
  gen.p_min = {0.1, 0.1};
  gen.p_max = {1.0, 1.0};
  gen.q_min = {-1.0, -1.0};
  gen.q_max = {1.0, 1.0};
  gen.cost = {{{1.0, 20.0}}};
  gen.su_cost = 5.0;
  gen.on_cost = 1.0;
  Device load;
  load.id = "d1";
  load.kind = DeviceKind::Consumer;
  load.bus = "b2";
  load.p_min = {0.4, 0.4};
  load.p_max = {0.4, 0.4};
  load.q_min = {0.0, 0.0};
  load.q_max = {0.0, 0.0};
  load.cost = {{{0.4, 500.0}}};
  load.initial_on = true;
  load.initial_p = 0.4;
  c.devices = {gen, load};
  return c;
}

FullSolution blank_solution(const Case& c) {
  const size_t T = (size_t)c.time_grid.periods();
  FullSolution s;
  const size_t nd = c.devices.size(), nb = c.buses.size();
  s.commitment.on.assign(nd, std::vector<std::uint8_t>(T, 0));
  s.commitment.su.assign(nd, std::vector<std::uint8_t>(T, 0));
  s.commitment.sd.assign(nd, std::vector<std::uint8_t>(T, 0));
  s.dispatch.p.assign(nd, std::vector<double>(T, 0.0));
  s.dispatch.q.assign(nd, std::vector<double>(T, 0.0));
  s.dispatch.v.assign(nb, std::vector<double>(T, 1.0));
  s.dispatch.theta.assign(nb, std::vector<double>(T, 0.0));
  s.reserves.r.assign(nd, std::vector<std::vector<double>>(
                              c.products.size(), std::vector<double>(T, 0.0)));
  s.reserves.shortfall.assign(
      c.zones.size(), std::vector<std::vector<double>>(
                          c.products.size(), std::vector<double>(T, 0.0)));
  return s;
}

}  // namespace

TEST_CASE("all-off solution forgoes value and pays no penalty") {
  Case c = fixed_demand_case();
  // Both devices off from a cold start: valid commitment (consumer sheds by
  // shutting down), zero flows, zero mismatch.
  c.devices[1].initial_on = false;
  c.devices[1].initial_p = 0.0;
  FullSolution s = blank_solution(c);
  auto rep = evaluate(c, s);
  CHECK(rep.hard_violations.empty());
  CHECK(rep.energy_value == doctest::Approx(0.0));
  CHECK(rep.p_penalty == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rep.objective == doctest::Approx(0.0));
}

TEST_CASE("forced demand with everything off is pure penalty") {
  Case c = fixed_demand_case();
  FullSolution s = blank_solution(c);
  // Consumer pinned on at its demand; no generation, no flows.
  s.commitment.on[1] = {1, 1};
  s.dispatch.p[1] = {0.4, 0.4};
  auto rep = evaluate(c, s);
  // Mismatch 0.4 at the load bus in both periods, weighted by durations.
  CHECK(rep.p_penalty == doctest::Approx(1e6 * 0.4 * (1.0 + 2.0)));
  double value = 500.0 * 0.4 * (1.0 + 2.0);
  CHECK(rep.energy_value == doctest::Approx(value));
  CHECK(rep.objective == doctest::Approx(value - rep.p_penalty));
}

TEST_CASE("gap follows the percent definition") {
  Case c = fixed_demand_case();
  c.devices[1].initial_on = false;
  FullSolution s = blank_solution(c);
  auto rep = evaluate(c, s, 100.0);
  REQUIRE(rep.gap_percent.has_value());
  // objective 0 vs reference 100 -> gap 100%.
  CHECK(*rep.gap_percent == doctest::Approx(100.0));
  // Hand case: reference 100, objective 99 -> 1%.
  EvaluationReport r2;
  r2.objective = 99.0;
  double gap = (100.0 - 99.0) / std::fabs(100.0) * 100.0;
  CHECK(gap == doctest::Approx(1.0));
}

TEST_CASE("corrupted transitions are caught") {
  Case c = fixed_demand_case();
  FullSolution s = blank_solution(c);
  s.commitment.on[0] = {1, 1};
  s.commitment.su[0] = {1, 0};
  s.dispatch.p[0] = {0.4, 0.4};
  s.commitment.on[1] = {1, 1};
  s.dispatch.p[1] = {0.4, 0.4};
  auto base = check_hard(c, s);
  CHECK(base.empty());
  SUBCASE("su without transition") {
    s.commitment.su[0] = {1, 1};  // claims a second start while already on
    auto v = check_hard(c, s);
    REQUIRE(!v.empty());
    CHECK(v[0].message.find("transition") != std::string::npos);
  }
  SUBCASE("semicontinuity breach") {
    s.dispatch.p[0][1] = 1.0 + 1e-3;  // above p_max while on
    auto v = check_hard(c, s);
    REQUIRE(!v.empty());
    CHECK(v[0].message.find("outside bounds") != std::string::npos);
  }
  SUBCASE("offline power") {
    s.commitment.on[0] = {0, 0};
    s.commitment.su[0] = {0, 0};
    s.dispatch.p[0] = {0.0, 1e-3};
    auto v = check_hard(c, s);
    REQUIRE(!v.empty());
    CHECK(v[0].message.find("offline") != std::string::npos);
  }
  SUBCASE("reserve beyond headroom") {
    // g1 at 0.4 with p_max 1.0: up room 0.6.
    s.reserves.r[0][0] = {0.7, 0.0};
    auto v = check_hard(c, s);
    REQUIRE(!v.empty());
    CHECK(v[0].message.find("headroom") != std::string::npos);
  }
  SUBCASE("voltage out of bounds") {
    s.dispatch.v[0][0] = 1.2;
    auto v = check_hard(c, s);
    REQUIRE(!v.empty());
    CHECK(v[0].message.find("voltage") != std::string::npos);
  }
}

TEST_CASE("line overload penalty uses the apparent power excess") {
  Case c = fixed_demand_case();
  c.line_overload_penalty = 1000.0;
  c.lines[0].s_max = 0.05;  // everything through this line overloads
  FullSolution s = blank_solution(c);
  s.commitment.on = {{1, 1}, {1, 1}};
  s.commitment.su[0] = {1, 0};
  s.dispatch.p = {{0.4, 0.4}, {0.4, 0.4}};
  // Angle spread pushing roughly 0.4 pu through b_sr = -8.
  double delta = std::asin(0.4 / 8.0);
  s.dispatch.theta[0] = {delta, delta};
  auto rep = evaluate(c, s);
  CHECK(rep.line_overload_penalty > 0.0);
  // Overload is ~0.35 pu for 3 weighted hours at 1000 $/pu-h.
  CHECK(rep.line_overload_penalty ==
        doctest::Approx((0.4 - 0.05) * 3.0 * 1000.0).epsilon(0.05));
}
