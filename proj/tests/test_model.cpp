#include "acuc/model.hpp"

#include <random>

#include "doctest.h"
#include "oracles.hpp"

using namespace acuc;

namespace {

Case three_bus_case() {
  Case c;
  c.time_grid.durations = {1.0, 1.0};
  c.products = {{"rgu", ReserveDirection::Up, PowerKind::Active, 1}};
  c.zones.push_back({"za", PowerKind::Active, {}, {{"rgu", 1e5}}});
  c.zones.push_back({"zq", PowerKind::Reactive, {}, {}});
  for (int b = 0; b < 3; ++b) {
    Bus bus;
    bus.id = "b" + std::to_string(b + 1);
    bus.is_reference = b == 0;
    bus.active_zone = "za";
    bus.reactive_zone = "zq";
    c.buses.push_back(bus);
  }
  AcLine l1{"l1", "b1", "b2", 0.2, -5.0};
  AcLine l2{"l2", "b2", "b3", 0.2, -5.0};
  c.lines = {l1, l2};
  Device gen;
  gen.id = "g1";
  gen.kind = DeviceKind::Producer;
  gen.bus = "b1";
  gen.p_min = {0.1};
  gen.p_max = {1.0};
  gen.q_min = {-0.5};
  gen.q_max = {0.5};
  gen.cost = {{{1.0, 10.0}}};
  Device load;
  load.id = "d1";
  load.kind = DeviceKind::Consumer;
  load.bus = "b3";
  load.p_min = {0.0};
  load.p_max = {0.8};
  load.q_min = {0.0};
  load.q_max = {0.3};
  load.cost = {{{0.8, 500.0}}};
  c.devices = {gen, load};
  return c;
}

}  // namespace

TEST_CASE("well formed case validates cleanly") {
  CHECK(validate_case(three_bus_case()).empty());
}

TEST_CASE("inverted power bounds are flagged") {
  Case c = three_bus_case();
  c.devices[0].p_min = {2.0};
  auto v = validate_case(c);
  REQUIRE(v.size() == 1);
  CHECK(v[0].where == "devices[0].p_min[0]");
}

TEST_CASE("dangling line reference is flagged") {
  Case c = three_bus_case();
  c.lines[1].to_bus = "nope";
  auto v = validate_case(c);
  REQUIRE(!v.empty());
  CHECK(v[0].where == "lines[1].to");
}

TEST_CASE("disconnected network is flagged") {
  Case c = three_bus_case();
  c.lines[1].in_service = false;
  auto v = validate_case(c);
  REQUIRE(v.size() == 1);
  CHECK(v[0].message.find("not connected") != std::string::npos);
}

TEST_CASE("ramp envelope matches the transition cases") {
  Device d;
  d.p_min = {0.0};
  d.p_max = {10.0};
  d.p_ru = 0.2;
  d.p_rd = 0.3;
  d.p_ru_su = 0.5;
  d.p_rd_sd = 0.4;

  SUBCASE("stay online") {
    auto env = ramp_envelope(d, 1.0, true, true, false, 1.0);
    CHECK(env.lo == doctest::Approx(0.7));
    CHECK(env.hi == doctest::Approx(1.2));
  }
  SUBCASE("start-up") {
    auto env = ramp_envelope(d, 0.0, false, true, true, 1.0);
    CHECK(env.lo == doctest::Approx(-0.3));
    CHECK(env.hi == doctest::Approx(0.5));
  }
  SUBCASE("shut-down") {
    d.p_ru_su = 0.1;
    auto env = ramp_envelope(d, 0.4, true, false, false, 1.0);
    CHECK(env.lo == doctest::Approx(0.0));
    CHECK(env.hi == doctest::Approx(0.5));
  }
}

TEST_CASE("ramp envelope shifts with the previous point") {
  Device d;
  d.p_ru = 0.2;
  d.p_rd = 0.3;
  d.p_ru_su = 0.5;
  d.p_rd_sd = 0.4;
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    double p = oracle::uniform(rng, 0.0, 5.0);
    double shift = oracle::uniform(rng, 0.0, 2.0);
    bool on = rng() % 2, su = on && (rng() % 2);
    auto a = ramp_envelope(d, p, true, on, su, 1.0);
    auto b = ramp_envelope(d, p + shift, true, on, su, 1.0);
    CHECK(b.lo - a.lo == doctest::Approx(shift));
    CHECK(b.hi - a.hi == doctest::Approx(shift));
  }
}

TEST_CASE("headroom follows device orientation") {
  Device prod;
  prod.kind = DeviceKind::Producer;
  prod.p_min = {1.0};
  prod.p_max = {10.0};
  CHECK(headroom(prod, 6.0, true, 0, ReserveDirection::Up) == doctest::Approx(4.0));
  CHECK(headroom(prod, 6.0, true, 0, ReserveDirection::Down) == doctest::Approx(5.0));

  Device cons;
  cons.kind = DeviceKind::Consumer;
  cons.p_min = {2.0};
  cons.p_max = {9.0};
  CHECK(headroom(cons, 5.0, true, 0, ReserveDirection::Up) == doctest::Approx(3.0));
  CHECK(headroom(cons, 5.0, true, 0, ReserveDirection::Down) == doctest::Approx(4.0));

  CHECK(headroom(prod, 0.0, false, 0, ReserveDirection::Up) == doctest::Approx(0.0));
  CHECK(headroom(cons, 0.0, false, 0, ReserveDirection::Down) == doctest::Approx(0.0));
}

TEST_CASE("headroom halves sum to the online range") {
  Device d;
  d.kind = DeviceKind::Producer;
  d.p_min = {1.5};
  d.p_max = {7.0};
  std::mt19937_64 rng(11);
  for (int i = 0; i < 50; ++i) {
    double p = oracle::uniform(rng, 1.5, 7.0);
    double up = headroom(d, p, true, 0, ReserveDirection::Up);
    double dn = headroom(d, p, true, 0, ReserveDirection::Down);
    CHECK(up + dn == doctest::Approx(7.0 - 1.5));
    CHECK(up >= 0.0);
    CHECK(dn >= 0.0);
  }
}

TEST_CASE("commitment transitions reconstruct the on pattern") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int T = oracle::uniform_int(rng, 1, 12);
    bool initial_on = rng() % 2;
    std::vector<std::uint8_t> on((size_t)T), su((size_t)T), sd((size_t)T);
    bool prev = initial_on;
    for (int t = 0; t < T; ++t) {
      bool now = rng() % 2;
      on[(size_t)t] = now;
      su[(size_t)t] = (!prev && now);
      sd[(size_t)t] = (prev && !now);
      prev = now;
    }
    // Forward-substitute the transition equality.
    int prev_on = initial_on ? 1 : 0;
    for (int t = 0; t < T; ++t) {
      int reconstructed = prev_on + (int)su[(size_t)t] - (int)sd[(size_t)t];
      CHECK(reconstructed == (int)on[(size_t)t]);
      CHECK((int)su[(size_t)t] + (int)sd[(size_t)t] <= 1);
      prev_on = reconstructed;
    }
  }
}

TEST_CASE("case index resolves cross references") {
  Case c = three_bus_case();
  REQUIRE(validate_case(c).empty());
  CaseIndex ix = build_index(c);
  CHECK(ix.reference_bus == 0);
  CHECK(ix.device_bus[0] == 0);
  CHECK(ix.device_bus[1] == 2);
  CHECK(ix.producers_at_bus[0] == std::vector<int>{0});
  CHECK(ix.consumers_at_bus[2] == std::vector<int>{1});
  CHECK(ix.lines_from_bus[1] == std::vector<int>{1});
  CHECK(ix.lines_to_bus[1] == std::vector<int>{0});
  CHECK(ix.cascade(PowerKind::Active, ReserveDirection::Up) ==
        std::vector<int>{0});
  CHECK(ix.zone_of_device(0, PowerKind::Active) == 0);
}
