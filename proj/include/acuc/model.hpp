#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

// Core data model for the AC unit commitment toolkit: problem instances
// (buses, AC lines, dispatchable devices, reserve zones/products) and the
// solution containers shared by the schedulers, the per-period OPF, the
// reserve allocators and the evaluator. Everything is in per-unit on a
// common system base; durations are hours, prices are $/pu-h.

namespace acuc {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct TimeGrid {
  std::vector<double> durations;  // d_t in hours, one per period

  int periods() const { return static_cast<int>(durations.size()); }
};

enum class DeviceKind { Producer, Consumer };
enum class PowerKind { Active, Reactive };
enum class ReserveDirection { Up, Down };

struct Bus {
  std::string id;
  double v_min = 0.9;
  double v_max = 1.1;
  bool is_reference = false;
  std::string active_zone;    // active-power reserve zone id
  std::string reactive_zone;  // reactive-power reserve zone id
};

// Pi-model AC line. Series admittance g_sr + j*b_sr, per-side shunts
// g_fr + j*b_fr / g_to + j*b_to, total charging susceptance b_ch split
// evenly between the two ends.
struct AcLine {
  std::string id;
  std::string from_bus;
  std::string to_bus;
  double g_sr = 0.0;
  double b_sr = 0.0;
  double g_fr = 0.0;
  double b_fr = 0.0;
  double g_to = 0.0;
  double b_to = 0.0;
  double b_ch = 0.0;
  double s_max = 1.0;  // apparent-power rating, pu
  bool in_service = true;
};

struct CostBlock {
  double width = 0.0;  // pu
  double rate = 0.0;   // marginal $/pu-h
};

// Convex piecewise-linear energy cost (producer) or value (consumer),
// given as ordered blocks filled from zero. Producer rates must be
// non-decreasing, consumer rates non-increasing.
using CostCurve = std::vector<CostBlock>;

struct Device {
  std::string id;
  DeviceKind kind = DeviceKind::Producer;
  std::string bus;
  // Online bounds per period (pu). p bounds are magnitudes (>= 0).
  std::vector<double> p_min, p_max;
  std::vector<double> q_min, q_max;
  // Ramp rates, pu/h.
  double p_ru = kInf;     // online ramp up
  double p_rd = kInf;     // online ramp down
  double p_ru_su = kInf;  // start-up ramp
  double p_rd_sd = kInf;  // shut-down ramp
  bool initial_on = false;
  double initial_p = 0.0;  // pu, dispatch before the first period
  std::vector<CostCurve> cost;  // per period
  double su_cost = 0.0;  // $ per start-up
  double sd_cost = 0.0;  // $ per shut-down
  double on_cost = 0.0;  // $/h while committed
  std::map<std::string, double> reserve_cost;  // $/pu-h by product id
  std::map<std::string, double> reserve_cap;   // pu by product id; absent = unbounded

  const CostCurve& cost_at(int t) const;
  double reserve_cost_for(const std::string& product) const;
  double reserve_cap_for(const std::string& product) const;

  // Per-period accessors; single-element vectors broadcast over the horizon.
  double pmin_at(int t) const { return at(p_min, t, 0.0); }
  double pmax_at(int t) const { return at(p_max, t, 0.0); }
  double qmin_at(int t) const { return at(q_min, t, 0.0); }
  double qmax_at(int t) const { return at(q_max, t, 0.0); }

 private:
  static double at(const std::vector<double>& v, int t, double dflt) {
    if (v.empty()) return dflt;
    return v.size() == 1 ? v[0] : v[static_cast<size_t>(t)];
  }
};

// Evaluates a convex block curve at power p (clamped to the covered range).
double curve_value(const CostCurve& curve, double p);
double curve_total_width(const CostCurve& curve);

struct ReserveProduct {
  std::string id;
  ReserveDirection direction = ReserveDirection::Up;
  PowerKind power_kind = PowerKind::Active;
  int quality_rank = 1;  // lower = higher quality; unique per (kind, direction)
};

struct ReserveZone {
  std::string id;
  PowerKind power_kind = PowerKind::Active;
  // requirement[product_id][t] in pu; missing product = zero requirement.
  std::map<std::string, std::vector<double>> requirement;
  std::map<std::string, double> shortfall_penalty;  // $/pu-h by product id

  double requirement_at(const std::string& product, int t) const;
  double penalty_for(const std::string& product) const;
};

struct Case {
  TimeGrid time_grid;
  std::vector<Bus> buses;
  std::vector<AcLine> lines;
  std::vector<Device> devices;
  std::vector<ReserveZone> zones;
  std::vector<ReserveProduct> products;
  double balance_penalty = 1e6;        // $/pu-h on bus mismatch
  double line_overload_penalty = 1e4;  // $/pu-h on apparent-power overload
};

// Binary status per device per period. Transitions obey
// on[t] - on[t-1] = su[t] - sd[t] with on[-1] := initial_on,
// and su[t] + sd[t] <= 1.
struct CommitmentSchedule {
  std::vector<std::vector<std::uint8_t>> on, su, sd;  // [device][period]

  int devices() const { return static_cast<int>(on.size()); }
  int periods() const { return on.empty() ? 0 : static_cast<int>(on[0].size()); }
};

struct DispatchState {
  // [device][period]
  std::vector<std::vector<double>> p, q;
  // [bus][period]
  std::vector<std::vector<double>> v, theta;
  // [line][period], recomputed from voltages for in-service lines
  std::vector<std::vector<double>> p_fr, q_fr, p_to, q_to;
  // [bus][period] power-balance residuals
  std::vector<std::vector<double>> p_mismatch, q_mismatch;
};

struct ReserveState {
  std::vector<std::vector<std::vector<double>>> r;          // [device][product][period]
  std::vector<std::vector<std::vector<double>>> shortfall;  // [zone][product][period]
};

struct SolutionMeta {
  int algorithm = 0;
  double gamma = 0.0;
  int bound_conflicts = 0;
};

struct FullSolution {
  CommitmentSchedule commitment;
  DispatchState dispatch;
  ReserveState reserves;
  SolutionMeta meta;
};

struct Violation {
  std::string where;    // e.g. "devices[3].p_min[7]"
  std::string message;
};

// Checks every type invariant plus connectivity of the in-service network.
// Violations are data, not failures; an empty list means the case is valid.
std::vector<Violation> validate_case(const Case& c);

// Reachable power interval at period t given the settled power at t-1 and
// the commitment pattern at t. The envelope ignores semicontinuous bounds.
struct RampEnvelope {
  double lo = -kInf;
  double hi = kInf;
};
RampEnvelope ramp_envelope(const Device& dev, double p_prev, bool u_on_prev,
                           bool u_on_t, bool u_su_t, double d_t);

// Capacity between the dispatch point and the relevant online bound:
// producers count up toward p_max and down toward p_min, consumers the
// mirror image. Offline devices have no headroom.
double headroom(const Device& dev, double p, bool u_on, int t,
                ReserveDirection direction);

// Resolved integer-index view of a Case. Built once after validation and
// shared read-only; all solver modules address entities by index.
struct CaseIndex {
  std::map<std::string, int> bus_id;
  std::map<std::string, int> line_id;
  std::map<std::string, int> device_id;
  std::map<std::string, int> zone_id;
  std::map<std::string, int> product_id;

  std::vector<int> device_bus;                    // [device] -> bus
  std::vector<int> line_from, line_to;            // [line] -> bus
  std::vector<std::vector<int>> producers_at_bus; // [bus] -> device list
  std::vector<std::vector<int>> consumers_at_bus;
  std::vector<std::vector<int>> lines_from_bus;   // [bus] -> line list
  std::vector<std::vector<int>> lines_to_bus;
  std::vector<int> bus_active_zone;               // [bus] -> zone (or -1)
  std::vector<int> bus_reactive_zone;
  std::vector<std::vector<int>> zone_devices;     // [zone] -> device list
  // Product indices ordered by quality rank for each (kind, direction).
  std::vector<int> active_up, active_down, reactive_up, reactive_down;
  int reference_bus = -1;

  const std::vector<int>& cascade(PowerKind kind, ReserveDirection dir) const;
  // Products that constrain a given device/direction headroom (all active
  // products apply to p headroom, reactive products to q headroom).
  int zone_of_device(int dev, PowerKind kind) const;
};

CaseIndex build_index(const Case& c);

}  // namespace acuc
