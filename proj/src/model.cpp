#include "acuc/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace acuc {

const CostCurve& Device::cost_at(int t) const {
  static const CostCurve empty;
  if (cost.empty()) return empty;
  if (cost.size() == 1) return cost[0];
  return cost[static_cast<size_t>(t)];
}

double Device::reserve_cost_for(const std::string& product) const {
  auto it = reserve_cost.find(product);
  return it == reserve_cost.end() ? 0.0 : it->second;
}

double Device::reserve_cap_for(const std::string& product) const {
  auto it = reserve_cap.find(product);
  return it == reserve_cap.end() ? kInf : it->second;
}

double curve_value(const CostCurve& curve, double p) {
  double z = 0.0;
  double remaining = std::max(0.0, p);
  for (const auto& b : curve) {
    double fill = std::min(remaining, b.width);
    z += fill * b.rate;
    remaining -= fill;
    if (remaining <= 0.0) break;
  }
  return z;
}

double curve_total_width(const CostCurve& curve) {
  double w = 0.0;
  for (const auto& b : curve) w += b.width;
  return w;
}

double ReserveZone::requirement_at(const std::string& product, int t) const {
  auto it = requirement.find(product);
  if (it == requirement.end() || it->second.empty()) return 0.0;
  if (it->second.size() == 1) return it->second[0];
  return it->second[static_cast<size_t>(t)];
}

double ReserveZone::penalty_for(const std::string& product) const {
  auto it = shortfall_penalty.find(product);
  return it == shortfall_penalty.end() ? 0.0 : it->second;
}

RampEnvelope ramp_envelope(const Device& dev, double p_prev, bool /*u_on_prev*/,
                           bool u_on_t, bool u_su_t, double d_t) {
  const double on = u_on_t ? 1.0 : 0.0;
  const double su = u_su_t ? 1.0 : 0.0;
  RampEnvelope env;
  env.hi = p_prev + d_t * (dev.p_ru * (on - su) + dev.p_ru_su * (su + 1.0 - on));
  env.lo = p_prev - d_t * (dev.p_rd * on + dev.p_rd_sd * (1.0 - on));
  return env;
}

double headroom(const Device& dev, double p, bool u_on, int t,
                ReserveDirection direction) {
  const double on = u_on ? 1.0 : 0.0;
  const double pmin = dev.pmin_at(t);
  const double pmax = dev.pmax_at(t);
  const bool toward_max = (dev.kind == DeviceKind::Producer)
                              ? (direction == ReserveDirection::Up)
                              : (direction == ReserveDirection::Down);
  return toward_max ? pmax * on - p : p - pmin * on;
}

namespace {

std::string at(const std::string& array, size_t i, const std::string& field = "") {
  std::ostringstream os;
  os << array << "[" << i << "]";
  if (!field.empty()) os << "." << field;
  return os.str();
}

}  // namespace

std::vector<Violation> validate_case(const Case& c) {
  std::vector<Violation> out;
  auto add = [&out](std::string where, std::string msg) {
    out.push_back({std::move(where), std::move(msg)});
  };

  const int T = c.time_grid.periods();
  if (T < 1) add("time_grid.durations", "at least one period required");
  for (size_t t = 0; t < c.time_grid.durations.size(); ++t) {
    if (!(c.time_grid.durations[t] > 0.0))
      add(at("time_grid.durations", t), "duration must be > 0");
  }

  std::set<std::string> bus_ids, line_ids, dev_ids, zone_ids, prod_ids;
  int n_ref = 0;
  std::map<std::string, PowerKind> zone_kind;
  for (size_t z = 0; z < c.zones.size(); ++z) {
    const auto& zone = c.zones[z];
    if (!zone_ids.insert(zone.id).second)
      add(at("zones", z), "duplicate zone id '" + zone.id + "'");
    zone_kind[zone.id] = zone.power_kind;
    for (const auto& [prod, req] : zone.requirement) {
      for (size_t t = 0; t < req.size(); ++t) {
        if (req[t] < 0.0)
          add(at("zones", z, "requirement." + prod),
              "requirement must be >= 0");
      }
      if (req.size() != 1 && static_cast<int>(req.size()) != T)
        add(at("zones", z, "requirement." + prod),
            "length must be 1 or match period count");
    }
    for (const auto& [prod, pen] : zone.shortfall_penalty) {
      if (pen < 0.0)
        add(at("zones", z, "shortfall_penalty." + prod), "penalty must be >= 0");
    }
  }

  for (size_t p = 0; p < c.products.size(); ++p) {
    if (!prod_ids.insert(c.products[p].id).second)
      add(at("products", p), "duplicate product id '" + c.products[p].id + "'");
  }
  // quality_rank unique within (power_kind, direction)
  std::set<std::tuple<int, int, int>> ranks;
  for (size_t p = 0; p < c.products.size(); ++p) {
    const auto& pr = c.products[p];
    auto key = std::make_tuple(static_cast<int>(pr.power_kind),
                               static_cast<int>(pr.direction), pr.quality_rank);
    if (!ranks.insert(key).second)
      add(at("products", p, "quality_rank"),
          "duplicate rank within (power_kind, direction)");
  }

  for (size_t b = 0; b < c.buses.size(); ++b) {
    const auto& bus = c.buses[b];
    if (!bus_ids.insert(bus.id).second)
      add(at("buses", b), "duplicate bus id '" + bus.id + "'");
    if (!(bus.v_min > 0.0)) add(at("buses", b, "v_min"), "must be > 0");
    if (!(bus.v_min <= bus.v_max))
      add(at("buses", b), "v_min must be <= v_max");
    if (bus.is_reference) ++n_ref;
    for (const auto* zref : {&bus.active_zone, &bus.reactive_zone}) {
      if (zref->empty()) continue;
      auto it = zone_kind.find(*zref);
      if (it == zone_kind.end()) {
        add(at("buses", b), "zone '" + *zref + "' does not exist");
      } else {
        const bool is_active = (zref == &bus.active_zone);
        if ((it->second == PowerKind::Active) != is_active)
          add(at("buses", b), "zone '" + *zref + "' has the wrong power kind");
      }
    }
  }
  if (!c.buses.empty() && n_ref != 1)
    add("buses", "exactly one reference bus required, found " +
                     std::to_string(n_ref));

  for (size_t l = 0; l < c.lines.size(); ++l) {
    const auto& line = c.lines[l];
    if (!line_ids.insert(line.id).second)
      add(at("lines", l), "duplicate line id '" + line.id + "'");
    if (line.from_bus == line.to_bus)
      add(at("lines", l), "from_bus equals to_bus");
    if (!bus_ids.count(line.from_bus))
      add(at("lines", l, "from"), "bus '" + line.from_bus + "' does not exist");
    if (!bus_ids.count(line.to_bus))
      add(at("lines", l, "to"), "bus '" + line.to_bus + "' does not exist");
    if (!(line.s_max > 0.0)) add(at("lines", l, "s_max"), "must be > 0");
  }

  auto check_per_period = [&](const std::vector<double>& v, std::string where) {
    if (v.size() != 1 && static_cast<int>(v.size()) != T)
      add(std::move(where), "length must be 1 or match period count");
  };
  for (size_t d = 0; d < c.devices.size(); ++d) {
    const auto& dev = c.devices[d];
    if (!dev_ids.insert(dev.id).second)
      add(at("devices", d), "duplicate device id '" + dev.id + "'");
    if (!bus_ids.count(dev.bus))
      add(at("devices", d, "bus"), "bus '" + dev.bus + "' does not exist");
    check_per_period(dev.p_min, at("devices", d, "p_min"));
    check_per_period(dev.p_max, at("devices", d, "p_max"));
    check_per_period(dev.q_min, at("devices", d, "q_min"));
    check_per_period(dev.q_max, at("devices", d, "q_max"));
    const size_t np = std::min(dev.p_min.size(), dev.p_max.size());
    for (size_t t = 0; t < np; ++t) {
      if (dev.p_min[t] < 0.0)
        add(at("devices", d, "p_min[" + std::to_string(t) + "]"),
            "device powers are magnitudes; must be >= 0");
      if (dev.p_min[t] > dev.p_max[t])
        add(at("devices", d, "p_min[" + std::to_string(t) + "]"),
            "p_min exceeds p_max");
    }
    const size_t nq = std::min(dev.q_min.size(), dev.q_max.size());
    for (size_t t = 0; t < nq; ++t) {
      if (dev.q_min[t] > dev.q_max[t])
        add(at("devices", d, "q_min[" + std::to_string(t) + "]"),
            "q_min exceeds q_max");
    }
    if (dev.p_ru < 0 || dev.p_rd < 0 || dev.p_ru_su < 0 || dev.p_rd_sd < 0)
      add(at("devices", d), "ramp rates must be >= 0");
    if (dev.cost.size() > 1 && static_cast<int>(dev.cost.size()) != T)
      add(at("devices", d, "cost"), "length must be 1 or match period count");
    for (size_t ci = 0; ci < dev.cost.size(); ++ci) {
      const auto& curve = dev.cost[ci];
      double prev_rate = (dev.kind == DeviceKind::Producer) ? -kInf : kInf;
      for (size_t b = 0; b < curve.size(); ++b) {
        if (curve[b].width < 0.0)
          add(at("devices", d, "cost[" + std::to_string(ci) + "]"),
              "block width must be >= 0");
        const bool ok = (dev.kind == DeviceKind::Producer)
                            ? curve[b].rate >= prev_rate - 1e-12
                            : curve[b].rate <= prev_rate + 1e-12;
        if (!ok)
          add(at("devices", d, "cost[" + std::to_string(ci) + "]"),
              dev.kind == DeviceKind::Producer
                  ? "producer rates must be non-decreasing"
                  : "consumer rates must be non-increasing");
        prev_rate = curve[b].rate;
      }
    }
    // The delta formulation dispatches within the covered range, so the
    // curve must span the online maximum.
    for (size_t ci = 0; ci < dev.cost.size(); ++ci) {
      double width = curve_total_width(dev.cost[ci]);
      double pmax = 0.0;
      for (double v : dev.p_max) pmax = std::max(pmax, v);
      if (width + 1e-9 < pmax)
        add(at("devices", d, "cost[" + std::to_string(ci) + "]"),
            "blocks cover " + std::to_string(width) + " pu but p_max is " +
                std::to_string(pmax));
    }
    for (const auto& [prod, cap] : dev.reserve_cap) {
      if (cap < 0.0) add(at("devices", d, "reserve_cap." + prod), "must be >= 0");
      if (!prod_ids.count(prod))
        add(at("devices", d, "reserve_cap." + prod), "unknown product");
    }
    for (const auto& [prod, cost] : dev.reserve_cost) {
      if (!prod_ids.count(prod))
        add(at("devices", d, "reserve_cost." + prod), "unknown product");
    }
  }

  for (size_t z = 0; z < c.zones.size(); ++z) {
    for (const auto& [prod, req] : c.zones[z].requirement) {
      if (!prod_ids.count(prod))
        add(at("zones", z, "requirement." + prod), "unknown product");
    }
  }

  if (c.balance_penalty < 0.0) add("penalties.balance", "must be >= 0");
  if (c.line_overload_penalty < 0.0)
    add("penalties.line_overload", "must be >= 0");

  // Connectivity over in-service lines (union-find).
  if (!c.buses.empty() && out.empty()) {
    std::map<std::string, int> bid;
    for (size_t b = 0; b < c.buses.size(); ++b) bid[c.buses[b].id] = (int)b;
    std::vector<int> parent(c.buses.size());
    for (size_t i = 0; i < parent.size(); ++i) parent[i] = (int)i;
    auto find = [&parent](int x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (const auto& line : c.lines) {
      if (!line.in_service) continue;
      int a = find(bid[line.from_bus]), b = find(bid[line.to_bus]);
      if (a != b) parent[a] = b;
    }
    int root = find(0);
    for (size_t b = 1; b < c.buses.size(); ++b) {
      if (find((int)b) != root) {
        add("lines", "network of in-service lines is not connected (bus '" +
                         c.buses[b].id + "' unreachable)");
        break;
      }
    }
  }

  return out;
}

const std::vector<int>& CaseIndex::cascade(PowerKind kind,
                                           ReserveDirection dir) const {
  if (kind == PowerKind::Active)
    return dir == ReserveDirection::Up ? active_up : active_down;
  return dir == ReserveDirection::Up ? reactive_up : reactive_down;
}

int CaseIndex::zone_of_device(int dev, PowerKind kind) const {
  int bus = device_bus[static_cast<size_t>(dev)];
  return kind == PowerKind::Active ? bus_active_zone[static_cast<size_t>(bus)]
                                   : bus_reactive_zone[static_cast<size_t>(bus)];
}

CaseIndex build_index(const Case& c) {
  CaseIndex ix;
  for (size_t b = 0; b < c.buses.size(); ++b) {
    ix.bus_id[c.buses[b].id] = (int)b;
    if (c.buses[b].is_reference) ix.reference_bus = (int)b;
  }
  for (size_t l = 0; l < c.lines.size(); ++l) ix.line_id[c.lines[l].id] = (int)l;
  for (size_t d = 0; d < c.devices.size(); ++d)
    ix.device_id[c.devices[d].id] = (int)d;
  for (size_t z = 0; z < c.zones.size(); ++z) ix.zone_id[c.zones[z].id] = (int)z;
  for (size_t p = 0; p < c.products.size(); ++p)
    ix.product_id[c.products[p].id] = (int)p;

  const size_t nb = c.buses.size();
  ix.producers_at_bus.resize(nb);
  ix.consumers_at_bus.resize(nb);
  ix.lines_from_bus.resize(nb);
  ix.lines_to_bus.resize(nb);
  ix.bus_active_zone.assign(nb, -1);
  ix.bus_reactive_zone.assign(nb, -1);
  ix.zone_devices.resize(c.zones.size());

  for (size_t b = 0; b < nb; ++b) {
    const auto& bus = c.buses[b];
    if (!bus.active_zone.empty())
      ix.bus_active_zone[b] = ix.zone_id.at(bus.active_zone);
    if (!bus.reactive_zone.empty())
      ix.bus_reactive_zone[b] = ix.zone_id.at(bus.reactive_zone);
  }
  ix.device_bus.resize(c.devices.size());
  for (size_t d = 0; d < c.devices.size(); ++d) {
    int b = ix.bus_id.at(c.devices[d].bus);
    ix.device_bus[d] = b;
    if (c.devices[d].kind == DeviceKind::Producer)
      ix.producers_at_bus[(size_t)b].push_back((int)d);
    else
      ix.consumers_at_bus[(size_t)b].push_back((int)d);
    for (PowerKind kind : {PowerKind::Active, PowerKind::Reactive}) {
      int z = kind == PowerKind::Active ? ix.bus_active_zone[(size_t)b]
                                        : ix.bus_reactive_zone[(size_t)b];
      if (z >= 0) ix.zone_devices[(size_t)z].push_back((int)d);
    }
  }
  ix.line_from.resize(c.lines.size());
  ix.line_to.resize(c.lines.size());
  for (size_t l = 0; l < c.lines.size(); ++l) {
    int f = ix.bus_id.at(c.lines[l].from_bus);
    int t = ix.bus_id.at(c.lines[l].to_bus);
    ix.line_from[l] = f;
    ix.line_to[l] = t;
    ix.lines_from_bus[(size_t)f].push_back((int)l);
    ix.lines_to_bus[(size_t)t].push_back((int)l);
  }

  auto collect = [&c](PowerKind kind, ReserveDirection dir) {
    std::vector<int> ids;
    for (size_t p = 0; p < c.products.size(); ++p) {
      if (c.products[p].power_kind == kind && c.products[p].direction == dir)
        ids.push_back((int)p);
    }
    std::sort(ids.begin(), ids.end(), [&c](int a, int b) {
      return c.products[(size_t)a].quality_rank < c.products[(size_t)b].quality_rank;
    });
    return ids;
  };
  ix.active_up = collect(PowerKind::Active, ReserveDirection::Up);
  ix.active_down = collect(PowerKind::Active, ReserveDirection::Down);
  ix.reactive_up = collect(PowerKind::Reactive, ReserveDirection::Up);
  ix.reactive_down = collect(PowerKind::Reactive, ReserveDirection::Down);
  return ix;
}

}  // namespace acuc
