#include "acuc/case_io.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "acuc/acopf.hpp"
#include "json.hpp"

namespace acuc {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

ValidationError::ValidationError(std::vector<Violation> violations)
    : std::runtime_error([&violations] {
        std::ostringstream os;
        os << "case failed validation (" << violations.size() << " violations)";
        for (size_t i = 0; i < std::min<size_t>(violations.size(), 4); ++i)
          os << "; " << violations[i].where << ": " << violations[i].message;
        return os.str();
      }()),
      violations_(std::move(violations)) {}

namespace {

// Strict object reader: every key must be consumed, leftovers are schema
// errors carrying the JSON path.
class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw SchemaError(path_, "expected an object");
  }
  ~Obj() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key))
        throw SchemaError(path_ + "." + key, "unknown field");
    }
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  const json& require(const std::string& key) {
    const json* p = find(key);
    if (!p) throw SchemaError(path_ + "." + key, "missing required field");
    return *p;
  }
  std::string path(const std::string& key) const { return path_ + "." + key; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path, "expected a number");
  return j.get<double>();
}

bool as_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw SchemaError(path, "expected a boolean");
  return j.get<bool>();
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw SchemaError(path, "expected a string");
  return j.get<std::string>();
}

// Scalar or array-of-numbers; scalars broadcast over the horizon.
std::vector<double> as_profile(const json& j, const std::string& path) {
  if (j.is_number()) return {j.get<double>()};
  if (!j.is_array()) throw SchemaError(path, "expected a number or array");
  std::vector<double> out;
  out.reserve(j.size());
  for (size_t i = 0; i < j.size(); ++i)
    out.push_back(as_number(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

CostCurve as_curve(const json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path, "expected an array of blocks");
  CostCurve curve;
  for (size_t b = 0; b < j.size(); ++b) {
    const auto& blk = j[b];
    std::string bp = path + "[" + std::to_string(b) + "]";
    if (!blk.is_array() || blk.size() != 2)
      throw SchemaError(bp, "expected [width, rate]");
    curve.push_back({as_number(blk[0], bp + "[0]"), as_number(blk[1], bp + "[1]")});
  }
  return curve;
}

std::map<std::string, double> as_rate_map(const json& j, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  std::map<std::string, double> out;
  for (const auto& [k, v] : j.items()) out[k] = as_number(v, path + "." + k);
  return out;
}

PowerKind as_power_kind(const json& j, const std::string& path) {
  std::string s = as_string(j, path);
  if (s == "active") return PowerKind::Active;
  if (s == "reactive") return PowerKind::Reactive;
  throw SchemaError(path, "expected 'active' or 'reactive'");
}

ordered_json curve_json(const CostCurve& curve) {
  ordered_json out = ordered_json::array();
  for (const auto& b : curve) out.push_back({b.width, b.rate});
  return out;
}

}  // namespace

Case read_case(const std::string& bytes) {
  json root;
  try {
    root = json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw SchemaError("$", std::string("invalid JSON: ") + e.what());
  }
  Case c;
  Obj top(root, "$");
  {
    Obj tg(top.require("time_grid"), top.path("time_grid"));
    c.time_grid.durations =
        as_profile(tg.require("durations"), tg.path("durations"));
  }
  const int T = c.time_grid.periods();
  auto full = [T](std::vector<double> v) {
    if (static_cast<int>(v.size()) == 1 && T > 1)
      v.assign((size_t)T, v[0]);
    return v;
  };

  {
    const json& arr = top.require("buses");
    if (!arr.is_array()) throw SchemaError("$.buses", "expected an array");
    for (size_t i = 0; i < arr.size(); ++i) {
      Obj o(arr[i], "$.buses[" + std::to_string(i) + "]");
      Bus b;
      b.id = as_string(o.require("id"), o.path("id"));
      if (const json* p = o.find("v_min")) b.v_min = as_number(*p, o.path("v_min"));
      if (const json* p = o.find("v_max")) b.v_max = as_number(*p, o.path("v_max"));
      if (const json* p = o.find("reference"))
        b.is_reference = as_bool(*p, o.path("reference"));
      if (const json* p = o.find("active_zone"))
        b.active_zone = as_string(*p, o.path("active_zone"));
      if (const json* p = o.find("reactive_zone"))
        b.reactive_zone = as_string(*p, o.path("reactive_zone"));
      c.buses.push_back(std::move(b));
    }
  }
  {
    const json& arr = top.require("lines");
    if (!arr.is_array()) throw SchemaError("$.lines", "expected an array");
    for (size_t i = 0; i < arr.size(); ++i) {
      Obj o(arr[i], "$.lines[" + std::to_string(i) + "]");
      AcLine l;
      l.id = as_string(o.require("id"), o.path("id"));
      l.from_bus = as_string(o.require("from"), o.path("from"));
      l.to_bus = as_string(o.require("to"), o.path("to"));
      l.g_sr = as_number(o.require("g_sr"), o.path("g_sr"));
      l.b_sr = as_number(o.require("b_sr"), o.path("b_sr"));
      if (const json* p = o.find("g_fr")) l.g_fr = as_number(*p, o.path("g_fr"));
      if (const json* p = o.find("b_fr")) l.b_fr = as_number(*p, o.path("b_fr"));
      if (const json* p = o.find("g_to")) l.g_to = as_number(*p, o.path("g_to"));
      if (const json* p = o.find("b_to")) l.b_to = as_number(*p, o.path("b_to"));
      if (const json* p = o.find("b_ch")) l.b_ch = as_number(*p, o.path("b_ch"));
      l.s_max = as_number(o.require("s_max"), o.path("s_max"));
      if (const json* p = o.find("in_service"))
        l.in_service = as_bool(*p, o.path("in_service"));
      c.lines.push_back(std::move(l));
    }
  }
  {
    const json& arr = top.require("devices");
    if (!arr.is_array()) throw SchemaError("$.devices", "expected an array");
    for (size_t i = 0; i < arr.size(); ++i) {
      Obj o(arr[i], "$.devices[" + std::to_string(i) + "]");
      Device d;
      d.id = as_string(o.require("id"), o.path("id"));
      std::string kind = as_string(o.require("kind"), o.path("kind"));
      if (kind == "producer")
        d.kind = DeviceKind::Producer;
      else if (kind == "consumer")
        d.kind = DeviceKind::Consumer;
      else
        throw SchemaError(o.path("kind"), "expected 'producer' or 'consumer'");
      d.bus = as_string(o.require("bus"), o.path("bus"));
      d.p_min = full(as_profile(o.require("p_min"), o.path("p_min")));
      d.p_max = full(as_profile(o.require("p_max"), o.path("p_max")));
      d.q_min = full(as_profile(o.require("q_min"), o.path("q_min")));
      d.q_max = full(as_profile(o.require("q_max"), o.path("q_max")));
      if (const json* p = o.find("p_ru")) d.p_ru = as_number(*p, o.path("p_ru"));
      if (const json* p = o.find("p_rd")) d.p_rd = as_number(*p, o.path("p_rd"));
      if (const json* p = o.find("p_ru_su"))
        d.p_ru_su = as_number(*p, o.path("p_ru_su"));
      if (const json* p = o.find("p_rd_sd"))
        d.p_rd_sd = as_number(*p, o.path("p_rd_sd"));
      if (const json* p = o.find("initial_on"))
        d.initial_on = as_bool(*p, o.path("initial_on"));
      if (const json* p = o.find("initial_p"))
        d.initial_p = as_number(*p, o.path("initial_p"));
      {
        const json& cost = o.require("cost");
        std::string cp = o.path("cost");
        if (!cost.is_array()) throw SchemaError(cp, "expected an array");
        bool per_period = !cost.empty() && cost[0].is_array() &&
                          !cost[0].empty() && cost[0][0].is_array();
        if (per_period) {
          for (size_t t = 0; t < cost.size(); ++t)
            d.cost.push_back(as_curve(cost[t], cp + "[" + std::to_string(t) + "]"));
        } else {
          d.cost.push_back(as_curve(cost, cp));
        }
      }
      if (const json* p = o.find("su_cost")) d.su_cost = as_number(*p, o.path("su_cost"));
      if (const json* p = o.find("sd_cost")) d.sd_cost = as_number(*p, o.path("sd_cost"));
      if (const json* p = o.find("on_cost")) d.on_cost = as_number(*p, o.path("on_cost"));
      if (const json* p = o.find("reserve_cost"))
        d.reserve_cost = as_rate_map(*p, o.path("reserve_cost"));
      if (const json* p = o.find("reserve_cap"))
        d.reserve_cap = as_rate_map(*p, o.path("reserve_cap"));
      c.devices.push_back(std::move(d));
    }
  }
  {
    const json& arr = top.require("zones");
    if (!arr.is_array()) throw SchemaError("$.zones", "expected an array");
    for (size_t i = 0; i < arr.size(); ++i) {
      Obj o(arr[i], "$.zones[" + std::to_string(i) + "]");
      ReserveZone z;
      z.id = as_string(o.require("id"), o.path("id"));
      z.power_kind = as_power_kind(o.require("power_kind"), o.path("power_kind"));
      if (const json* p = o.find("requirement")) {
        if (!p->is_object())
          throw SchemaError(o.path("requirement"), "expected an object");
        for (const auto& [k, v] : p->items())
          z.requirement[k] = full(as_profile(v, o.path("requirement." + k)));
      }
      if (const json* p = o.find("shortfall_penalty"))
        z.shortfall_penalty = as_rate_map(*p, o.path("shortfall_penalty"));
      c.zones.push_back(std::move(z));
    }
  }
  {
    const json& arr = top.require("products");
    if (!arr.is_array()) throw SchemaError("$.products", "expected an array");
    for (size_t i = 0; i < arr.size(); ++i) {
      Obj o(arr[i], "$.products[" + std::to_string(i) + "]");
      ReserveProduct p;
      p.id = as_string(o.require("id"), o.path("id"));
      std::string dir = as_string(o.require("direction"), o.path("direction"));
      if (dir == "up")
        p.direction = ReserveDirection::Up;
      else if (dir == "down")
        p.direction = ReserveDirection::Down;
      else
        throw SchemaError(o.path("direction"), "expected 'up' or 'down'");
      p.power_kind = as_power_kind(o.require("power_kind"), o.path("power_kind"));
      const json& rank = o.require("quality_rank");
      if (!rank.is_number_integer())
        throw SchemaError(o.path("quality_rank"), "expected an integer");
      p.quality_rank = rank.get<int>();
      c.products.push_back(std::move(p));
    }
  }
  {
    Obj pen(top.require("penalties"), top.path("penalties"));
    c.balance_penalty = as_number(pen.require("balance"), pen.path("balance"));
    if (const json* p = pen.find("line_overload"))
      c.line_overload_penalty = as_number(*p, pen.path("line_overload"));
  }

  auto violations = validate_case(c);
  if (!violations.empty()) throw ValidationError(std::move(violations));
  return c;
}

std::string write_case(const Case& c) {
  ordered_json root;
  root["time_grid"]["durations"] = c.time_grid.durations;
  root["buses"] = ordered_json::array();
  for (const auto& b : c.buses) {
    ordered_json o;
    o["id"] = b.id;
    o["v_min"] = b.v_min;
    o["v_max"] = b.v_max;
    if (b.is_reference) o["reference"] = true;
    if (!b.active_zone.empty()) o["active_zone"] = b.active_zone;
    if (!b.reactive_zone.empty()) o["reactive_zone"] = b.reactive_zone;
    root["buses"].push_back(std::move(o));
  }
  root["lines"] = ordered_json::array();
  for (const auto& l : c.lines) {
    ordered_json o;
    o["id"] = l.id;
    o["from"] = l.from_bus;
    o["to"] = l.to_bus;
    o["g_sr"] = l.g_sr;
    o["b_sr"] = l.b_sr;
    if (l.g_fr != 0.0) o["g_fr"] = l.g_fr;
    if (l.b_fr != 0.0) o["b_fr"] = l.b_fr;
    if (l.g_to != 0.0) o["g_to"] = l.g_to;
    if (l.b_to != 0.0) o["b_to"] = l.b_to;
    if (l.b_ch != 0.0) o["b_ch"] = l.b_ch;
    o["s_max"] = l.s_max;
    if (!l.in_service) o["in_service"] = false;
    root["lines"].push_back(std::move(o));
  }
  root["devices"] = ordered_json::array();
  for (const auto& d : c.devices) {
    ordered_json o;
    o["id"] = d.id;
    o["kind"] = d.kind == DeviceKind::Producer ? "producer" : "consumer";
    o["bus"] = d.bus;
    o["p_min"] = d.p_min;
    o["p_max"] = d.p_max;
    o["q_min"] = d.q_min;
    o["q_max"] = d.q_max;
    if (d.p_ru < kInf) o["p_ru"] = d.p_ru;
    if (d.p_rd < kInf) o["p_rd"] = d.p_rd;
    if (d.p_ru_su < kInf) o["p_ru_su"] = d.p_ru_su;
    if (d.p_rd_sd < kInf) o["p_rd_sd"] = d.p_rd_sd;
    if (d.initial_on) o["initial_on"] = true;
    if (d.initial_p != 0.0) o["initial_p"] = d.initial_p;
    if (d.cost.size() == 1) {
      o["cost"] = curve_json(d.cost[0]);
    } else {
      ordered_json per = ordered_json::array();
      for (const auto& curve : d.cost) per.push_back(curve_json(curve));
      o["cost"] = std::move(per);
    }
    if (d.su_cost != 0.0) o["su_cost"] = d.su_cost;
    if (d.sd_cost != 0.0) o["sd_cost"] = d.sd_cost;
    if (d.on_cost != 0.0) o["on_cost"] = d.on_cost;
    if (!d.reserve_cost.empty()) o["reserve_cost"] = d.reserve_cost;
    if (!d.reserve_cap.empty()) o["reserve_cap"] = d.reserve_cap;
    root["devices"].push_back(std::move(o));
  }
  root["zones"] = ordered_json::array();
  for (const auto& z : c.zones) {
    ordered_json o;
    o["id"] = z.id;
    o["power_kind"] = z.power_kind == PowerKind::Active ? "active" : "reactive";
    if (!z.requirement.empty()) o["requirement"] = z.requirement;
    if (!z.shortfall_penalty.empty())
      o["shortfall_penalty"] = z.shortfall_penalty;
    root["zones"].push_back(std::move(o));
  }
  root["products"] = ordered_json::array();
  for (const auto& p : c.products) {
    ordered_json o;
    o["id"] = p.id;
    o["direction"] = p.direction == ReserveDirection::Up ? "up" : "down";
    o["power_kind"] = p.power_kind == PowerKind::Active ? "active" : "reactive";
    o["quality_rank"] = p.quality_rank;
    root["products"].push_back(std::move(o));
  }
  root["penalties"]["balance"] = c.balance_penalty;
  root["penalties"]["line_overload"] = c.line_overload_penalty;
  return root.dump(1);
}

namespace {

std::vector<double> read_values(Obj& o, int T, const std::string& key) {
  const json& arr = o.require(key);
  std::string path = o.path(key);
  if (!arr.is_array()) throw SchemaError(path, "expected an array");
  if (static_cast<int>(arr.size()) != T)
    throw DimensionError(path + ": expected " + std::to_string(T) +
                         " periods, found " + std::to_string(arr.size()));
  std::vector<double> out((size_t)T);
  for (int t = 0; t < T; ++t)
    out[(size_t)t] = as_number(arr[(size_t)t], path);
  return out;
}

std::vector<std::uint8_t> read_bits(Obj& o, int T, const std::string& key) {
  auto vals = read_values(o, T, key);
  std::vector<std::uint8_t> out((size_t)T);
  for (int t = 0; t < T; ++t) {
    double v = vals[(size_t)t];
    if (v != 0.0 && v != 1.0)
      throw ValidationError({{o.path(key), "binary status must be 0 or 1"}});
    out[(size_t)t] = v != 0.0;
  }
  return out;
}

}  // namespace

FullSolution read_solution(const std::string& bytes, const Case& c) {
  json root;
  try {
    root = json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw SchemaError("$", std::string("invalid JSON: ") + e.what());
  }
  const int T = c.time_grid.periods();
  const int nd = static_cast<int>(c.devices.size());
  const int nb = static_cast<int>(c.buses.size());
  CaseIndex ix = build_index(c);

  FullSolution sol;
  Obj top(root, "$");
  {
    Obj meta(top.require("meta"), top.path("meta"));
    const json* fmt = meta.find("format");
    if (fmt && as_string(*fmt, meta.path("format")) != "acuc-solution-1")
      throw SchemaError(meta.path("format"), "unsupported solution format");
    if (const json* alg = meta.find("algorithm"))
      sol.meta.algorithm = static_cast<int>(as_number(*alg, meta.path("algorithm")));
    if (const json* g = meta.find("gamma"))
      sol.meta.gamma = as_number(*g, meta.path("gamma"));
  }

  sol.commitment.on.assign((size_t)nd, std::vector<std::uint8_t>((size_t)T, 0));
  sol.commitment.su = sol.commitment.on;
  sol.commitment.sd = sol.commitment.on;
  {
    const json& arr = top.require("commitment");
    if (!arr.is_array()) throw SchemaError("$.commitment", "expected an array");
    if (static_cast<int>(arr.size()) != nd)
      throw DimensionError("$.commitment: expected " + std::to_string(nd) +
                           " devices, found " + std::to_string(arr.size()));
    std::set<std::string> seen;
    for (size_t i = 0; i < arr.size(); ++i) {
      Obj o(arr[i], "$.commitment[" + std::to_string(i) + "]");
      std::string dev = as_string(o.require("device"), o.path("device"));
      auto it = ix.device_id.find(dev);
      if (it == ix.device_id.end())
        throw DimensionError(o.path("device") + ": unknown device '" + dev + "'");
      if (!seen.insert(dev).second)
        throw DimensionError(o.path("device") + ": duplicate device '" + dev + "'");
      int j = it->second;
      sol.commitment.on[(size_t)j] = read_bits(o, T, "on");
      sol.commitment.su[(size_t)j] = read_bits(o, T, "su");
      sol.commitment.sd[(size_t)j] = read_bits(o, T, "sd");
    }
  }

  auto read_series = [&](const json& arr, const std::string& path, int count,
                         const std::string& id_key,
                         const std::map<std::string, int>& ids,
                         std::vector<std::vector<double>>& out) {
    if (!arr.is_array()) throw SchemaError(path, "expected an array");
    if (static_cast<int>(arr.size()) != count)
      throw DimensionError(path + ": expected " + std::to_string(count) +
                           " entries, found " + std::to_string(arr.size()));
    out.assign((size_t)count, std::vector<double>((size_t)T, 0.0));
    std::set<std::string> seen;
    for (size_t i = 0; i < arr.size(); ++i) {
      Obj o(arr[i], path + "[" + std::to_string(i) + "]");
      std::string id = as_string(o.require(id_key), o.path(id_key));
      auto it = ids.find(id);
      if (it == ids.end())
        throw DimensionError(o.path(id_key) + ": unknown " + id_key + " '" + id + "'");
      if (!seen.insert(id).second)
        throw DimensionError(o.path(id_key) + ": duplicate '" + id + "'");
      out[(size_t)it->second] = read_values(o, T, "values");
    }
  };

  {
    Obj disp(top.require("dispatch"), top.path("dispatch"));
    read_series(disp.require("p"), disp.path("p"), nd, "device", ix.device_id,
                sol.dispatch.p);
    read_series(disp.require("q"), disp.path("q"), nd, "device", ix.device_id,
                sol.dispatch.q);
    read_series(disp.require("v"), disp.path("v"), nb, "bus", ix.bus_id,
                sol.dispatch.v);
    read_series(disp.require("theta"), disp.path("theta"), nb, "bus", ix.bus_id,
                sol.dispatch.theta);
  }

  const int np = static_cast<int>(c.products.size());
  const int nz = static_cast<int>(c.zones.size());
  sol.reserves.r.assign(
      (size_t)nd, std::vector<std::vector<double>>(
                      (size_t)np, std::vector<double>((size_t)T, 0.0)));
  sol.reserves.shortfall.assign(
      (size_t)nz, std::vector<std::vector<double>>(
                      (size_t)np, std::vector<double>((size_t)T, 0.0)));
  if (const json* arr = top.find("reserves")) {
    if (!arr->is_array()) throw SchemaError("$.reserves", "expected an array");
    for (size_t i = 0; i < arr->size(); ++i) {
      Obj o((*arr)[i], "$.reserves[" + std::to_string(i) + "]");
      std::string dev = as_string(o.require("device"), o.path("device"));
      std::string prod = as_string(o.require("product"), o.path("product"));
      auto dit = ix.device_id.find(dev);
      auto pit = ix.product_id.find(prod);
      if (dit == ix.device_id.end())
        throw DimensionError(o.path("device") + ": unknown device '" + dev + "'");
      if (pit == ix.product_id.end())
        throw DimensionError(o.path("product") + ": unknown product '" + prod + "'");
      auto vals = read_values(o, T, "values");
      for (double v : vals) {
        if (v < 0.0)
          throw ValidationError(
              {{o.path("values"), "reserve quantities must be >= 0"}});
      }
      sol.reserves.r[(size_t)dit->second][(size_t)pit->second] = std::move(vals);
    }
  }
  if (const json* arr = top.find("shortfalls")) {
    if (!arr->is_array()) throw SchemaError("$.shortfalls", "expected an array");
    for (size_t i = 0; i < arr->size(); ++i) {
      Obj o((*arr)[i], "$.shortfalls[" + std::to_string(i) + "]");
      std::string zone = as_string(o.require("zone"), o.path("zone"));
      std::string prod = as_string(o.require("product"), o.path("product"));
      auto zit = ix.zone_id.find(zone);
      auto pit = ix.product_id.find(prod);
      if (zit == ix.zone_id.end())
        throw DimensionError(o.path("zone") + ": unknown zone '" + zone + "'");
      if (pit == ix.product_id.end())
        throw DimensionError(o.path("product") + ": unknown product '" + prod + "'");
      auto vals = read_values(o, T, "values");
      for (double v : vals) {
        if (v < 0.0)
          throw ValidationError(
              {{o.path("values"), "shortfalls must be >= 0"}});
      }
      sol.reserves.shortfall[(size_t)zit->second][(size_t)pit->second] =
          std::move(vals);
    }
  }

  // Stored flow and mismatch fields are always derived from the voltages.
  recompute_derived_dispatch(c, ix, sol.dispatch);
  return sol;
}

std::string write_solution(const FullSolution& sol, const Case& c) {
  const int T = c.time_grid.periods();
  ordered_json root;
  root["meta"]["format"] = "acuc-solution-1";
  root["meta"]["algorithm"] = sol.meta.algorithm;
  if (sol.meta.gamma != 0.0) root["meta"]["gamma"] = sol.meta.gamma;

  root["commitment"] = ordered_json::array();
  for (size_t j = 0; j < c.devices.size(); ++j) {
    ordered_json o;
    o["device"] = c.devices[j].id;
    auto bits = [T](const std::vector<std::uint8_t>& v) {
      ordered_json a = ordered_json::array();
      for (int t = 0; t < T; ++t) a.push_back(v[(size_t)t] ? 1 : 0);
      return a;
    };
    o["on"] = bits(sol.commitment.on[j]);
    o["su"] = bits(sol.commitment.su[j]);
    o["sd"] = bits(sol.commitment.sd[j]);
    root["commitment"].push_back(std::move(o));
  }

  auto series = [&](const std::vector<std::vector<double>>& data,
                    const std::string& id_key, auto id_of) {
    ordered_json arr = ordered_json::array();
    for (size_t i = 0; i < data.size(); ++i) {
      ordered_json o;
      o[id_key] = id_of(i);
      o["values"] = data[i];
      arr.push_back(std::move(o));
    }
    return arr;
  };
  root["dispatch"]["p"] = series(sol.dispatch.p, "device",
                                 [&c](size_t i) { return c.devices[i].id; });
  root["dispatch"]["q"] = series(sol.dispatch.q, "device",
                                 [&c](size_t i) { return c.devices[i].id; });
  root["dispatch"]["v"] = series(sol.dispatch.v, "bus",
                                 [&c](size_t i) { return c.buses[i].id; });
  root["dispatch"]["theta"] = series(sol.dispatch.theta, "bus",
                                     [&c](size_t i) { return c.buses[i].id; });

  root["reserves"] = ordered_json::array();
  for (size_t j = 0; j < sol.reserves.r.size(); ++j) {
    for (size_t k = 0; k < sol.reserves.r[j].size(); ++k) {
      const auto& vals = sol.reserves.r[j][k];
      bool nonzero = std::any_of(vals.begin(), vals.end(),
                                 [](double v) { return v != 0.0; });
      if (!nonzero) continue;
      ordered_json o;
      o["device"] = c.devices[j].id;
      o["product"] = c.products[k].id;
      o["values"] = vals;
      root["reserves"].push_back(std::move(o));
    }
  }
  root["shortfalls"] = ordered_json::array();
  for (size_t z = 0; z < sol.reserves.shortfall.size(); ++z) {
    for (size_t k = 0; k < sol.reserves.shortfall[z].size(); ++k) {
      const auto& vals = sol.reserves.shortfall[z][k];
      bool nonzero = std::any_of(vals.begin(), vals.end(),
                                 [](double v) { return v != 0.0; });
      if (!nonzero) continue;
      ordered_json o;
      o["zone"] = c.zones[z].id;
      o["product"] = c.products[k].id;
      o["values"] = vals;
      root["shortfalls"].push_back(std::move(o));
    }
  }
  return root.dump(1);
}

std::vector<ReserveProduct> default_products() {
  return {
      {"rgu", ReserveDirection::Up, PowerKind::Active, 1},
      {"scr", ReserveDirection::Up, PowerKind::Active, 2},
      {"rru", ReserveDirection::Up, PowerKind::Active, 3},
      {"rgd", ReserveDirection::Down, PowerKind::Active, 1},
      {"rrd", ReserveDirection::Down, PowerKind::Active, 2},
      {"qru", ReserveDirection::Up, PowerKind::Reactive, 1},
      {"qrd", ReserveDirection::Down, PowerKind::Reactive, 1},
  };
}

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  // Bit-level helper; std distributions are not reproducible across
  // implementations.
  double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + u * (hi - lo);
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

}  // namespace

Case generate_case(const GeneratorSpec& spec) {
  if (spec.n_buses < 2) throw GenerationError("n_buses must be >= 2");
  if (spec.n_devices < 2) throw GenerationError("n_devices must be >= 2");
  if (spec.n_periods < 1) throw GenerationError("n_periods must be >= 1");
  if (spec.n_active_zones < 1 || spec.n_reactive_zones < 1)
    throw GenerationError("zone counts must be >= 1");
  if (spec.capacity_margin < 0.0)
    throw GenerationError("capacity_margin must be >= 0");
  if (!(spec.ramp_tightness > 0.0) || spec.ramp_tightness > 1.0)
    throw GenerationError("ramp_tightness must lie in (0, 1]");

  std::mt19937_64 rng(spec.seed);
  const int T = spec.n_periods;
  const int NB = spec.n_buses;

  Case c;
  c.time_grid.durations.assign((size_t)T, 1.0);
  c.products = default_products();

  // Zones: contiguous bus chunks per power kind.
  for (int z = 0; z < spec.n_active_zones; ++z) {
    ReserveZone zone;
    zone.id = "za" + std::to_string(z + 1);
    zone.power_kind = PowerKind::Active;
    zone.shortfall_penalty = {{"rgu", 1.2e5}, {"scr", 1.0e5}, {"rru", 0.8e5},
                              {"rgd", 1.1e5}, {"rrd", 0.9e5}};
    c.zones.push_back(std::move(zone));
  }
  for (int z = 0; z < spec.n_reactive_zones; ++z) {
    ReserveZone zone;
    zone.id = "zr" + std::to_string(z + 1);
    zone.power_kind = PowerKind::Reactive;
    zone.shortfall_penalty = {{"qru", 5e4}, {"qrd", 5e4}};
    c.zones.push_back(std::move(zone));
  }

  auto chunk_of = [NB](int bus, int chunks) {
    return std::min(bus * chunks / NB, chunks - 1);
  };
  for (int b = 0; b < NB; ++b) {
    Bus bus;
    bus.id = "b" + std::to_string(b + 1);
    bus.v_min = 0.95;
    bus.v_max = 1.05;
    bus.is_reference = b == 0;
    bus.active_zone = "za" + std::to_string(chunk_of(b, spec.n_active_zones) + 1);
    bus.reactive_zone =
        "zr" + std::to_string(chunk_of(b, spec.n_reactive_zones) + 1);
    c.buses.push_back(std::move(bus));
  }

  // Topology: a near-planar lattice with diagonal reinforcements, densified
  // to ~1.74 lines/bus, the ratio of the smallest network in the target
  // family. Transmission grids are short-range meshes, and the planar
  // structure also keeps the downstream linear algebra well ordered.
  const int target_lines = std::max(NB - 1, (int)std::lround(1.74 * NB));
  const int cols_n = std::max(1, (int)std::lround(std::sqrt((double)NB)));
  auto bus_at = [&](int r, int col) {
    int b = r * cols_n + col;
    return (col >= 0 && col < cols_n && r >= 0 && b < NB) ? b : -1;
  };
  int line_no = 0;
  auto add_line = [&](int a, int b) {
    AcLine l;
    l.id = "l" + std::to_string(++line_no);
    l.from_bus = c.buses[(size_t)a].id;
    l.to_bus = c.buses[(size_t)b].id;
    // Larger systems move power over more hops; keep end-to-end transfer
    // capability roughly size-independent by scaling impedances down.
    const double x_scale = std::min(1.0, 8.0 / std::sqrt((double)NB));
    double x = x_scale * uniform(rng, 0.03, 0.12);
    double r = x * uniform(rng, 0.08, 0.25);
    double den = r * r + x * x;
    l.g_sr = r / den;
    l.b_sr = -x / den;
    l.b_ch = uniform(rng, 0.005, 0.03);
    l.s_max = 1.0;  // re-rated once demand is known
    c.lines.push_back(std::move(l));
  };
  // Serpentine spanning tree over the lattice.
  for (int b = 1; b < NB; ++b) {
    int r = b / cols_n, col = b % cols_n;
    int parent = col > 0 ? bus_at(r, col - 1) : bus_at(r - 1, col);
    add_line(parent, b);
  }
  // Remaining short-range edges in a shuffled deterministic order.
  std::vector<std::pair<int, int>> pool;
  for (int b = 0; b < NB; ++b) {
    int r = b / cols_n, col = b % cols_n;
    for (auto [dr, dc] : {std::pair<int, int>{1, 0}, {1, 1}, {1, -1}}) {
      int other = bus_at(r + dr, col + dc);
      if (other >= 0) pool.emplace_back(b, other);
    }
  }
  for (size_t i = pool.size(); i > 1; --i)
    std::swap(pool[i - 1], pool[(size_t)(rng() % i)]);
  for (const auto& [a, b] : pool) {
    if ((int)c.lines.size() >= target_lines) break;
    // The tree already used left/up links; lattice down/diagonal edges are
    // distinct from those by construction.
    add_line(a, b);
  }

  // Devices: consumers first (their demand profile sizes the producers).
  const int n_cons = std::max(1, (int)std::lround(0.45 * spec.n_devices));
  const int n_prod = spec.n_devices - n_cons;
  if (n_prod < 1)
    throw GenerationError("need at least one producer and one consumer");

  std::vector<double> shape((size_t)T, 1.0);
  if (spec.load_profile_shape == LoadShape::Diurnal) {
    double hours = 0.0;
    for (int t = 0; t < T; ++t) {
      shape[(size_t)t] =
          0.8 + 0.2 * std::sin(2.0 * M_PI * (hours - 6.0) / 24.0);
      hours += c.time_grid.durations[(size_t)t];
    }
  }

  struct ConsumerDraft {
    int bus;
    std::vector<double> demand;
  };
  std::vector<ConsumerDraft> consumers;
  std::vector<double> total_demand((size_t)T, 0.0);
  // Stratified placement spreads load and generation over the lattice so no
  // neighbourhood is left without local supply.
  auto stratified_bus = [&rng, NB](int i, int n) {
    int span = std::max(1, NB / std::max(1, n));
    int base = (int)((long long)i * NB / std::max(1, n));
    return std::min(NB - 1, base + uniform_int(rng, 0, span - 1));
  };
  for (int i = 0; i < n_cons; ++i) {
    ConsumerDraft cd;
    cd.bus = stratified_bus(i, n_cons);
    double base = uniform(rng, 0.2, 1.0);
    cd.demand.resize((size_t)T);
    for (int t = 0; t < T; ++t) {
      cd.demand[(size_t)t] = base * shape[(size_t)t];
      total_demand[(size_t)t] += cd.demand[(size_t)t];
    }
    consumers.push_back(std::move(cd));
  }
  double peak_demand = *std::max_element(total_demand.begin(), total_demand.end());

  // Producer capacities scaled to hold the requested margin at peak.
  std::vector<double> cap_share((size_t)n_prod);
  double share_sum = 0.0;
  for (int i = 0; i < n_prod; ++i) {
    cap_share[(size_t)i] = uniform(rng, 0.5, 1.5);
    share_sum += cap_share[(size_t)i];
  }
  const double total_cap = (1.0 + spec.capacity_margin) * peak_demand;
  const double min_d =
      *std::min_element(c.time_grid.durations.begin(), c.time_grid.durations.end());

  for (int i = 0; i < n_prod; ++i) {
    Device d;
    d.id = "g" + std::to_string(i + 1);
    d.kind = DeviceKind::Producer;
    d.bus = c.buses[(size_t)stratified_bus(i, n_prod)].id;
    double pmax = total_cap * cap_share[(size_t)i] / share_sum;
    double pmin = uniform(rng, 0.1, 0.25) * pmax;
    d.p_max.assign((size_t)T, pmax);
    d.p_min.assign((size_t)T, pmin);
    d.q_max.assign((size_t)T, 0.5 * pmax);
    d.q_min.assign((size_t)T, -0.5 * pmax);
    // Witness dispatch: capacity-proportional share of total demand.
    double wit_max_delta = 0.0;
    for (int t = 1; t < T; ++t) {
      double w1 = total_demand[(size_t)t] * pmax / total_cap;
      double w0 = total_demand[(size_t)t - 1] * pmax / total_cap;
      wit_max_delta = std::max(
          wit_max_delta, std::fabs(w1 - w0) / c.time_grid.durations[(size_t)t]);
    }
    double base_rate = std::max(wit_max_delta / spec.ramp_tightness, 0.05 * pmax);
    d.p_ru = base_rate;
    d.p_rd = base_rate;
    d.p_ru_su = std::max(1.2 * pmin, 0.3 * pmax) / min_d;
    d.p_rd_sd = d.p_ru_su;
    d.initial_on = true;
    d.initial_p = total_demand[0] * pmax / total_cap;
    double m = uniform(rng, 15.0, 80.0);
    d.cost = {{{0.6 * pmax, m},
               {0.3 * pmax, m * uniform(rng, 1.2, 1.8)},
               {0.2 * pmax, m * uniform(rng, 2.0, 3.0)}}};
    d.on_cost = uniform(rng, 0.0, 5.0);
    d.su_cost = uniform(rng, 0.0, 50.0);
    d.sd_cost = uniform(rng, 0.0, 20.0);
    d.reserve_cost = {{"rgu", uniform(rng, 0.0, 2.0)},
                      {"scr", uniform(rng, 0.0, 1.0)}};
    d.reserve_cap = {{"rgu", 0.15 * pmax}};
    c.devices.push_back(std::move(d));
  }

  for (int i = 0; i < n_cons; ++i) {
    const auto& cd = consumers[(size_t)i];
    Device d;
    d.id = "d" + std::to_string(i + 1);
    d.kind = DeviceKind::Consumer;
    d.bus = c.buses[(size_t)cd.bus].id;
    double dmax = *std::max_element(cd.demand.begin(), cd.demand.end());
    d.p_min.resize((size_t)T);
    d.p_max.resize((size_t)T);
    d.q_min.resize((size_t)T);
    d.q_max.resize((size_t)T);
    for (int t = 0; t < T; ++t) {
      d.p_min[(size_t)t] = 0.4 * cd.demand[(size_t)t];
      d.p_max[(size_t)t] = 1.1 * cd.demand[(size_t)t];
      d.q_min[(size_t)t] = 0.05 * cd.demand[(size_t)t];
      d.q_max[(size_t)t] = 0.45 * cd.demand[(size_t)t];
    }
    double wit_max_delta = 0.0;
    for (int t = 1; t < T; ++t)
      wit_max_delta = std::max(
          wit_max_delta,
          std::fabs(cd.demand[(size_t)t] - cd.demand[(size_t)t - 1]) /
              c.time_grid.durations[(size_t)t]);
    double base_rate = std::max(wit_max_delta / spec.ramp_tightness, 0.05 * dmax);
    d.p_ru = base_rate;
    d.p_rd = base_rate;
    d.p_ru_su = std::max(1.2 * 0.4 * dmax, 0.3 * dmax) / min_d;
    d.p_rd_sd = d.p_ru_su;
    d.initial_on = true;
    d.initial_p = cd.demand[0];
    double value = uniform(rng, 600.0, 1200.0);
    d.cost = {{{0.7 * 1.1 * dmax, value},
               {0.45 * 1.1 * dmax, value * uniform(rng, 0.2, 0.5)}}};
    c.devices.push_back(std::move(d));
  }

  // Rate lines generously relative to the load they may carry.
  double rating = std::max(1.0, 3.0 * peak_demand / std::max<size_t>(c.lines.size(), 1));
  for (auto& l : c.lines) l.s_max = rating * uniform(rng, 0.8, 1.2);

  // Zone requirements: a fixed fraction of zonal peak demand.
  CaseIndex ix = build_index(c);
  for (size_t z = 0; z < c.zones.size(); ++z) {
    auto& zone = c.zones[z];
    double peak = 0.0;
    for (int t = 0; t < T; ++t) {
      double tot = 0.0;
      for (int dev : ix.zone_devices[z]) {
        const auto& d = c.devices[(size_t)dev];
        if (d.kind != DeviceKind::Consumer) continue;
        if (zone.power_kind == PowerKind::Active)
          tot += 0.5 * (d.p_min[(size_t)t] + d.p_max[(size_t)t]) / 0.75;
        else
          tot += 0.5 * (d.q_min[(size_t)t] + d.q_max[(size_t)t]);
      }
      peak = std::max(peak, tot);
    }
    const double frac = 0.03;
    if (zone.power_kind == PowerKind::Active) {
      for (const char* prod : {"rgu", "scr", "rru", "rgd", "rrd"})
        zone.requirement[prod] = std::vector<double>((size_t)T, frac * peak);
    } else {
      for (const char* prod : {"qru", "qrd"})
        zone.requirement[prod] = std::vector<double>((size_t)T, frac * peak);
    }
  }

  c.balance_penalty = 1e6;
  c.line_overload_penalty = 1e4;

  auto violations = validate_case(c);
  if (!violations.empty()) throw ValidationError(std::move(violations));
  return c;
}

}  // namespace acuc
