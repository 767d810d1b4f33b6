#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "uavee/errors.hpp"

namespace uavee {

using Vec2 = Eigen::Vector2d;

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

struct GroundNode {
  double x = 0.0;  // m
  double y = 0.0;  // m
  Vec2 xy() const { return {x, y}; }
};

struct Jammer {
  GroundNode node;
  double power_w = 0.1;
};

struct ChannelParams {
  double bandwidth_hz = 1e5;
  double beta0 = 1e-6;  // linear gain at 1 m
  double noise_power_w = dbm_to_watts(-119.0);
  double source_power_w = 0.1;
};

/// Fixed-wing propulsion model constants. c1 in W*s^3/m^3, c2 in W*m/s.
struct EnergyParams {
  double c1 = 9.26e-4;
  double c2 = 2250.0;
  double gravity = 9.8;
  double mass = 0.0;  // kg; zero disables the kinetic-energy term
};

struct UavParams {
  double altitude = 100.0;
  double v_max = 100.0;
  double v_min = 3.0;
  double a_max = 5.0;
  Vec2 start{-500.0, 0.0};
  Vec2 end{500.0, 0.0};
};

struct Horizon {
  double T = 150.0;
  int N = 300;
  double dt = 0.5;

  /// Slot count from duration and slot length; T/dt must be a whole number.
  static Horizon from_duration(double T, double dt) {
    if (!(dt > 0.0) || !(T > 0.0)) throw ValidationError("horizon: T and dt must be positive");
    const double ratio = T / dt;
    const double n = std::round(ratio);
    if (std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio))
      throw ValidationError("horizon: T must equal N*dt for an integer N");
    return Horizon{T, static_cast<int>(n), dt};
  }
};

/// Which side of the start-end line the initial detour bulges toward.
enum class DetourSide { toward_source, positive_y, negative_y };

/// Algorithm and solver settings carried by the scenario file (`solver` key).
struct SolverSettings {
  double outer_threshold = 1e-3;  // fractional EE increase that ends the SCA loop
  double inner_threshold = 10.0;  // |F(lambda)| that ends the Dinkelbach loop
  double inner_relative_threshold = 0.0;  // optional |F| / numerator criterion; 0 disables
  int max_outer = 50;
  int max_inner = 30;
  double kkt_tolerance = 1e-8;
  int max_newton = 1000;  // per subproblem; first-outer solves from a straight line need a few hundred
  bool altitude_in_distance_bound = true;  // false reproduces the printed bound without H^2
  DetourSide detour = DetourSide::toward_source;
};

struct Scenario {
  GroundNode source{0.0, 1000.0};
  std::vector<Jammer> jammers{Jammer{{0.0, 0.0}, 0.1}};
  ChannelParams channel;
  EnergyParams energy;
  UavParams uav;
  Horizon horizon;
  SolverSettings solver;

  int num_jammers() const { return static_cast<int>(jammers.size()); }
};

/// Throws ValidationError naming the first violated invariant.
inline void validate(const Scenario& s) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ValidationError(what);
  };
  auto finite = [](double v) { return std::isfinite(v); };
  require(finite(s.source.x) && finite(s.source.y), "source: coordinates must be finite");
  for (const auto& j : s.jammers) {
    require(finite(j.node.x) && finite(j.node.y), "jammer: coordinates must be finite");
    require(j.power_w > 0.0 && finite(j.power_w), "jammer: transmit power must be > 0");
  }
  const auto& c = s.channel;
  require(c.bandwidth_hz > 0.0, "channel: bandwidth must be > 0");
  require(c.beta0 > 0.0, "channel: beta0 must be > 0");
  require(c.noise_power_w > 0.0, "channel: noise power must be > 0");
  require(c.source_power_w > 0.0, "channel: source power must be > 0");
  const auto& e = s.energy;
  require(e.c1 > 0.0 && e.c2 > 0.0 && e.gravity > 0.0, "energy: c1, c2 and g must be > 0");
  require(e.mass >= 0.0, "energy: mass must be >= 0");
  const auto& u = s.uav;
  require(u.altitude > 0.0, "uav: altitude must be > 0");
  require(u.v_min > 0.0 && u.v_min < u.v_max, "uav: need 0 < v_min < v_max");
  require(u.a_max > 0.0, "uav: a_max must be > 0");
  require(u.start.allFinite() && u.end.allFinite(), "uav: endpoints must be finite");
  const auto& h = s.horizon;
  require(h.N >= 2, "horizon: N must be >= 2");
  require(h.dt > 0.0, "horizon: dt must be > 0");
  require(std::abs(h.T - h.N * h.dt) <= 1e-9 * std::max(1.0, h.T), "horizon: T must equal N*dt");
  require((u.end - u.start).norm() <= u.v_max * h.T,
          "uav: end point unreachable (distance exceeds v_max*T)");
  const auto& o = s.solver;
  require(o.outer_threshold > 0.0 && o.inner_threshold > 0.0, "solver: thresholds must be > 0");
  require(o.inner_relative_threshold >= 0.0, "solver: relative threshold must be >= 0");
  require(o.max_outer >= 1 && o.max_inner >= 1 && o.max_newton >= 1,
          "solver: iteration limits must be >= 1");
  require(o.kkt_tolerance > 0.0, "solver: kkt tolerance must be > 0");
}

/// Parameter set of the reference study: one jammer at the origin, T = 150 s.
inline Scenario default_scenario() { return Scenario{}; }

/// The four reference cases. Cases 1 and 2 share one jammer; 3 and 4 add more.
/// `duration` overrides the case's flight time (slot length stays 0.5 s).
inline Scenario case_scenario(int case_id, std::optional<double> duration = std::nullopt) {
  Scenario s = default_scenario();
  const Jammer j0{{0.0, 0.0}, 0.1};
  const Jammer j1{{500.0, 500.0}, 0.1};
  const Jammer j2{{300.0, 800.0}, 0.1};
  double T = 0.0;
  switch (case_id) {
    case 1: s.jammers = {j0}; T = 150.0; break;
    case 2: s.jammers = {j0}; T = 200.0; break;
    case 3: s.jammers = {j0, j1}; T = 200.0; break;
    case 4: s.jammers = {j0, j1, j2}; T = 200.0; break;
    default: throw ValidationError("unknown case id " + std::to_string(case_id) + " (expected 1-4)");
  }
  s.horizon = Horizon::from_duration(duration.value_or(T), 0.5);
  validate(s);
  return s;
}

inline Scenario without_jammers(Scenario s) {
  s.jammers.clear();
  return s;
}

// ---------------------------------------------------------------------------
// JSON scenario documents
// ---------------------------------------------------------------------------

namespace detail {

using nlohmann::json;

inline double number(const json& j, const std::string& what) {
  if (!j.is_number()) throw ParseError(what + ": expected a number");
  return j.get<double>();
}

// Accepts a bare number (watts) or {"watts": x} / {"dbm": x}.
inline double power_watts(const json& j, const std::string& what) {
  if (j.is_number()) return j.get<double>();
  if (j.is_object() && j.size() == 1) {
    if (j.contains("watts")) return number(j["watts"], what + ".watts");
    if (j.contains("dbm")) return dbm_to_watts(number(j["dbm"], what + ".dbm"));
  }
  throw ParseError(what + ": expected number, {\"watts\": x} or {\"dbm\": x}");
}

// Accepts a bare number (linear) or {"linear": x} / {"db": x}.
inline double gain_linear(const json& j, const std::string& what) {
  if (j.is_number()) return j.get<double>();
  if (j.is_object() && j.size() == 1) {
    if (j.contains("linear")) return number(j["linear"], what + ".linear");
    if (j.contains("db")) return db_to_linear(number(j["db"], what + ".db"));
  }
  throw ParseError(what + ": expected number, {\"linear\": x} or {\"db\": x}");
}

inline Vec2 point(const json& j, const std::string& what) {
  if (j.is_array() && j.size() == 2) return {number(j[0], what + "[0]"), number(j[1], what + "[1]")};
  if (j.is_object() && j.contains("x") && j.contains("y"))
    return {number(j["x"], what + ".x"), number(j["y"], what + ".y")};
  throw ParseError(what + ": expected [x, y] or {\"x\": .., \"y\": ..}");
}

inline void check_keys(const json& j, std::initializer_list<const char*> allowed,
                       const std::string& what) {
  if (!j.is_object()) throw ParseError(what + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw ParseError(what + ": unknown key '" + key + "'");
  }
}

inline const char* detour_name(DetourSide d) {
  switch (d) {
    case DetourSide::positive_y: return "positive_y";
    case DetourSide::negative_y: return "negative_y";
    default: return "toward_source";
  }
}

inline DetourSide parse_detour(const json& j) {
  if (!j.is_string()) throw ParseError("solver.detour: expected a string");
  const auto s = j.get<std::string>();
  if (s == "toward_source") return DetourSide::toward_source;
  if (s == "positive_y") return DetourSide::positive_y;
  if (s == "negative_y") return DetourSide::negative_y;
  throw ParseError("solver.detour: unknown value '" + s + "'");
}

}  // namespace detail

/// Parses a scenario document. Missing keys keep their default values; the
/// horizon accepts any two of T, dt, N (all three must agree).
inline Scenario scenario_from_json(const nlohmann::json& doc) {
  using detail::check_keys;
  using detail::number;
  Scenario s = default_scenario();
  check_keys(doc, {"source", "jammers", "channel", "energy", "uav", "horizon", "solver"}, "scenario");

  if (doc.contains("source")) {
    const Vec2 p = detail::point(doc["source"], "source");
    s.source = {p.x(), p.y()};
  }
  if (doc.contains("jammers")) {
    const auto& arr = doc["jammers"];
    if (!arr.is_array()) throw ParseError("jammers: expected an array");
    s.jammers.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string what = "jammers[" + std::to_string(i) + "]";
      Jammer jm;
      const auto& e = arr[i];
      if (e.is_object() && e.contains("power")) {
        check_keys(e, {"x", "y", "power"}, what);
        jm.power_w = detail::power_watts(e["power"], what + ".power");
        const Vec2 p = detail::point(nlohmann::json{{"x", e["x"]}, {"y", e["y"]}}, what);
        jm.node = {p.x(), p.y()};
      } else {
        const Vec2 p = detail::point(e, what);
        jm.node = {p.x(), p.y()};
      }
      s.jammers.push_back(jm);
    }
  }
  if (doc.contains("channel")) {
    const auto& c = doc["channel"];
    check_keys(c, {"bandwidth_hz", "beta0", "noise_power", "source_power"}, "channel");
    if (c.contains("bandwidth_hz")) s.channel.bandwidth_hz = number(c["bandwidth_hz"], "channel.bandwidth_hz");
    if (c.contains("beta0")) s.channel.beta0 = detail::gain_linear(c["beta0"], "channel.beta0");
    if (c.contains("noise_power")) s.channel.noise_power_w = detail::power_watts(c["noise_power"], "channel.noise_power");
    if (c.contains("source_power")) s.channel.source_power_w = detail::power_watts(c["source_power"], "channel.source_power");
  }
  if (doc.contains("energy")) {
    const auto& e = doc["energy"];
    check_keys(e, {"c1", "c2", "gravity", "mass"}, "energy");
    if (e.contains("c1")) s.energy.c1 = number(e["c1"], "energy.c1");
    if (e.contains("c2")) s.energy.c2 = number(e["c2"], "energy.c2");
    if (e.contains("gravity")) s.energy.gravity = number(e["gravity"], "energy.gravity");
    if (e.contains("mass")) s.energy.mass = number(e["mass"], "energy.mass");
  }
  if (doc.contains("uav")) {
    const auto& u = doc["uav"];
    check_keys(u, {"altitude", "v_max", "v_min", "a_max", "start", "end"}, "uav");
    if (u.contains("altitude")) s.uav.altitude = number(u["altitude"], "uav.altitude");
    if (u.contains("v_max")) s.uav.v_max = number(u["v_max"], "uav.v_max");
    if (u.contains("v_min")) s.uav.v_min = number(u["v_min"], "uav.v_min");
    if (u.contains("a_max")) s.uav.a_max = number(u["a_max"], "uav.a_max");
    if (u.contains("start")) s.uav.start = detail::point(u["start"], "uav.start");
    if (u.contains("end")) s.uav.end = detail::point(u["end"], "uav.end");
  }
  if (doc.contains("horizon")) {
    const auto& h = doc["horizon"];
    check_keys(h, {"T", "dt", "N"}, "horizon");
    const bool hasT = h.contains("T"), hasDt = h.contains("dt"), hasN = h.contains("N");
    double T = s.horizon.T, dt = s.horizon.dt;
    if (hasN && !h["N"].is_number_integer()) throw ParseError("horizon.N: expected an integer");
    if (hasT) T = number(h["T"], "horizon.T");
    if (hasDt) dt = number(h["dt"], "horizon.dt");
    if (hasN) {
      const int N = h["N"].get<int>();
      if (hasT && hasDt) {
        s.horizon = Horizon{T, N, dt};
      } else if (hasT) {
        s.horizon = Horizon{T, N, T / N};
      } else {
        s.horizon = Horizon{N * dt, N, dt};
      }
    } else {
      s.horizon = Horizon::from_duration(T, dt);
    }
  }
  if (doc.contains("solver")) {
    const auto& o = doc["solver"];
    check_keys(o, {"mu", "eta", "eta_relative", "max_outer", "max_inner", "kkt_tolerance",
                   "max_newton", "altitude_in_distance_bound", "detour"},
               "solver");
    auto& st = s.solver;
    if (o.contains("mu")) st.outer_threshold = number(o["mu"], "solver.mu");
    if (o.contains("eta")) st.inner_threshold = number(o["eta"], "solver.eta");
    if (o.contains("eta_relative")) st.inner_relative_threshold = number(o["eta_relative"], "solver.eta_relative");
    if (o.contains("max_outer")) st.max_outer = o["max_outer"].get<int>();
    if (o.contains("max_inner")) st.max_inner = o["max_inner"].get<int>();
    if (o.contains("kkt_tolerance")) st.kkt_tolerance = number(o["kkt_tolerance"], "solver.kkt_tolerance");
    if (o.contains("max_newton")) st.max_newton = o["max_newton"].get<int>();
    if (o.contains("altitude_in_distance_bound")) {
      if (!o["altitude_in_distance_bound"].is_boolean())
        throw ParseError("solver.altitude_in_distance_bound: expected a boolean");
      st.altitude_in_distance_bound = o["altitude_in_distance_bound"].get<bool>();
    }
    if (o.contains("detour")) st.detour = detail::parse_detour(o["detour"]);
  }
  validate(s);
  return s;
}

/// Canonical document: SI units, every field explicit.
inline nlohmann::json scenario_to_json(const Scenario& s) {
  using nlohmann::json;
  json jammers = json::array();
  for (const auto& j : s.jammers)
    jammers.push_back({{"x", j.node.x}, {"y", j.node.y}, {"power", {{"watts", j.power_w}}}});
  return json{
      {"source", {{"x", s.source.x}, {"y", s.source.y}}},
      {"jammers", jammers},
      {"channel",
       {{"bandwidth_hz", s.channel.bandwidth_hz},
        {"beta0", {{"linear", s.channel.beta0}}},
        {"noise_power", {{"watts", s.channel.noise_power_w}}},
        {"source_power", {{"watts", s.channel.source_power_w}}}}},
      {"energy",
       {{"c1", s.energy.c1}, {"c2", s.energy.c2}, {"gravity", s.energy.gravity}, {"mass", s.energy.mass}}},
      {"uav",
       {{"altitude", s.uav.altitude},
        {"v_max", s.uav.v_max},
        {"v_min", s.uav.v_min},
        {"a_max", s.uav.a_max},
        {"start", {s.uav.start.x(), s.uav.start.y()}},
        {"end", {s.uav.end.x(), s.uav.end.y()}}}},
      {"horizon", {{"T", s.horizon.T}, {"dt", s.horizon.dt}, {"N", s.horizon.N}}},
      {"solver",
       {{"mu", s.solver.outer_threshold},
        {"eta", s.solver.inner_threshold},
        {"eta_relative", s.solver.inner_relative_threshold},
        {"max_outer", s.solver.max_outer},
        {"max_inner", s.solver.max_inner},
        {"kkt_tolerance", s.solver.kkt_tolerance},
        {"max_newton", s.solver.max_newton},
        {"altitude_in_distance_bound", s.solver.altitude_in_distance_bound},
        {"detour", detail::detour_name(s.solver.detour)}}}};
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file '" + path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("scenario file '" + path + "': " + e.what());
  }
  try {
    return scenario_from_json(doc);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("scenario file '" + path + "': " + e.what());
  }
}

inline void save_scenario(const Scenario& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write scenario file '" + path + "'");
  out << scenario_to_json(s).dump(2) << '\n';
}

}  // namespace uavee
