#pragma once

/**
 * @file config.hpp
 * @brief JSON documents: the network/simulation config and the small
 *        matrix inputs of the stability commands.
 *
 * Config layout (area and generator numbering is 1-based, as in trace
 * column names):
 *
 *   {
 *     "areas": [ { "bias_b": 21, "agc_tc": 100, "load_dev": 0.1,
 *                  "inertia_m": 10, "load_damping": 1,
 *                  "generators": [ { "lower": -0.5, "upper": 0.5 } ] } ],
 *     "ties": [ { "from": 1, "to": 2, "stiffness": 2.0 } ],
 *     "schedules": { "net_interchange": [0, 0], "frequency": [60, 60] },
 *     "sim": { "dt": 0.01, "horizon": 2000, "record_stride": 10,
 *              "seed": 0, "meas_filter_tc": 1 },
 *     "studies": { "taus": [30, 100, 300],
 *                  "bode": { "area": 1, "cross": 1 },
 *                  "kappas": [0.25, 0.5, 1, 2, 4] }
 *   }
 *
 * Generator keys: droop_r (default 0.05 × units in the area), turbine_tc
 * (0.5), base_setpoint (0), lower, upper, participation (equal split over
 * AGC units), in_agc (true). Units outside AGC default their limits to the
 * base setpoint. Unknown keys anywhere are a schema error.
 */

#include <cstddef>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rank1/agc_model.hpp"
#include "rank1/diagstab.hpp"
#include "rank1/error.hpp"
#include "rank1/numerics.hpp"
#include "rank1/sim.hpp"

namespace rank1 {

using Json = nlohmann::json;

struct BodeStudy {
  std::size_t area = 0;   // 0-based internally
  std::size_t cross = 0;  // output column j of S_ij
  double omega_min = 0.0;  // rad/s; 0 picks 1e-4/τᵢ
  double omega_max = 0.0;  // rad/s; 0 picks 1e4/τᵢ
  std::size_t points_per_decade = 50;

  friend bool operator==(const BodeStudy&, const BodeStudy&) = default;
};

struct Studies {
  Vec taus;    // AGC time constants swept by `simulate`; empty = as configured
  Vec kappas;  // uniform bias multipliers for `margin-study`
  BodeStudy bode;

  friend bool operator==(const Studies&, const Studies&) = default;
};

struct ConfigDoc {
  NetworkSpec net;
  SimConfig sim;
  std::optional<double> reduced_dt;  // seconds; default 0.1·τ·min τ̃
  Studies studies;

  friend bool operator==(const ConfigDoc&, const ConfigDoc&) = default;
};

namespace detail {

[[noreturn]] inline void schema_fail(const std::string& where, const std::string& what) {
  throw Error(Errc::schema, where + ": " + what);
}

/// Typed access to one JSON object with a closed key set.
class Fields {
 public:
  Fields(const Json& j, std::string where, std::initializer_list<const char*> allowed) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) schema_fail(where_, "expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : j_.items())
      if (!ok.count(key)) schema_fail(where_, "unknown key '" + key + "'");
  }

  [[nodiscard]] bool has(const char* key) const { return j_.contains(key); }
  [[nodiscard]] const Json& at(const char* key) const {
    if (!has(key)) schema_fail(where_, std::string("missing key '") + key + "'");
    return j_.at(key);
  }
  [[nodiscard]] std::string path(const char* key) const { return where_ + "." + key; }

  [[nodiscard]] double num(const char* key) const { return as_num(at(key), path(key)); }
  [[nodiscard]] double num(const char* key, double fallback) const { return has(key) ? num(key) : fallback; }

  [[nodiscard]] std::size_t count(const char* key) const { return as_count(at(key), path(key)); }
  [[nodiscard]] std::size_t count(const char* key, std::size_t fallback) const { return has(key) ? count(key) : fallback; }

  [[nodiscard]] bool flag(const char* key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_boolean()) schema_fail(path(key), "expected a boolean");
    return v.get<bool>();
  }

  [[nodiscard]] Vec vec(const char* key) const { return as_vec(at(key), path(key)); }

  [[nodiscard]] Mat mat(const char* key) const {
    const auto& v = at(key);
    if (!v.is_array() || v.empty()) schema_fail(path(key), "expected a non-empty array of rows");
    const std::size_t rows = v.size();
    std::size_t cols = 0;
    Mat m;
    for (std::size_t r = 0; r < rows; ++r) {
      const Vec row = as_vec(v[r], path(key) + "[" + std::to_string(r) + "]");
      if (r == 0) {
        cols = row.size();
        m = Mat(rows, cols);
      } else if (row.size() != cols) {
        schema_fail(path(key), "ragged rows");
      }
      for (std::size_t c = 0; c < cols; ++c) m(r, c) = row[c];
    }
    return m;
  }

  static double as_num(const Json& v, const std::string& where) {
    if (!v.is_number()) schema_fail(where, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) schema_fail(where, "non-finite number");
    return d;
  }

  static std::size_t as_count(const Json& v, const std::string& where) {
    if (!v.is_number_integer() || v.get<long long>() < 0) schema_fail(where, "expected a nonnegative integer");
    return v.get<std::size_t>();
  }

  static Vec as_vec(const Json& v, const std::string& where) {
    if (!v.is_array()) schema_fail(where, "expected an array of numbers");
    Vec out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_num(v[i], where + "[" + std::to_string(i) + "]"));
    return out;
  }

 private:
  const Json& j_;
  std::string where_;
};

/// 1-based area reference → 0-based index.
inline std::size_t area_ref(const Fields& f, const char* key, std::size_t n_areas) {
  const std::size_t id = f.count(key);
  if (id < 1 || id > n_areas) schema_fail(f.path(key), "area " + std::to_string(id) + " out of range 1.." + std::to_string(n_areas));
  return id - 1;
}

inline AreaSpec parse_area(const Json& j, const std::string& where) {
  const Fields f(j, where, {"inertia_m", "load_damping", "bias_b", "agc_tc", "load_dev", "generators"});
  AreaSpec a;
  a.inertia_m = f.num("inertia_m", 10.0);
  a.load_damping = f.num("load_damping", 1.0);
  a.bias_b = f.num("bias_b");
  a.agc_tc = f.num("agc_tc");
  a.load_dev = f.num("load_dev", 0.0);

  const auto& gens = f.at("generators");
  if (!gens.is_array() || gens.empty()) schema_fail(f.path("generators"), "expected a non-empty array");
  const double default_droop = 0.05 * static_cast<double>(gens.size());
  std::size_t n_agc = 0;
  for (const auto& g : gens)
    if (!g.is_object() || !g.contains("in_agc") || (g["in_agc"].is_boolean() && g["in_agc"].get<bool>())) ++n_agc;

  for (std::size_t i = 0; i < gens.size(); ++i) {
    const std::string gw = f.path("generators") + "[" + std::to_string(i) + "]";
    const Fields gf(gens[i], gw, {"droop_r", "turbine_tc", "base_setpoint", "lower", "upper", "participation", "in_agc"});
    GeneratorSpec g;
    g.droop_r = gf.num("droop_r", default_droop);
    g.turbine_tc = gf.num("turbine_tc", 0.5);
    g.base_setpoint = gf.num("base_setpoint", 0.0);
    g.in_agc = gf.flag("in_agc", true);
    if (g.in_agc) {
      g.lower = gf.num("lower");
      g.upper = gf.num("upper");
      g.participation = gf.num("participation", 1.0 / static_cast<double>(n_agc));
    } else {
      g.lower = gf.num("lower", g.base_setpoint);
      g.upper = gf.num("upper", g.base_setpoint);
      g.participation = gf.num("participation", 0.0);
    }
    a.generators.push_back(g);
  }
  return a;
}

}  // namespace detail

/// Parses and validates a config document. Schema problems throw
/// Errc::schema; model-level violations keep their own codes.
inline ConfigDoc parse_config(const Json& root) {
  using detail::Fields;
  const Fields top(root, "config", {"areas", "ties", "schedules", "sim", "studies"});
  ConfigDoc doc;

  const auto& areas = top.at("areas");
  if (!areas.is_array() || areas.empty()) detail::schema_fail("config.areas", "expected a non-empty array");
  for (std::size_t k = 0; k < areas.size(); ++k)
    doc.net.areas.push_back(detail::parse_area(areas[k], "config.areas[" + std::to_string(k) + "]"));
  const std::size_t n = doc.net.areas.size();

  if (top.has("ties")) {
    const auto& ties = top.at("ties");
    if (!ties.is_array()) detail::schema_fail("config.ties", "expected an array");
    for (std::size_t t = 0; t < ties.size(); ++t) {
      const Fields tf(ties[t], "config.ties[" + std::to_string(t) + "]", {"from", "to", "stiffness"});
      TieLine line;
      line.from_area = detail::area_ref(tf, "from", n);
      line.to_area = detail::area_ref(tf, "to", n);
      line.stiffness_t = tf.num("stiffness");
      doc.net.ties.push_back(line);
    }
  }
  doc.net.merge_parallel_ties();

  doc.net.sched_ni.assign(n, 0.0);
  if (top.has("schedules")) {
    const Fields sf(top.at("schedules"), "config.schedules", {"net_interchange", "frequency"});
    if (sf.has("net_interchange")) doc.net.sched_ni = sf.vec("net_interchange");
    if (sf.has("frequency")) {
      const Vec f = sf.vec("frequency");
      if (f.size() != n) detail::schema_fail("config.schedules.frequency", "expected one entry per area");
      for (std::size_t k = 0; k < n; ++k) doc.net.areas[k].sched_freq = f[k];
    }
  }

  if (top.has("sim")) {
    const Fields sf(top.at("sim"), "config.sim", {"dt", "horizon", "record_stride", "seed", "meas_filter_tc", "reduced_dt"});
    doc.sim.dt = sf.num("dt", doc.sim.dt);
    doc.sim.horizon = sf.num("horizon", doc.sim.horizon);
    doc.sim.record_stride = sf.count("record_stride", doc.sim.record_stride);
    doc.sim.seed = sf.count("seed", 0);
    doc.net.meas_filter_tc = sf.num("meas_filter_tc", 1.0);
    if (sf.has("reduced_dt")) doc.reduced_dt = sf.num("reduced_dt");
  }

  if (top.has("studies")) {
    const Fields st(top.at("studies"), "config.studies", {"taus", "kappas", "bode"});
    if (st.has("taus")) doc.studies.taus = st.vec("taus");
    if (st.has("kappas")) doc.studies.kappas = st.vec("kappas");
    if (st.has("bode")) {
      const Fields bf(st.at("bode"), "config.studies.bode", {"area", "cross", "omega_min", "omega_max", "points_per_decade"});
      auto& b = doc.studies.bode;
      b.area = bf.has("area") ? detail::area_ref(bf, "area", n) : 0;
      b.cross = bf.has("cross") ? detail::area_ref(bf, "cross", n) : b.area;
      b.omega_min = bf.num("omega_min", b.omega_min);
      b.omega_max = bf.num("omega_max", b.omega_max);
      b.points_per_decade = bf.count("points_per_decade", b.points_per_decade);
      if (b.omega_min < 0.0 || b.omega_max < 0.0 || (b.omega_max > 0.0 && b.omega_max <= b.omega_min) || b.points_per_decade == 0)
        detail::schema_fail("config.studies.bode", "need 0 <= omega_min < omega_max and points_per_decade > 0");
    }
  }
  for (double t : doc.studies.taus)
    if (!(t > 0.0)) detail::schema_fail("config.studies.taus", "time constants must be positive");
  for (double k : doc.studies.kappas)
    if (!(k > 0.0)) detail::schema_fail("config.studies.kappas", "kappa must be positive");

  doc.net.validate();
  doc.sim.validate(doc.net);
  if (doc.reduced_dt && !(*doc.reduced_dt > 0.0)) detail::schema_fail("config.sim.reduced_dt", "must be positive");
  return doc;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::invalid_input, "cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(Errc::schema, path + ": " + e.what());
  }
}

inline ConfigDoc load_config(const std::string& path) { return parse_config(read_json_file(path)); }

/// Writes every field explicitly, so parse(to_json(doc)) == doc.
inline Json to_json(const ConfigDoc& doc) {
  Json root;
  Json areas = Json::array();
  Vec freqs;
  for (const auto& a : doc.net.areas) {
    Json gens = Json::array();
    for (const auto& g : a.generators)
      gens.push_back({{"droop_r", g.droop_r},
                      {"turbine_tc", g.turbine_tc},
                      {"base_setpoint", g.base_setpoint},
                      {"lower", g.lower},
                      {"upper", g.upper},
                      {"participation", g.participation},
                      {"in_agc", g.in_agc}});
    areas.push_back({{"inertia_m", a.inertia_m},
                     {"load_damping", a.load_damping},
                     {"bias_b", a.bias_b},
                     {"agc_tc", a.agc_tc},
                     {"load_dev", a.load_dev},
                     {"generators", gens}});
    freqs.push_back(a.sched_freq);
  }
  root["areas"] = areas;
  Json ties = Json::array();
  for (const auto& t : doc.net.ties) ties.push_back({{"from", t.from_area + 1}, {"to", t.to_area + 1}, {"stiffness", t.stiffness_t}});
  root["ties"] = ties;
  root["schedules"] = {{"net_interchange", doc.net.sched_ni}, {"frequency", freqs}};
  Json sim = {{"dt", doc.sim.dt},
              {"horizon", doc.sim.horizon},
              {"record_stride", doc.sim.record_stride},
              {"seed", doc.sim.seed},
              {"meas_filter_tc", doc.net.meas_filter_tc}};
  if (doc.reduced_dt) sim["reduced_dt"] = *doc.reduced_dt;
  root["sim"] = sim;
  const auto& b = doc.studies.bode;
  root["studies"] = {{"taus", doc.studies.taus},
                     {"kappas", doc.studies.kappas},
                     {"bode",
                      {{"area", b.area + 1},
                       {"cross", b.cross + 1},
                       {"omega_min", b.omega_min},
                       {"omega_max", b.omega_max},
                       {"points_per_decade", b.points_per_decade}}}};
  return root;
}

// ---------------------------------------------------------------------------
// Matrix inputs for check / perturb / svd-cond

/// {"delta": [...], "x": [...], "y": [...]}
inline Rank1System parse_rank1(const Json& j) {
  const detail::Fields f(j, "rank1", {"delta", "x", "y"});
  Rank1System sys{f.vec("delta"), f.vec("x"), f.vec("y")};
  sys.validate();
  return sys;
}

struct SigmaGrid {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t steps = 41;
};

struct PerturbDoc {
  PerturbedSystem psys;
  std::optional<SigmaGrid> grid;  // default: symmetric, ±2 σ_max
};

/// Rank-1 fields plus "E" (rows) and optional "sigma": {"min","max","steps"}.
inline PerturbDoc parse_perturb(const Json& j) {
  const detail::Fields f(j, "perturb", {"delta", "x", "y", "E", "sigma"});
  PerturbDoc doc;
  doc.psys.base = Rank1System{f.vec("delta"), f.vec("x"), f.vec("y")};
  doc.psys.base.validate();
  doc.psys.e_matrix = f.mat("E");
  const std::size_t n = doc.psys.base.size();
  if (doc.psys.e_matrix.rows() != n || doc.psys.e_matrix.cols() != n)
    throw Error(Errc::dimension_mismatch, "E must be " + std::to_string(n) + "x" + std::to_string(n));
  if (f.has("sigma")) {
    const detail::Fields sf(f.at("sigma"), "perturb.sigma", {"min", "max", "steps"});
    SigmaGrid g{sf.num("min"), sf.num("max"), sf.count("steps", 41)};
    if (!(g.hi > g.lo) || g.steps < 2) detail::schema_fail("perturb.sigma", "need min < max and steps >= 2");
    doc.grid = g;
  }
  return doc;
}

struct SvdDoc {
  Vec delta;
  Mat s;
};

/// {"delta": [...], "S": [[...], ...]}
inline SvdDoc parse_svd_doc(const Json& j) {
  const detail::Fields f(j, "svd", {"delta", "S"});
  SvdDoc doc{f.vec("delta"), f.mat("S")};
  if (doc.s.rows() != doc.s.cols() || doc.s.rows() != doc.delta.size())
    throw Error(Errc::dimension_mismatch, "S must be square and match delta");
  for (double d : doc.delta)
    if (!(d > 0.0)) throw Error(Errc::invalid_input, "delta entries must be positive");
  return doc;
}

}  // namespace rank1
