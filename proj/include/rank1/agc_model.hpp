#pragma once

/**
 * @file agc_model.hpp
 * @brief Multi-area frequency-response plant with decentralized AGC.
 *
 * Per area k (deviations from schedule, per-unit on a common base, Hz):
 *
 *   Mₖ dΔfₖ/dt    = Σᵢ pₖᵢ − DₖΔfₖ − ΔNIₖ − ΔPᴸₖ
 *   Tₖᵢ dpₖᵢ/dt   = −pₖᵢ + (uₖᵢ − u*ₖᵢ) − Δfₖ/Rₖᵢ
 *   dθₖ/dt        = 2π(Δfₖ − Δf₁)          (area 1 is the angle reference)
 *   ΔNIₖ          = Σⱼ Tₖⱼ(θₖ − θⱼ)
 *   T_m dmfₖ/dt   = Δfₖ − mfₖ,   T_m dmnₖ/dt = ΔNIₖ − mnₖ
 *
 * and the controller τₖ dηₖ/dt = −ACEₖ, ACEₖ = mnₖ + bₖ mfₖ, with unit
 * setpoints uₖᵢ = sat(u*ₖᵢ + αₖᵢηₖ).
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rank1/error.hpp"
#include "rank1/numerics.hpp"

namespace rank1 {

struct GeneratorSpec {
  double droop_r = 1.0;     // pu-Hz per pu-MW
  double turbine_tc = 0.5;  // s
  double base_setpoint = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double participation = 0.0;
  bool in_agc = false;

  friend bool operator==(const GeneratorSpec&, const GeneratorSpec&) = default;
};

struct AreaSpec {
  double inertia_m = 10.0;
  double load_damping = 1.0;
  std::vector<GeneratorSpec> generators;
  double bias_b = 1.0;
  double agc_tc = 100.0;
  double sched_freq = 60.0;
  double load_dev = 0.0;

  friend bool operator==(const AreaSpec&, const AreaSpec&) = default;

  /// Frequency characteristic βₖ = Dₖ + Σᵢ 1/Rₖᵢ.
  [[nodiscard]] double beta() const {
    double b = load_damping;
    for (const auto& g : generators) b += 1.0 / g.droop_r;
    return b;
  }
};

struct TieLine {
  std::size_t from_area = 0;
  std::size_t to_area = 0;
  double stiffness_t = 1.0;  // pu per rad

  friend bool operator==(const TieLine&, const TieLine&) = default;
};

struct NetworkSpec {
  std::vector<AreaSpec> areas;
  std::vector<TieLine> ties;
  Vec sched_ni;
  double meas_filter_tc = 1.0;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;

  [[nodiscard]] std::size_t area_count() const noexcept { return areas.size(); }

  [[nodiscard]] std::size_t generator_count() const noexcept {
    std::size_t n = 0;
    for (const auto& a : areas) n += a.generators.size();
    return n;
  }

  /// Offset of area k's first generator in flat per-generator vectors.
  [[nodiscard]] std::size_t generator_offset(std::size_t k) const {
    std::size_t off = 0;
    for (std::size_t j = 0; j < k; ++j) off += areas[j].generators.size();
    return off;
  }

  [[nodiscard]] Vec beta_k() const {
    Vec b(areas.size());
    for (std::size_t k = 0; k < areas.size(); ++k) b[k] = areas[k].beta();
    return b;
  }

  [[nodiscard]] Vec load_dev() const {
    Vec d(areas.size());
    for (std::size_t k = 0; k < areas.size(); ++k) d[k] = areas[k].load_dev;
    return d;
  }

  [[nodiscard]] Vec base_setpoints() const {
    Vec u;
    u.reserve(generator_count());
    for (const auto& a : areas)
      for (const auto& g : a.generators) u.push_back(g.base_setpoint);
    return u;
  }

  /// Merges parallel lines (stiffness adds) and orients each pair from < to.
  void merge_parallel_ties() {
    std::vector<TieLine> merged;
    for (auto t : ties) {
      if (t.from_area > t.to_area) std::swap(t.from_area, t.to_area);
      auto it = std::find_if(merged.begin(), merged.end(), [&](const TieLine& m) {
        return m.from_area == t.from_area && m.to_area == t.to_area;
      });
      if (it == merged.end()) merged.push_back(t);
      else it->stiffness_t += t.stiffness_t;
    }
    ties = std::move(merged);
  }

  [[nodiscard]] bool connected() const {
    const std::size_t n = areas.size();
    if (n == 0) return false;
    std::vector<bool> seen(n, false);
    std::vector<std::size_t> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
      const auto k = stack.back();
      stack.pop_back();
      for (const auto& t : ties) {
        std::size_t other = n;
        if (t.from_area == k) other = t.to_area;
        else if (t.to_area == k) other = t.from_area;
        if (other < n && !seen[other]) {
          seen[other] = true;
          stack.push_back(other);
        }
      }
    }
    return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
  }

  void validate() const {
    auto fail = [](const std::string& m) { throw Error(Errc::invalid_input, m); };
    if (areas.empty()) fail("network needs at least one area");
    if (sched_ni.size() != areas.size()) throw Error(Errc::dimension_mismatch, "schedules must list one net interchange per area");
    if (!(meas_filter_tc > 0.0)) fail("meas_filter_tc must be positive");
    double ni_sum = 0.0;
    double ni_scale = 1.0;
    for (double v : sched_ni) {
      ni_sum += v;
      ni_scale = std::max(ni_scale, std::abs(v));
    }
    if (std::abs(ni_sum) > 1e-9 * ni_scale) fail("scheduled net interchanges must sum to zero");

    for (std::size_t k = 0; k < areas.size(); ++k) {
      const auto& a = areas[k];
      const std::string where = "area " + std::to_string(k + 1) + ": ";
      if (!(a.inertia_m > 0.0)) fail(where + "inertia_m must be positive");
      if (!(a.load_damping > 0.0)) fail(where + "load_damping must be positive");
      if (!(a.bias_b > 0.0)) fail(where + "bias_b must be positive");
      if (!(a.agc_tc > 0.0)) fail(where + "agc_tc must be positive");
      if (!std::isfinite(a.load_dev) || !std::isfinite(a.sched_freq)) fail(where + "non-finite schedule or load");
      if (a.generators.empty()) fail(where + "needs at least one generator");
      double alpha_sum = 0.0;
      bool any_agc = false;
      for (std::size_t i = 0; i < a.generators.size(); ++i) {
        const auto& g = a.generators[i];
        const std::string gw = where + "generator " + std::to_string(i + 1) + ": ";
        if (!(g.droop_r > 0.0)) fail(gw + "droop_r must be positive");
        if (!(g.turbine_tc > 0.0)) fail(gw + "turbine_tc must be positive");
        if (!(g.lower <= g.base_setpoint && g.base_setpoint <= g.upper)) fail(gw + "limits must bracket the base setpoint");
        if (g.participation < 0.0) fail(gw + "participation must be nonnegative");
        if (g.in_agc) {
          any_agc = true;
          alpha_sum += g.participation;
        } else if (g.lower != g.base_setpoint || g.upper != g.base_setpoint || g.participation != 0.0) {
          fail(gw + "units outside AGC need lower = base = upper and zero participation");
        }
      }
      if (!any_agc || std::abs(alpha_sum - 1.0) > 1e-9) fail(where + "AGC participations must sum to one");
    }
    for (const auto& t : ties) {
      if (t.from_area >= areas.size() || t.to_area >= areas.size()) fail("tie line references an unknown area");
      if (t.from_area == t.to_area) fail("tie line must join two different areas");
      if (!(t.stiffness_t > 0.0)) fail("tie line stiffness must be positive");
    }
    if (!connected()) throw Error(Errc::singular_network, "tie-line graph is not connected");
  }

  /// Shortest and longest plant time constants (turbines, filters, Mₖ/βₖ).
  [[nodiscard]] std::pair<double, double> plant_time_constant_range() const {
    double lo = meas_filter_tc;
    double hi = meas_filter_tc;
    for (const auto& a : areas) {
      const double swing = a.inertia_m / a.beta();
      lo = std::min(lo, swing);
      hi = std::max(hi, swing);
      for (const auto& g : a.generators) {
        lo = std::min(lo, g.turbine_tc);
        hi = std::max(hi, g.turbine_tc);
      }
    }
    return {lo, hi};
  }
};

// ---------------------------------------------------------------------------
// State

struct PlantState {
  Vec freq_dev;    // Δfₖ, Hz
  Vec angle;       // θₖ − θ₁, rad; angle[0] == 0
  Vec mech_power;  // pₖᵢ deviation from u*ₖᵢ, flat over generators
  Vec meas_freq;   // filtered Δf
  Vec meas_ni;     // filtered ΔNI
  Vec eta;         // AGC integrator states

  static PlantState zeros(const NetworkSpec& net) {
    const std::size_t n = net.area_count();
    return {Vec(n, 0.0), Vec(n, 0.0), Vec(net.generator_count(), 0.0), Vec(n, 0.0), Vec(n, 0.0), Vec(n, 0.0)};
  }

  [[nodiscard]] Vec pack() const {
    Vec v;
    v.reserve(freq_dev.size() * 5 + mech_power.size());
    for (const Vec* part : {&freq_dev, &angle, &mech_power, &meas_freq, &meas_ni, &eta})
      v.insert(v.end(), part->begin(), part->end());
    return v;
  }

  static PlantState unpack(const NetworkSpec& net, std::span<const double> v) {
    auto s = zeros(net);
    std::size_t at = 0;
    for (Vec* part : {&s.freq_dev, &s.angle, &s.mech_power, &s.meas_freq, &s.meas_ni, &s.eta}) {
      if (at + part->size() > v.size()) throw Error(Errc::dimension_mismatch, "packed state too short");
      std::copy(v.begin() + static_cast<std::ptrdiff_t>(at), v.begin() + static_cast<std::ptrdiff_t>(at + part->size()), part->begin());
      at += part->size();
    }
    if (at != v.size()) throw Error(Errc::dimension_mismatch, "packed state too long");
    return s;
  }

  void check_dims(const NetworkSpec& net) const {
    const std::size_t n = net.area_count();
    if (freq_dev.size() != n || angle.size() != n || meas_freq.size() != n || meas_ni.size() != n || eta.size() != n ||
        mech_power.size() != net.generator_count())
      throw Error(Errc::dimension_mismatch, "plant state does not match network");
  }
};

/// Net interchange deviations from relative angles; pairwise antisymmetric.
inline Vec net_interchange(const NetworkSpec& net, std::span<const double> angle) {
  Vec ni(net.area_count(), 0.0);
  for (const auto& t : net.ties) {
    const double flow = t.stiffness_t * (angle[t.from_area] - angle[t.to_area]);
    ni[t.from_area] += flow;
    ni[t.to_area] -= flow;
  }
  return ni;
}

/// Plant derivative for fixed setpoints `u` (absolute, flat over generators).
/// The eta component of the result is zero; see `agc_rhs`.
inline PlantState plant_rhs(const NetworkSpec& net, const PlantState& s, std::span<const double> u) {
  s.check_dims(net);
  if (u.size() != net.generator_count()) throw Error(Errc::dimension_mismatch, "setpoint vector");
  const std::size_t n = net.area_count();
  auto d = PlantState::zeros(net);
  const Vec ni = net_interchange(net, s.angle);
  std::size_t gi = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& area = net.areas[k];
    double mech = 0.0;
    for (const auto& g : area.generators) {
      const double p = s.mech_power[gi];
      mech += p;
      d.mech_power[gi] = (-p + (u[gi] - g.base_setpoint) - s.freq_dev[k] / g.droop_r) / g.turbine_tc;
      ++gi;
    }
    d.freq_dev[k] = (mech - area.load_damping * s.freq_dev[k] - ni[k] - area.load_dev) / area.inertia_m;
    d.angle[k] = k == 0 ? 0.0 : 2.0 * std::numbers::pi * (s.freq_dev[k] - s.freq_dev[0]);
    d.meas_freq[k] = (s.freq_dev[k] - s.meas_freq[k]) / net.meas_filter_tc;
    d.meas_ni[k] = (ni[k] - s.meas_ni[k]) / net.meas_filter_tc;
  }
  return d;
}

/// ACEₖ from deviations: ΔNIₖ + bₖΔfₖ.
inline Vec ace_deviation(const NetworkSpec& net, std::span<const double> dni, std::span<const double> df) {
  const std::size_t n = net.area_count();
  if (dni.size() != n || df.size() != n) throw Error(Errc::dimension_mismatch, "ace inputs");
  Vec a(n);
  for (std::size_t k = 0; k < n; ++k) a[k] = dni[k] + net.areas[k].bias_b * df[k];
  return a;
}

/// ACEₖ = (NIₖ − NI*ₖ) + bₖ(fₖ − f*ₖ) from absolute measurements.
inline Vec ace(const NetworkSpec& net, std::span<const double> meas_f, std::span<const double> meas_ni) {
  const std::size_t n = net.area_count();
  if (meas_f.size() != n || meas_ni.size() != n) throw Error(Errc::dimension_mismatch, "ace inputs");
  Vec df(n), dni(n);
  for (std::size_t k = 0; k < n; ++k) {
    df[k] = meas_f[k] - net.areas[k].sched_freq;
    dni[k] = meas_ni[k] - net.sched_ni[k];
  }
  return ace_deviation(net, dni, df);
}

inline Vec agc_rhs(const NetworkSpec& net, std::span<const double> eta, std::span<const double> ace_k) {
  const std::size_t n = net.area_count();
  if (eta.size() != n || ace_k.size() != n) throw Error(Errc::dimension_mismatch, "agc_rhs inputs");
  Vec d(n);
  for (std::size_t k = 0; k < n; ++k) d[k] = -ace_k[k] / net.areas[k].agc_tc;
  return d;
}

/// Saturated unit setpoints for one area; units outside AGC stay at u*.
inline Vec allocate(const AreaSpec& area, double eta_k) {
  Vec u(area.generators.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const auto& g = area.generators[i];
    u[i] = g.in_agc ? std::clamp(g.base_setpoint + g.participation * eta_k, g.lower, g.upper) : g.base_setpoint;
  }
  return u;
}

inline Vec allocate_all(const NetworkSpec& net, std::span<const double> eta) {
  if (eta.size() != net.area_count()) throw Error(Errc::dimension_mismatch, "allocate_all");
  Vec u;
  u.reserve(net.generator_count());
  for (std::size_t k = 0; k < net.area_count(); ++k) {
    const auto uk = allocate(net.areas[k], eta[k]);
    u.insert(u.end(), uk.begin(), uk.end());
  }
  return u;
}

/// Total setpoint change Δuₖ per area.
inline Vec area_setpoint_change(const NetworkSpec& net, std::span<const double> u) {
  if (u.size() != net.generator_count()) throw Error(Errc::dimension_mismatch, "setpoint vector");
  Vec du(net.area_count(), 0.0);
  std::size_t gi = 0;
  for (std::size_t k = 0; k < net.area_count(); ++k)
    for (const auto& g : net.areas[k].generators) du[k] += u[gi++] - g.base_setpoint;
  return du;
}

// ---------------------------------------------------------------------------
// Linear structure

namespace detail {

/// Indices of the packed state that evolve (skips the reference angle and eta).
inline std::vector<std::size_t> free_plant_indices(const NetworkSpec& net) {
  const std::size_t n = net.area_count();
  const std::size_t g = net.generator_count();
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < n; ++i) idx.push_back(i);               // freq_dev
  for (std::size_t i = 1; i < n; ++i) idx.push_back(n + i);           // angle (skip reference)
  for (std::size_t i = 0; i < g; ++i) idx.push_back(2 * n + i);       // mech_power
  for (std::size_t i = 0; i < 2 * n; ++i) idx.push_back(2 * n + g + i);  // filters
  return idx;
}

}  // namespace detail

/// State matrix of the plant alone (fixed u) in the free coordinates, plus
/// the affine term c(u) so that ẋ = A x + c.
inline std::pair<Mat, Vec> plant_linearization(const NetworkSpec& net, std::span<const double> u) {
  const auto idx = detail::free_plant_indices(net);
  const auto zero = PlantState::zeros(net);
  const Vec c_full = plant_rhs(net, zero, u).pack();
  Mat a(idx.size(), idx.size());
  Vec c(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) c[r] = c_full[idx[r]];
  for (std::size_t col = 0; col < idx.size(); ++col) {
    Vec x = zero.pack();
    x[idx[col]] = 1.0;
    const Vec f = plant_rhs(net, PlantState::unpack(net, x), u).pack();
    for (std::size_t r = 0; r < idx.size(); ++r) a(r, col) = f[idx[r]] - c_full[idx[r]];
  }
  return {std::move(a), std::move(c)};
}

inline Mat plant_state_matrix(const NetworkSpec& net) {
  return plant_linearization(net, net.base_setpoints()).first;
}

/**
 * Steady state of the plant for fixed setpoints, from the linear system
 * A x = −c(u). The returned state has eta = 0 and filters at their targets.
 */
inline PlantState plant_equilibrium(const NetworkSpec& net, std::span<const double> u) {
  if (!net.connected()) throw Error(Errc::singular_network, "tie-line graph is not connected");
  auto [a, c] = plant_linearization(net, u);
  for (auto& e : c) e = -e;
  Vec x;
  try {
    x = solve(a, c);
  } catch (const Error& e) {
    if (e.code() == Errc::singular) throw Error(Errc::singular_network, "plant steady-state system is singular");
    throw;
  }
  const auto idx = detail::free_plant_indices(net);
  Vec full = PlantState::zeros(net).pack();
  for (std::size_t r = 0; r < idx.size(); ++r) full[idx[r]] = x[r];
  return PlantState::unpack(net, full);
}

/// Per-area strict feasibility: ΔPᴸₖ inside the open AGC capacity interval.
inline std::vector<bool> check_feasibility(const NetworkSpec& net) {
  std::vector<bool> ok(net.area_count());
  for (std::size_t k = 0; k < net.area_count(); ++k) {
    double lo = 0.0, hi = 0.0;
    for (const auto& g : net.areas[k].generators)
      if (g.in_agc) {
        lo += g.lower - g.base_setpoint;
        hi += g.upper - g.base_setpoint;
      }
    const double load = net.areas[k].load_dev;
    ok[k] = lo < load && load < hi;
  }
  return ok;
}

}  // namespace rank1
