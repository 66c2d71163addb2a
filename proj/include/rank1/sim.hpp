#pragma once

/**
 * @file sim.hpp
 * @brief Fixed-step RK4 simulation of the closed loop and of the reduced model.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rank1/agc_model.hpp"
#include "rank1/agc_reduced.hpp"
#include "rank1/error.hpp"
#include "rank1/numerics.hpp"

namespace rank1 {

struct SimConfig {
  double dt = 0.01;
  double horizon = 1000.0;
  std::size_t record_stride = 1;
  unsigned long long seed = 0;

  friend bool operator==(const SimConfig&, const SimConfig&) = default;

  void validate() const {
    if (!(dt > 0.0) || !(horizon > 0.0)) throw Error(Errc::invalid_input, "dt and horizon must be positive");
    if (dt > horizon) throw Error(Errc::invalid_input, "dt exceeds horizon");
    if (record_stride == 0) throw Error(Errc::invalid_input, "record_stride must be positive");
  }

  /// Also requires dt <= 0.1 × the fastest plant time constant.
  void validate(const NetworkSpec& net) const {
    validate();
    const double fastest = net.plant_time_constant_range().first;
    if (dt > 0.1 * fastest)
      throw Error(Errc::invalid_input, "dt " + std::to_string(dt) + " exceeds 0.1 x fastest plant time constant " + std::to_string(fastest));
  }

  [[nodiscard]] std::size_t steps() const { return static_cast<std::size_t>(std::llround(horizon / dt)); }
};

/// Columnar time series on a uniform grid.
class SimTrace {
 public:
  Vec times;
  std::vector<std::string> warnings;

  std::size_t add_column(std::string name) {
    names_.push_back(std::move(name));
    columns_.emplace_back();
    return columns_.size() - 1;
  }

  [[nodiscard]] const std::vector<std::string>& names() const noexcept { return names_; }
  [[nodiscard]] std::size_t rows() const noexcept { return times.size(); }

  [[nodiscard]] bool has(std::string_view name) const {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
  }

  [[nodiscard]] const Vec& column(std::string_view name) const {
    const auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw Error(Errc::invalid_input, "no trace column '" + std::string(name) + "'");
    return columns_[static_cast<std::size_t>(it - names_.begin())];
  }

  [[nodiscard]] Vec& column(std::size_t idx) { return columns_.at(idx); }
  [[nodiscard]] const Vec& column(std::size_t idx) const { return columns_.at(idx); }

  /// Header "t,<names...>", one row per sample, 17 significant digits.
  void write_csv(std::ostream& os) const {
    os << 't';
    for (const auto& n : names_) os << ',' << n;
    os << '\n';
    std::ostringstream line;
    line << std::setprecision(17);
    for (std::size_t r = 0; r < times.size(); ++r) {
      line.str({});
      line << times[r];
      for (const auto& c : columns_) line << ',' << c[r];
      os << line.str() << '\n';
    }
  }

 private:
  std::vector<std::string> names_;
  std::vector<Vec> columns_;
};

/// One classic Runge–Kutta step of ẋ = f(x) (autonomous).
template <typename F>
void rk4_step(F&& f, Vec& x, double dt) {
  const std::size_t n = x.size();
  const Vec k1 = f(x);
  Vec tmp(n);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k1[i];
  const Vec k2 = f(tmp);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k2[i];
  const Vec k3 = f(tmp);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + dt * k3[i];
  const Vec k4 = f(tmp);
  for (std::size_t i = 0; i < n; ++i) x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

namespace detail {

inline void require_finite_state(const Vec& x, double t) {
  for (double v : x)
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << std::setprecision(17) << "state became non-finite at t = " << t << " s";
      throw Error(Errc::non_finite_state, os.str());
    }
}

}  // namespace detail

/// Closed-loop derivative (plant + AGC) on the packed state.
inline Vec closed_loop_rhs(const NetworkSpec& net, const Vec& packed) {
  const auto s = PlantState::unpack(net, packed);
  const Vec u = allocate_all(net, s.eta);
  auto d = plant_rhs(net, s, u);
  d.eta = agc_rhs(net, s.eta, ace_deviation(net, s.meas_ni, s.meas_freq));
  return d.pack();
}

/// Pre-disturbance equilibrium: plant at rest with u = u*, ΔPᴸ = 0, η = 0.
inline PlantState pre_disturbance_state(const NetworkSpec& net) {
  NetworkSpec calm = net;
  for (auto& a : calm.areas) a.load_dev = 0.0;
  return plant_equilibrium(calm, calm.base_setpoints());
}

/**
 * Integrates the full closed loop from `init`. Columns, 1-based area k and
 * unit i: df_k, dni_k, ace_k, eta_k, u_k_i, p_k_i. ACE is formed from the
 * filtered measurements, as the controller sees it.
 */
inline SimTrace run_full(const NetworkSpec& net, const SimConfig& cfg, const PlantState& init) {
  net.validate();
  cfg.validate(net);
  init.check_dims(net);
  const std::size_t n = net.area_count();
  const std::size_t g = net.generator_count();

  SimTrace tr;
  const auto feas = check_feasibility(net);
  for (std::size_t k = 0; k < n; ++k)
    if (!feas[k]) tr.warnings.push_back("area " + std::to_string(k + 1) + ": load deviation outside AGC capacity; running saturated");

  std::vector<std::size_t> c_df, c_dni, c_ace, c_eta, c_u, c_p;
  for (std::size_t k = 0; k < n; ++k) c_df.push_back(tr.add_column("df_" + std::to_string(k + 1)));
  for (std::size_t k = 0; k < n; ++k) c_dni.push_back(tr.add_column("dni_" + std::to_string(k + 1)));
  for (std::size_t k = 0; k < n; ++k) c_ace.push_back(tr.add_column("ace_" + std::to_string(k + 1)));
  for (std::size_t k = 0; k < n; ++k) c_eta.push_back(tr.add_column("eta_" + std::to_string(k + 1)));
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < net.areas[k].generators.size(); ++i)
      c_u.push_back(tr.add_column("u_" + std::to_string(k + 1) + "_" + std::to_string(i + 1)));
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < net.areas[k].generators.size(); ++i)
      c_p.push_back(tr.add_column("p_" + std::to_string(k + 1) + "_" + std::to_string(i + 1)));

  auto record = [&](double t, const Vec& x) {
    const auto s = PlantState::unpack(net, x);
    const Vec ni = net_interchange(net, s.angle);
    const Vec a = ace_deviation(net, s.meas_ni, s.meas_freq);
    const Vec u = allocate_all(net, s.eta);
    tr.times.push_back(t);
    for (std::size_t k = 0; k < n; ++k) {
      tr.column(c_df[k]).push_back(s.freq_dev[k]);
      tr.column(c_dni[k]).push_back(ni[k]);
      tr.column(c_ace[k]).push_back(a[k]);
      tr.column(c_eta[k]).push_back(s.eta[k]);
    }
    for (std::size_t i = 0; i < g; ++i) {
      tr.column(c_u[i]).push_back(u[i]);
      tr.column(c_p[i]).push_back(s.mech_power[i]);
    }
  };

  Vec x = init.pack();
  auto f = [&](const Vec& v) { return closed_loop_rhs(net, v); };
  const std::size_t steps = cfg.steps();
  record(0.0, x);
  for (std::size_t k = 1; k <= steps; ++k) {
    rk4_step(f, x, cfg.dt);
    const double t = static_cast<double>(k) * cfg.dt;
    detail::require_finite_state(x, t);
    if (k % cfg.record_stride == 0) record(t, x);
  }
  return tr;
}

/// Default reduced step: 0.1·min τ̃ in slow time, returned in seconds.
inline double default_reduced_dt(const ReducedModel& model) {
  return 0.1 * model.tau_scale * *std::min_element(model.tau_tilde.begin(), model.tau_tilde.end());
}

/**
 * Integrates the reduced model in physical time (dη/dt = (1/τ)·dη/dℓ).
 * Columns: eta_k, phi_k, ace_k (quasi-steady ACE).
 */
inline SimTrace run_reduced(const ReducedModel& model, const SimConfig& cfg, std::span<const double> eta0) {
  cfg.validate();
  const std::size_t n = model.size();
  if (eta0.size() != n) throw Error(Errc::dimension_mismatch, "eta0");
  SimTrace tr;
  std::vector<std::size_t> c_eta, c_phi, c_ace;
  for (std::size_t k = 0; k < n; ++k) c_eta.push_back(tr.add_column("eta_" + std::to_string(k + 1)));
  for (std::size_t k = 0; k < n; ++k) c_phi.push_back(tr.add_column("phi_" + std::to_string(k + 1)));
  for (std::size_t k = 0; k < n; ++k) c_ace.push_back(tr.add_column("ace_" + std::to_string(k + 1)));

  auto record = [&](double t, const Vec& eta) {
    tr.times.push_back(t);
    const Vec a = reduced_ace(model, eta);
    for (std::size_t k = 0; k < n; ++k) {
      tr.column(c_eta[k]).push_back(eta[k]);
      tr.column(c_phi[k]).push_back(model.phi[k](eta[k]));
      tr.column(c_ace[k]).push_back(a[k]);
    }
  };

  Vec x(eta0.begin(), eta0.end());
  const double inv_tau = 1.0 / model.tau_scale;
  auto f = [&](const Vec& eta) {
    Vec d = reduced_rhs(model, eta);
    for (auto& v : d) v *= inv_tau;
    return d;
  };
  const std::size_t steps = cfg.steps();
  record(0.0, x);
  for (std::size_t k = 1; k <= steps; ++k) {
    rk4_step(f, x, cfg.dt);
    const double t = static_cast<double>(k) * cfg.dt;
    detail::require_finite_state(x, t);
    if (k % cfg.record_stride == 0) record(t, x);
  }
  return tr;
}

struct TraceGap {
  std::string column;
  double sup_gap = 0.0;
  double l2_gap = 0.0;  // sqrt(∫(a − b)² dt), trapezoidal
};

namespace detail {

inline double interp(const Vec& t, const Vec& y, double at) {
  const auto it = std::lower_bound(t.begin(), t.end(), at);
  if (it == t.begin()) return y.front();
  if (it == t.end()) return y.back();
  const auto hi = static_cast<std::size_t>(it - t.begin());
  const auto lo = hi - 1;
  if (t[hi] == at) return y[hi];
  const double w = (at - t[lo]) / (t[hi] - t[lo]);
  return y[lo] + w * (y[hi] - y[lo]);
}

}  // namespace detail

/**
 * Per-column gaps between two traces over their common time window (from
 * `t_min` on). Samples of `a` inside the window are the evaluation grid; `b`
 * is linearly interpolated when its grid differs.
 */
inline std::vector<TraceGap> compare_traces(const SimTrace& a, const SimTrace& b, const std::vector<std::string>& columns,
                                            double t_min = -std::numeric_limits<double>::infinity()) {
  if (a.times.empty() || b.times.empty()) throw Error(Errc::empty_overlap, "empty trace");
  const double lo = std::max({a.times.front(), b.times.front(), t_min});
  const double hi = std::min(a.times.back(), b.times.back());
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < a.times.size(); ++r)
    if (a.times[r] >= lo && a.times[r] <= hi) rows.push_back(r);
  if (rows.empty()) throw Error(Errc::empty_overlap, "traces share no time window");
  const bool same_grid = a.times == b.times;

  std::vector<TraceGap> out;
  for (const auto& name : columns) {
    const Vec& ya = a.column(name);
    const Vec& yb = b.column(name);
    TraceGap gap{name, 0.0, 0.0};
    double prev_t = 0.0, prev_sq = 0.0;
    for (std::size_t idx = 0; idx < rows.size(); ++idx) {
      const std::size_t r = rows[idx];
      const double vb = same_grid ? yb[r] : detail::interp(b.times, yb, a.times[r]);
      const double diff = ya[r] - vb;
      gap.sup_gap = std::max(gap.sup_gap, std::abs(diff));
      const double sq = diff * diff;
      if (idx > 0) gap.l2_gap += 0.5 * (a.times[r] - prev_t) * (sq + prev_sq);
      prev_t = a.times[r];
      prev_sq = sq;
    }
    gap.l2_gap = std::sqrt(gap.l2_gap);
    out.push_back(std::move(gap));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Two-time-scale comparison

struct TimeScalePoint {
  double tau = 0.0;
  double sup_gap = 0.0;  // max over areas of sup |η_full − η_reduced| after burn-in
  double final_abs_ace = 0.0;
};

/**
 * For each τ, sets every area's AGC time constant to τ, runs the full loop
 * from the pre-disturbance state and the reduced model from η = 0, and
 * records the η gap after `burn_in` seconds.
 */
inline std::vector<TimeScalePoint> time_scale_study(const NetworkSpec& net, std::span<const double> taus, double dt,
                                                    double horizon_per_tau, double burn_in) {
  std::vector<TimeScalePoint> out;
  for (double tau : taus) {
    NetworkSpec scaled = net;
    for (auto& a : scaled.areas) a.agc_tc = tau;
    SimConfig cfg{dt, horizon_per_tau * tau, 1, 0};
    const auto full = run_full(scaled, cfg, pre_disturbance_state(scaled));
    const auto model = build_reduced(scaled);
    const auto red = run_reduced(model, cfg, Vec(model.size(), 0.0));
    std::vector<std::string> cols;
    for (std::size_t k = 0; k < model.size(); ++k) cols.push_back("eta_" + std::to_string(k + 1));
    TimeScalePoint p{tau, 0.0, 0.0};
    for (const auto& g : compare_traces(full, red, cols, burn_in)) p.sup_gap = std::max(p.sup_gap, g.sup_gap);
    for (std::size_t k = 0; k < model.size(); ++k)
      p.final_abs_ace = std::max(p.final_abs_ace, std::abs(full.column("ace_" + std::to_string(k + 1)).back()));
    out.push_back(p);
  }
  return out;
}

}  // namespace rank1
