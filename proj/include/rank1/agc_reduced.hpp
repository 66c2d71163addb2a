#pragma once

/**
 * @file agc_reduced.hpp
 * @brief Slow time-scale AGC dynamics and bias-tuning analytics.
 *
 * Once the plant has settled, the AGC states obey
 *
 *     τ̃ η̇ = 𝓑 (φ(η) − ΔPᴸ),   𝓑 = −I + (1/β)(β̄ − b)1ᵀ,
 *
 * in slow time ℓ = t/τ with τ = minₖ τₖ and τ̃ₖ = τₖ/τ. φₖ is the saturated
 * total setpoint change of area k, piecewise linear and nondecreasing.
 * 𝓑 is a rank-1 system with Δ = I, x = (β̄ − b)/β, y = 1, so it is
 * diagonally stable for every positive bias.
 */

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rank1/agc_model.hpp"
#include "rank1/diagstab.hpp"
#include "rank1/error.hpp"
#include "rank1/numerics.hpp"

namespace rank1 {

/// One AGC unit's contribution clamp(α η, lo, hi), offsets relative to u*.
struct PhiUnit {
  double alpha = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

/// φₖ(η) = Σᵢ clamp(αᵢη, loᵢ, hiᵢ).
struct PhiMap {
  std::vector<PhiUnit> units;

  [[nodiscard]] double operator()(double eta) const {
    double s = 0.0;
    for (const auto& u : units) s += std::clamp(u.alpha * eta, u.lo, u.hi);
    return s;
  }

  /// Image of φ: [Σ lo, Σ hi] over moving units.
  [[nodiscard]] std::pair<double, double> capacity() const {
    double lo = 0.0, hi = 0.0;
    for (const auto& u : units)
      if (u.alpha > 0.0) {
        lo += u.lo;
        hi += u.hi;
      }
    return {lo, hi};
  }

  /// Open interval on which φ is strictly increasing.
  [[nodiscard]] std::pair<double, double> preimage() const {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& u : units)
      if (u.alpha > 0.0) {
        lo = std::min(lo, u.lo / u.alpha);
        hi = std::max(hi, u.hi / u.alpha);
      }
    return {lo, hi};
  }

  [[nodiscard]] std::vector<double> breakpoints() const {
    std::vector<double> b;
    for (const auto& u : units)
      if (u.alpha > 0.0) {
        b.push_back(u.lo / u.alpha);
        b.push_back(u.hi / u.alpha);
      }
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    return b;
  }

  /// ∫ₐᵇ (φ(ξ) − level) dξ, exact: φ is linear between breakpoints.
  [[nodiscard]] double integral(double a, double b, double level) const {
    if (a == b) return 0.0;
    const double sign = a < b ? 1.0 : -1.0;
    const double lo = std::min(a, b), hi = std::max(a, b);
    double total = 0.0;
    double left = lo;
    auto piece = [&](double l, double r) { total += 0.5 * (r - l) * (((*this)(l) - level) + ((*this)(r) - level)); };
    for (double bp : breakpoints()) {
      if (bp <= left) continue;
      if (bp >= hi) break;
      piece(left, bp);
      left = bp;
    }
    piece(left, hi);
    return sign * total;
  }
};

struct ReducedModel {
  Vec beta_k;
  double beta = 0.0;
  Vec bias_b;
  Vec tau_tilde;
  double tau_scale = 1.0;  // τ = minₖ τₖ, seconds
  Mat b_matrix;
  std::vector<PhiMap> phi;
  Vec load_dev;

  [[nodiscard]] std::size_t size() const noexcept { return beta_k.size(); }

  /// x = (β̄ − b)/β of the rank-1 factorization of 𝓑.
  [[nodiscard]] Vec coupling() const {
    Vec x(size());
    for (std::size_t k = 0; k < size(); ++k) x[k] = (beta_k[k] - bias_b[k]) / beta;
    return x;
  }

  [[nodiscard]] Vec phi_vec(std::span<const double> eta) const {
    Vec v(size());
    for (std::size_t k = 0; k < size(); ++k) v[k] = phi[k](eta[k]);
    return v;
  }
};

/// 𝓑 = −I + (1/β)(β̄ − b)1ᵀ.
inline Mat reduced_b_matrix(std::span<const double> beta_k, std::span<const double> bias_b) {
  if (beta_k.size() != bias_b.size() || beta_k.empty()) throw Error(Errc::dimension_mismatch, "beta and bias lengths");
  double beta = 0.0;
  for (double b : beta_k) beta += b;
  const std::size_t n = beta_k.size();
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = (beta_k[i] - bias_b[i]) / beta;
    for (std::size_t j = 0; j < n; ++j) m(i, j) = xi;
    m(i, i) -= 1.0;
  }
  return m;
}

/**
 * Builds a reduced model from raw parameters. `tau` holds the physical
 * integral time constants τₖ in seconds; normalization uses τ = min τₖ.
 */
inline ReducedModel make_reduced(Vec beta_k, Vec bias_b, std::span<const double> tau, std::vector<PhiMap> phi, Vec load_dev) {
  const std::size_t n = beta_k.size();
  if (n == 0 || bias_b.size() != n || tau.size() != n || phi.size() != n || load_dev.size() != n)
    throw Error(Errc::dimension_mismatch, "reduced model parameters");
  for (std::size_t k = 0; k < n; ++k)
    if (!(beta_k[k] > 0.0) || !(bias_b[k] > 0.0) || !(tau[k] > 0.0))
      throw Error(Errc::invalid_input, "beta, bias and tau must be positive");
  ReducedModel m;
  m.tau_scale = *std::min_element(tau.begin(), tau.end());
  m.tau_tilde.resize(n);
  for (std::size_t k = 0; k < n; ++k) m.tau_tilde[k] = tau[k] / m.tau_scale;
  m.b_matrix = reduced_b_matrix(beta_k, bias_b);
  for (double b : beta_k) m.beta += b;
  m.beta_k = std::move(beta_k);
  m.bias_b = std::move(bias_b);
  m.phi = std::move(phi);
  m.load_dev = std::move(load_dev);
  return m;
}

/// Unsaturated φₖ(η) = η (one unit, α = 1, unbounded limits).
inline PhiMap linear_phi() {
  return PhiMap{{PhiUnit{1.0, -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()}}};
}

inline ReducedModel build_reduced(const NetworkSpec& net) {
  net.validate();
  const std::size_t n = net.area_count();
  Vec bias(n), tau(n);
  std::vector<PhiMap> phi(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& a = net.areas[k];
    bias[k] = a.bias_b;
    tau[k] = a.agc_tc;
    for (const auto& g : a.generators)
      if (g.in_agc) phi[k].units.push_back({g.participation, g.lower - g.base_setpoint, g.upper - g.base_setpoint});
  }
  return make_reduced(net.beta_k(), std::move(bias), tau, std::move(phi), net.load_dev());
}

// ---------------------------------------------------------------------------
// Stability and certificates

inline Rank1System reduced_rank1(const ReducedModel& model) {
  return Rank1System{Vec(model.size(), 1.0), model.coupling(), Vec(model.size(), 1.0)};
}

/// Verdict for 𝓑 through the rank-1 test; certificate attached when every
/// bₖ ≠ βₖ (otherwise see `lyapunov_weights`).
inline DiagStabReport reduced_is_stable(const ReducedModel& model) {
  const auto sys = reduced_rank1(model);
  auto rep = check_rank1(sys);
  const auto x = sys.x;
  if (rep.stable && std::none_of(x.begin(), x.end(), [](double v) { return v == 0.0; })) rep = certificate(sys);
  return rep;
}

enum class WeightSource { closed_form, beta_ratio, block_scaling };

struct LyapunovWeights {
  Vec d;
  WeightSource source = WeightSource::closed_form;
  double lyap_max = 0.0;  // λmax(𝓑ᵀD + D𝓑) < 0
};

/**
 * Positive diagonal weights d with 𝓑ᵀD + D𝓑 ≺ 0.
 *
 * Uses dₖ = 1/|xₖ| when no xₖ vanishes. Otherwise tries dₖ = β/βₖ, and if
 * that does not certify, scales the weights of the coupled coordinates by
 * ε → 0: rows with xₖ = 0 are −eₖᵀ, so 𝓑 is block triangular and a small
 * enough ε always works.
 */
inline LyapunovWeights lyapunov_weights(const ReducedModel& model) {
  const Mat& b = model.b_matrix;
  const Vec x = model.coupling();
  const std::size_t n = model.size();
  auto certify = [&](Vec d, WeightSource src) -> std::optional<LyapunovWeights> {
    const double lm = lambda_max(lyap_diag(b, d));
    if (lm < 0.0) return LyapunovWeights{std::move(d), src, lm};
    return std::nullopt;
  };

  const bool any_zero = std::any_of(x.begin(), x.end(), [](double v) { return v == 0.0; });
  if (!any_zero) {
    Vec d(n);
    for (std::size_t k = 0; k < n; ++k) d[k] = 1.0 / std::abs(x[k]);
    if (auto w = certify(d, WeightSource::closed_form)) return *w;
  }
  {
    Vec d(n);
    for (std::size_t k = 0; k < n; ++k) d[k] = model.beta / model.beta_k[k];
    if (auto w = certify(d, WeightSource::beta_ratio)) return *w;
  }
  for (double eps = 1.0; eps > 1e-300; eps *= 0.5) {
    Vec d(n);
    for (std::size_t k = 0; k < n; ++k) d[k] = x[k] == 0.0 ? 1.0 : eps / std::abs(x[k]);
    if (auto w = certify(d, WeightSource::block_scaling)) return *w;
  }
  throw Error(Errc::not_diagonally_stable, "no diagonal weights found for the reduced matrix");
}

// ---------------------------------------------------------------------------
// φ and the equilibrium

inline double phi_eval(const ReducedModel& model, std::size_t k, double eta_k) { return model.phi.at(k)(eta_k); }

/// Unique η in the open preimage interval with φₖ(η) = target, by bisection.
inline double phi_invert(const ReducedModel& model, std::size_t k, double target) {
  const auto& phi = model.phi.at(k);
  const auto [clo, chi] = phi.capacity();
  if (!(clo < target && target < chi))
    throw Error(Errc::target_infeasible, "area " + std::to_string(k + 1) + ": target " + std::to_string(target) +
                                             " outside capacity (" + std::to_string(clo) + ", " + std::to_string(chi) + ")");
  auto [lo, hi] = phi.preimage();
  if (!std::isfinite(lo)) lo = std::min(-1.0, target) * 2.0;
  if (!std::isfinite(hi)) hi = std::max(1.0, target) * 2.0;
  for (int it = 0; it < 200 && phi(lo) > target; ++it) lo -= 2.0 * (std::abs(lo) + 1.0);
  for (int it = 0; it < 200 && phi(hi) < target; ++it) hi += 2.0 * (std::abs(hi) + 1.0);
  for (int it = 0; it < 2000; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (phi(mid) < target) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

struct EquilibriumResult {
  Vec eta_bar;
  std::vector<std::pair<double, double>> preimage_intervals;
};

inline EquilibriumResult equilibrium(const ReducedModel& model) {
  EquilibriumResult r;
  for (std::size_t k = 0; k < model.size(); ++k) {
    r.eta_bar.push_back(phi_invert(model, k, model.load_dev[k]));
    r.preimage_intervals.push_back(model.phi[k].preimage());
  }
  return r;
}

// ---------------------------------------------------------------------------
// Dynamics and Lyapunov function

/// Slow-time derivative dη/dℓ = τ̃⁻¹𝓑(φ(η) − ΔPᴸ).
inline Vec reduced_rhs(const ReducedModel& model, std::span<const double> eta) {
  if (eta.size() != model.size()) throw Error(Errc::dimension_mismatch, "reduced_rhs");
  Vec e = model.phi_vec(eta);
  for (std::size_t k = 0; k < e.size(); ++k) e[k] -= model.load_dev[k];
  Vec d = model.b_matrix * e;
  for (std::size_t k = 0; k < d.size(); ++k) d[k] /= model.tau_tilde[k];
  return d;
}

/// Quasi-steady ACE = −𝓑(φ(η) − ΔPᴸ).
inline Vec reduced_ace(const ReducedModel& model, std::span<const double> eta) {
  Vec e = model.phi_vec(eta);
  for (std::size_t k = 0; k < e.size(); ++k) e[k] -= model.load_dev[k];
  Vec a = model.b_matrix * e;
  for (auto& v : a) v = -v;
  return a;
}

/// V(η) = Σ dₖτ̃ₖ ∫_{η̄ₖ}^{ηₖ} (φₖ(ξ) − φₖ(η̄ₖ)) dξ.
inline double lyapunov_v(const ReducedModel& model, std::span<const double> d, const EquilibriumResult& eq,
                         std::span<const double> eta) {
  double v = 0.0;
  for (std::size_t k = 0; k < model.size(); ++k) {
    const double level = model.phi[k](eq.eta_bar[k]);
    v += d[k] * model.tau_tilde[k] * model.phi[k].integral(eq.eta_bar[k], eta[k], level);
  }
  return v;
}

inline double lyapunov_v(const ReducedModel& model, std::span<const double> d, std::span<const double> eta) {
  return lyapunov_v(model, d, equilibrium(model), eta);
}

/// dV/dℓ = (φ(η) − φ(η̄))ᵀ D 𝓑 (φ(η) − ΔPᴸ).
inline double lyapunov_decrease(const ReducedModel& model, std::span<const double> d, const EquilibriumResult& eq,
                                std::span<const double> eta) {
  const Vec ph = model.phi_vec(eta);
  const Vec ph_bar = model.phi_vec(eq.eta_bar);
  Vec e(model.size());
  for (std::size_t k = 0; k < e.size(); ++k) e[k] = ph[k] - model.load_dev[k];
  const Vec be = model.b_matrix * e;
  double s = 0.0;
  for (std::size_t k = 0; k < e.size(); ++k) s += (ph[k] - ph_bar[k]) * d[k] * be[k];
  return s;
}

inline double lyapunov_decrease(const ReducedModel& model, std::span<const double> d, std::span<const double> eta) {
  return lyapunov_decrease(model, d, equilibrium(model), eta);
}

// ---------------------------------------------------------------------------
// Bias-tuning studies

struct MarginStudy {
  double kappa = 1.0;
  double q_min_eig = 0.0;
  double quoted_bound = 0.0;  // (β / minₖ βₖ)·min(κ, 1), as commonly quoted
  double alt_bound = 0.0;    // (β / maxₖ βₖ)·min(κ, 1)
  [[nodiscard]] bool quoted_bound_holds() const { return q_min_eig >= quoted_bound - 1e-12 * std::abs(quoted_bound); }
  [[nodiscard]] bool alt_bound_holds() const { return q_min_eig >= alt_bound - 1e-12 * std::abs(alt_bound); }
};

/// λmin of Q = β·diag(1/βₖ) − (1 − κ)11ᵀ for uniform biasing b = κβ̄.
inline MarginStudy margin_study(const ReducedModel& model, double kappa) {
  if (!(kappa > 0.0)) throw Error(Errc::invalid_input, "kappa must be positive");
  const std::size_t n = model.size();
  Mat q(n, n, -(1.0 - kappa));
  for (std::size_t k = 0; k < n; ++k) q(k, k) += model.beta / model.beta_k[k];
  const double bmin = *std::min_element(model.beta_k.begin(), model.beta_k.end());
  const double bmax = *std::max_element(model.beta_k.begin(), model.beta_k.end());
  MarginStudy s;
  s.kappa = kappa;
  s.q_min_eig = lambda_min(q);
  s.quoted_bound = model.beta / bmin * std::min(kappa, 1.0);
  s.alt_bound = model.beta / bmax * std::min(kappa, 1.0);
  return s;
}

namespace detail {

inline double uniform_tau(const ReducedModel& model) {
  const double t0 = model.tau_tilde.at(0);
  for (double t : model.tau_tilde)
    if (std::abs(t - t0) > 1e-12 * t0) throw Error(Errc::non_uniform_tau, "sensitivity study needs equal AGC time constants");
  return t0;
}

}  // namespace detail

/**
 * S_ij(jω): transfer from ΔPᴸⱼ to ACEᵢ of the unsaturated reduced model,
 * S(s) = τ′s·𝓑(τ′sI − 𝓑)⁻¹, evaluated with a complex LU solve. ω is in
 * slow-time units (rad per unit ℓ).
 */
inline Complex sensitivity(const ReducedModel& model, std::size_t i, std::size_t j, double omega) {
  const double tp = detail::uniform_tau(model);
  const std::size_t n = model.size();
  if (i >= n || j >= n) throw Error(Errc::dimension_mismatch, "sensitivity index");
  const Complex s{0.0, omega};
  CMat m(n, n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) m(r, c) = -model.b_matrix(r, c);
  for (std::size_t r = 0; r < n; ++r) m(r, r) += tp * s;
  CVec rhs(n, Complex{});
  rhs[j] = 1.0;
  const CVec z = complex_solve(m, rhs);
  Complex bz{};
  for (std::size_t c = 0; c < n; ++c) bz += model.b_matrix(i, c) * z[c];
  return tp * s * bz;
}

/// Closed form −(τ′s/(τ′s+1))[δᵢⱼ − cᵢ τ′s/(τ′s + Σb/β)], cᵢ = (βᵢ − bᵢ)/β.
inline Complex sensitivity_closed_form(const ReducedModel& model, std::size_t i, std::size_t j, double omega) {
  const double tp = detail::uniform_tau(model);
  const Complex ts{0.0, tp * omega};
  double bsum = 0.0;
  for (double b : model.bias_b) bsum += b;
  const double ci = (model.beta_k.at(i) - model.bias_b.at(i)) / model.beta;
  const double kron = i == j ? 1.0 : 0.0;
  return -(ts / (ts + 1.0)) * (kron - ci * ts / (ts + bsum / model.beta));
}

/// |1 − (βᵢ − bᵢ)/β|, the high-frequency limit of |S_ii|.
inline double hinf_ii(const ReducedModel& model, std::size_t i) {
  detail::uniform_tau(model);
  return std::abs(1.0 - (model.beta_k.at(i) - model.bias_b.at(i)) / model.beta);
}

/**
 * Whether |S_ii| never exceeds its high-frequency limit. With L = (1 − cᵢ)²
 * and γ = Σb/β, |S_ii(jω)|² − L has the sign of ω²(γ² − L(1+γ²)) − Lγ², so
 * the limit is the supremum iff γ²(1 − L) <= L.
 */
inline bool hinf_limit_is_peak(const ReducedModel& model, std::size_t i) {
  double bsum = 0.0;
  for (double b : model.bias_b) bsum += b;
  const double gamma = bsum / model.beta;
  const double lim = hinf_ii(model, i);
  const double l = lim * lim;
  return gamma * gamma * (1.0 - l) <= l;
}

struct SweepPeak {
  double peak = 0.0;
  double omega = 0.0;
};

/// Log sweep of |S_ij(jω)| over [1e-4, 1e4]/τ′ at 400 points per decade,
/// refined by golden section around the best grid point.
inline SweepPeak sensitivity_sweep_peak(const ReducedModel& model, std::size_t i, std::size_t j) {
  const double tp = detail::uniform_tau(model);
  constexpr int kPerDecade = 400;
  constexpr double kLo = -4.0, kHi = 4.0;
  const int count = static_cast<int>((kHi - kLo) * kPerDecade) + 1;
  auto mag = [&](double logw) { return std::abs(sensitivity(model, i, j, std::pow(10.0, logw) / tp)); };
  int best_k = 0;
  double best = -1.0;
  for (int k = 0; k < count; ++k) {
    const double v = mag(kLo + k / static_cast<double>(kPerDecade));
    if (v > best) {
      best = v;
      best_k = k;
    }
  }
  double a = kLo + std::max(best_k - 1, 0) / static_cast<double>(kPerDecade);
  double b = kLo + std::min(best_k + 1, count - 1) / static_cast<double>(kPerDecade);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = mag(c), fd = mag(d);
  for (int it = 0; it < 80; ++it) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = mag(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = mag(d);
    }
  }
  const double mid = 0.5 * (a + b);
  const double fm = mag(mid);
  SweepPeak p{best, std::pow(10.0, kLo + best_k / static_cast<double>(kPerDecade)) / tp};
  if (fm > p.peak) p = {fm, std::pow(10.0, mid) / tp};
  return p;
}

}  // namespace rank1
