#pragma once

/**
 * @file diagstab.hpp
 * @brief Diagonal stability of rank-1 interconnections A = −Δ + x yᵀ.
 *
 * With y ≥ 0, A admits a positive diagonal D with AᵀD + DA ≺ 0 exactly when
 *
 *     Σᵢ [xᵢ yᵢ]₊ / δᵢ < 1.
 *
 * When every xᵢ ≠ 0 and yᵢ > 0 the certificate is D = diag(yᵢ/|xᵢ|) with
 * AᵀD + DA ⪯ −2µΔD, µ = 1 − Σᵢ [xᵢyᵢ]₊/δᵢ. The same certificate tolerates
 * additive perturbations σE while |σ|·‖E‖₂ < µ·min(dᵢδᵢ)/max(dᵢ).
 *
 * `oracle_diagstab` decides the question for small general matrices without
 * using the closed form, so the two can be cross-checked.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rank1/error.hpp"
#include "rank1/numerics.hpp"

namespace rank1 {

/// Factors of A = −diag(delta) + x yᵀ.
struct Rank1System {
  Vec delta;
  Vec x;
  Vec y;

  [[nodiscard]] std::size_t size() const noexcept { return delta.size(); }

  /// Throws DimensionMismatch / InvalidInput when the invariants fail.
  void validate() const {
    if (delta.empty() || x.size() != delta.size() || y.size() != delta.size())
      throw Error(Errc::dimension_mismatch, "delta, x, y must have equal nonzero length");
    for (std::size_t i = 0; i < delta.size(); ++i) {
      if (!std::isfinite(delta[i]) || !std::isfinite(x[i]) || !std::isfinite(y[i]))
        throw Error(Errc::non_finite, "rank-1 factors");
      if (!(delta[i] > 0.0)) throw Error(Errc::invalid_input, "delta must be positive");
      if (y[i] < 0.0) throw Error(Errc::invalid_input, "y must be nonnegative");
    }
  }

  [[nodiscard]] Mat matrix() const {
    Mat a = outer(x, y);
    for (std::size_t i = 0; i < size(); ++i) a(i, i) -= delta[i];
    return a;
  }
};

struct DiagStabReport {
  bool stable = false;
  bool boundary = false;  // condition sum within 1e-12 of one
  double margin_mu = 0.0;
  std::optional<Vec> certificate_d;
  double slack = 0.0;  // λmax(AᵀD + DA + 2µΔD), meaningful with a certificate
};

inline constexpr double kStrictness = 1e-12;

/// Σᵢ [xᵢyᵢ]₊/δᵢ, the quantity compared against one.
inline double condition_sum(const Rank1System& sys) {
  double s = 0.0;
  for (std::size_t i = 0; i < sys.size(); ++i) s += std::max(sys.x[i] * sys.y[i], 0.0) / sys.delta[i];
  return s;
}

inline DiagStabReport check_rank1(const Rank1System& sys) {
  sys.validate();
  const double sum = condition_sum(sys);
  DiagStabReport r;
  r.margin_mu = 1.0 - sum;
  r.stable = sum < 1.0 - kStrictness;
  r.boundary = std::abs(1.0 - sum) <= kStrictness;
  return r;
}

/// D = diag(yᵢ/|xᵢ|) with its slack; requires xᵢ ≠ 0, yᵢ > 0.
inline DiagStabReport certificate(const Rank1System& sys) {
  auto r = check_rank1(sys);
  for (std::size_t i = 0; i < sys.size(); ++i)
    if (sys.x[i] == 0.0 || sys.y[i] <= 0.0)
      throw Error(Errc::hypothesis_violated, "certificate needs every x_i != 0 and y_i > 0 (index " + std::to_string(i) + ")");
  if (!r.stable) throw Error(Errc::not_diagonally_stable, "condition sum " + std::to_string(1.0 - r.margin_mu) + " >= 1");

  Vec d(sys.size());
  for (std::size_t i = 0; i < sys.size(); ++i) d[i] = sys.y[i] / std::abs(sys.x[i]);
  const Mat a = sys.matrix();
  Mat m = lyap_diag(a, d);
  for (std::size_t i = 0; i < sys.size(); ++i) m(i, i) += 2.0 * r.margin_mu * sys.delta[i] * d[i];
  r.slack = lambda_max(m);
  r.certificate_d = std::move(d);
  return r;
}

// ---------------------------------------------------------------------------
// Higher-rank perturbations

/// A = −Δ + x yᵀ + σE with E as supplied by the caller (not normalized).
struct PerturbedSystem {
  Rank1System base;
  double sigma = 0.0;
  Mat e_matrix;

  [[nodiscard]] Mat matrix() const {
    if (e_matrix.rows() != base.size() || !e_matrix.square())
      throw Error(Errc::dimension_mismatch, "perturbation must be square of size N");
    return base.matrix() + sigma * e_matrix;
  }
};

/**
 * Largest |σ| for which the base certificate still certifies −Δ + xyᵀ + σE.
 *
 * The bound µ·min(dᵢδᵢ)/max(dᵢ) holds for unit-norm E; the returned value is
 * divided by ‖E‖₂ so it applies to the caller's σ directly.
 */
inline double perturbation_bound(const PerturbedSystem& psys) {
  if (!psys.e_matrix.square() || psys.e_matrix.rows() != psys.base.size())
    throw Error(Errc::dimension_mismatch, "perturbation must be square of size N");
  const double enorm = spectral_norm(psys.e_matrix);
  if (enorm < 1e-13) throw Error(Errc::degenerate_e, "‖E‖₂ below 1e-13, bound undefined");
  const auto rep = certificate(psys.base);
  const Vec& d = *rep.certificate_d;
  double min_dd = std::numeric_limits<double>::infinity();
  double max_d = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    min_dd = std::min(min_dd, d[i] * psys.base.delta[i]);
    max_d = std::max(max_d, d[i]);
  }
  return rep.margin_mu * min_dd / max_d / enorm;
}

// ---------------------------------------------------------------------------
// Dominant singular mode condition

struct SvdCondition {
  bool applicable = false;
  bool satisfied = false;
  bool transposed = false;  // evaluated on Sᵀ (u₁ > 0, v₁ nonzero)
  double rho = 0.0;
  double lhs = 0.0;  // σ₂
  double rhs = 0.0;  // ρ(1 − σ₁ Σ [u₁ᵢv₁ᵢ]₊/δᵢ)
  double sigma1 = 0.0;
  std::optional<Vec> certificate_d;  // certifies −Δ + S itself when satisfied
};

namespace detail {

inline SvdCondition svd_condition_oriented(std::span<const double> delta, const Mat& s) {
  SvdCondition out;
  const std::size_t n = delta.size();
  const auto dec = svd(s);
  out.sigma1 = dec.sigma[0];
  out.lhs = n > 1 ? dec.sigma[1] : 0.0;
  if (!(out.sigma1 > 0.0) || out.sigma1 - out.lhs <= 1e-10 * out.sigma1) return out;

  Vec u = dec.u.column(0);
  Vec v = dec.v.column(0);
  double vsum = 0.0;
  for (double e : v) vsum += e;
  if (vsum < 0.0) {
    for (auto& e : u) e = -e;
    for (auto& e : v) e = -e;
  }
  constexpr double kZero = 1e-12;
  for (std::size_t i = 0; i < n; ++i)
    if (!(v[i] > kZero) || !(std::abs(u[i]) > kZero)) return out;
  out.applicable = true;

  double sum = 0.0;
  double min_num = std::numeric_limits<double>::infinity();
  double max_den = 0.0;
  Vec d(n);
  for (std::size_t i = 0; i < n; ++i) {
    sum += std::max(u[i] * v[i], 0.0) / delta[i];
    const double ratio = v[i] / std::abs(u[i]);
    min_num = std::min(min_num, delta[i] * ratio);
    max_den = std::max(max_den, ratio);
    d[i] = ratio / out.sigma1;
  }
  out.rho = min_num / max_den;
  out.rhs = out.rho * (1.0 - out.sigma1 * sum);
  out.satisfied = out.lhs < out.rhs;
  if (out.satisfied) out.certificate_d = std::move(d);
  return out;
}

}  // namespace detail

/**
 * Sufficient test for −diag(delta) + S using the best rank-1 approximation
 * σ₁u₁v₁ᵀ of S and treating the remainder (norm σ₂) as a perturbation.
 * Falls back to Sᵀ when only the transposed sign pattern fits.
 */
inline SvdCondition svd_condition(std::span<const double> delta, const Mat& s) {
  if (!s.square() || s.rows() != delta.size()) throw Error(Errc::dimension_mismatch, "svd_condition");
  for (double d : delta)
    if (!(d > 0.0)) throw Error(Errc::invalid_input, "delta must be positive");

  auto direct = detail::svd_condition_oriented(delta, s);
  if (direct.satisfied) return direct;
  auto trans = detail::svd_condition_oriented(delta, s.transpose());
  trans.transposed = true;
  if (trans.certificate_d) {
    // D certifies Aᵀ; D⁻¹ then certifies A.
    for (auto& e : *trans.certificate_d) e = 1.0 / e;
  }
  if (trans.satisfied || (trans.applicable && !direct.applicable)) return trans;
  return direct;
}

// ---------------------------------------------------------------------------
// Independent oracle

enum class Verdict { yes, no, unknown };

struct OracleResult {
  Verdict verdict = Verdict::unknown;
  std::optional<Vec> witness;
};

namespace detail {

inline Mat principal(const Mat& a, std::span<const std::size_t> idx) {
  Mat s(idx.size(), idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = 0; j < idx.size(); ++j) s(i, j) = a(idx[i], idx[j]);
  return s;
}

/// λmax(AᵀD + DA) with D scaled to max entry one.
inline double normalized_lyap_max(const Mat& a, std::span<const double> d) {
  const double dmax = *std::max_element(d.begin(), d.end());
  Vec dn(d.begin(), d.end());
  for (auto& e : dn) e /= dmax;
  return lambda_max(lyap_diag(a, dn));
}

inline Vec exp_normalized(std::span<const double> logd) {
  const double top = *std::max_element(logd.begin(), logd.end());
  Vec d(logd.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::exp(logd[i] - top);
  return d;
}

inline OracleResult oracle_2x2(const Mat& a) {
  const double a11 = a(0, 0), a12 = a(0, 1), a21 = a(1, 0), a22 = a(1, 1);
  const double det = a11 * a22 - a12 * a21;
  if (!(a11 < 0.0 && a22 < 0.0 && det > 0.0)) return {Verdict::no, std::nullopt};
  // Witness with d₂ = 1 and d₁ = r from 4 r a11 a22 > (r a12 + a21)².
  double r = 1.0;
  if (a12 != 0.0 && a21 != 0.0) r = std::abs(a21 / a12);
  else if (a12 == 0.0 && a21 != 0.0) r = a21 * a21 / (2.0 * a11 * a22) + 1.0;
  else if (a12 != 0.0 && a21 == 0.0) r = 2.0 * a11 * a22 / (a12 * a12);
  Vec d{r, 1.0};
  const double top = std::max(r, 1.0);
  for (auto& e : d) e /= top;
  return {Verdict::yes, std::move(d)};
}

}  // namespace detail

/**
 * Decides diagonal stability of a general square A without the rank-1 formula.
 *
 * N = 1 and N = 2 are exact. For N >= 3 the answer is "no" when A or some
 * principal submatrix fails a necessary condition (Hurwitz, recursively), and
 * "yes" when a search over positive diagonals finds λmax(AᵀD + DA) < −1e-10.
 * Anything else is "unknown". The search draws `budget` random log-uniform
 * diagonals and then pattern-searches from the best one.
 */
inline OracleResult oracle_diagstab(const Mat& a, std::size_t budget, std::mt19937_64& rng) {
  if (!a.square() || a.empty()) throw Error(Errc::dimension_mismatch, "oracle needs a nonempty square matrix");
  require_finite(a, "oracle input");
  const std::size_t n = a.rows();
  if (n == 1) {
    if (a(0, 0) < 0.0) return {Verdict::yes, Vec{1.0}};
    return {Verdict::no, std::nullopt};
  }
  if (n == 2) return detail::oracle_2x2(a);

  // Principal submatrices of a diagonally stable matrix are diagonally stable.
  for (std::size_t drop = 0; drop < n; ++drop) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < n; ++i)
      if (i != drop) idx.push_back(i);
    std::mt19937_64 sub_rng(rng());
    if (oracle_diagstab(detail::principal(a, idx), 0, sub_rng).verdict == Verdict::no) return {Verdict::no, std::nullopt};
  }
  if (!is_hurwitz(a).hurwitz()) return {Verdict::no, std::nullopt};

  constexpr double kAccept = -1e-10;
  constexpr double kSpread = 12.0;  // log-range of sampled diagonals
  std::uniform_real_distribution<double> unif(-kSpread, kSpread);
  Vec best_log(n, 0.0);
  double best = detail::normalized_lyap_max(a, detail::exp_normalized(best_log));
  auto consider = [&](const Vec& logd) {
    const double f = detail::normalized_lyap_max(a, detail::exp_normalized(logd));
    if (f < best) {
      best = f;
      best_log = logd;
    }
  };

  // Coarse grid on the first two free coordinates, then random draws.
  for (int g1 = -4; g1 <= 4 && best >= kAccept; ++g1)
    for (int g2 = -4; g2 <= 4 && best >= kAccept; ++g2) {
      Vec logd(n, 0.0);
      logd[1] = 1.5 * g1;
      logd[2] = 1.5 * g2;
      consider(logd);
    }
  for (std::size_t k = 0; k < budget && best >= kAccept; ++k) {
    Vec logd(n);
    logd[0] = 0.0;
    for (std::size_t i = 1; i < n; ++i) logd[i] = unif(rng);
    consider(logd);
  }

  // Pattern search in log-coordinates.
  for (double step = 2.0; step > 1e-7 && best >= kAccept; step *= 0.5) {
    bool improved = true;
    for (int iter = 0; improved && iter < 200 && best >= kAccept; ++iter) {
      improved = false;
      for (std::size_t i = 0; i < n && best >= kAccept; ++i)
        for (double sgn : {1.0, -1.0}) {
          Vec trial = best_log;
          trial[i] += sgn * step;
          const double before = best;
          consider(trial);
          if (best < before) {
            improved = true;
            break;
          }
        }
    }
  }

  if (best < kAccept) return {Verdict::yes, detail::exp_normalized(best_log)};
  return {Verdict::unknown, std::nullopt};
}

}  // namespace rank1
