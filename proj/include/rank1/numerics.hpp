#pragma once

/**
 * @file numerics.hpp
 * @brief Dense linear algebra for small matrices (N <= 50).
 *
 * Row-major storage, value semantics, no external BLAS. Provides the
 * symmetric eigensolver, Lyapunov-based Hurwitz test, spectral norm, SVD of
 * square matrices and LU solves over the real and complex fields.
 */

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rank1/error.hpp"

namespace rank1 {

inline constexpr double kTolAbs = 1e-10;
inline constexpr double kTolRel = 1e-9;

using Vec = std::vector<double>;
using Complex = std::complex<double>;
using CVec = std::vector<Complex>;

template <typename T>
class BasicMat {
 public:
  using value_type = T;

  BasicMat() = default;
  BasicMat(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  BasicMat(std::initializer_list<std::initializer_list<T>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw Error(Errc::dimension_mismatch, "ragged matrix literal");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static BasicMat identity(std::size_t n) {
    BasicMat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
    return m;
  }

  static BasicMat diagonal(std::span<const T> d) {
    BasicMat m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] bool square() const noexcept { return rows_ == cols_; }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const T& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  [[nodiscard]] std::span<T> values() noexcept { return data_; }
  [[nodiscard]] std::span<const T> values() const noexcept { return data_; }

  [[nodiscard]] std::vector<T> column(std::size_t j) const {
    std::vector<T> c(rows_);
    for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
    return c;
  }

  [[nodiscard]] BasicMat transpose() const {
    BasicMat t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  BasicMat& operator+=(const BasicMat& o) {
    check_same(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  BasicMat& operator-=(const BasicMat& o) {
    check_same(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  BasicMat& operator*=(T s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  friend BasicMat operator+(BasicMat a, const BasicMat& b) { return a += b; }
  friend BasicMat operator-(BasicMat a, const BasicMat& b) { return a -= b; }
  friend BasicMat operator*(BasicMat a, T s) { return a *= s; }
  friend BasicMat operator*(T s, BasicMat a) { return a *= s; }

  friend BasicMat operator*(const BasicMat& a, const BasicMat& b) {
    if (a.cols_ != b.rows_) throw Error(Errc::dimension_mismatch, "matrix product");
    BasicMat c(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const T aik = a(i, k);
        if (aik == T{}) continue;
        for (std::size_t j = 0; j < b.cols_; ++j) c(i, j) += aik * b(k, j);
      }
    return c;
  }

  friend std::vector<T> operator*(const BasicMat& a, std::span<const T> x) {
    if (a.cols_ != x.size()) throw Error(Errc::dimension_mismatch, "matrix-vector product");
    std::vector<T> y(a.rows_);
    for (std::size_t i = 0; i < a.rows_; ++i) {
      T acc{};
      for (std::size_t j = 0; j < a.cols_; ++j) acc += a(i, j) * x[j];
      y[i] = acc;
    }
    return y;
  }
  friend std::vector<T> operator*(const BasicMat& a, const std::vector<T>& x) {
    return a * std::span<const T>(x);
  }

  friend bool operator==(const BasicMat&, const BasicMat&) = default;

 private:
  void check_same(const BasicMat& o) const {
    if (rows_ != o.rows_ || cols_ != o.cols_) throw Error(Errc::dimension_mismatch, "elementwise op");
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using Mat = BasicMat<double>;
using CMat = BasicMat<Complex>;

// ---------------------------------------------------------------------------
// Norms and small helpers

template <typename T>
double norm_inf(const BasicMat<T>& a) {
  double best = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) row += std::abs(a(i, j));
    best = std::max(best, row);
  }
  return best;
}

template <typename T>
double norm_fro(const BasicMat<T>& a) {
  double s = 0.0;
  for (const auto& v : a.values()) s += std::norm(v);
  return std::sqrt(s);
}

template <typename T>
double max_abs(const BasicMat<T>& a) {
  double m = 0.0;
  for (const auto& v : a.values()) m = std::max(m, static_cast<double>(std::abs(v)));
  return m;
}

template <typename T>
double norm_inf(std::span<const T> v) {
  double m = 0.0;
  for (const auto& e : v) m = std::max(m, static_cast<double>(std::abs(e)));
  return m;
}
template <typename T>
double norm_inf(const std::vector<T>& v) {
  return norm_inf(std::span<const T>(v));
}

inline double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double e : v) s += e * e;
  return std::sqrt(s);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(Errc::dimension_mismatch, "dot");
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

template <typename T>
void require_finite(const BasicMat<T>& a, const char* what) {
  for (const auto& v : a.values()) {
    if constexpr (std::is_same_v<T, Complex>) {
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
        throw Error(Errc::non_finite, what);
    } else {
      if (!std::isfinite(v)) throw Error(Errc::non_finite, what);
    }
  }
}

inline Mat outer(std::span<const double> u, std::span<const double> v) {
  Mat m(u.size(), v.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) m(i, j) = u[i] * v[j];
  return m;
}

/// AᵀD + DA for diagonal D given by its entries.
inline Mat lyap_diag(const Mat& a, std::span<const double> d) {
  if (!a.square() || a.rows() != d.size()) throw Error(Errc::dimension_mismatch, "lyap_diag");
  const std::size_t n = a.rows();
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = a(j, i) * d[j] + d[i] * a(i, j);
  return m;
}

// ---------------------------------------------------------------------------
// Symmetric eigensolver (cyclic Jacobi)

struct SymEig {
  Vec values;  // ascending
  Mat vectors; // column k pairs with values[k]
};

/**
 * Cyclic-Jacobi eigendecomposition of a symmetric matrix.
 *
 * Rejects inputs whose asymmetry exceeds 1e-12 of ‖A‖∞. Sweeps stop once the
 * off-diagonal Frobenius mass falls below 1e-12·‖A‖F or after 100 sweeps.
 */
inline SymEig sym_eig(const Mat& a_in) {
  if (!a_in.square()) throw Error(Errc::dimension_mismatch, "sym_eig needs a square matrix");
  require_finite(a_in, "sym_eig input");
  const std::size_t n = a_in.rows();
  const double scale = norm_inf(a_in);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(a_in(i, j) - a_in(j, i)) > 1e-12 * scale)
        throw Error(Errc::not_symmetric, "asymmetry at (" + std::to_string(i) + "," + std::to_string(j) + ")");

  Mat a = a_in;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = 0.5 * (a_in(i, j) + a_in(j, i));
  Mat v = Mat::identity(n);

  const double threshold = 1e-12 * norm_fro(a);
  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += 2.0 * a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  for (int sweep = 0; sweep < 100 && off_norm() > threshold; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });
  SymEig out{Vec(n), Mat(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

inline double lambda_max(const Mat& symmetric) { return sym_eig(symmetric).values.back(); }
inline double lambda_min(const Mat& symmetric) { return sym_eig(symmetric).values.front(); }

// ---------------------------------------------------------------------------
// LU with partial pivoting

template <typename T>
class Lu {
 public:
  /// Factors `m`; throws Singular when a pivot drops below 1e-13·‖M‖∞.
  explicit Lu(BasicMat<T> m) : lu_(std::move(m)), perm_(lu_.rows()) {
    if (!lu_.square()) throw Error(Errc::dimension_mismatch, "LU needs a square matrix");
    require_finite(lu_, "LU input");
    const std::size_t n = lu_.rows();
    std::iota(perm_.begin(), perm_.end(), 0);
    const double tol = 1e-13 * norm_inf(lu_);
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t piv = k;
      double best = std::abs(lu_(k, k));
      for (std::size_t i = k + 1; i < n; ++i)
        if (std::abs(lu_(i, k)) > best) {
          best = std::abs(lu_(i, k));
          piv = i;
        }
      if (!(best > tol)) throw Error(Errc::singular, "pivot " + std::to_string(best) + " at column " + std::to_string(k));
      if (piv != k) {
        for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(piv, j));
        std::swap(perm_[k], perm_[piv]);
        sign_ = -sign_;
      }
      const T pivot = lu_(k, k);
      for (std::size_t i = k + 1; i < n; ++i) {
        const T f = lu_(i, k) / pivot;
        lu_(i, k) = f;
        if (f == T{}) continue;
        for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= f * lu_(k, j);
      }
    }
  }

  [[nodiscard]] std::vector<T> solve(std::span<const T> b) const {
    const std::size_t n = lu_.rows();
    if (b.size() != n) throw Error(Errc::dimension_mismatch, "LU solve rhs");
    std::vector<T> x(n);
    for (std::size_t i = 0; i < n; ++i) {
      T acc = b[perm_[i]];
      for (std::size_t j = 0; j < i; ++j) acc -= lu_(i, j) * x[j];
      x[i] = acc;
    }
    for (std::size_t i = n; i-- > 0;) {
      T acc = x[i];
      for (std::size_t j = i + 1; j < n; ++j) acc -= lu_(i, j) * x[j];
      x[i] = acc / lu_(i, i);
    }
    return x;
  }

  [[nodiscard]] T determinant() const {
    T d = static_cast<T>(sign_);
    for (std::size_t i = 0; i < lu_.rows(); ++i) d *= lu_(i, i);
    return d;
  }

 private:
  BasicMat<T> lu_;
  std::vector<std::size_t> perm_;
  int sign_ = 1;
};

inline Vec solve(const Mat& m, std::span<const double> b) { return Lu<double>(m).solve(b); }

/// Complex LU solve; residual ‖Mx−b‖∞ is at rounding level for well-conditioned M.
inline CVec complex_solve(const CMat& m, std::span<const Complex> b) { return Lu<Complex>(m).solve(b); }

// ---------------------------------------------------------------------------
// Hurwitz test via the Lyapunov equation

/// Solves AᵀP + PA = −I through the n²×n² Kronecker system. Throws
/// SingularLyapunov when some eigenvalue pair of A sums to zero.
inline Mat lyapunov_solve(const Mat& a) {
  if (!a.square()) throw Error(Errc::dimension_mismatch, "lyapunov_solve needs a square matrix");
  require_finite(a, "lyapunov_solve input");
  const std::size_t n = a.rows();
  const std::size_t m = n * n;
  Mat k(m, m);
  Vec rhs(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t r = i * n + j;
      for (std::size_t q = 0; q < n; ++q) {
        k(r, q * n + j) += a(q, i);  // (AᵀP)_ij = Σ_q A_qi P_qj
        k(r, i * n + q) += a(q, j);  // (PA)_ij  = Σ_q P_iq A_qj
      }
      if (i == j) rhs[r] = -1.0;
    }
  }
  Vec p;
  try {
    p = Lu<double>(std::move(k)).solve(rhs);
  } catch (const Error& e) {
    if (e.code() == Errc::singular) throw Error(Errc::singular_lyapunov, "eigenvalues of A sum to zero (boundary, not Hurwitz)");
    throw;
  }
  Mat out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = 0.5 * (p[i * n + j] + p[j * n + i]);
  return out;
}

enum class HurwitzStatus { hurwitz, not_hurwitz, boundary };

struct HurwitzResult {
  HurwitzStatus status = HurwitzStatus::not_hurwitz;
  Mat p;  // Lyapunov solution, empty on the boundary

  [[nodiscard]] bool hurwitz() const noexcept { return status == HurwitzStatus::hurwitz; }
};

inline HurwitzResult is_hurwitz(const Mat& a) {
  HurwitzResult res;
  try {
    res.p = lyapunov_solve(a);
  } catch (const Error& e) {
    if (e.code() != Errc::singular_lyapunov) throw;
    res.status = HurwitzStatus::boundary;
    return res;
  }
  const auto eig = sym_eig(res.p);
  // For Hurwitz A, λmin(P) >= 1/(2‖A‖₂), far above rounding.
  res.status = eig.values.front() > 1e-14 * max_abs(res.p) ? HurwitzStatus::hurwitz : HurwitzStatus::not_hurwitz;
  return res;
}

// ---------------------------------------------------------------------------
// Spectral norm and SVD

inline double spectral_norm(const Mat& e) {
  require_finite(e, "spectral_norm input");
  if (e.empty()) return 0.0;
  return std::sqrt(std::max(0.0, lambda_max(e.transpose() * e)));
}

struct Svd {
  Vec sigma;  // descending
  Mat u;      // left singular vectors as columns
  Mat v;      // right singular vectors as columns
};

/**
 * SVD of a square matrix from the eigendecompositions of SᵀS and SSᵀ.
 *
 * Right vectors come from SᵀS. Each left vector with a resolvable singular
 * value is u = Sv/σ, which keeps the pair sign-consistent; the rest of U is
 * completed from the eigenvectors of SSᵀ orthogonalized against what is
 * already there.
 */
inline Svd svd(const Mat& s) {
  if (!s.square()) throw Error(Errc::dimension_mismatch, "svd is implemented for square matrices");
  require_finite(s, "svd input");
  const std::size_t n = s.rows();
  const Mat st = s.transpose();
  const auto right = sym_eig(st * s);
  const auto left = sym_eig(s * st);

  Svd out{Vec(n), Mat(n, n), Mat(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t src = n - 1 - k;
    out.sigma[k] = std::sqrt(std::max(0.0, right.values[src]));
    for (std::size_t i = 0; i < n; ++i) out.v(i, k) = right.vectors(i, src);
  }

  const double resolvable = 1e-10 * (n ? out.sigma[0] : 0.0);
  std::vector<Vec> ucols;
  for (std::size_t k = 0; k < n && out.sigma[k] > resolvable && out.sigma[k] > 0.0; ++k) {
    Vec u = s * out.v.column(k);
    for (auto& e : u) e /= out.sigma[k];
    for (const auto& prev : ucols) {
      const double c = dot(u, prev);
      for (std::size_t i = 0; i < n; ++i) u[i] -= c * prev[i];
    }
    const double nu = norm2(u);
    for (auto& e : u) e /= nu;
    ucols.push_back(std::move(u));
  }
  for (std::size_t src = n; src-- > 0 && ucols.size() < n;) {
    Vec u = left.vectors.column(src);
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& prev : ucols) {
        const double c = dot(u, prev);
        for (std::size_t i = 0; i < n; ++i) u[i] -= c * prev[i];
      }
    const double nu = norm2(u);
    if (nu < 1e-6) continue;
    for (auto& e : u) e /= nu;
    ucols.push_back(std::move(u));
  }
  for (std::size_t e = 0; e < n && ucols.size() < n; ++e) {
    Vec u(n, 0.0);
    u[e] = 1.0;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& prev : ucols) {
        const double c = dot(u, prev);
        for (std::size_t i = 0; i < n; ++i) u[i] -= c * prev[i];
      }
    const double nu = norm2(u);
    if (nu < 1e-6) continue;
    for (auto& x : u) x /= nu;
    ucols.push_back(std::move(u));
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i) out.u(i, k) = ucols[k][i];
  return out;
}

}  // namespace rank1
