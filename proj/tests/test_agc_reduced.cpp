#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "fixtures.hpp"
#include "rank1/agc_model.hpp"
#include "rank1/agc_reduced.hpp"

using namespace rank1;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

ReducedModel linear_model(const Vec& beta, const Vec& bias, double tau = 1.0, Vec load = {}) {
  if (load.empty()) load.assign(beta.size(), 0.0);
  return make_reduced(beta, bias, Vec(beta.size(), tau), std::vector<PhiMap>(beta.size(), linear_phi()), load);
}

ReducedModel saturated_model(const Vec& beta, const Vec& bias, const Vec& tau, const Vec& load) {
  std::vector<PhiMap> phi;
  for (std::size_t k = 0; k < beta.size(); ++k)
    phi.push_back(PhiMap{{PhiUnit{0.6, -0.2, 0.3}, PhiUnit{0.4, -0.3, 0.2}}});
  return make_reduced(beta, bias, tau, phi, load);
}

/// Simpson's rule on a fine grid (independent of the breakpoint-exact integral).
double simpson(const PhiMap& phi, double a, double b, double level, int n = 200000) {
  const double h = (b - a) / n;
  double s = (phi(a) - level) + (phi(b) - level);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * (phi(a + i * h) - level);
  return s * h / 3.0;
}

}  // namespace

TEST_CASE("reduced B matrix") {
  const auto ideal = linear_model({1, 3, 2}, {1, 3, 2});
  CHECK(norm_inf(ideal.b_matrix + Mat::identity(3)) == 0.0);

  const auto m = linear_model({1, 3}, {2, 2});
  const Mat expect{{-1.25, -0.25}, {0.25, -0.75}};
  CHECK(norm_inf(m.b_matrix - expect) < 1e-15);

  const auto single = linear_model({4}, {3});
  CHECK_THAT(single.b_matrix(0, 0), WithinAbs(-3.0 / 4.0, 1e-15));

  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.1, 5.0);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 1 + t % 5;
    Vec beta(n), bias(n);
    for (std::size_t k = 0; k < n; ++k) {
      beta[k] = u(rng);
      bias[k] = u(rng);
    }
    const auto r = linear_model(beta, bias);
    double total = 0.0;
    for (double b : beta) total += b;
    Mat rebuilt = -1.0 * Mat::identity(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) rebuilt(i, j) += (beta[i] - bias[i]) / total;
    CHECK(norm_inf(rebuilt - r.b_matrix) <= 1e-12);
  }
}

TEST_CASE("build_reduced from a network") {
  const auto net = fixture::three_area(60);
  const auto m = build_reduced(net);
  REQUIRE(m.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) CHECK_THAT(m.beta_k[k], WithinRel(net.areas[k].beta(), 1e-15));
  CHECK(*std::min_element(m.tau_tilde.begin(), m.tau_tilde.end()) == 1.0);
  CHECK(m.tau_scale == 60.0);
  const auto cap = m.phi[1].capacity();
  CHECK_THAT(cap.second, WithinAbs(0.9, 1e-15));
}

TEST_CASE("reduced matrix is diagonally stable for every positive bias") {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> logu(std::log(0.01), std::log(100.0));
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + t % 6;
    Vec beta(n), bias(n);
    for (std::size_t k = 0; k < n; ++k) {
      beta[k] = std::exp(logu(rng));
      bias[k] = std::exp(logu(rng));
    }
    const auto model = linear_model(beta, bias);
    const auto rep = reduced_is_stable(model);
    CHECK(rep.stable);
    const auto w = lyapunov_weights(model);
    CHECK(w.lyap_max < 0.0);
  }

  CHECK(reduced_is_stable(linear_model({1, 2, 3}, {1, 2, 3})).margin_mu == 1.0);
  CHECK_THAT(reduced_is_stable(linear_model({1, 3}, {0.1, 0.1})).margin_mu, WithinAbs(0.05, 1e-14));
}

TEST_CASE("Lyapunov weight sources") {
  CHECK(lyapunov_weights(linear_model({1, 3}, {2, 2})).source == WeightSource::closed_form);
  CHECK(lyapunov_weights(linear_model({1, 3, 2}, {1, 2, 2.5})).source == WeightSource::beta_ratio);
  // b₁ = β₁ with a strongly overbiased neighbour: β/βₖ does not certify.
  const auto hard = lyapunov_weights(linear_model({1, 1}, {1, 100}));
  CHECK(hard.source == WeightSource::block_scaling);
  CHECK(hard.lyap_max < 0.0);
}

TEST_CASE("phi evaluation and inversion") {
  auto single = make_reduced({1}, {1}, Vec{1}, {PhiMap{{PhiUnit{1.0, -0.5, 0.5}}}}, {0});
  CHECK(phi_eval(single, 0, 0.0) == 0.0);
  CHECK(phi_eval(single, 0, 2.0) == 0.5);

  auto two = make_reduced({1}, {1}, Vec{1}, {PhiMap{{PhiUnit{0.5, -0.2, 0.2}, PhiUnit{0.5, -1.0, 1.0}}}}, {0});
  CHECK_THAT(phi_eval(two, 0, 1.0), WithinAbs(0.7, 1e-15));
  CHECK_THAT(phi_invert(two, 0, 0.7), WithinAbs(1.0, 1e-12));

  try {
    (void)phi_invert(two, 0, 1.2);
    FAIL("expected TargetInfeasible");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::target_infeasible);
  }
  CHECK_THROWS_AS(phi_invert(two, 0, 1.2000001), Error);
  CHECK_THROWS_AS(phi_invert(two, 0, -1.2), Error);

  const auto [plo, phi_hi] = two.phi[0].preimage();
  CHECK_THAT(plo, WithinAbs(-2.0, 1e-15));
  CHECK_THAT(phi_hi, WithinAbs(2.0, 1e-15));
  const double cap = two.phi[0].capacity().second - two.phi[0].capacity().first;
  for (int i = 1; i < 200; ++i) {
    const double eta = plo + (phi_hi - plo) * i / 200.0;
    const double back = phi_invert(two, 0, phi_eval(two, 0, eta));
    CHECK_THAT(back, WithinAbs(eta, 1e-10));
    CHECK(std::abs(phi_eval(two, 0, back) - phi_eval(two, 0, eta)) <= 1e-12 * cap);
  }

  const auto lin = linear_model({1}, {1});
  CHECK_THAT(phi_invert(lin, 0, 123.0), WithinAbs(123.0, 1e-9));
}

TEST_CASE("equilibrium of the reduced dynamics") {
  const auto m = saturated_model({1, 3, 2}, {2, 2, 1}, {1, 2, 1.5}, {0.1, -0.2, 0.35});
  const auto eq = equilibrium(m);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK_THAT(phi_eval(m, k, eq.eta_bar[k]), WithinAbs(m.load_dev[k], 1e-10));
    CHECK(eq.eta_bar[k] > eq.preimage_intervals[k].first);
    CHECK(eq.eta_bar[k] < eq.preimage_intervals[k].second);
  }
  for (double v : reduced_rhs(m, eq.eta_bar)) CHECK(std::abs(v) < 1e-10);
  for (double v : reduced_ace(m, eq.eta_bar)) CHECK(std::abs(v) < 1e-10);
}

TEST_CASE("ideal bias decouples the reduced dynamics") {
  const auto m = make_reduced({1, 2, 3}, {1, 2, 3}, Vec{1, 2, 4}, std::vector<PhiMap>(3, linear_phi()), {0.1, 0.2, -0.3});
  const Vec eta{0.5, -0.1, 0.2};
  const Vec d = reduced_rhs(m, eta);
  for (std::size_t k = 0; k < 3; ++k) CHECK_THAT(d[k], WithinAbs((-eta[k] + m.load_dev[k]) / m.tau_tilde[k], 1e-15));

  const auto partial = linear_model({1, 2, 3}, {1, 5, 0.5});
  for (std::size_t j = 0; j < 3; ++j) CHECK(partial.b_matrix(0, j) == (j == 0 ? -1.0 : 0.0));
}

TEST_CASE("quasi-steady ACE matches the plant steady state") {
  const auto net = fixture::three_area(100);
  const auto model = build_reduced(net);
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> u(-0.6, 0.6);
  for (int t = 0; t < 20; ++t) {
    const Vec eta{u(rng), u(rng), u(rng)};
    const auto eq = plant_equilibrium(net, allocate_all(net, eta));
    const Vec plant_ace = ace_deviation(net, eq.meas_ni, eq.meas_freq);
    const Vec reduced = reduced_ace(model, eta);
    for (std::size_t k = 0; k < 3; ++k) CHECK_THAT(reduced[k], WithinAbs(plant_ace[k], 1e-10));
  }
}

TEST_CASE("Lyapunov function") {
  const auto m = saturated_model({1, 3, 2}, {2, 2, 1}, {1, 2, 1.5}, {0.1, -0.2, 0.35});
  const auto eq = equilibrium(m);
  const auto w = lyapunov_weights(m);
  CHECK(lyapunov_v(m, w.d, eq, eq.eta_bar) == 0.0);
  CHECK(lyapunov_decrease(m, w.d, eq, eq.eta_bar) == 0.0);

  for (std::size_t k = 0; k < 3; ++k) {
    const double level = phi_eval(m, k, eq.eta_bar[k]);
    for (double target : {-1.7, -0.2, 0.05, 0.9, 3.0})
      CHECK_THAT(m.phi[k].integral(eq.eta_bar[k], target, level),
                 WithinAbs(simpson(m.phi[k], eq.eta_bar[k], target, level), 1e-8));
  }

  std::mt19937_64 rng(34);
  std::uniform_real_distribution<double> off(-1.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    Vec eta = eq.eta_bar;
    for (auto& e : eta) e += off(rng);
    CHECK(lyapunov_v(m, w.d, eq, eta) > 0.0);
    CHECK(lyapunov_decrease(m, w.d, eq, eta) < 0.0);

    // dV/dℓ agrees with a central difference along the flow.
    const Vec f = reduced_rhs(m, eta);
    const double h = 1e-6;
    Vec fwd = eta, bwd = eta;
    for (std::size_t k = 0; k < 3; ++k) {
      fwd[k] += h * f[k];
      bwd[k] -= h * f[k];
    }
    const double fd = (lyapunov_v(m, w.d, eq, fwd) - lyapunov_v(m, w.d, eq, bwd)) / (2.0 * h);
    CHECK_THAT(lyapunov_decrease(m, w.d, eq, eta), WithinAbs(fd, 1e-6));
  }
}

TEST_CASE("margin study") {
  const auto one = margin_study(linear_model({2}, {2}), 0.4);
  CHECK_THAT(one.q_min_eig, WithinAbs(0.4, 1e-14));

  const auto pair = margin_study(linear_model({1, 1}, {1, 1}), 0.5);
  CHECK_THAT(pair.q_min_eig, WithinAbs(1.0, 1e-14));

  const auto hetero = margin_study(linear_model({1, 3}, {1, 3}), 0.5);
  CHECK_THAT(hetero.q_min_eig, WithinAbs(0.7425, 1e-3));
  CHECK_FALSE(hetero.quoted_bound_holds());
  CHECK(hetero.alt_bound_holds());

  std::mt19937_64 rng(35);
  std::uniform_real_distribution<double> u(0.2, 5.0);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 1 + t % 5;
    Vec beta(n);
    for (auto& b : beta) b = u(rng);
    const auto m = linear_model(beta, beta);
    double prev = -std::numeric_limits<double>::infinity();
    for (double kappa : {0.25, 0.5, 1.0, 2.0, 4.0}) {
      const double q = margin_study(m, kappa).q_min_eig;
      CHECK(q >= prev - 1e-12);
      prev = q;
    }
  }
  CHECK_THROWS_AS(margin_study(linear_model({1}, {1}), 0.0), Error);
}

TEST_CASE("sensitivity transfer functions") {
  const auto m = linear_model({1, 1, 2}, {2, 1, 2}, 1.0);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(sensitivity(m, i, j, 0.0)) == 0.0);

  CHECK_THAT(hinf_ii(m, 0), WithinAbs(1.25, 1e-15));
  CHECK(hinf_limit_is_peak(m, 0));
  const auto peak = sensitivity_sweep_peak(m, 0, 0);
  CHECK_THAT(peak.peak, WithinRel(1.25, 0.01));

  CHECK_THAT(hinf_ii(linear_model({1, 2}, {1, 3}), 0), WithinAbs(1.0, 1e-15));

  for (double tau : {1.0, 3.0}) {
    const auto mt = linear_model({1, 2.5, 0.7}, {0.4, 3.0, 0.7}, tau);
    for (int e = -40; e <= 40; ++e) {
      const double w = std::pow(10.0, e / 10.0);
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
          const Complex a = sensitivity(mt, i, j, w), b = sensitivity_closed_form(mt, i, j, w);
          CHECK(std::abs(a - b) <= 1e-8 * std::max(std::abs(b), 1e-300));
        }
    }
  }

  // A tuning where the high-frequency limit is not the peak.
  const auto lifted = linear_model({1, 1}, {0.5, 3.5}, 1.0);
  CHECK_FALSE(hinf_limit_is_peak(lifted, 0));
  CHECK(sensitivity_sweep_peak(lifted, 0, 0).peak > hinf_ii(lifted, 0) * 1.05);

  const auto uneven = make_reduced({1, 1}, {1, 1}, Vec{1, 2}, std::vector<PhiMap>(2, linear_phi()), {0, 0});
  try {
    (void)sensitivity(uneven, 0, 0, 1.0);
    FAIL("expected NonUniformTau");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::non_uniform_tau);
  }
}
