// Acceptance run: one PASS/FAIL line per criterion, exit status = number of failures.

#include <boost/rational.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "rank1/agc_reduced.hpp"
#include "rank1/diagstab.hpp"
#include "rank1/sim.hpp"

using namespace rank1;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

/// Reduced trajectories collected by criteria 4-6 for the Lyapunov check.
struct Trajectory {
  std::string label;
  ReducedModel model;
  SimTrace trace;
};
std::vector<Trajectory> g_trajectories;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void keep_reduced(const std::string& label, const ReducedModel& model, double horizon) {
  const SimConfig cfg{default_reduced_dt(model), horizon, 1, 0};
  g_trajectories.push_back({label, model, run_reduced(model, cfg, Vec(model.size(), 0.0))});
}

// ---------------------------------------------------------------------------

Outcome boundary_example() {
  Outcome o{true, ""};
  auto sys = [](double a) { return Rank1System{{1, 1}, {a, -a}, {1, 1}}; };
  for (double a : {0.0, 0.5, -0.5, 0.99, -0.99}) o.pass &= check_rank1(sys(a)).stable && is_hurwitz(sys(a).matrix()).hurwitz();
  for (double a : {1.0, -1.0, 1.01, -1.01, 5.0, -5.0})
    o.pass &= !check_rank1(sys(a)).stable && is_hurwitz(sys(a).matrix()).hurwitz();
  o.detail = "11 alphas";
  return o;
}

Outcome worked_example() {
  const Rank1System sys{{5, 4, 3, 4, 5}, {-3, 1, -1, -3, 2}, {1, 1, 1, 1, 1}};
  using Q = boost::rational<long long>;
  const std::vector<long long> delta{5, 4, 3, 4, 5}, x{-3, 1, -1, -3, 2};
  Q mu{1};
  for (std::size_t i = 0; i < 5; ++i)
    if (x[i] > 0) mu -= Q(x[i], delta[i]);
  const bool exact = mu == Q(7, 20);

  const auto rep = certificate(sys);
  const Vec want{1.0 / 3, 1, 1, 1.0 / 3, 0.5};
  bool d_ok = std::abs(rep.margin_mu - 0.35) <= 1e-15;
  for (std::size_t i = 0; i < 5; ++i) d_ok &= std::abs((*rep.certificate_d)[i] - want[i]) <= 1e-15;

  const Mat e{{2, -1, 0, -1, -1}, {-1, 0, -1, 1, -1}, {0, 1, -1, 0, 0}, {0, 1, -1, 1, 0}, {1, 2, 2, -1, 0}};
  const double bound = perturbation_bound({sys, 0.0, e});
  const double norm_gap = std::abs(spectral_norm(e) - oracle::power_norm(e)) / oracle::power_norm(e);

  Outcome o;
  o.pass = exact && d_ok && rep.slack <= 1e-9 && std::abs(bound - 0.1278) <= 1e-3 && norm_gap <= 1e-9;
  o.detail = "mu=" + fmt("%.17g", rep.margin_mu) + " slack=" + fmt("%.3g", rep.slack) + " bound=" + fmt("%.6f", bound);
  return o;
}

Outcome oracle_equivalence() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> delta(0.2, 3.0), xs(-2.0, 2.0), ys(0.0, 2.0), coin(0.0, 1.0);
  const int total = 1200;
  int unknown = 0, disagree = 0;
  for (int t = 0; t < total; ++t) {
    Rank1System s;
    for (int i = 0; i <= t % 4; ++i) {
      s.delta.push_back(delta(rng));
      s.x.push_back(xs(rng));
      s.y.push_back(coin(rng) < 0.1 ? 0.0 : ys(rng));
    }
    const auto v = oracle_diagstab(s.matrix(), 300, rng).verdict;
    if (v == Verdict::unknown) {
      ++unknown;
      continue;
    }
    if (check_rank1(s).stable != (v == Verdict::yes)) ++disagree;
  }
  const double rate = static_cast<double>(unknown) / total;
  return {disagree == 0 && rate < 0.2,
          std::to_string(total) + " systems, disagreements=" + std::to_string(disagree) + " unknown=" + fmt("%.4f", rate)};
}

Outcome steady_state_zeroing() {
  Outcome o{true, ""};
  double worst = 0.0, slowest = 0.0;
  for (double tau : {30.0, 100.0}) {
    for (const auto& [label, net] : {std::pair{"two", fixture::two_area(tau)}, std::pair{"three", fixture::three_area(tau)}}) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto tr = run_full(net, {0.01, 2000.0, 100, 0}, pre_disturbance_state(net));
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      slowest = std::max(slowest, secs);
      for (std::size_t k = 0; k < net.area_count(); ++k) {
        const std::string s = std::to_string(k + 1);
        double du = 0.0;
        for (std::size_t i = 0; i < net.areas[k].generators.size(); ++i)
          du += tr.column("u_" + s + "_" + std::to_string(i + 1)).back() - net.areas[k].generators[i].base_setpoint;
        for (double v : {tr.column("ace_" + s).back(), tr.column("df_" + s).back(), tr.column("dni_" + s).back(),
                         du - net.areas[k].load_dev})
          worst = std::max(worst, std::abs(v));
      }
      o.pass &= tr.warnings.empty() && secs < 30.0;
      keep_reduced(std::string(label) + "-area tau=" + fmt("%g", tau), build_reduced(net), 2000.0);
    }
  }
  o.pass &= worst < 1e-4;
  o.detail = "worst residual=" + fmt("%.3g", worst) + " slowest scenario=" + fmt("%.2fs", slowest);
  return o;
}

Outcome two_time_scale() {
  const auto net = fixture::three_area(30);
  const double burn_in = 10.0 * net.plant_time_constant_range().second;
  const Vec taus{30, 100, 300};
  const auto pts = time_scale_study(net, taus, 0.01, 20.0, burn_in);
  bool monotone = true;
  for (std::size_t k = 1; k < pts.size(); ++k) monotone &= pts[k].sup_gap < pts[k - 1].sup_gap;
  std::string d = "gaps";
  for (const auto& p : pts) d += " " + fmt("%.3g", p.sup_gap);
  for (double tau : taus) {
    auto scaled = net;
    for (auto& a : scaled.areas) a.agc_tc = tau;
    keep_reduced("time-scale tau=" + fmt("%g", tau), build_reduced(scaled), 20.0 * tau);
  }
  return {monotone && pts.back().sup_gap < 0.25 * pts.front().sup_gap, d};
}

Outcome decoupling() {
  auto gap_for = [](double bias_factor, const std::string& label) {
    auto net = fixture::three_area(50);
    net.areas[0].bias_b = bias_factor * net.areas[0].beta();
    auto other = net;
    other.areas[1].load_dev = -0.2;
    const auto m1 = build_reduced(net), m2 = build_reduced(other);
    keep_reduced(label + " base", m1, 2000.0);
    keep_reduced(label + " shifted load", m2, 2000.0);
    const auto& a = g_trajectories[g_trajectories.size() - 2].trace;
    const auto& b = g_trajectories.back().trace;
    return compare_traces(a, b, {"eta_1"})[0].sup_gap;
  };
  const double ideal = gap_for(1.0, "decoupling b1=beta1");
  const double over = gap_for(1.5, "decoupling b1=1.5beta1");
  return {ideal <= 1e-12 && over > 1e-3, "ideal gap=" + fmt("%.3g", ideal) + " overbiased gap=" + fmt("%.3g", over)};
}

Outcome sensitivity_peak() {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> size(2, 4);
  std::uniform_real_distribution<double> beta(0.5, 3.0), log_kappa(std::log(0.5), std::log(2.0));
  int matched = 0, limit_not_peak = 0;
  double worst_resolvent = 0.0, worst_match = 0.0;
  std::ostringstream misses;
  for (int t = 0; t < 20; ++t) {
    const auto n = static_cast<std::size_t>(size(rng));
    Vec bk(n), b(n);
    for (std::size_t k = 0; k < n; ++k) {
      bk[k] = beta(rng);
      b[k] = std::exp(log_kappa(rng)) * bk[k];
    }
    const auto i = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    const auto model = make_reduced(bk, b, Vec(n, 50.0), std::vector<PhiMap>(n, linear_phi()), Vec(n, 0.0));

    const double peak = sensitivity_sweep_peak(model, i, i).peak;
    const double limit = hinf_ii(model, i);
    const double rel = std::abs(peak - limit) / limit;
    worst_match = std::max(worst_match, rel);
    if (rel <= 0.01) {
      ++matched;
    } else {
      misses << " #" << t << "(rel " << fmt("%.3g", rel) << ")";
    }
    if (!hinf_limit_is_peak(model, i)) ++limit_not_peak;

    for (int g = -200; g <= 200; ++g) {
      const double w = std::pow(10.0, g / 50.0) / 50.0;
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) {
          const Complex a = sensitivity(model, r, c, w), z = sensitivity_closed_form(model, r, c, w);
          const double scale = std::max(std::abs(z), 1e-300);
          worst_resolvent = std::max(worst_resolvent, std::abs(a - z) / scale);
        }
    }
  }
  return {matched == 20 && worst_resolvent <= 1e-8,
          std::to_string(matched) + "/20 peaks within 1% (worst " + fmt("%.3g", worst_match) + ", limit not the supremum in " +
              std::to_string(limit_not_peak) + ")" + misses.str() + "; resolvent vs closed form " + fmt("%.2g", worst_resolvent)};
}

Outcome margin_monotonicity() {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> size(2, 5);
  std::uniform_real_distribution<double> beta(0.5, 3.0);
  const Vec kappas{0.25, 0.5, 1, 2, 4};
  bool monotone = true;
  int paper_rows = 0, paper_holds = 0;
  for (int t = 0; t < 50; ++t) {
    const auto n = static_cast<std::size_t>(size(rng));
    Vec bk(n);
    for (auto& v : bk) v = beta(rng);
    const auto model = make_reduced(bk, bk, Vec(n, 50.0), std::vector<PhiMap>(n, linear_phi()), Vec(n, 0.0));
    double prev = -INFINITY;
    for (double kappa : kappas) {
      const auto s = margin_study(model, kappa);
      monotone &= s.q_min_eig >= prev - 1e-12;
      prev = s.q_min_eig;
      ++paper_rows;
      if (s.quoted_bound_holds()) ++paper_holds;
    }
  }
  return {monotone, "lambda_min nondecreasing in kappa over 50 draws; quoted bound held in " + std::to_string(paper_holds) + "/" +
                        std::to_string(paper_rows) + " rows (reported only)"};
}

Outcome lyapunov_decrease_along_runs() {
  std::size_t samples = 0, strict_checked = 0;
  double worst_rise = 0.0;
  std::string bad;
  for (const auto& tj : g_trajectories) {
    const auto eq = equilibrium(tj.model);
    const auto w = lyapunov_weights(tj.model);
    const std::size_t n = tj.model.size();
    std::vector<const Vec*> cols;
    for (std::size_t k = 0; k < n; ++k) cols.push_back(&tj.trace.column("eta_" + std::to_string(k + 1)));
    auto eta_at = [&](std::size_t r) {
      Vec e(n);
      for (std::size_t k = 0; k < n; ++k) e[k] = (*cols[k])[r];
      return e;
    };
    double v_prev = lyapunov_v(tj.model, w.d, eq, eta_at(0));
    for (std::size_t r = 0; r + 1 < tj.trace.rows(); ++r) {
      const Vec here = eta_at(r);
      double dist = 0.0;
      for (std::size_t k = 0; k < n; ++k) dist = std::max(dist, std::abs(here[k] - eq.eta_bar[k]));
      const double v_next = lyapunov_v(tj.model, w.d, eq, eta_at(r + 1));
      worst_rise = std::max(worst_rise, v_next - v_prev);
      ++samples;
      bool ok = v_next <= v_prev + 1e-10;
      if (dist > 1e-6) {
        ++strict_checked;
        ok &= v_next < v_prev;
      }
      if (!ok && bad.empty()) bad = " first violation in " + tj.label + " at t=" + fmt("%g", tj.trace.times[r]);
      v_prev = v_next;
    }
  }
  return {bad.empty() && !g_trajectories.empty(),
          std::to_string(g_trajectories.size()) + " trajectories, " + std::to_string(samples) + " steps (" +
              std::to_string(strict_checked) + " outside the ball), max rise " + fmt("%.3g", worst_rise) + bad};
}

Outcome numerics_self_checks() {
  auto rk4_err = [](double dt) {
    Vec x{1.0};
    for (long k = 0; k < std::lround(1.0 / dt); ++k) rk4_step([](const Vec& v) { return Vec{-v[0]}; }, x, dt);
    return std::abs(x[0] - std::exp(-1.0));
  };
  const double ratio = rk4_err(0.1) / rk4_err(0.05);

  std::mt19937_64 rng(10);
  double recon = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Mat a = oracle::random_symmetric(2 + static_cast<std::size_t>(t % 7), rng);
    const auto e = sym_eig(a);
    Mat lam(a.rows(), a.rows());
    for (std::size_t k = 0; k < a.rows(); ++k) lam(k, k) = e.values[k];
    recon = std::max(recon, max_abs(e.vectors * lam * e.vectors.transpose() - a) / max_abs(a));
  }

  int compared = 0, disagree = 0;
  while (compared < 200) {
    const std::size_t n = 1 + static_cast<std::size_t>(compared % 4);
    Mat a = oracle::random_matrix(n, n, rng, 2.0);
    for (std::size_t i = 0; i < n; ++i) a(i, i) -= 1.0;
    const Vec minors = oracle::hurwitz_minors(oracle::char_poly(a));
    if (std::any_of(minors.begin(), minors.end(), [](double m) { return std::abs(m) < 1e-8; })) continue;
    ++compared;
    if (is_hurwitz(a).hurwitz() != oracle::routh_hurwitz(a)) ++disagree;
  }
  return {ratio >= 12 && ratio <= 20 && recon <= 1e-9 && disagree == 0,
          "rk4 ratio=" + fmt("%.3f", ratio) + " jacobi recon=" + fmt("%.2g", recon) + " hurwitz disagreements=" +
              std::to_string(disagree) + "/200"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;  // 0: no runtime limit
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "two-state boundary family", 1, boundary_example},
      {2, "five-state worked example", 1, worked_example},
      {3, "closed-form test vs search oracle", 60, oracle_equivalence},
      {4, "steady-state ACE zeroing in simulation", 0, steady_state_zeroing},
      {5, "full vs reduced gap shrinks with tau", 0, two_time_scale},
      {6, "ideal-bias decoupling", 5, decoupling},
      {7, "sensitivity peak formula", 10, sensitivity_peak},
      {8, "bias margin monotone in kappa", 0, margin_monotonicity},
      {9, "Lyapunov decrease along reduced runs", 0, lyapunov_decrease_along_runs},
      {10, "numerics self-checks", 0, numerics_self_checks},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0 && secs >= c.budget_s) {
      o.pass = false;
      o.detail += " [over " + fmt("%gs", c.budget_s) + " budget]";
    }
    if (!o.pass) ++failures;
    std::printf("criterion %2d %-40s %s  %7.2fs  %s\n", c.id, c.name, o.pass ? "PASS" : "FAIL", secs, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures;
}
