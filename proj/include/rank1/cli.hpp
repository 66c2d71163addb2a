#pragma once

/**
 * @file cli.hpp
 * @brief Subcommands of the rank1agc tool, callable in-process.
 *
 * Exit codes: 0 success (check: stable, svd-cond: satisfied, feasibility:
 * all areas feasible), 1 negative verdict, 2 input or precondition error,
 * 3 non-finite simulation state.
 */

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "rank1/agc_model.hpp"
#include "rank1/agc_reduced.hpp"
#include "rank1/config.hpp"
#include "rank1/diagstab.hpp"
#include "rank1/error.hpp"
#include "rank1/numerics.hpp"
#include "rank1/sim.hpp"

namespace rank1::cli {

inline constexpr int kOk = 0;
inline constexpr int kNegative = 1;
inline constexpr int kInputError = 2;
inline constexpr int kNonFinite = 3;

struct Options {
  std::string config;
  std::string out;
  std::string mode = "full";
  std::size_t jobs = 1;
  std::optional<unsigned long long> seed;
  std::optional<std::size_t> area;   // 1-based
  std::optional<std::size_t> cross;  // 1-based
  std::optional<std::string> delta, x, y;
};

/// stderr logger; level from RANK1_LOG (debug | info), warnings otherwise.
inline std::shared_ptr<spdlog::logger> logger() {
  static const auto log = [] {
    auto l = spdlog::get("rank1");
    if (!l) l = spdlog::stderr_logger_mt("rank1");
    l->set_pattern("[%l] %v");
    const char* env = std::getenv("RANK1_LOG");
    const std::string level = env ? env : "";
    if (level == "debug") l->set_level(spdlog::level::debug);
    else if (level == "info") l->set_level(spdlog::level::info);
    else l->set_level(spdlog::level::warn);
    return l;
  }();
  return log;
}

namespace detail {

inline Vec parse_list(const std::string& text, const char* what) {
  Vec out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (item.empty() || end == item.c_str() || *end != '\0') throw Error(Errc::invalid_input, std::string("bad number in --") + what + ": '" + item + "'");
    out.push_back(v);
  }
  return out;
}

/// Destination stream: the --out file when given, else `fallback`.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : os_(&fallback) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw Error(Errc::invalid_input, "cannot write '" + path + "'");
      os_ = &file_;
    }
  }
  std::ostream& get() { return *os_; }

 private:
  std::ofstream file_;
  std::ostream* os_;
};

inline Rank1System rank1_input(const Options& o) {
  if (!o.config.empty()) return parse_rank1(read_json_file(o.config));
  if (!o.delta || !o.x || !o.y) throw Error(Errc::invalid_input, "give --config or all of --delta, --x, --y");
  Rank1System sys{parse_list(*o.delta, "delta"), parse_list(*o.x, "x"), parse_list(*o.y, "y")};
  sys.validate();
  return sys;
}

inline ConfigDoc config_input(const Options& o) {
  if (o.config.empty()) throw Error(Errc::invalid_input, "--config is required");
  auto doc = load_config(o.config);
  if (o.seed) doc.sim.seed = *o.seed;
  return doc;
}

/// Runs f(0..n-1) on up to `jobs` threads; results land by index.
template <typename F>
void parallel_for(std::size_t n, std::size_t jobs, F&& f) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(n);
  for (std::size_t w = 0; w < jobs; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += jobs) {
        try {
          f(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline Json nullable(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace detail

// ---------------------------------------------------------------------------

inline int cmd_check(const Options& o, std::ostream& out) {
  const auto sys = detail::rank1_input(o);
  const auto rep = check_rank1(sys);
  Json j = {{"stable", rep.stable},
            {"boundary", rep.boundary},
            {"condition_sum", condition_sum(sys)},
            {"margin_mu", rep.margin_mu},
            {"certificate_d", nullptr},
            {"slack", nullptr}};
  if (rep.stable) {
    try {
      const auto cert = certificate(sys);
      j["certificate_d"] = *cert.certificate_d;
      j["slack"] = cert.slack;
    } catch (const Error& e) {
      if (e.code() != Errc::hypothesis_violated) throw;
      j["certificate_note"] = "zero entries in x or y: verdict only";
    }
  }
  detail::Sink(o.out, out).get() << j.dump(2) << '\n';
  logger()->info("check: N = {}, stable = {}", sys.size(), rep.stable);
  return rep.stable ? kOk : kNegative;
}

inline int cmd_perturb(const Options& o, std::ostream& out) {
  if (o.config.empty()) throw Error(Errc::invalid_input, "--config is required");
  auto doc = parse_perturb(read_json_file(o.config));
  const double sigma_max = perturbation_bound(doc.psys);
  const Vec d = *certificate(doc.psys.base).certificate_d;
  const SigmaGrid grid = doc.grid.value_or(SigmaGrid{-2.0 * sigma_max, 2.0 * sigma_max, 41});
  logger()->info("perturb: sigma_max = {:.17g}", sigma_max);

  detail::Sink sink(o.out, out);
  auto& os = sink.get();
  os << "sigma,lambda_max,certified,lyap_negative,sigma_max\n" << std::setprecision(17);
  for (std::size_t k = 0; k < grid.steps; ++k) {
    PerturbedSystem p = doc.psys;
    p.sigma = grid.lo + (grid.hi - grid.lo) * static_cast<double>(k) / static_cast<double>(grid.steps - 1);
    const double lmax = lambda_max(lyap_diag(p.matrix(), d));
    os << p.sigma << ',' << lmax << ',' << (std::abs(p.sigma) < sigma_max ? 1 : 0) << ',' << (lmax < 0.0 ? 1 : 0) << ','
       << sigma_max << '\n';
  }
  return kOk;
}

inline int cmd_svd_cond(const Options& o, std::ostream& out) {
  if (o.config.empty()) throw Error(Errc::invalid_input, "--config is required");
  const auto doc = parse_svd_doc(read_json_file(o.config));
  const auto r = svd_condition(doc.delta, doc.s);
  Json j = {{"applicable", r.applicable}, {"satisfied", r.satisfied}, {"transposed", r.transposed},
            {"rho", r.rho},               {"lhs_sigma2", r.lhs},        {"rhs", r.rhs},
            {"sigma1", r.sigma1},         {"certificate_d", nullptr}};
  if (r.certificate_d) {
    j["certificate_d"] = *r.certificate_d;
    Mat a = doc.s;
    for (std::size_t i = 0; i < a.rows(); ++i) a(i, i) -= doc.delta[i];
    j["lyap_max"] = lambda_max(lyap_diag(a, *r.certificate_d));
  }
  detail::Sink(o.out, out).get() << j.dump(2) << '\n';
  return r.satisfied ? kOk : kNegative;
}

struct ScenarioResult {
  std::optional<double> tau;
  std::optional<SimTrace> full;
  std::optional<SimTrace> reduced;
  Json summary;
};

namespace detail {

inline double final_max_abs(const SimTrace& tr, const std::string& prefix, std::size_t n) {
  double m = 0.0;
  for (std::size_t k = 0; k < n; ++k) m = std::max(m, std::abs(tr.column(prefix + std::to_string(k + 1)).back()));
  return m;
}

/// First recorded time after which max |ACE| stays below `tol`.
inline std::optional<double> settle_time(const SimTrace& tr, std::size_t n, double tol) {
  std::optional<double> t;
  for (std::size_t r = 0; r < tr.rows(); ++r) {
    double m = 0.0;
    for (std::size_t k = 0; k < n; ++k) m = std::max(m, std::abs(tr.column("ace_" + std::to_string(k + 1))[r]));
    if (m >= tol) t.reset();
    else if (!t) t = tr.times[r];
  }
  return t;
}

inline ScenarioResult run_scenario(const ConfigDoc& doc, std::optional<double> tau, const std::string& mode) {
  ScenarioResult res;
  res.tau = tau;
  NetworkSpec net = doc.net;
  if (tau)
    for (auto& a : net.areas) a.agc_tc = *tau;
  const std::size_t n = net.area_count();
  Json s = {{"tau", nullable(tau)}, {"seed", doc.sim.seed}, {"warnings", Json::array()}};

  if (mode == "full" || mode == "both") {
    res.full = run_full(net, doc.sim, pre_disturbance_state(net));
    const auto& tr = *res.full;
    for (const auto& w : tr.warnings) s["warnings"].push_back(w);
    double du_gap = 0.0;
    Vec ld = net.load_dev();
    for (std::size_t k = 0; k < n; ++k) {
      double du = 0.0;
      for (std::size_t i = 0; i < net.areas[k].generators.size(); ++i)
        du += tr.column("u_" + std::to_string(k + 1) + "_" + std::to_string(i + 1)).back() - net.areas[k].generators[i].base_setpoint;
      du_gap = std::max(du_gap, std::abs(du - ld[k]));
    }
    s["full"] = {{"final_abs_ace", final_max_abs(tr, "ace_", n)},
                 {"final_abs_df", final_max_abs(tr, "df_", n)},
                 {"final_abs_dni", final_max_abs(tr, "dni_", n)},
                 {"final_abs_du_minus_load", du_gap},
                 {"settle_time_ace_1e-4", nullable(settle_time(tr, n, 1e-4))}};
  }
  if (mode == "reduced" || mode == "both") {
    const auto model = build_reduced(net);
    SimConfig rc = doc.sim;
    rc.dt = doc.reduced_dt.value_or(default_reduced_dt(model));
    rc.record_stride = 1;
    res.reduced = run_reduced(model, rc, Vec(n, 0.0));
    s["reduced"] = {{"final_abs_ace", final_max_abs(*res.reduced, "ace_", n)}, {"dt", rc.dt}};
  }
  if (res.full && res.reduced) {
    const double burn_in = 10.0 * net.plant_time_constant_range().second;
    std::vector<std::string> cols;
    for (std::size_t k = 0; k < n; ++k) cols.push_back("eta_" + std::to_string(k + 1));
    double sup = 0.0, l2 = 0.0;
    for (const auto& g : compare_traces(*res.full, *res.reduced, cols, burn_in)) {
      sup = std::max(sup, g.sup_gap);
      l2 = std::max(l2, g.l2_gap);
    }
    s["eta_gap"] = {{"burn_in", burn_in}, {"sup", sup}, {"l2", l2}};
  }
  res.summary = std::move(s);
  return res;
}

inline std::string tau_suffix(const std::optional<double>& tau) {
  if (!tau) return "";
  std::ostringstream os;
  os << "_tau" << *tau;
  return os.str();
}

}  // namespace detail

inline int cmd_simulate(const Options& o, std::ostream& out) {
  if (o.mode != "full" && o.mode != "reduced" && o.mode != "both")
    throw Error(Errc::invalid_input, "--mode must be full, reduced or both");
  const auto doc = detail::config_input(o);
  std::vector<std::optional<double>> taus;
  if (doc.studies.taus.empty()) taus.emplace_back();
  for (double t : doc.studies.taus) taus.emplace_back(t);

  std::vector<ScenarioResult> results(taus.size());
  detail::parallel_for(taus.size(), o.jobs, [&](std::size_t i) {
    logger()->debug("simulate: scenario {} started", i + 1);
    results[i] = detail::run_scenario(doc, taus[i], o.mode);
  });

  if (!o.out.empty()) std::filesystem::create_directories(o.out);
  Json summary = {{"mode", o.mode}, {"scenarios", Json::array()}};
  for (const auto& r : results) {
    for (const auto& w : r.summary["warnings"]) logger()->warn("{}", w.get<std::string>());
    if (!o.out.empty()) {
      const std::filesystem::path dir(o.out);
      const std::string suffix = detail::tau_suffix(r.tau);
      if (r.full) {
        std::ofstream f(dir / ("full" + suffix + ".csv"));
        r.full->write_csv(f);
      }
      if (r.reduced) {
        std::ofstream f(dir / ("reduced" + suffix + ".csv"));
        r.reduced->write_csv(f);
      }
    }
    summary["scenarios"].push_back(r.summary);
  }
  out << summary.dump(2) << '\n';
  return kOk;
}

inline int cmd_bode(const Options& o, std::ostream& out) {
  const auto doc = detail::config_input(o);
  const std::size_t n = doc.net.area_count();
  auto check_area = [n](std::size_t id) {
    if (id < 1 || id > n) throw Error(Errc::invalid_input, "area out of range 1.." + std::to_string(n));
    return id - 1;
  };
  const std::size_t i = o.area ? check_area(*o.area) : doc.studies.bode.area;
  const std::size_t j = o.cross ? check_area(*o.cross) : (o.area ? i : doc.studies.bode.cross);
  const auto model = build_reduced(doc.net);
  const double tau_prime = rank1::detail::uniform_tau(model);
  const double tau_phys = tau_prime * model.tau_scale;  // AGC time constant, s

  const auto& b = doc.studies.bode;
  const double wlo = b.omega_min > 0.0 ? b.omega_min : 1e-4 / tau_phys;
  const double whi = b.omega_max > 0.0 ? b.omega_max : 1e4 / tau_phys;
  const auto decades = std::log10(whi / wlo);
  const auto count = static_cast<std::size_t>(std::ceil(decades * static_cast<double>(b.points_per_decade))) + 1;
  const double formula = i == j ? hinf_ii(model, i) : std::nan("");

  detail::Sink sink(o.out, out);
  auto& os = sink.get();
  os << "omega,magnitude,magnitude_db,phase_deg,closed_form_magnitude,hinf_formula\n" << std::setprecision(17);
  double peak = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    const double w = wlo * std::pow(10.0, decades * static_cast<double>(k) / static_cast<double>(count - 1));
    const Complex s = sensitivity(model, i, j, w * model.tau_scale);
    const Complex c = sensitivity_closed_form(model, i, j, w * model.tau_scale);
    const double mag = std::abs(s);
    peak = std::max(peak, mag);
    os << w << ',' << mag << ',' << 20.0 * std::log10(mag) << ',' << std::arg(s) * 180.0 / std::numbers::pi << ','
       << std::abs(c) << ',' << formula << '\n';
  }
  logger()->info("bode: S_{}{} grid peak {:.6g}, formula {:.6g}", i + 1, j + 1, peak, formula);
  return kOk;
}

inline int cmd_margin_study(const Options& o, std::ostream& out) {
  const auto doc = detail::config_input(o);
  const auto model = build_reduced(doc.net);
  Vec kappas = doc.studies.kappas;
  if (kappas.empty()) kappas = {0.25, 0.5, 1.0, 2.0, 4.0};
  std::sort(kappas.begin(), kappas.end());

  detail::Sink sink(o.out, out);
  auto& os = sink.get();
  os << "kappa,q_min_eig,quoted_bound,quoted_bound_holds,alt_bound,alt_bound_holds\n" << std::setprecision(17);
  for (double k : kappas) {
    const auto m = margin_study(model, k);
    os << m.kappa << ',' << m.q_min_eig << ',' << m.quoted_bound << ',' << (m.quoted_bound_holds() ? 1 : 0) << ',' << m.alt_bound
       << ',' << (m.alt_bound_holds() ? 1 : 0) << '\n';
  }
  return kOk;
}

inline int cmd_feasibility(const Options& o, std::ostream& out) {
  const auto doc = detail::config_input(o);
  const auto model = build_reduced(doc.net);
  const auto ok = check_feasibility(doc.net);
  Json areas = Json::array();
  bool all = true;
  for (std::size_t k = 0; k < model.size(); ++k) {
    const auto [lo, hi] = model.phi[k].capacity();
    const auto [plo, phi_hi] = model.phi[k].preimage();
    Json a = {{"area", k + 1},
              {"load_dev", model.load_dev[k]},
              {"capacity", {lo, hi}},
              {"feasible", bool(ok[k])},
              {"preimage", {plo, phi_hi}},
              {"eta_bar", nullptr}};
    if (ok[k]) a["eta_bar"] = phi_invert(model, k, model.load_dev[k]);
    all = all && ok[k];
    areas.push_back(a);
  }
  detail::Sink(o.out, out).get() << Json{{"all_feasible", all}, {"areas", areas}}.dump(2) << '\n';
  return all ? kOk : kNegative;
}

// ---------------------------------------------------------------------------

/// Parses argv and dispatches. Errors are reported on `err`.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rank-1 diagonal stability and multi-area AGC analysis"};
  app.require_subcommand(1);
  Options o;
  std::size_t seed = 0, area = 0, cross = 0;
  std::string delta, x, y;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "input JSON document");
    sub->add_option("--out", o.out, "output file (directory for simulate)");
    sub->add_option("--seed", seed, "seed recorded with the run");
  };
  auto* check = app.add_subcommand("check", "rank-1 diagonal stability test with certificate");
  add_common(check);
  check->add_option("--delta", delta, "comma-separated positive diagonal");
  check->add_option("--x", x, "comma-separated x");
  check->add_option("--y", y, "comma-separated nonnegative y");
  auto* perturb = app.add_subcommand("perturb", "perturbation bound and sigma scan");
  add_common(perturb);
  auto* svdc = app.add_subcommand("svd-cond", "dominant singular mode condition");
  add_common(svdc);
  auto* simulate = app.add_subcommand("simulate", "full and/or reduced closed-loop simulation");
  add_common(simulate);
  simulate->add_option("--mode", o.mode, "full | reduced | both")->check(CLI::IsMember({"full", "reduced", "both"}));
  simulate->add_option("--jobs", o.jobs, "parallel scenarios")->check(CLI::PositiveNumber);
  auto* bode = app.add_subcommand("bode", "sensitivity frequency response");
  add_common(bode);
  bode->add_option("--area", area, "output area i (1-based)");
  bode->add_option("--cross", cross, "input area j (1-based)");
  auto* margin = app.add_subcommand("margin-study", "uniform bias margin over kappa");
  add_common(margin);
  margin->add_option("--jobs", o.jobs, "accepted for symmetry");
  auto* feas = app.add_subcommand("feasibility", "regulation capacity per area");
  add_common(feas);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }

  auto* sub = app.get_subcommands().front();
  if (sub->count("--seed")) o.seed = seed;
  if (sub->get_name() == "check") {
    if (check->count("--delta")) o.delta = delta;
    if (check->count("--x")) o.x = x;
    if (check->count("--y")) o.y = y;
  }
  if (sub->get_name() == "bode") {
    if (bode->count("--area")) o.area = area;
    if (bode->count("--cross")) o.cross = cross;
  }

  try {
    const std::string name = sub->get_name();
    if (name == "check") return cmd_check(o, out);
    if (name == "perturb") return cmd_perturb(o, out);
    if (name == "svd-cond") return cmd_svd_cond(o, out);
    if (name == "simulate") return cmd_simulate(o, out);
    if (name == "bode") return cmd_bode(o, out);
    if (name == "margin-study") return cmd_margin_study(o, out);
    return cmd_feasibility(o, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.code() == Errc::non_finite_state ? kNonFinite : kInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
}

}  // namespace rank1::cli
