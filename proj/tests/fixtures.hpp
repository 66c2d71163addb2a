#pragma once

// Small networks shared by the model, simulation and acceptance tests.

#include <cstddef>
#include <vector>

#include "rank1/agc_model.hpp"

namespace fixture {

using rank1::AreaSpec;
using rank1::GeneratorSpec;
using rank1::NetworkSpec;
using rank1::TieLine;

/// Area with `units` identical AGC generators, droop 0.05·units, limits
/// ±`limit` per unit, equal participation. Bias is `bias_factor`·βₖ.
inline AreaSpec area(std::size_t units, double bias_factor, double tau, double load, double limit = 0.5) {
  AreaSpec a;
  for (std::size_t i = 0; i < units; ++i) {
    GeneratorSpec g;
    g.droop_r = 0.05 * static_cast<double>(units);
    g.turbine_tc = 0.5;
    g.base_setpoint = 0.5;
    g.lower = 0.5 - limit;
    g.upper = 0.5 + limit;
    g.participation = 1.0 / static_cast<double>(units);
    g.in_agc = true;
    a.generators.push_back(g);
  }
  a.agc_tc = tau;
  a.load_dev = load;
  a.bias_b = bias_factor * a.beta();
  return a;
}

inline NetworkSpec network(std::vector<AreaSpec> areas, std::vector<TieLine> ties) {
  NetworkSpec net;
  net.sched_ni.assign(areas.size(), 0.0);
  net.areas = std::move(areas);
  net.ties = std::move(ties);
  net.meas_filter_tc = 1.0;
  return net;
}

/// Two areas, step of `load` in area 1.
inline NetworkSpec two_area(double tau, double load = 0.1, double bias_factor = 1.0) {
  return network({area(2, bias_factor, tau, load), area(2, bias_factor, tau, 0.0)}, {{0, 1, 2.0}});
}

/// Three heterogeneous areas on a ring with a mixed-sign disturbance.
inline NetworkSpec three_area(double tau) {
  auto a1 = area(1, 1.0, tau, 0.0, 0.3);
  auto a2 = area(3, 1.3, tau, 0.12, 0.3);
  auto a3 = area(2, 0.7, tau, -0.05, 0.25);
  a3.inertia_m = 8.0;
  a3.load_damping = 1.5;
  a3.generators[0].droop_r = 0.08;
  a3.generators[1].droop_r = 0.04;
  a3.generators[0].participation = 0.7;
  a3.generators[1].participation = 0.3;
  a3.bias_b = 0.7 * a3.beta();
  return network({a1, a2, a3}, {{0, 1, 1.5}, {1, 2, 1.0}, {0, 2, 0.8}});
}

}  // namespace fixture
