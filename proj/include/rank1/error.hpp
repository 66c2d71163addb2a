#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rank1 {

enum class Errc {
  dimension_mismatch,
  non_finite,
  not_symmetric,
  singular_lyapunov,
  singular,
  invalid_input,
  hypothesis_violated,
  not_diagonally_stable,
  degenerate_e,
  singular_network,
  target_infeasible,
  non_uniform_tau,
  non_finite_state,
  empty_overlap,
  schema,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::non_finite: return "NonFinite";
    case Errc::not_symmetric: return "NotSymmetric";
    case Errc::singular_lyapunov: return "SingularLyapunov";
    case Errc::singular: return "Singular";
    case Errc::invalid_input: return "InvalidInput";
    case Errc::hypothesis_violated: return "HypothesisViolated";
    case Errc::not_diagonally_stable: return "NotDiagonallyStable";
    case Errc::degenerate_e: return "DegenerateE";
    case Errc::singular_network: return "SingularNetwork";
    case Errc::target_infeasible: return "TargetInfeasible";
    case Errc::non_uniform_tau: return "NonUniformTau";
    case Errc::non_finite_state: return "NonFiniteState";
    case Errc::empty_overlap: return "EmptyOverlap";
    case Errc::schema: return "Schema";
  }
  return "Unknown";
}

/// Library error. Every failure path in rank1 throws this type; `code()`
/// identifies the condition without string matching.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  [[nodiscard]] Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace rank1
