#pragma once

#include "mcrb/models.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mcrb {

/// A = E_p[∇θ∇θᵀ ln f] and B = E_p[∇θ ln f ∇θᵀ ln f] at one parameter point.
struct SandwichPair {
  Matrix a;
  Matrix b;
  Vector at;
  Provenance provenance = Provenance::analytic;
  /// Largest standard error (Monte Carlo) or quadrature error estimate over the entries.
  Scalar method_error = 0;
  /// Standard errors of the entries of A and B (zero for exact paths).
  Matrix a_std_error;
  Matrix b_std_error;
  /// Condition number of A (2-norm).
  Scalar condition = 1;
  std::string detail;
};

struct BoundReport {
  Vector theta0;
  SandwichPair sandwich;
  /// A⁻¹BA⁻¹, per sample.
  Matrix c_per_sample;
  /// c_per_sample / M.
  Matrix mcrb;
  Index m = 1;
  std::optional<Vector> r;
  std::optional<Matrix> lb;
  std::optional<Matrix> crb;
  std::vector<std::string> warnings;
};

struct PseudoTrueOptions {
  ExpectationOptions expectation;
  /// Number of multi-start initializations (≥ 5 enforces A1 numerically).
  int starts = 5;
  /// Spacing of the starts in free (log) coordinates.
  Scalar start_spread = 0.5;
  Scalar agreement_tolerance = 1e-6;
  Scalar gradient_tolerance = 1e-10;
};

struct PseudoTrueResult {
  Vector theta0;
  /// Monte Carlo standard error (sandwich-based); zero for exact paths.
  Vector std_error;
  Method method = Method::quadrature;
  std::vector<Vector> start_results;
  std::string detail;
};

/// Minimizer of D(p‖f_θ), i.e. of the cross-entropy −E_p[ln f_θ].
/// Throws NonUniqueError when multi-start runs disagree, BoundaryError when
/// the minimizer leaves the interior of Θ.
PseudoTrueResult pseudo_true(const ModelPair& pair, const Vector& init, const PseudoTrueOptions& options = {});

/// A and B at theta0 (analytic, quadrature or Monte Carlo). Throws
/// RegularityError when A is singular (smallest singular value < 1e-10·‖A‖).
SandwichPair sandwich_matrices(const ModelPair& pair, const Vector& theta0, const ExpectationOptions& options);

/// Checks A2 and fills `condition`.
void check_regularity(SandwichPair& sandwich);

/// c = A⁻¹BA⁻¹ and mcrb = c / M, symmetrized; warns when cond(A) > 1e12.
BoundReport mcrb_from(const SandwichPair& sandwich, Index m);

/// True-model CRB in the shared parameter (built-ins only).
Matrix matched_crb(const ModelPair& pair, const Vector& theta_bar, Index m);

/// r = θ̄ − θ0, lb = mcrb + r rᵀ.
BoundReport nested_lb(BoundReport report, const NestedSpec& nested);

struct SampleSandwich {
  Matrix a;
  Matrix b;
  Matrix c;  // A_M⁻¹ B_M A_M⁻¹ (per sample; divide by M for the MCRB estimate)
};

/// Per-sample averages of Hessians and score outer products at theta_hat.
SampleSandwich sample_sandwich(const Observations& data, const AssumedFamily& family, const Vector& theta_hat);

/// Full report for a pair: θ0, sandwich, MCRB, and (when defined) LB and CRB.
BoundReport compute_bounds(const ModelPair& pair, Index m, const ExpectationOptions& options);

/// `key = value` lines, matrices flattened row-major with _ij suffixes.
std::string to_key_value(const BoundReport& report);
std::string bound_csv_header(const BoundReport& report);
std::string bound_csv_row(const BoundReport& report);

}  // namespace mcrb
