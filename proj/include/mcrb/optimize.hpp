#pragma once

#include "mcrb/types.hpp"

#include <functional>
#include <optional>

namespace mcrb::optim {

/// Smooth bijection between the open box Θ and ℝ^d, component-wise:
/// log for half-bounded intervals, logistic for bounded ones, identity otherwise.
class Reparam {
 public:
  explicit Reparam(Domain domain) : domain_(std::move(domain)) {}

  Vector to_free(const Vector& theta) const;
  Vector to_box(const Vector& phi) const;
  /// dθ_i/dφ_i (the map is diagonal).
  Vector jacobian(const Vector& phi) const;
  /// d²θ_i/dφ_i².
  Vector second_derivative(const Vector& phi) const;

  const Domain& domain() const { return domain_; }

 private:
  Domain domain_;
};

using Objective = std::function<Scalar(const Vector&)>;
using Gradient = std::function<Vector(const Vector&)>;

struct Options {
  Scalar gradient_tolerance = 1e-10;
  int max_iterations = 500;
};

struct Result {
  Vector x;
  Scalar value = 0;
  Vector gradient;
  int iterations = 0;
  bool converged = false;
};

/// Quasi-Newton (BFGS) minimization with Armijo backtracking.
Result bfgs_minimize(const Objective& f, const Gradient& grad, Vector x0, const Options& options = {});

struct Bracket {
  Scalar lo, mid, hi;
};

/// Expands downhill from x0 until f rises on both sides. Empty when the
/// minimum runs off past `max_expansions` doublings.
std::optional<Bracket> bracket_minimum(const std::function<Scalar(Scalar)>& f, Scalar x0, Scalar step,
                                       int max_expansions = 60);

struct GoldenResult {
  Scalar x = 0;
  Scalar value = 0;
  int iterations = 0;
};

GoldenResult golden_section(const std::function<Scalar(Scalar)>& f, Scalar lo, Scalar hi,
                            Scalar tolerance = 1e-10, int max_iterations = 300);

/// Objective on θ ∈ Θ. `hessian` is optional; the final Newton polish falls
/// back to differentiating `gradient`.
struct BoxObjective {
  std::function<Scalar(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  std::function<Matrix(const Vector&)> hessian;
};

struct BoxResult {
  Vector theta;
  Scalar value = 0;
  /// Gradient with respect to the free (reparameterized) coordinates.
  Vector free_gradient;
  int iterations = 0;
  bool converged = false;
  /// The minimizer ran off to the edge of Θ.
  bool boundary = false;
};

/// Minimizes over the open box Θ through Reparam. d = 1 uses bracketing plus
/// golden-section search; d > 1 uses BFGS. Both finish with Newton steps.
BoxResult minimize_in_box(const BoxObjective& objective, const Domain& domain, const Vector& init,
                          const Options& options = {});

}  // namespace mcrb::optim
