#pragma once

#include "mcrb/models.hpp"

#include <functional>
#include <string>

namespace mcrb {

struct ExpectationResult {
  Vector mean;
  /// Monte Carlo standard error, or the quadrature error estimate.
  Vector std_error;
  Provenance provenance = Provenance::quadrature;
  std::string detail;
};

using PointFunction = std::function<Vector(const ObservationRef&)>;

/// E_p[g(X)] under the true model.
///
/// Quadrature: adaptive Gauss–Kronrod on center ± truncation_sds·spread for
/// scalar truths with a density; tensor Gauss–Hermite for Gaussian truths.
/// Monte Carlo: `draws` samples split into fixed blocks with derived seeds,
/// reduced in block order (identical for any worker count).
ExpectationResult expect(const TrueModel& truth, const PointFunction& g, Index components,
                         const ExpectationOptions& options);

}  // namespace mcrb
