#pragma once

#include "mcrb/types.hpp"

#include <functional>

namespace mcrb::quadrature {

/// Gauss–Hermite rule for the standard normal weight: Σ w_k g(z_k) ≈ E[g(Z)], Z ~ N(0, 1).
struct HermiteRule {
  Vector nodes;
  Vector weights;
};

/// Golub–Welsch on the probabilists' Hermite Jacobi matrix. Exact for
/// polynomials of degree ≤ 2n − 1.
HermiteRule gauss_hermite(int n);

struct Result {
  Vector value;
  Vector error;  // per-component estimate
  std::size_t evaluations = 0;
};

using VectorIntegrand = std::function<Vector(Scalar)>;

/// Adaptive Gauss–Kronrod (61-point) over [a, b] applied component-wise
/// to a vector-valued integrand of length `components`.
Result integrate_interval(const VectorIntegrand& f, Index components, Scalar a, Scalar b,
                          Scalar relative_tolerance = 1e-13);

using PointIntegrand = std::function<Vector(const ObservationRef&)>;

/// E[g(X)] for X ~ N(mean, cov) by a tensor-product Gauss–Hermite rule with
/// `nodes_per_axis` nodes on each principal axis.
Result gaussian_cubature(const PointIntegrand& g, Index components, const Vector& mean,
                         const Matrix& cov, int nodes_per_axis);

/// Largest n in [3, 20] with n^dim ≤ max_points.
int default_hermite_nodes(Index dim, double max_points = 1e5);

}  // namespace mcrb::quadrature
