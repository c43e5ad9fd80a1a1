#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace mcrb {

using Scalar = double;
using Index = Eigen::Index;

template <typename T = Scalar>
using MatrixX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T = Scalar>
using VectorX = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using Matrix = MatrixX<>;
using Vector = VectorX<>;
using ComplexMatrix = MatrixX<std::complex<Scalar>>;
using ComplexVector = VectorX<std::complex<Scalar>>;

/// Columns are observations; rows are (real) observation components.
using Observations = Matrix;
using ObservationRef = Eigen::Ref<const Vector>;

inline constexpr Scalar kInf = std::numeric_limits<Scalar>::infinity();

/// How an expectation (or a matrix built from one) was obtained.
enum class Provenance { analytic, quadrature, monte_carlo, sample };

inline const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::analytic: return "analytic";
    case Provenance::quadrature: return "quadrature";
    case Provenance::monte_carlo: return "monte-carlo";
    case Provenance::sample: return "sample";
  }
  return "unknown";
}

/// Open box Θ = (lower_0, upper_0) × ... × (lower_{d-1}, upper_{d-1}).
struct Domain {
  Vector lower;
  Vector upper;

  static Domain positive(Index d) {
    return {Vector::Zero(d), Vector::Constant(d, kInf)};
  }
  static Domain unbounded(Index d) {
    return {Vector::Constant(d, -kInf), Vector::Constant(d, kInf)};
  }

  Index dim() const { return lower.size(); }

  bool contains(const Vector& theta) const {
    if (theta.size() != dim()) return false;
    for (Index i = 0; i < dim(); ++i) {
      if (!(theta[i] > lower[i] && theta[i] < upper[i])) return false;
    }
    return true;
  }
};

// Symmetric part (X + Xᵀ)/2.
template <typename Derived>
auto symmetrize(const Eigen::MatrixBase<Derived>& x) {
  using Plain = typename Derived::PlainObject;
  Plain out = (x + x.adjoint()) / typename Derived::Scalar(2);
  return out;
}

/// A⁻¹ B A⁻¹ for symmetric A, symmetrized.
template <typename DA, typename DB>
auto sandwich_product(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  using Plain = typename DA::PlainObject;
  Eigen::FullPivLU<Plain> lu(a);
  Plain a_inv = lu.inverse();
  Plain c = a_inv * b * a_inv.adjoint();
  return symmetrize(c);
}

// Smallest/largest singular value ratio; 0 for singular input.
template <typename Derived>
typename Derived::RealScalar inverse_condition(const Eigen::MatrixBase<Derived>& a) {
  using Real = typename Derived::RealScalar;
  Eigen::JacobiSVD<typename Derived::PlainObject> svd(a);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s[0] == Real(0)) return Real(0);
  return s[s.size() - 1] / s[0];
}

}  // namespace mcrb
