#include "mcrb/quadrature.hpp"

#include "mcrb/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>

namespace mcrb::quadrature {

HermiteRule gauss_hermite(int n) {
  if (n < 1) throw DomainError("gauss_hermite: need at least one node");
  Matrix jacobi = Matrix::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    jacobi(k, k - 1) = std::sqrt(static_cast<Scalar>(k));
    jacobi(k - 1, k) = jacobi(k, k - 1);
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(jacobi);
  HermiteRule rule;
  rule.nodes = eig.eigenvalues();
  rule.weights = eig.eigenvectors().row(0).array().square().transpose();
  rule.weights /= rule.weights.sum();
  return rule;
}

Result integrate_interval(const VectorIntegrand& f, Index components, Scalar a, Scalar b,
                          Scalar relative_tolerance) {
  using boost::math::quadrature::gauss_kronrod;
  Result out;
  out.value.resize(components);
  out.error.resize(components);
  for (Index k = 0; k < components; ++k) {
    auto component = [&](Scalar x) {
      ++out.evaluations;
      return f(x)[k];
    };
    Scalar err = 0;
    out.value[k] = gauss_kronrod<Scalar, 61>::integrate(component, a, b, 15, relative_tolerance, &err);
    out.error[k] = err;
  }
  return out;
}

int default_hermite_nodes(Index dim, double max_points) {
  int n = 3;
  while (n < 20 && std::pow(static_cast<double>(n + 1), static_cast<double>(dim)) <= max_points) ++n;
  return n;
}

Result gaussian_cubature(const PointIntegrand& g, Index components, const Vector& mean,
                         const Matrix& cov, int nodes_per_axis) {
  const Index dim = mean.size();
  if (cov.rows() != dim || cov.cols() != dim) throw DomainError("gaussian_cubature: shape mismatch");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.eigenvalues().minCoeff() < 0) throw DomainError("gaussian_cubature: covariance not PSD");
  const Matrix root = eig.eigenvectors() * eig.eigenvalues().cwiseSqrt().asDiagonal();
  const HermiteRule rule = gauss_hermite(nodes_per_axis);

  Result out;
  out.value = Vector::Zero(components);
  out.error = Vector::Zero(components);
  std::vector<int> idx(static_cast<std::size_t>(dim), 0);
  Vector z(dim);
  Vector x(dim);
  while (true) {
    Scalar w = 1;
    for (Index i = 0; i < dim; ++i) {
      z[i] = rule.nodes[idx[static_cast<std::size_t>(i)]];
      w *= rule.weights[idx[static_cast<std::size_t>(i)]];
    }
    x = mean + root * z;
    out.value += w * g(x);
    ++out.evaluations;
    Index i = 0;
    for (; i < dim; ++i) {
      auto& c = idx[static_cast<std::size_t>(i)];
      if (++c < nodes_per_axis) break;
      c = 0;
    }
    if (i == dim) break;
  }
  return out;
}

}  // namespace mcrb::quadrature
