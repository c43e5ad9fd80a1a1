#pragma once

// Template definitions for estimators.hpp.

#include "mcrb/errors.hpp"

#include <fmt/format.h>

namespace mcrb {

template <typename T>
ScatterEstimate<T> cmml_scatter(const MatrixX<std::complex<T>>& data) {
  using Complex = std::complex<T>;
  const Index n = data.rows();
  const Index m = data.cols();
  if (n < 1) throw DomainError("cmml_scatter: observations must have at least one component");
  if (m < n) throw DomainError(fmt::format("cmml_scatter: insufficient data, M = {} < N = {}", m, n));

  const MatrixX<Complex> s = symmetrize(MatrixX<Complex>(data * data.adjoint()));
  const T total = s.trace().real();  // Σ xᴴx
  if (!(total > T(0)) || !std::isfinite(total)) throw NumericError("cmml_scatter: degenerate data (zero energy)");

  ScatterEstimate<T> out;
  out.sigma_hat = s * (T(n) / total);
  out.sigma_hat *= T(n) / out.sigma_hat.trace().real();

  Eigen::LLT<MatrixX<Complex>> llt(out.sigma_hat);
  if (llt.info() != Eigen::Success || inverse_condition(out.sigma_hat) < T(1e-12)) {
    throw NumericError("cmml_scatter: degenerate data, scatter estimate is singular");
  }
  out.sigma2_hat = llt.solve(s).trace().real() / (T(n) * T(m));
  return out;
}

}  // namespace mcrb
