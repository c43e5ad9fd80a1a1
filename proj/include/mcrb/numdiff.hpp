#pragma once

#include "mcrb/types.hpp"

#include <cmath>
#include <limits>

namespace mcrb::numdiff {

inline Scalar step(Scalar x, Scalar power) {
  return std::max(Scalar(1), std::abs(x)) *
         std::pow(std::numeric_limits<Scalar>::epsilon(), power);
}

/// Central-difference gradient, h_i = max(1, |x_i|)·ε^{1/3}.
template <typename F>
Vector gradient(F&& f, const Vector& x) {
  Vector g(x.size());
  Vector xp = x;
  for (Index i = 0; i < x.size(); ++i) {
    const Scalar h = step(x[i], 1.0 / 3.0);
    xp[i] = x[i] + h;
    const Scalar fp = f(xp);
    xp[i] = x[i] - h;
    const Scalar fm = f(xp);
    xp[i] = x[i];
    g[i] = (fp - fm) / (2 * h);
  }
  return g;
}

/// Hessian as the central-difference Jacobian of an analytic gradient.
template <typename G>
Matrix jacobian_of_gradient(G&& grad, const Vector& x) {
  const Index d = x.size();
  Matrix h(d, d);
  Vector xp = x;
  for (Index j = 0; j < d; ++j) {
    const Scalar s = step(x[j], 1.0 / 3.0);
    xp[j] = x[j] + s;
    const Vector gp = grad(xp);
    xp[j] = x[j] - s;
    const Vector gm = grad(xp);
    xp[j] = x[j];
    h.col(j) = (gp - gm) / (2 * s);
  }
  return symmetrize(h);
}

/// Hessian from function values by nested central differences.
/// Uses h ∝ ε^{1/4}: the second difference divides by h².
template <typename F>
Matrix hessian(F&& f, const Vector& x) {
  const Index d = x.size();
  Matrix h(d, d);
  Vector xp = x;
  const Scalar f0 = f(x);
  for (Index i = 0; i < d; ++i) {
    const Scalar hi = step(x[i], 0.25);
    xp[i] = x[i] + hi;
    const Scalar fp = f(xp);
    xp[i] = x[i] - hi;
    const Scalar fm = f(xp);
    xp[i] = x[i];
    h(i, i) = (fp - 2 * f0 + fm) / (hi * hi);
    for (Index j = 0; j < i; ++j) {
      const Scalar hj = step(x[j], 0.25);
      auto eval = [&](Scalar si, Scalar sj) {
        xp[i] = x[i] + si * hi;
        xp[j] = x[j] + sj * hj;
        const Scalar v = f(xp);
        xp[i] = x[i];
        xp[j] = x[j];
        return v;
      };
      const Scalar v = (eval(1, 1) - eval(1, -1) - eval(-1, 1) + eval(-1, -1)) / (4 * hi * hj);
      h(i, j) = v;
      h(j, i) = v;
    }
  }
  return h;
}

}  // namespace mcrb::numdiff
