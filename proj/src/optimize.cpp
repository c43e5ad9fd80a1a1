#include "mcrb/optimize.hpp"

#include "mcrb/numdiff.hpp"

#include <cmath>

namespace mcrb::optim {

namespace {

enum class Kind { identity, lower, upper, interval };

Kind kind_of(Scalar lo, Scalar hi) {
  const bool has_lo = std::isfinite(lo);
  const bool has_hi = std::isfinite(hi);
  if (has_lo && has_hi) return Kind::interval;
  if (has_lo) return Kind::lower;
  if (has_hi) return Kind::upper;
  return Kind::identity;
}

Scalar sigmoid(Scalar t) {
  return t >= 0 ? 1 / (1 + std::exp(-t)) : std::exp(t) / (1 + std::exp(t));
}

}  // namespace

Vector Reparam::to_free(const Vector& theta) const {
  Vector phi(theta.size());
  for (Index i = 0; i < theta.size(); ++i) {
    const Scalar lo = domain_.lower[i], hi = domain_.upper[i];
    switch (kind_of(lo, hi)) {
      case Kind::identity: phi[i] = theta[i]; break;
      case Kind::lower: phi[i] = std::log(theta[i] - lo); break;
      case Kind::upper: phi[i] = std::log(hi - theta[i]); break;
      case Kind::interval: {
        const Scalar u = (theta[i] - lo) / (hi - lo);
        phi[i] = std::log(u / (1 - u));
        break;
      }
    }
  }
  return phi;
}

Vector Reparam::to_box(const Vector& phi) const {
  Vector theta(phi.size());
  for (Index i = 0; i < phi.size(); ++i) {
    const Scalar lo = domain_.lower[i], hi = domain_.upper[i];
    switch (kind_of(lo, hi)) {
      case Kind::identity: theta[i] = phi[i]; break;
      case Kind::lower: theta[i] = lo + std::exp(phi[i]); break;
      case Kind::upper: theta[i] = hi - std::exp(phi[i]); break;
      case Kind::interval: theta[i] = lo + (hi - lo) * sigmoid(phi[i]); break;
    }
  }
  return theta;
}

Vector Reparam::jacobian(const Vector& phi) const {
  Vector j(phi.size());
  for (Index i = 0; i < phi.size(); ++i) {
    const Scalar lo = domain_.lower[i], hi = domain_.upper[i];
    switch (kind_of(lo, hi)) {
      case Kind::identity: j[i] = 1; break;
      case Kind::lower: j[i] = std::exp(phi[i]); break;
      case Kind::upper: j[i] = -std::exp(phi[i]); break;
      case Kind::interval: {
        const Scalar s = sigmoid(phi[i]);
        j[i] = (hi - lo) * s * (1 - s);
        break;
      }
    }
  }
  return j;
}

Vector Reparam::second_derivative(const Vector& phi) const {
  Vector j(phi.size());
  for (Index i = 0; i < phi.size(); ++i) {
    const Scalar lo = domain_.lower[i], hi = domain_.upper[i];
    switch (kind_of(lo, hi)) {
      case Kind::identity: j[i] = 0; break;
      case Kind::lower: j[i] = std::exp(phi[i]); break;
      case Kind::upper: j[i] = -std::exp(phi[i]); break;
      case Kind::interval: {
        const Scalar s = sigmoid(phi[i]);
        j[i] = (hi - lo) * s * (1 - s) * (1 - 2 * s);
        break;
      }
    }
  }
  return j;
}

Result bfgs_minimize(const Objective& f, const Gradient& grad, Vector x0, const Options& options) {
  const Index d = x0.size();
  Result r;
  r.x = std::move(x0);
  r.value = f(r.x);
  r.gradient = grad(r.x);
  Matrix h_inv = Matrix::Identity(d, d);
  bool scaled = false;

  for (r.iterations = 0; r.iterations < options.max_iterations; ++r.iterations) {
    if (!r.gradient.allFinite() || !std::isfinite(r.value)) return r;
    if (r.gradient.lpNorm<Eigen::Infinity>() <= options.gradient_tolerance) {
      r.converged = true;
      return r;
    }
    Vector dir = -h_inv * r.gradient;
    Scalar slope = r.gradient.dot(dir);
    if (!(slope < 0)) {
      h_inv.setIdentity();
      dir = -r.gradient;
      slope = r.gradient.dot(dir);
    }
    Scalar alpha = 1;
    Vector x_new;
    Scalar f_new = 0;
    bool accepted = false;
    for (int k = 0; k < 80; ++k) {
      x_new = r.x + alpha * dir;
      f_new = f(x_new);
      if (std::isfinite(f_new) && f_new <= r.value + 1e-4 * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      // No decrease representable in floating point: accept only if already flat.
      r.converged = r.gradient.lpNorm<Eigen::Infinity>() <= 1e3 * options.gradient_tolerance;
      return r;
    }
    Vector g_new = grad(x_new);
    const Vector s = x_new - r.x;
    const Vector y = g_new - r.gradient;
    const Scalar sy = s.dot(y);
    if (sy > 1e-300) {
      if (!scaled) {
        h_inv *= sy / y.squaredNorm();
        scaled = true;
      }
      const Scalar rho = 1 / sy;
      const Matrix ident = Matrix::Identity(d, d);
      h_inv = (ident - rho * s * y.transpose()) * h_inv * (ident - rho * y * s.transpose()) +
              rho * s * s.transpose();
    }
    r.x = std::move(x_new);
    r.value = f_new;
    r.gradient = std::move(g_new);
  }
  r.converged = r.gradient.lpNorm<Eigen::Infinity>() <= options.gradient_tolerance;
  return r;
}

std::optional<Bracket> bracket_minimum(const std::function<Scalar(Scalar)>& f, Scalar x0, Scalar step,
                                       int max_expansions) {
  Scalar a = x0, b = x0 + step;
  Scalar fa = f(a), fb = f(b);
  if (fb > fa) {
    std::swap(a, b);
    std::swap(fa, fb);
    step = -step;
  }
  Scalar c = b + step;
  Scalar fc = f(c);
  for (int k = 0; k < max_expansions; ++k) {
    if (fc > fb) {
      return Bracket{std::min(a, c), b, std::max(a, c)};
    }
    step *= 2;
    a = b;
    fa = fb;
    b = c;
    fb = fc;
    c = b + step;
    fc = f(c);
  }
  return std::nullopt;
}

GoldenResult golden_section(const std::function<Scalar(Scalar)>& f, Scalar lo, Scalar hi, Scalar tolerance,
                            int max_iterations) {
  const Scalar inv_phi = (std::sqrt(5.0) - 1) / 2;
  Scalar x1 = hi - inv_phi * (hi - lo);
  Scalar x2 = lo + inv_phi * (hi - lo);
  Scalar f1 = f(x1), f2 = f(x2);
  GoldenResult r;
  for (r.iterations = 0; r.iterations < max_iterations && (hi - lo) > tolerance; ++r.iterations) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = f(x2);
    }
  }
  if (f1 <= f2) {
    r.x = x1;
    r.value = f1;
  } else {
    r.x = x2;
    r.value = f2;
  }
  return r;
}

}  // namespace mcrb::optim

namespace mcrb::optim {

namespace {

constexpr Scalar kFreeLimit = 500;

bool near_edge(const Vector& phi, const Vector& theta, const Domain& domain) {
  for (Index i = 0; i < phi.size(); ++i) {
    if (std::abs(phi[i]) > kFreeLimit && (std::isfinite(domain.lower[i]) || std::isfinite(domain.upper[i]))) {
      return true;
    }
    if (!(theta[i] > domain.lower[i] && theta[i] < domain.upper[i])) return true;
  }
  return false;
}

}  // namespace

BoxResult minimize_in_box(const BoxObjective& objective, const Domain& domain, const Vector& init,
                          const Options& options) {
  const Reparam map(domain);
  const Index d = init.size();

  auto value_free = [&](const Vector& phi) -> Scalar {
    const Vector theta = map.to_box(phi);
    if (!domain.contains(theta)) return kInf;
    const Scalar v = objective.value(theta);
    return std::isfinite(v) ? v : kInf;
  };
  auto gradient_free = [&](const Vector& phi) -> Vector {
    const Vector theta = map.to_box(phi);
    return objective.gradient(theta).cwiseProduct(map.jacobian(phi));
  };

  BoxResult out;
  Vector phi = map.to_free(init);

  if (d == 1) {
    auto f1 = [&](Scalar p) {
      Vector v(1);
      v[0] = p;
      return value_free(v);
    };
    const auto bracket = bracket_minimum(f1, phi[0], 0.5, 12);
    if (!bracket) {
      out.boundary = true;
      out.theta = map.to_box(phi);
      return out;
    }
    const GoldenResult g = golden_section(f1, bracket->lo, bracket->hi, 1e-9 * std::max<Scalar>(1, std::abs(bracket->mid)));
    phi[0] = g.x;
    out.iterations = g.iterations;
  } else {
    const Result r = bfgs_minimize(value_free, gradient_free, phi, options);
    phi = r.x;
    out.iterations = r.iterations;
  }

  // Newton polish in free coordinates: H_φ = J H_θ J + diag(J'' ∘ g_θ).
  // Without an analytic Hessian, differentiate the gradient.
  const std::function<Matrix(const Vector&)> hessian =
      objective.hessian ? objective.hessian : [&](const Vector& theta) {
        return numdiff::jacobian_of_gradient(objective.gradient, theta);
      };
  {
    for (int k = 0; k < 20; ++k) {
      const Vector theta = map.to_box(phi);
      if (!domain.contains(theta)) break;
      const Vector g_theta = objective.gradient(theta);
      const Vector jac = map.jacobian(phi);
      const Vector g_free = g_theta.cwiseProduct(jac);
      if (g_free.lpNorm<Eigen::Infinity>() <= 0.01 * options.gradient_tolerance) break;
      Matrix h_free = jac.asDiagonal() * hessian(theta) * jac.asDiagonal();
      h_free.diagonal() += map.second_derivative(phi).cwiseProduct(g_theta);
      Eigen::LLT<Matrix> llt(symmetrize(h_free));
      if (llt.info() != Eigen::Success) break;
      const Vector step = -llt.solve(g_free);
      if (!step.allFinite()) break;
      const Vector candidate = phi + step;
      const Vector cand_theta = map.to_box(candidate);
      if (!domain.contains(cand_theta)) break;
      const Vector cand_grad = objective.gradient(cand_theta).cwiseProduct(map.jacobian(candidate));
      if (!(cand_grad.lpNorm<Eigen::Infinity>() < g_free.lpNorm<Eigen::Infinity>())) break;
      phi = candidate;
      ++out.iterations;
    }
  }

  out.theta = map.to_box(phi);
  out.boundary = near_edge(phi, out.theta, domain);
  if (out.boundary) return out;
  out.value = objective.value(out.theta);
  out.free_gradient = gradient_free(phi);
  out.converged = out.free_gradient.allFinite() &&
                  out.free_gradient.lpNorm<Eigen::Infinity>() <= options.gradient_tolerance;
  return out;
}

}  // namespace mcrb::optim
