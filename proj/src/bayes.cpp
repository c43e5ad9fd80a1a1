#include "mcrb/bayes.hpp"

#include "mcrb/errors.hpp"
#include "mcrb/estimators.hpp"
#include "mcrb/numdiff.hpp"
#include "mcrb/optimize.hpp"
#include "mcrb/table.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace mcrb {

// ---------------------------------------------------------------------------
// Priors

Prior inverse_gamma_prior(Scalar shape, Scalar scale) {
  if (!(shape > 0) || !(scale > 0)) throw DomainError("inverse-gamma prior needs positive shape and scale");
  Prior p;
  p.name = fmt::format("inverse-gamma({}, {})", shape, scale);
  const Scalar log_c = shape * std::log(scale) - std::lgamma(shape);
  p.log_density = [=](const Vector& t) {
    const Scalar th = t[0];
    if (!(th > 0)) return -kInf;
    return log_c - (shape + 1) * std::log(th) - scale / th;
  };
  p.support = Domain::positive(1);
  return p;
}

Prior uniform_prior(Scalar lo, Scalar hi) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) throw DomainError("uniform prior needs finite lo < hi");
  Prior p;
  p.name = fmt::format("uniform({}, {})", lo, hi);
  const Scalar log_c = -std::log(hi - lo);
  p.log_density = [=](const Vector& t) { return (t[0] > lo && t[0] < hi) ? log_c : -kInf; };
  p.support = Domain{Vector::Constant(1, lo), Vector::Constant(1, hi)};
  return p;
}

// ---------------------------------------------------------------------------
// PosteriorGrid

PosteriorGrid::PosteriorGrid(Vector nodes, const Vector& log_density, Vector weights)
    : nodes_(std::move(nodes)), weights_(std::move(weights)) {
  if (nodes_.size() < 2 || log_density.size() != nodes_.size() || weights_.size() != nodes_.size()) {
    throw DomainError("posterior grid: nodes, log-density and weights must have equal length >= 2");
  }
  const Scalar peak = log_density.maxCoeff();
  if (!std::isfinite(peak)) throw NumericError("posterior grid: log-density has no finite maximum");
  density_ = (log_density.array() - peak).exp().matrix();
  const Scalar z = weights_.dot(density_);
  if (!(z > 0)) throw NumericError("posterior grid: zero mass");
  density_ /= z;
  log_normalizer_ = peak + std::log(z);
}

PosteriorGrid PosteriorGrid::from_nodes(Vector nodes, const Vector& log_density) {
  const Index n = nodes.size();
  if (n < 2) throw DomainError("posterior grid needs at least 2 nodes");
  Vector w = Vector::Zero(n);
  for (Index i = 0; i + 1 < n; ++i) {
    const Scalar h = nodes[i + 1] - nodes[i];
    if (!(h > 0)) throw DomainError("posterior grid nodes must be strictly increasing");
    w[i] += h / 2;
    w[i + 1] += h / 2;
  }
  return PosteriorGrid(std::move(nodes), log_density, std::move(w));
}

Scalar PosteriorGrid::total_mass() const { return weights_.dot(density_); }

Scalar PosteriorGrid::mean() const { return masses().dot(nodes_); }

Scalar PosteriorGrid::variance() const {
  const Scalar mu = mean();
  return masses().dot((nodes_.array() - mu).square().matrix());
}

Scalar PosteriorGrid::std_dev() const { return std::sqrt(variance()); }

Scalar PosteriorGrid::mode() const {
  Index k = 0;
  density_.maxCoeff(&k);
  if (k == 0 || k == nodes_.size() - 1) return nodes_[k];
  // Vertex of the parabola through the three nodes around the peak.
  const Scalar x0 = nodes_[k - 1], x1 = nodes_[k], x2 = nodes_[k + 1];
  const Scalar y0 = density_[k - 1], y1 = density_[k], y2 = density_[k + 1];
  const Scalar num = (x1 - x0) * (x1 - x0) * (y1 - y2) - (x1 - x2) * (x1 - x2) * (y1 - y0);
  const Scalar den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
  if (den == 0) return x1;
  const Scalar v = x1 - 0.5 * num / den;
  return std::clamp(v, x0, x2);
}

Scalar PosteriorGrid::quantile(Scalar probability) const {
  if (!(probability > 0 && probability < 1)) throw DomainError("quantile probability must lie in (0, 1)");
  const Vector m = masses();
  Scalar cum = 0;
  for (Index i = 0; i < m.size(); ++i) {
    const Scalar next = cum + m[i];
    if (next >= probability) {
      // Node i carries mass m[i]; interpolate within its half-cells.
      const Scalar frac = m[i] > 0 ? (probability - cum) / m[i] : 0.5;
      const Scalar left = i > 0 ? 0.5 * (nodes_[i - 1] + nodes_[i]) : nodes_[i];
      const Scalar right = i + 1 < m.size() ? 0.5 * (nodes_[i] + nodes_[i + 1]) : nodes_[i];
      return left + frac * (right - left);
    }
    cum = next;
  }
  return nodes_[nodes_.size() - 1];
}

// ---------------------------------------------------------------------------
// posterior_compute

namespace {

struct GridCoordinates {
  bool log_scale = false;
  Scalar lo = -kInf;  // support bounds in grid coordinates
  Scalar hi = kInf;
  Scalar theta_lo = -kInf;
  Scalar theta_hi = kInf;

  // exp(ln b) can overshoot b by an ulp; nodes stay inside the support.
  Scalar to_theta(Scalar u) const { return std::clamp(log_scale ? std::exp(u) : u, theta_lo, theta_hi); }
  Scalar from_theta(Scalar t) const { return log_scale ? std::log(t) : t; }
  Scalar jacobian(Scalar u) const { return log_scale ? std::exp(u) : 1; }
};

struct GridBuild {
  Vector u;
  Vector log_q;  // log density in grid coordinates (unnormalized)
  Scalar left_mass = 0;
  Scalar right_mass = 0;
};

}  // namespace

PosteriorGrid posterior_compute(const AssumedFamily& family, const Prior& prior, const Observations& data,
                                const PosteriorOptions& options) {
  if (family.dim != 1) throw CapabilityError("posterior grids are implemented for scalar parameters only");
  if (data.cols() < 1) throw DomainError("posterior_compute: empty data");
  if (options.nodes < 11) throw DomainError("posterior grid needs at least 11 nodes");

  const Scalar lo = std::max(family.domain.lower[0], prior.support.lower[0]);
  const Scalar hi = std::min(family.domain.upper[0], prior.support.upper[0]);
  if (!(lo < hi)) throw DomainError("prior support does not intersect the parameter space");

  GridCoordinates coords;
  coords.log_scale = lo >= 0;
  coords.lo = coords.log_scale ? (lo > 0 ? std::log(lo) : -kInf) : lo;
  coords.hi = coords.log_scale ? std::log(hi) : hi;
  coords.theta_lo = lo;
  coords.theta_hi = hi;

  const LogLikelihood ll = family.likelihood(data);
  Vector t(1);
  auto log_q = [&](Scalar u) {
    t[0] = coords.to_theta(u);
    if (!(t[0] > lo && t[0] < hi)) {
      if (!(t[0] >= lo && t[0] <= hi)) return -kInf;
    }
    const Scalar lp = prior.log_density(t);
    if (!std::isfinite(lp)) return -kInf;
    const Scalar v = ll.value(t) + lp + std::log(coords.jacobian(u));
    return std::isfinite(v) ? v : -kInf;
  };

  // Center on the MML estimate, clipped into the support.
  Scalar center_theta;
  try {
    Vector init(1);
    init[0] = std::isfinite(hi) && std::isfinite(lo) ? 0.5 * (lo + hi) : (lo >= 0 ? std::max<Scalar>(1, lo + 1) : 0);
    center_theta = mml_fit(family, data, init).theta_hat[0];
  } catch (const Error&) {
    center_theta = std::isfinite(lo) && std::isfinite(hi) ? 0.5 * (lo + hi) : (lo >= 0 ? 1.0 : 0.0);
  }
  Scalar center = coords.from_theta(center_theta);
  const Scalar span = std::isfinite(coords.hi - coords.lo) ? coords.hi - coords.lo : kInf;
  if (std::isfinite(span)) center = std::clamp(center, coords.lo + 1e-6 * span, coords.hi - 1e-6 * span);
  else if (std::isfinite(coords.lo)) center = std::max(center, coords.lo + 1e-6);
  else if (std::isfinite(coords.hi)) center = std::min(center, coords.hi - 1e-6);

  Scalar sd = 1;
  {
    const Scalar h = numdiff::step(center, 0.25);
    const Scalar f0 = log_q(center), fp = log_q(center + h), fm = log_q(center - h);
    const Scalar curv = (fp - 2 * f0 + fm) / (h * h);
    if (std::isfinite(curv) && curv < 0) sd = 1 / std::sqrt(-curv);
  }

  const Index n = options.nodes;
  const Index edge = std::max<Index>(2, static_cast<Index>(options.edge_fraction * static_cast<Scalar>(n)));

  auto build = [&](Scalar a, Scalar b) {
    GridBuild g;
    g.u = Vector::LinSpaced(n, a, b);
    g.log_q.resize(n);
    for (Index i = 0; i < n; ++i) g.log_q[i] = log_q(g.u[i]);
    const Scalar peak = g.log_q.maxCoeff();
    if (!std::isfinite(peak)) return g;
    const Vector q = (g.log_q.array() - peak).exp().matrix();
    const Scalar h = (b - a) / static_cast<Scalar>(n - 1);
    const Scalar total = h * (q.sum() - 0.5 * (q[0] + q[n - 1]));
    g.left_mass = h * (q.head(edge).sum() - 0.5 * q[0]) / total;
    g.right_mass = h * (q.tail(edge).sum() - 0.5 * q[n - 1]) / total;
    return g;
  };

  // Two passes: Laplace-width grid, then a grid re-centred on the first pass's moments.
  GridBuild grid;
  for (int pass = 0; pass < 2; ++pass) {
    Scalar left_w = options.half_width_sds * sd;
    Scalar right_w = options.half_width_sds * sd;
    int extensions = 0;
    while (true) {
      const Scalar a = std::max(coords.lo, center - left_w);
      const Scalar b = std::min(coords.hi, center + right_w);
      grid = build(a, b);
      if (!std::isfinite(grid.log_q.maxCoeff())) {
        throw NumericError("posterior_compute: posterior vanishes on the whole grid");
      }
      const bool left_open = a > coords.lo && grid.left_mass > options.boundary_mass;
      const bool right_open = b < coords.hi && grid.right_mass > options.boundary_mass;
      if (!left_open && !right_open) break;
      if (extensions++ >= options.max_extensions) {
        throw NumericError(fmt::format("posterior_compute: grid fails to capture the posterior mass "
                                       "(edge masses {:.3g}, {:.3g})",
                                       grid.left_mass, grid.right_mass));
      }
      if (left_open) left_w *= 1.5;
      if (right_open) right_w *= 1.5;
    }
    if (pass == 0) {
      const Scalar peak = grid.log_q.maxCoeff();
      const Vector q = (grid.log_q.array() - peak).exp().matrix();
      const Scalar z = q.sum();
      const Scalar mu = q.dot(grid.u) / z;
      const Scalar var = q.dot((grid.u.array() - mu).square().matrix()) / z;
      const Scalar spacing = (grid.u[n - 1] - grid.u[0]) / static_cast<Scalar>(n - 1);
      center = mu;
      sd = std::max(std::sqrt(var), spacing);
    }
  }

  const Scalar h = (grid.u[n - 1] - grid.u[0]) / static_cast<Scalar>(n - 1);
  Vector nodes(n), log_density(n), weights(n);
  for (Index i = 0; i < n; ++i) {
    const Scalar jac = coords.jacobian(grid.u[i]);
    nodes[i] = coords.to_theta(grid.u[i]);
    log_density[i] = grid.log_q[i] - std::log(jac);
    weights[i] = h * jac * ((i == 0 || i == n - 1) ? 0.5 : 1.0);
  }
  return PosteriorGrid(std::move(nodes), log_density, std::move(weights));
}

// ---------------------------------------------------------------------------
// Losses and MB estimates

Loss squared_loss() {
  Loss l;
  l.name = "squared";
  l.kind = Loss::Kind::squared;
  l.value = [](const Vector& a, const Vector& b) { return (a - b).squaredNorm(); };
  return l;
}

Loss weighted_squared_loss(const Matrix& weight) {
  if (weight.rows() != weight.cols()) throw DomainError("loss weight must be square");
  Eigen::LLT<Matrix> llt(symmetrize(weight));
  if (llt.info() != Eigen::Success) throw DomainError("loss weight must be positive definite");
  Loss l;
  l.name = "weighted-squared";
  l.kind = Loss::Kind::weighted_squared;
  l.weight = weight;
  l.value = [weight](const Vector& a, const Vector& b) {
    const Vector d = a - b;
    return d.dot(weight * d);
  };
  return l;
}

Loss absolute_loss() {
  Loss l;
  l.name = "absolute";
  l.kind = Loss::Kind::absolute;
  l.value = [](const Vector& a, const Vector& b) { return (a - b).lpNorm<1>(); };
  l.differentiable = false;
  return l;
}

Loss custom_loss(std::string name, std::function<Scalar(const Vector&, const Vector&)> value, bool differentiable) {
  Loss l;
  l.name = std::move(name);
  l.kind = Loss::Kind::custom;
  l.value = std::move(value);
  l.differentiable = differentiable;
  return l;
}

Vector mb_estimate(const PosteriorGrid& posterior, const Loss& loss) {
  Vector out(1);
  switch (loss.kind) {
    case Loss::Kind::squared:
    case Loss::Kind::weighted_squared:
      out[0] = posterior.mean();
      return out;
    case Loss::Kind::absolute:
      out[0] = posterior.quantile(0.5);
      return out;
    case Loss::Kind::custom: break;
  }

  const Vector& nodes = posterior.nodes();
  const Vector masses = posterior.masses();
  Vector a(1), b(1);
  auto risk = [&](Scalar x) {
    a[0] = x;
    Scalar r = 0;
    for (Index i = 0; i < nodes.size(); ++i) {
      if (masses[i] == 0) continue;
      b[0] = nodes[i];
      r += masses[i] * loss.value(a, b);
    }
    return r;
  };

  const Index stride = std::max<Index>(1, nodes.size() / 400);
  std::vector<Scalar> cand_x, cand_r;
  for (Index i = 0; i < nodes.size(); i += stride) {
    cand_x.push_back(nodes[i]);
    cand_r.push_back(risk(nodes[i]));
  }
  const std::size_t k = static_cast<std::size_t>(std::min_element(cand_r.begin(), cand_r.end()) - cand_r.begin());
  const Scalar best = cand_r[k];
  const Scalar tie = 1e-9 * std::max<Scalar>(std::abs(best), 1e-300);
  for (std::size_t j = 0; j < cand_r.size(); ++j) {
    const bool local_min = (j == 0 || cand_r[j] <= cand_r[j - 1]) && (j + 1 == cand_r.size() || cand_r[j] <= cand_r[j + 1]);
    if (local_min && (j + 1 < k || j > k + 1) && cand_r[j] - best <= tie) {
      throw NonUniqueError(fmt::format("mb_estimate: posterior expected loss has tied minimizers near {} and {}",
                                       cand_x[k], cand_x[j]));
    }
  }
  const Scalar lo = cand_x[k > 0 ? k - 1 : k];
  const Scalar hi = cand_x[k + 1 < cand_x.size() ? k + 1 : k];
  if (hi > lo) out[0] = optim::golden_section(risk, lo, hi, 1e-10 * std::max<Scalar>(1, std::abs(cand_x[k]))).x;
  else out[0] = cand_x[k];
  return out;
}

std::vector<ConcentrationRow> concentration_stat(const std::vector<PosteriorGrid>& posteriors,
                                                 const std::vector<Index>& sizes, const Vector& theta0) {
  if (posteriors.size() != sizes.size()) throw DomainError("concentration_stat: one sample size per posterior");
  std::vector<ConcentrationRow> rows;
  for (std::size_t i = 0; i < posteriors.size(); ++i) {
    const auto& p = posteriors[i];
    rows.push_back({sizes[i], p.mean(), p.std_dev(), std::abs(p.mean() - theta0[0])});
  }
  return rows;
}

std::string concentration_csv(const std::vector<ConcentrationRow>& rows) {
  std::string out = "M,mean,std,dist_to_theta0\n";
  for (const auto& r : rows) {
    out += table::join({std::to_string(r.m), table::number(r.mean), table::number(r.std), table::number(r.dist_to_theta0)});
    out += "\n";
  }
  return out;
}

LossCurvature loss_curvature(const Loss& loss, const Vector& theta0) {
  const Index d = theta0.size();
  LossCurvature c;
  switch (loss.kind) {
    case Loss::Kind::squared:
      c.l1 = -2 * Matrix::Identity(d, d);
      c.l2 = 2 * Matrix::Identity(d, d);
      return c;
    case Loss::Kind::weighted_squared: {
      if (loss.weight.rows() != d) throw DomainError("loss weight dimension does not match theta0");
      const Matrix w2 = loss.weight + loss.weight.transpose();
      c.l1 = -w2;
      c.l2 = w2;
      return c;
    }
    case Loss::Kind::absolute:
    case Loss::Kind::custom: break;
  }
  if (!loss.differentiable) throw CapabilityError("loss '" + loss.name + "' is not twice differentiable");

  // L2: Hessian in α at β = θ0. L1: mixed ∂α_i ∂β_j by a four-point stencil.
  c.l2 = numdiff::hessian([&](const Vector& alpha) { return loss.value(alpha, theta0); }, theta0);
  c.l1.resize(d, d);
  Vector alpha = theta0, beta = theta0;
  for (Index i = 0; i < d; ++i) {
    const Scalar hi = numdiff::step(theta0[i], 0.25);
    for (Index j = 0; j < d; ++j) {
      const Scalar hj = numdiff::step(theta0[j], 0.25);
      auto eval = [&](Scalar si, Scalar sj) {
        alpha[i] = theta0[i] + si * hi;
        beta[j] = theta0[j] + sj * hj;
        const Scalar v = loss.value(alpha, beta);
        alpha[i] = theta0[i];
        beta[j] = theta0[j];
        return v;
      };
      c.l1(i, j) = (eval(1, 1) - eval(1, -1) - eval(-1, 1) + eval(-1, -1)) / (4 * hi * hj);
    }
  }
  return c;
}

Matrix mb_asymptotic_cov(const LossCurvature& curvature, const SandwichPair& sandwich) {
  const Index d = sandwich.a.rows();
  if (curvature.l1.rows() != d || curvature.l2.rows() != d) throw DomainError("loss curvature dimension mismatch");
  if (inverse_condition(curvature.l2) < 1e-12) throw RegularityError("L2 is singular");
  SandwichPair checked = sandwich;
  check_regularity(checked);
  const Matrix k = curvature.l2.fullPivLu().solve(curvature.l1);
  const Matrix c = sandwich_product(checked.a, checked.b);
  return symmetrize(Matrix(k * c * k.transpose()));
}

}  // namespace mcrb
