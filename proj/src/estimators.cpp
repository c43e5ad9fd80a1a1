#include "mcrb/estimators.hpp"

#include "mcrb/optimize.hpp"
#include "mcrb/table.hpp"

#include <cmath>

namespace mcrb {

const char* to_string(EstimateMethod m) { return m == EstimateMethod::closed_form ? "closed-form" : "numeric"; }

EstimateRecord mml_fit(const AssumedFamily& family, const Observations& data, const Vector& init,
                       const FitOptions& options) {
  if (data.cols() < 1) throw DomainError("mml_fit: empty data");
  family.check(init);
  if (family.extra_check) {
    throw CapabilityError("mml_fit: constrained family '" + family.name + "' needs its closed-form estimator");
  }
  const LogLikelihood ll = family.likelihood(data);
  const Scalar n = static_cast<Scalar>(ll.count);

  optim::BoxObjective obj;
  obj.value = [&](const Vector& t) { return -ll.value(t) / n; };
  obj.gradient = [&](const Vector& t) { return Vector(-ll.gradient(t) / n); };
  obj.hessian = [&](const Vector& t) { return Matrix(-ll.hessian(t) / n); };
  optim::Options opt;
  opt.gradient_tolerance = options.gradient_tolerance;
  opt.max_iterations = options.max_iterations;
  const optim::BoxResult r = optim::minimize_in_box(obj, family.domain, init, opt);
  if (r.boundary) throw BoundaryError("mml_fit: the likelihood maximizer lies on the boundary of the parameter space");
  if (!r.converged) {
    throw NumericError(fmt::format("mml_fit: no convergence after {} iterations (free gradient {:.3g})", r.iterations,
                                   r.free_gradient.allFinite() ? r.free_gradient.lpNorm<Eigen::Infinity>() : kInf));
  }

  EstimateRecord rec;
  rec.theta_hat = r.theta;
  rec.m = data.cols();
  rec.method = EstimateMethod::numeric;
  rec.iterations = r.iterations;
  rec.grad_norm = r.free_gradient.lpNorm<Eigen::Infinity>();
  const Matrix h = obj.hessian(r.theta);
  const Vector eig = Eigen::SelfAdjointEigenSolver<Matrix>(symmetrize(h)).eigenvalues();
  const Scalar norm = eig.cwiseAbs().maxCoeff();
  rec.flat_warning = eig.cwiseAbs().minCoeff() < 1e-8 * norm;
  return rec;
}

EstimateRecord mml_closed(const std::string& model_id, const Observations& data) {
  if (data.cols() < 1) throw DomainError("mml_closed: empty data");
  EstimateRecord rec;
  rec.m = data.cols();
  rec.method = EstimateMethod::closed_form;
  rec.theta_hat.resize(1);
  if (model_id == "gaussian-wrong-mean") {
    if (data.rows() != 1) throw DomainError("gaussian-wrong-mean expects scalar observations");
    rec.theta_hat[0] = data.squaredNorm() / static_cast<Scalar>(data.cols());
  } else if (model_id == "ar1-power") {
    rec.theta_hat[0] = data.squaredNorm() / static_cast<Scalar>(data.cols() * data.rows());
  } else {
    throw CapabilityError("no closed-form MML estimator for model '" + model_id + "'");
  }
  if (!(rec.theta_hat[0] > 0)) throw BoundaryError("mml_closed: estimate is zero (all observations vanish)");
  return rec;
}

ScatterEstimate<Scalar> cmml_scatter_interleaved(const Observations& data) {
  if (data.rows() % 2 != 0) throw DomainError("interleaved complex data needs an even number of rows");
  return cmml_scatter<Scalar>(to_complex_columns(data));
}

BiasEstimate empirical_ms_bias(const std::vector<Vector>& estimates, const Vector& theta0) {
  if (estimates.size() < 2) throw DomainError("empirical_ms_bias needs at least 2 estimates");
  const Index d = theta0.size();
  Vector mean = Vector::Zero(d);
  for (const auto& e : estimates) {
    if (e.size() != d) throw DomainError("estimate dimension mismatch");
    mean += e;
  }
  const Scalar n = static_cast<Scalar>(estimates.size());
  mean /= n;
  Vector var = Vector::Zero(d);
  for (const auto& e : estimates) var += (e - mean).cwiseAbs2();
  var /= (n - 1);
  return {mean - theta0, (var / n).cwiseSqrt()};
}

std::string estimate_csv_header(Index d) {
  std::vector<std::string> cols = table::vector_names("theta_hat", d);
  table::append(cols, {"M", "method", "seed", "grad_norm", "iterations"});
  return table::join(cols);
}

std::string estimate_csv_row(const EstimateRecord& record) {
  std::vector<std::string> cols = table::values(record.theta_hat);
  table::append(cols, {std::to_string(record.m), to_string(record.method), std::to_string(record.seed),
                       table::number(record.grad_norm), std::to_string(record.iterations)});
  return table::join(cols);
}

}  // namespace mcrb
