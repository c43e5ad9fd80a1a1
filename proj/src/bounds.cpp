#include "mcrb/bounds.hpp"

#include "mcrb/errors.hpp"
#include "mcrb/expectation.hpp"
#include "mcrb/optimize.hpp"
#include "mcrb/random.hpp"
#include "mcrb/table.hpp"

#include <fmt/format.h>

#include <cmath>

namespace mcrb {

namespace {

constexpr std::uint64_t kPseudoTrueTag = 0x5054;  // "PT"

Matrix reshape(const Vector& v, Index offset, Index d) {
  return Eigen::Map<const Matrix>(v.data() + offset, d, d);
}

optim::BoxObjective cross_entropy_objective(const ModelPair& pair, const ExpectationOptions& options,
                                            std::optional<Observations>& mc_data) {
  const auto& family = pair.family;
  const auto& truth = pair.truth;
  optim::BoxObjective obj;
  if (options.method == Method::monte_carlo) {
    if (options.draws < 2) throw DomainError("monte-carlo pseudo-true search needs at least 2 draws");
    mc_data = truth.sample(derive_seed(options.seed, kPseudoTrueTag, 0), static_cast<Index>(options.draws));
    const LogLikelihood ll = family.likelihood(*mc_data);
    const Scalar n = static_cast<Scalar>(ll.count);
    obj.value = [ll, n](const Vector& t) { return -ll.value(t) / n; };
    obj.gradient = [ll, n](const Vector& t) { return Vector(-ll.gradient(t) / n); };
    obj.hessian = [ll, n](const Vector& t) { return Matrix(-ll.hessian(t) / n); };
    return obj;
  }
  const Index d = family.dim;
  obj.value = [&, options](const Vector& t) {
    auto g = [&](const ObservationRef& x) {
      Vector v(1);
      v[0] = family.log_pdf(t, x);
      return v;
    };
    return -expect(truth, g, 1, options).mean[0];
  };
  obj.gradient = [&, options, d](const Vector& t) {
    auto g = [&](const ObservationRef& x) { return family.score_at(t, x); };
    return Vector(-expect(truth, g, d, options).mean);
  };
  obj.hessian = [&, options, d](const Vector& t) {
    auto g = [&](const ObservationRef& x) {
      const Matrix h = family.hessian_at(t, x);
      return Vector(Eigen::Map<const Vector>(h.data(), d * d));
    };
    return Matrix(-reshape(expect(truth, g, d * d, options).mean, 0, d));
  };
  return obj;
}

}  // namespace

PseudoTrueResult pseudo_true(const ModelPair& pair, const Vector& init, const PseudoTrueOptions& options) {
  const auto& family = pair.family;
  family.check(init);
  PseudoTrueResult out;
  out.method = options.expectation.method;
  if (options.expectation.method == Method::closed_form) {
    out.theta0 = reference_solution(pair).theta0;
    out.std_error = Vector::Zero(out.theta0.size());
    out.detail = "closed-form";
    return out;
  }
  if (family.extra_check) {
    throw CapabilityError("pseudo-true search over constrained parameter spaces is not supported ('" + family.name +
                          "')");
  }
  if (options.starts < 1) throw DomainError("pseudo_true needs at least one start");

  std::optional<Observations> mc_data;
  const optim::BoxObjective objective = cross_entropy_objective(pair, options.expectation, mc_data);
  const optim::Reparam map(family.domain);
  const Vector free_init = map.to_free(init);
  optim::Options opt;
  opt.gradient_tolerance = options.gradient_tolerance;

  for (int k = 0; k < options.starts; ++k) {
    const Scalar shift = options.start_spread * static_cast<Scalar>((k + 1) / 2) * (k % 2 == 1 ? 1.0 : -1.0);
    Vector start_free = free_init;
    for (Index i = 0; i < start_free.size(); ++i) start_free[i] += (i % 2 == 0 ? shift : -shift);
    const optim::BoxResult r = optim::minimize_in_box(objective, family.domain, map.to_box(start_free), opt);
    if (r.boundary) {
      throw BoundaryError(fmt::format("pseudo-true search for '{}' ran to the boundary of the parameter space",
                                      pair.spec.id));
    }
    if (!r.converged) {
      throw NumericError(fmt::format("pseudo-true search for '{}' did not converge (free gradient {:.3g})",
                                     pair.spec.id, r.free_gradient.lpNorm<Eigen::Infinity>()));
    }
    out.start_results.push_back(r.theta);
  }
  out.theta0 = out.start_results.front();
  const Scalar scale = std::max<Scalar>(1, out.theta0.lpNorm<Eigen::Infinity>());
  for (const auto& t : out.start_results) {
    const Scalar gap = (t - out.theta0).lpNorm<Eigen::Infinity>() / scale;
    if (gap > options.agreement_tolerance) {
      throw NonUniqueError(fmt::format("multi-start pseudo-true search disagrees by {:.3g} (tolerance {:.3g})", gap,
                                       options.agreement_tolerance));
    }
  }
  if (mc_data) {
    const SampleSandwich s = sample_sandwich(*mc_data, family, out.theta0);
    out.std_error = (s.c.diagonal() / static_cast<Scalar>(mc_data->cols())).cwiseSqrt();
    out.detail = fmt::format("monte-carlo: {} draws, seed {}", options.expectation.draws, options.expectation.seed);
  } else {
    out.std_error = Vector::Zero(out.theta0.size());
    out.detail = "quadrature";
  }
  return out;
}

void check_regularity(SandwichPair& sandwich) {
  if (!sandwich.a.allFinite() || !sandwich.b.allFinite()) {
    throw NumericError("sandwich matrices contain non-finite entries (expectation diverged)");
  }
  Eigen::JacobiSVD<Matrix> svd(sandwich.a);
  const Vector& s = svd.singularValues();
  const Scalar largest = s.size() ? s[0] : 0;
  const Scalar smallest = s.size() ? s[s.size() - 1] : 0;
  if (!(largest > 0) || smallest < 1e-10 * largest) {
    throw RegularityError(fmt::format("A is singular (smallest singular value {:.3g}, norm {:.3g})", smallest, largest));
  }
  sandwich.condition = largest / smallest;
}

SandwichPair sandwich_matrices(const ModelPair& pair, const Vector& theta0, const ExpectationOptions& options) {
  const auto& family = pair.family;
  family.check(theta0);
  const Index d = family.dim;
  SandwichPair out;
  out.at = theta0;
  if (options.method == Method::closed_form) {
    if (!pair.closed || !pair.closed->sandwich) {
      throw CapabilityError("no closed-form sandwich for model '" + pair.spec.id + "'");
    }
    auto [a, b] = pair.closed->sandwich(theta0);
    out.a = symmetrize(a);
    out.b = symmetrize(b);
    out.a_std_error = Matrix::Zero(d, d);
    out.b_std_error = Matrix::Zero(d, d);
    out.provenance = Provenance::analytic;
    out.detail = "closed-form";
  } else {
    auto g = [&](const ObservationRef& x) {
      const Vector s = family.score_at(theta0, x);
      const Matrix h = family.hessian_at(theta0, x);
      const Matrix ss = s * s.transpose();
      Vector v(2 * d * d);
      v.head(d * d) = Eigen::Map<const Vector>(h.data(), d * d);
      v.tail(d * d) = Eigen::Map<const Vector>(ss.data(), d * d);
      return v;
    };
    const ExpectationResult e = expect(pair.truth, g, 2 * d * d, options);
    out.a = symmetrize(reshape(e.mean, 0, d));
    out.b = symmetrize(reshape(e.mean, d * d, d));
    out.a_std_error = reshape(e.std_error, 0, d);
    out.b_std_error = reshape(e.std_error, d * d, d);
    out.method_error = e.std_error.lpNorm<Eigen::Infinity>();
    out.provenance = e.provenance;
    out.detail = e.detail;
  }
  check_regularity(out);
  return out;
}

BoundReport mcrb_from(const SandwichPair& sandwich, Index m) {
  if (m < 1) throw DomainError("M must be a positive integer");
  SandwichPair checked = sandwich;
  check_regularity(checked);
  BoundReport report;
  report.theta0 = checked.at;
  report.m = m;
  report.c_per_sample = sandwich_product(checked.a, checked.b);
  report.mcrb = symmetrize(Matrix(report.c_per_sample / static_cast<Scalar>(m)));
  if (checked.condition > 1e12) {
    report.warnings.push_back(fmt::format("A is ill-conditioned (condition number {:.3g})", checked.condition));
  }
  report.sandwich = std::move(checked);
  return report;
}

Matrix matched_crb(const ModelPair& pair, const Vector& theta_bar, Index m) {
  if (m < 1) throw DomainError("M must be a positive integer");
  if (!pair.closed || !pair.closed->crb_per_sample) {
    throw CapabilityError("no matched CRB benchmark for model '" + pair.spec.id + "'");
  }
  pair.family.check(theta_bar);
  return pair.closed->crb_per_sample(theta_bar) / static_cast<Scalar>(m);
}

BoundReport nested_lb(BoundReport report, const NestedSpec& nested) {
  if (nested.theta_bar.size() != report.theta0.size()) {
    throw DomainError(fmt::format("theta_bar has {} components but theta0 has {}", nested.theta_bar.size(),
                                  report.theta0.size()));
  }
  const Vector r = nested.theta_bar - report.theta0;
  report.lb = Matrix(report.mcrb + r * r.transpose());
  report.r = r;
  return report;
}

SampleSandwich sample_sandwich(const Observations& data, const AssumedFamily& family, const Vector& theta_hat) {
  if (data.cols() < 1) throw DomainError("sample sandwich needs at least one observation");
  if (data.rows() != family.obs_dim) throw DomainError("observation dimension does not match the family");
  family.check(theta_hat);
  const Index d = family.dim;
  SampleSandwich out;
  out.a = Matrix::Zero(d, d);
  out.b = Matrix::Zero(d, d);
  // Cancellation between per-sample Hessians is judged against their typical size.
  Scalar hessian_scale = 0;
  for (Index j = 0; j < data.cols(); ++j) {
    const Vector s = family.score_at(theta_hat, data.col(j));
    const Matrix h = family.hessian_at(theta_hat, data.col(j));
    out.a += h;
    hessian_scale += h.norm();
    out.b += s * s.transpose();
  }
  const Scalar m = static_cast<Scalar>(data.cols());
  out.a = symmetrize(Matrix(out.a / m));
  out.b = symmetrize(Matrix(out.b / m));
  Eigen::JacobiSVD<Matrix> svd(out.a);
  const Vector& sv = svd.singularValues();
  hessian_scale /= m;
  if (!out.a.allFinite() || !(sv[0] > 0) || sv[sv.size() - 1] < 1e-10 * std::max(sv[0], hessian_scale)) {
    throw NumericError("degenerate sample: A_M is singular");
  }
  out.c = sandwich_product(out.a, out.b);
  return out;
}

BoundReport compute_bounds(const ModelPair& pair, Index m, const ExpectationOptions& options) {
  Vector theta0;
  if (options.method == Method::closed_form) {
    theta0 = reference_solution(pair).theta0;
  } else {
    PseudoTrueOptions pt;
    pt.expectation = options;
    const Vector init = pair.truth.nested ? pair.truth.nested->theta_bar : Vector::Ones(pair.family.dim);
    theta0 = pseudo_true(pair, init, pt).theta0;
  }
  BoundReport report = mcrb_from(sandwich_matrices(pair, theta0, options), m);
  if (pair.truth.nested) {
    report = nested_lb(std::move(report), *pair.truth.nested);
    if (pair.closed && pair.closed->crb_per_sample) report.crb = matched_crb(pair, pair.truth.nested->theta_bar, m);
  }
  return report;
}

std::string to_key_value(const BoundReport& report) {
  std::string out;
  auto put = [&](const std::vector<std::string>& keys, const std::vector<std::string>& vals) {
    for (std::size_t i = 0; i < keys.size(); ++i) out += keys[i] + "=" + vals[i] + "\n";
  };
  const Index d = report.theta0.size();
  put(table::vector_names("theta0", d), table::values(report.theta0));
  put(table::matrix_names("A", d, d), table::values(report.sandwich.a));
  put(table::matrix_names("B", d, d), table::values(report.sandwich.b));
  put(table::matrix_names("c", d, d), table::values(report.c_per_sample));
  put(table::matrix_names("mcrb", d, d), table::values(report.mcrb));
  if (report.r) put(table::vector_names("r", d), table::values(*report.r));
  if (report.lb) put(table::matrix_names("lb", d, d), table::values(*report.lb));
  if (report.crb) put(table::matrix_names("crb", d, d), table::values(*report.crb));
  out += "M=" + std::to_string(report.m) + "\n";
  out += std::string("provenance=") + to_string(report.sandwich.provenance) + "\n";
  out += "method_error=" + table::number(report.sandwich.method_error) + "\n";
  out += "condition_A=" + table::number(report.sandwich.condition) + "\n";
  for (const auto& w : report.warnings) out += "warning=" + w + "\n";
  return out;
}

std::string bound_csv_header(const BoundReport& report) {
  const Index d = report.theta0.size();
  std::vector<std::string> cols = table::vector_names("theta0", d);
  for (const char* p : {"A", "B", "mcrb", "lb", "crb"}) table::append(cols, table::matrix_names(p, d, d));
  table::append(cols, {"M", "provenance", "method_error"});
  return table::join(cols);
}

std::string bound_csv_row(const BoundReport& report) {
  const Index d = report.theta0.size();
  std::vector<std::string> cols = table::values(report.theta0);
  table::append(cols, table::values(report.sandwich.a));
  table::append(cols, table::values(report.sandwich.b));
  table::append(cols, table::values(report.mcrb));
  const std::vector<std::string> empty(static_cast<std::size_t>(d * d), "");
  table::append(cols, report.lb ? table::values(*report.lb) : empty);
  table::append(cols, report.crb ? table::values(*report.crb) : empty);
  table::append(cols, {std::to_string(report.m), to_string(report.sandwich.provenance),
                       table::number(report.sandwich.method_error)});
  return table::join(cols);
}

}  // namespace mcrb
