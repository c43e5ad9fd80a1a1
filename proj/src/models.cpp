#include "mcrb/models.hpp"

#include "mcrb/errors.hpp"
#include "mcrb/expectation.hpp"
#include "mcrb/numdiff.hpp"
#include "mcrb/random.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace mcrb {

namespace {

constexpr Scalar kLog2Pi = 1.8378770664093454835606594728112;
constexpr Scalar kLogPi = 1.1447298858494001741434273513531;

void require(bool ok, const std::string& message) {
  if (!ok) throw DomainError(message);
}

Vector scalar_vector(Scalar v) {
  Vector out(1);
  out[0] = v;
  return out;
}

Matrix scalar_matrix(Scalar v) {
  Matrix out(1, 1);
  out(0, 0) = v;
  return out;
}

// Shared shape of the two real Gaussian families: ln f = −(k/2) ln(2πθ) − q/(2θ),
// with k the observation dimension and q = xᵀx.
LogLikelihood isotropic_likelihood(Scalar k_total, Scalar q_total, Index count) {
  LogLikelihood ll;
  ll.count = count;
  ll.value = [=](const Vector& t) { return -0.5 * k_total * (kLog2Pi + std::log(t[0])) - q_total / (2 * t[0]); };
  ll.gradient = [=](const Vector& t) {
    const Scalar th = t[0];
    return scalar_vector(-k_total / (2 * th) + q_total / (2 * th * th));
  };
  ll.hessian = [=](const Vector& t) {
    const Scalar th = t[0];
    return scalar_matrix(k_total / (2 * th * th) - q_total / (th * th * th));
  };
  return ll;
}

AssumedFamily isotropic_family(Index n, std::string name) {
  AssumedFamily f;
  f.name = std::move(name);
  f.dim = 1;
  f.obs_dim = n;
  f.domain = Domain::positive(1);
  const Scalar k = static_cast<Scalar>(n);
  f.log_pdf = [k](const Vector& t, const ObservationRef& x) {
    return -0.5 * k * (kLog2Pi + std::log(t[0])) - x.squaredNorm() / (2 * t[0]);
  };
  f.score = [k](const Vector& t, const ObservationRef& x) {
    const Scalar th = t[0];
    return scalar_vector(-k / (2 * th) + x.squaredNorm() / (2 * th * th));
  };
  f.hessian = [k](const Vector& t, const ObservationRef& x) {
    const Scalar th = t[0];
    return scalar_matrix(k / (2 * th * th) - x.squaredNorm() / (th * th * th));
  };
  f.likelihood_factory = [n, k](const Observations& data) {
    require(data.rows() == n, "data dimension does not match the family");
    return isotropic_likelihood(k * static_cast<Scalar>(data.cols()), data.squaredNorm(), data.cols());
  };
  return f;
}

std::size_t packed_size(Index n) { return static_cast<std::size_t>(1 + n * n); }

}  // namespace

// ---------------------------------------------------------------------------
// AssumedFamily

bool AssumedFamily::contains(const Vector& theta) const {
  try {
    check(theta);
    return true;
  } catch (const DomainError&) {
    return false;
  }
}

void AssumedFamily::check(const Vector& theta) const {
  if (theta.size() != dim) {
    throw DomainError(fmt::format("{}: parameter has {} components, expected {}", name, theta.size(), dim));
  }
  if (!theta.allFinite() || !domain.contains(theta)) {
    throw DomainError(fmt::format("{}: parameter outside the domain", name));
  }
  if (extra_check) extra_check(theta);
}

Vector AssumedFamily::score_at(const Vector& theta, const ObservationRef& x) const {
  if (score) return score(theta, x);
  return numdiff::gradient([&](const Vector& t) { return log_pdf(t, x); }, theta);
}

Matrix AssumedFamily::hessian_at(const Vector& theta, const ObservationRef& x) const {
  if (hessian) return hessian(theta, x);
  if (score) return numdiff::jacobian_of_gradient([&](const Vector& t) { return score(t, x); }, theta);
  return numdiff::hessian([&](const Vector& t) { return log_pdf(t, x); }, theta);
}

LogLikelihood AssumedFamily::likelihood(const Observations& data) const {
  if (data.rows() != obs_dim) {
    throw DomainError(fmt::format("{}: observations have {} rows, expected {}", name, data.rows(), obs_dim));
  }
  if (likelihood_factory) return likelihood_factory(data);
  // Generic path: sums per-observation terms. Captures a copy of the family.
  LogLikelihood ll;
  ll.count = data.cols();
  auto self = *this;
  ll.value = [self, data](const Vector& t) {
    Scalar s = 0;
    for (Index j = 0; j < data.cols(); ++j) s += self.log_pdf(t, data.col(j));
    return s;
  };
  ll.gradient = [self, data](const Vector& t) {
    Vector g = Vector::Zero(self.dim);
    for (Index j = 0; j < data.cols(); ++j) g += self.score_at(t, data.col(j));
    return g;
  };
  ll.hessian = [self, data](const Vector& t) {
    Matrix h = Matrix::Zero(self.dim, self.dim);
    for (Index j = 0; j < data.cols(); ++j) h += self.hessian_at(t, data.col(j));
    return h;
  };
  return ll;
}

Observations TrueModel::sample(std::uint64_t seed, Index count) const {
  if (count < 1) throw DomainError("sample count must be positive");
  return sampler(seed, count);
}

Scalar ModelSpec::get(const std::string& key) const {
  auto it = hyper.find(key);
  if (it == hyper.end()) throw DomainError(fmt::format("model '{}': missing hyperparameter '{}'", id, key));
  return it->second;
}

// ---------------------------------------------------------------------------
// Families

AssumedFamily gaussian_variance_family() { return isotropic_family(1, "gaussian-variance"); }

AssumedFamily isotropic_gaussian_family(Index n) {
  require(n >= 1, "isotropic family needs N >= 1");
  return isotropic_family(n, fmt::format("isotropic-gaussian-{}", n));
}

Vector pack_complex_gaussian(Scalar sigma2, const ComplexMatrix& sigma) {
  const Index n = sigma.rows();
  Vector theta(static_cast<Index>(packed_size(n)));
  theta[0] = sigma2;
  Index k = 1;
  for (Index i = 0; i < n; ++i) theta[k++] = sigma(i, i).real();
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) theta[k++] = sigma(i, j).real();
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) theta[k++] = sigma(i, j).imag();
  return theta;
}

std::pair<Scalar, ComplexMatrix> unpack_complex_gaussian(const Vector& theta, Index n) {
  require(theta.size() == static_cast<Index>(packed_size(n)), "packed complex Gaussian parameter has wrong length");
  ComplexMatrix sigma(n, n);
  Index k = 1;
  for (Index i = 0; i < n; ++i) sigma(i, i) = theta[k++];
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) sigma(i, j).real(theta[k++]);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      sigma(i, j).imag(theta[k++]);
      sigma(j, i) = std::conj(sigma(i, j));
    }
  return {theta[0], sigma};
}

ComplexVector to_complex(const ObservationRef& x) {
  const Index n = x.size() / 2;
  ComplexVector z(n);
  for (Index i = 0; i < n; ++i) z[i] = {x[2 * i], x[2 * i + 1]};
  return z;
}

ComplexMatrix to_complex_columns(const Observations& data) {
  const Index n = data.rows() / 2;
  ComplexMatrix z(n, data.cols());
  for (Index j = 0; j < data.cols(); ++j)
    for (Index i = 0; i < n; ++i) z(i, j) = {data(2 * i, j), data(2 * i + 1, j)};
  return z;
}

Observations interleave(const ComplexMatrix& data) {
  Observations x(2 * data.rows(), data.cols());
  for (Index j = 0; j < data.cols(); ++j)
    for (Index i = 0; i < data.rows(); ++i) {
      x(2 * i, j) = data(i, j).real();
      x(2 * i + 1, j) = data(i, j).imag();
    }
  return x;
}

AssumedFamily complex_gaussian_family(Index n) {
  require(n >= 1, "complex Gaussian family needs N >= 1");
  AssumedFamily f;
  f.name = fmt::format("complex-gaussian-{}", n);
  f.dim = static_cast<Index>(packed_size(n));
  f.obs_dim = 2 * n;
  f.domain = Domain::unbounded(f.dim);
  f.domain.lower.head(n + 1).setZero();
  f.extra_check = [n](const Vector& theta) {
    auto [sigma2, sigma] = unpack_complex_gaussian(theta, n);
    const Scalar tr = sigma.trace().real();
    if (std::abs(tr - static_cast<Scalar>(n)) > 1e-10 * static_cast<Scalar>(n)) {
      throw DomainError(fmt::format("complex Gaussian: tr(Sigma) = {} but must equal N = {}", tr, n));
    }
    Eigen::LLT<ComplexMatrix> llt(sigma);
    if (llt.info() != Eigen::Success) throw DomainError("complex Gaussian: Sigma is not positive definite");
  };
  f.log_pdf = [n](const Vector& theta, const ObservationRef& x) {
    auto [sigma2, sigma] = unpack_complex_gaussian(theta, n);
    Eigen::LLT<ComplexMatrix> llt(sigma);
    const ComplexVector z = to_complex(x);
    const Scalar q = llt.matrixL().solve(z).squaredNorm();
    const Scalar log_det = 2 * llt.matrixL().toDenseMatrix().diagonal().real().array().log().sum();
    const Scalar nn = static_cast<Scalar>(n);
    return -nn * (kLogPi + std::log(sigma2)) - log_det - q / sigma2;
  };
  f.likelihood_factory = [n, name = f.name](const Observations& data) {
    require(data.rows() == 2 * n, "data dimension does not match the family");
    const ComplexMatrix z = to_complex_columns(data);
    const ComplexMatrix scatter = z * z.adjoint();
    const Scalar m = static_cast<Scalar>(data.cols());
    const Scalar nn = static_cast<Scalar>(n);
    LogLikelihood ll;
    ll.count = data.cols();
    ll.value = [=](const Vector& theta) {
      auto [sigma2, sigma] = unpack_complex_gaussian(theta, n);
      Eigen::LLT<ComplexMatrix> llt(sigma);
      if (llt.info() != Eigen::Success) return -kInf;
      const Scalar log_det = 2 * llt.matrixL().toDenseMatrix().diagonal().real().array().log().sum();
      const Scalar tr = llt.solve(scatter).trace().real();
      return -m * nn * (kLogPi + std::log(sigma2)) - m * log_det - tr / sigma2;
    };
    ll.gradient = [value = ll.value](const Vector& t) { return numdiff::gradient(value, t); };
    ll.hessian = [value = ll.value](const Vector& t) { return numdiff::hessian(value, t); };
    return ll;
  };
  return f;
}

Matrix ar1_correlation(Scalar rho, Index n) {
  Matrix s(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) s(i, j) = std::pow(rho, static_cast<Scalar>(std::abs(i - j)));
  return s;
}

Scalar complex_t_log_pdf(const ComplexVector& x, const ComplexMatrix& sigma_bar, Scalar lambda, Scalar eta) {
  const Index n = x.size();
  Eigen::LLT<ComplexMatrix> llt(sigma_bar);
  if (llt.info() != Eigen::Success) throw DomainError("complex-t: scatter matrix is not positive definite");
  const Scalar q = llt.matrixL().solve(x).squaredNorm();
  const Scalar log_det = 2 * llt.matrixL().toDenseMatrix().diagonal().real().array().log().sum();
  const Scalar nn = static_cast<Scalar>(n);
  const Scalar b = lambda / eta;
  return std::lgamma(nn + lambda) - std::lgamma(lambda) + lambda * std::log(b) - nn * kLogPi - log_det -
         (nn + lambda) * std::log(b + q);
}

// ---------------------------------------------------------------------------
// Built-in pairs

ModelPair gaussian_wrong_mean(Scalar mu_bar, Scalar sigma2_bar) {
  require(std::isfinite(mu_bar), "mu_bar must be finite");
  require(sigma2_bar > 0 && std::isfinite(sigma2_bar), "sigma2_bar must be positive");
  ModelPair pair;
  pair.spec.id = "gaussian-wrong-mean";
  pair.spec.hyper = {{"mu_bar", mu_bar}, {"sigma2_bar", sigma2_bar}};
  pair.family = gaussian_variance_family();

  const Scalar sd = std::sqrt(sigma2_bar);
  TrueModel& t = pair.truth;
  t.name = fmt::format("normal(mu={}, var={})", mu_bar, sigma2_bar);
  t.obs_dim = 1;
  t.sampler = [mu_bar, sd](std::uint64_t seed, Index count) {
    Engine engine(seed);
    Observations x = standard_normal_matrix(engine, 1, count);
    return Observations((x.array() * sd + mu_bar).matrix());
  };
  t.log_pdf = [mu_bar, sigma2_bar](const ObservationRef& x) {
    const Scalar d = x[0] - mu_bar;
    return -0.5 * (kLog2Pi + std::log(sigma2_bar)) - d * d / (2 * sigma2_bar);
  };
  t.gaussian = GaussianLaw{scalar_vector(mu_bar), scalar_matrix(sigma2_bar)};
  t.nested = NestedSpec{scalar_vector(sigma2_bar), scalar_vector(mu_bar)};
  t.center = mu_bar;
  t.spread = sd;

  const Scalar m2 = sigma2_bar + mu_bar * mu_bar;
  const Scalar m4 = std::pow(mu_bar, 4) + 6 * mu_bar * mu_bar * sigma2_bar + 3 * sigma2_bar * sigma2_bar;
  ClosedForms c;
  c.theta0 = scalar_vector(m2);
  c.kld = [mu_bar, sigma2_bar](const Vector& theta) {
    const Scalar th = theta[0];
    const Scalar ratio = sigma2_bar / th;
    return mu_bar * mu_bar / (2 * th) + 0.5 * (ratio - 1 - std::log(ratio));
  };
  c.sandwich = [m2, m4](const Vector& theta) {
    const Scalar th = theta[0];
    const Scalar a = 1 / (2 * th * th) - m2 / (th * th * th);
    const Scalar b = (th * th + m4 - 2 * th * m2) / (4 * std::pow(th, 4));
    return std::pair{scalar_matrix(a), scalar_matrix(b)};
  };
  c.crb_per_sample = [](const Vector& theta_bar) { return scalar_matrix(2 * theta_bar[0] * theta_bar[0]); };
  pair.closed = std::move(c);
  return pair;
}

ModelPair ar1_power(Scalar rho, Scalar sigma2_bar, Index n) {
  require(std::isfinite(rho) && std::abs(rho) < 1, "rho must satisfy |rho| < 1");
  require(sigma2_bar > 0 && std::isfinite(sigma2_bar), "sigma2_bar must be positive");
  require(n >= 1, "N must be at least 1");
  ModelPair pair;
  pair.spec.id = "ar1-power";
  pair.spec.hyper = {{"rho", rho}, {"sigma2_bar", sigma2_bar}, {"N", static_cast<Scalar>(n)}};
  pair.family = isotropic_gaussian_family(n);

  const Matrix corr = ar1_correlation(rho, n);
  const Matrix cov = sigma2_bar * corr;
  const Eigen::LLT<Matrix> llt(cov);
  const Matrix chol = llt.matrixL();
  const Scalar log_det = 2 * chol.diagonal().array().log().sum();
  const Scalar nn = static_cast<Scalar>(n);

  TrueModel& t = pair.truth;
  t.name = fmt::format("normal(0, {}*AR1(rho={}), N={})", sigma2_bar, rho, n);
  t.obs_dim = n;
  t.sampler = [chol, n](std::uint64_t seed, Index count) {
    Engine engine(seed);
    const Matrix z = standard_normal_matrix(engine, n, count);
    return Observations(chol.triangularView<Eigen::Lower>() * z);
  };
  t.log_pdf = [chol, log_det, nn](const ObservationRef& x) {
    const Vector w = chol.triangularView<Eigen::Lower>().solve(x);
    return -0.5 * (nn * kLog2Pi + log_det + w.squaredNorm());
  };
  t.gaussian = GaussianLaw{Vector::Zero(n), cov};
  t.nested = NestedSpec{scalar_vector(sigma2_bar), scalar_vector(rho)};
  t.center = 0;
  t.spread = std::sqrt(sigma2_bar);

  const Scalar tr2 = (corr * corr).trace();
  const Scalar eq = sigma2_bar * nn;
  const Scalar eq2 = sigma2_bar * sigma2_bar * (nn * nn + 2 * tr2);
  ClosedForms c;
  c.theta0 = scalar_vector(sigma2_bar);
  c.kld = [sigma2_bar, nn, log_det](const Vector& theta) {
    const Scalar th = theta[0];
    return 0.5 * (sigma2_bar * nn / th - nn + nn * std::log(th) - log_det);
  };
  c.sandwich = [nn, eq, eq2](const Vector& theta) {
    const Scalar th = theta[0];
    const Scalar a = nn / (2 * th * th) - eq / (th * th * th);
    const Scalar b = (eq2 - 2 * nn * th * eq + nn * nn * th * th) / (4 * std::pow(th, 4));
    return std::pair{scalar_matrix(a), scalar_matrix(b)};
  };
  c.crb_per_sample = [nn](const Vector& theta_bar) { return scalar_matrix(2 * theta_bar[0] * theta_bar[0] / nn); };
  pair.closed = std::move(c);
  return pair;
}

ModelPair complex_t_scatter(Scalar lambda, Scalar eta, const ComplexMatrix& sigma_bar) {
  require(lambda > 0 && std::isfinite(lambda), "lambda must be positive");
  require(eta > 0 && std::isfinite(eta), "eta must be positive");
  const Index n = sigma_bar.rows();
  require(n >= 1 && sigma_bar.cols() == n, "scatter matrix must be square");
  require((sigma_bar - sigma_bar.adjoint()).norm() <= 1e-12 * sigma_bar.norm(), "scatter matrix must be Hermitian");
  require(std::abs(sigma_bar.trace().real() - static_cast<Scalar>(n)) <= 1e-10 * static_cast<Scalar>(n),
          "scatter matrix must have trace N");
  const Eigen::LLT<ComplexMatrix> llt(sigma_bar);
  require(llt.info() == Eigen::Success, "scatter matrix must be positive definite");
  const ComplexMatrix chol = llt.matrixL();

  ModelPair pair;
  pair.spec.id = "complex-t-scatter";
  pair.spec.hyper = {{"lambda", lambda}, {"eta", eta}, {"N", static_cast<Scalar>(n)}};
  pair.family = complex_gaussian_family(n);

  TrueModel& t = pair.truth;
  t.name = fmt::format("complex-t(lambda={}, eta={}, N={})", lambda, eta, n);
  t.obs_dim = 2 * n;
  // Compound Gaussian: x = sqrt(τ)·Σ̄^{1/2} w, w ~ 𝒞𝒩(0, I), τ = (λ/η)/G, G ~ Gamma(λ, 1).
  t.sampler = [chol, lambda, eta, n](std::uint64_t seed, Index count) {
    Engine engine(seed);
    std::gamma_distribution<Scalar> gamma(lambda, 1.0);
    std::normal_distribution<Scalar> normal(0.0, std::sqrt(0.5));
    ComplexMatrix z(n, count);
    ComplexVector w(n);
    for (Index j = 0; j < count; ++j) {
      const Scalar tau = (lambda / eta) / gamma(engine);
      for (Index i = 0; i < n; ++i) {
        const Scalar re = normal(engine);
        const Scalar im = normal(engine);
        w[i] = {re, im};
      }
      z.col(j) = (chol.triangularView<Eigen::Lower>() * w) * std::complex<Scalar>(std::sqrt(tau), 0);
    }
    return interleave(z);
  };
  t.log_pdf = [sigma_bar, lambda, eta](const ObservationRef& x) {
    return complex_t_log_pdf(to_complex(x), sigma_bar, lambda, eta);
  };
  std::optional<Scalar> power;
  if (lambda > 1) power = (lambda / eta) / (lambda - 1);
  if (power) {
    Vector gamma(2);
    gamma << lambda, eta;
    t.nested = NestedSpec{pack_complex_gaussian(*power, sigma_bar), gamma};
  }
  pair.scatter = ScatterTruth{sigma_bar, lambda, eta, power};
  return pair;
}

std::vector<std::string> hyperparameter_names(const std::string& id) {
  if (id == "gaussian-wrong-mean") return {"mu_bar", "sigma2_bar"};
  if (id == "ar1-power") return {"rho", "sigma2_bar", "N"};
  if (id == "complex-t-scatter") return {"lambda", "eta", "N"};
  return {};
}

namespace {

Index integral_dimension(Scalar v) {
  if (!(v >= 1) || v != std::floor(v) || v > 4096) throw DomainError(fmt::format("N must be a positive integer, got {}", v));
  return static_cast<Index>(v);
}

ComplexMatrix scatter_from_spec(const std::string& spec, Index n) {
  if (spec == "identity") return ComplexMatrix::Identity(n, n);
  if (spec.rfind("ar1:", 0) == 0) {
    Scalar rho = 0;
    try {
      std::size_t used = 0;
      rho = std::stod(spec.substr(4), &used);
      if (used != spec.size() - 4) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError("scatter spec '" + spec + "': expected ar1:<rho>");
    }
    require(std::abs(rho) < 1, "scatter ar1 coefficient must satisfy |rho| < 1");
    return ar1_correlation(rho, n).cast<std::complex<Scalar>>();
  }
  throw ParseError("unknown scatter spec '" + spec + "' (expected identity or ar1:<rho>)");
}

}  // namespace

ModelPair make_model_pair(const ModelSpec& spec) {
  const auto names = hyperparameter_names(spec.id);
  if (names.empty()) throw DomainError("unknown model id '" + spec.id + "'");
  for (const auto& [key, value] : spec.hyper) {
    if (std::find(names.begin(), names.end(), key) == names.end()) {
      throw ParseError(fmt::format("model '{}' has no hyperparameter '{}'", spec.id, key));
    }
    require(std::isfinite(value), fmt::format("hyperparameter '{}' must be finite", key));
  }
  auto value_or = [&](const std::string& key, Scalar fallback) {
    auto it = spec.hyper.find(key);
    return it == spec.hyper.end() ? fallback : it->second;
  };
  ModelPair pair;
  if (spec.id == "gaussian-wrong-mean") {
    pair = gaussian_wrong_mean(value_or("mu_bar", 1.0), value_or("sigma2_bar", 4.0));
  } else if (spec.id == "ar1-power") {
    pair = ar1_power(value_or("rho", 0.5), value_or("sigma2_bar", 4.0), integral_dimension(value_or("N", 8)));
  } else {
    const Index n = integral_dimension(value_or("N", 4));
    pair = complex_t_scatter(value_or("lambda", 2.0), value_or("eta", 1.0), scatter_from_spec(spec.scatter, n));
    pair.spec.scatter = spec.scatter;
  }
  return pair;
}

// ---------------------------------------------------------------------------
// Operations

Scalar log_pdf_assumed(const AssumedFamily& family, const Vector& theta, const ObservationRef& x) {
  family.check(theta);
  if (x.size() != family.obs_dim) throw DomainError("observation dimension does not match the family");
  return family.log_pdf(theta, x);
}

Observations sample_true(const TrueModel& model, std::uint64_t seed, Index count) {
  return model.sample(seed, count);
}

const char* to_string(Method m) {
  switch (m) {
    case Method::closed_form: return "closed-form";
    case Method::quadrature: return "quadrature";
    case Method::monte_carlo: return "monte-carlo";
  }
  return "unknown";
}

Method method_from_string(const std::string& s) {
  if (s == "closed" || s == "closed-form") return Method::closed_form;
  if (s == "quadrature") return Method::quadrature;
  if (s == "mc" || s == "monte-carlo") return Method::monte_carlo;
  throw ParseError("unknown method '" + s + "' (expected closed, quadrature or mc)");
}

KldValue kld_eval(const ModelPair& pair, const Vector& theta, const ExpectationOptions& options) {
  pair.family.check(theta);
  if (options.method == Method::closed_form) {
    if (!pair.closed || !pair.closed->kld) {
      throw CapabilityError("no closed-form KLD for model '" + pair.spec.id + "'");
    }
    return {pair.closed->kld(theta), 0.0, "closed-form"};
  }
  if (!pair.truth.log_pdf) {
    throw CapabilityError("KLD needs the true density; model '" + pair.spec.id + "' has none");
  }
  const auto& family = pair.family;
  const auto& truth = pair.truth;
  auto g = [&](const ObservationRef& x) {
    Vector v(1);
    v[0] = truth.log_pdf(x) - family.log_pdf(theta, x);
    return v;
  };
  const ExpectationResult e = expect(truth, g, 1, options);
  return {e.mean[0], e.std_error[0], e.detail};
}

ReferenceSolution reference_solution(const ModelPair& pair) {
  if (!pair.closed) throw CapabilityError("no closed-form reference solution for model '" + pair.spec.id + "'");
  ReferenceSolution ref;
  ref.theta0 = pair.closed->theta0;
  auto [a, b] = pair.closed->sandwich(ref.theta0);
  ref.a = std::move(a);
  ref.b = std::move(b);
  if (pair.truth.nested) {
    ref.r = pair.truth.nested->theta_bar - ref.theta0;
    if (pair.closed->crb_per_sample) ref.crb_per_sample = pair.closed->crb_per_sample(pair.truth.nested->theta_bar);
  }
  return ref;
}

}  // namespace mcrb
