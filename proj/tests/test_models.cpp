#include <doctest.h>

#include "mcrb/errors.hpp"
#include "mcrb/harness.hpp"
#include "mcrb/models.hpp"
#include "mcrb/numdiff.hpp"
#include "mcrb/quadrature.hpp"
#include "mcrb/random.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <cmath>
#include <random>

using namespace mcrb;

namespace {

Vector v1(Scalar x) { return Vector::Constant(1, x); }

// D(𝒩(μ, s) ‖ 𝒩(0, θ)) for scalar Gaussians.
Scalar gaussian_kld(Scalar mu, Scalar s, Scalar theta) {
  return 0.5 * ((s + mu * mu) / theta - 1 - std::log(s / theta));
}

Scalar sample_correlation(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  const Vector ca = a.array() - a.mean();
  const Vector cb = b.array() - b.mean();
  return ca.dot(cb) / (ca.norm() * cb.norm());
}

}  // namespace

TEST_CASE("assumed log-densities at known points") {
  const AssumedFamily g = gaussian_variance_family();
  CHECK(log_pdf_assumed(g, v1(1), v1(0)) == doctest::Approx(-0.918939).epsilon(1e-6));
  CHECK(log_pdf_assumed(g, v1(4), v1(2)) == doctest::Approx(-2.112086).epsilon(1e-6));

  const AssumedFamily c = complex_gaussian_family(1);
  const Vector theta = pack_complex_gaussian(1, ComplexMatrix::Identity(1, 1));
  CHECK(log_pdf_assumed(c, theta, Vector::Zero(2)) == doctest::Approx(-1.144729).epsilon(1e-6));
}

TEST_CASE("log_pdf_assumed rejects parameters outside the domain") {
  const AssumedFamily g = gaussian_variance_family();
  CHECK_THROWS_AS(log_pdf_assumed(g, v1(0), v1(1)), DomainError);
  CHECK_THROWS_AS(log_pdf_assumed(g, v1(-2), v1(1)), DomainError);
  CHECK_THROWS_AS(log_pdf_assumed(g, Vector::Ones(2), v1(1)), DomainError);
  const AssumedFamily c = complex_gaussian_family(2);
  // Trace constraint tr(Σ) = N.
  CHECK_THROWS_AS(log_pdf_assumed(c, pack_complex_gaussian(1, ComplexMatrix::Identity(2, 2) * 3.0), Vector::Zero(4)),
                  DomainError);
}

TEST_CASE("assumed densities integrate to one") {
  const AssumedFamily g = gaussian_variance_family();
  for (Scalar theta : {0.3, 1.0, 7.5}) {
    auto f = [&](Scalar x) { return v1(std::exp(g.log_pdf(v1(theta), v1(x)))); };
    const Scalar s = 12 * std::sqrt(theta);
    CHECK(quadrature::integrate_interval(f, 1, -s, s).value[0] == doctest::Approx(1).epsilon(1e-10));
  }
  // Complex Gaussian, N = 1: a 2-D real density.
  const AssumedFamily c = complex_gaussian_family(1);
  const Vector theta = pack_complex_gaussian(2.5, ComplexMatrix::Identity(1, 1));
  auto inner = [&](Scalar re) {
    auto f = [&](Scalar im) {
      Vector x(2);
      x << re, im;
      return v1(std::exp(c.log_pdf(theta, x)));
    };
    return quadrature::integrate_interval(f, 1, -15, 15, 1e-10).value;
  };
  CHECK(quadrature::integrate_interval(inner, 1, -15, 15, 1e-10).value[0] == doctest::Approx(1).epsilon(1e-8));
}

TEST_CASE("analytic scores and Hessians match finite differences") {
  Engine e(derive_seed(11, 0));
  std::uniform_real_distribution<Scalar> u(0.2, 10);
  std::normal_distribution<Scalar> n(0, 3);
  for (const AssumedFamily& fam : {gaussian_variance_family(), isotropic_gaussian_family(3)}) {
    REQUIRE(fam.score);
    REQUIRE(fam.hessian);
    for (int k = 0; k < 20; ++k) {
      const Vector theta = v1(u(e));
      Vector x(fam.obs_dim);
      for (Index i = 0; i < x.size(); ++i) x[i] = n(e);
      const Vector s = fam.score(theta, x);
      const Vector s_num = numdiff::gradient([&](const Vector& t) { return fam.log_pdf(t, x); }, theta);
      CHECK(std::abs(s[0] - s_num[0]) <= 1e-6 * std::max(1.0, std::abs(s[0])));
      const Matrix h = fam.hessian(theta, x);
      const Matrix h_num = numdiff::jacobian_of_gradient([&](const Vector& t) { return fam.score(t, x); }, theta);
      CHECK(std::abs(h(0, 0) - h_num(0, 0)) <= 1e-6 * std::max(1.0, std::abs(h(0, 0))));
    }
  }
}

TEST_CASE("samplers are deterministic in the seed") {
  for (const ModelPair& p : {gaussian_wrong_mean(1, 4), ar1_power(0.5, 4, 8), complex_t_scatter(2, 1, ComplexMatrix::Identity(3, 3))}) {
    const Observations a = sample_true(p.truth, 99, 500);
    const Observations b = sample_true(p.truth, 99, 500);
    CHECK(a.rows() == p.family.obs_dim);
    CHECK(a.cols() == 500);
    CHECK((a.array() == b.array()).all());
    const Observations c = sample_true(p.truth, 100, 10000);
    const Observations d = sample_true(p.truth, 101, 10000);
    CHECK(std::abs(sample_correlation(c.row(0).transpose(), d.row(0).transpose())) < 0.05);
  }
}

TEST_CASE("gaussian-wrong-mean sampler matches its moments") {
  const ModelPair p = gaussian_wrong_mean(0, 1);
  const Observations x = sample_true(p.truth, 5, 100000);
  CHECK(std::abs(x.mean()) < 4 / std::sqrt(1e5));
}

TEST_CASE("ar1-power sampler with rho = 0 has independent components") {
  const ModelPair p = ar1_power(0, 4, 8);
  const Observations x = sample_true(p.truth, 6, 10000);
  for (Index i = 0; i < 8; ++i)
    for (Index j = i + 1; j < 8; ++j)
      CHECK(std::abs(sample_correlation(x.row(i).transpose(), x.row(j).transpose())) < 5e-2);
}

TEST_CASE("ar1 correlation matrix: unit trace per component and positive definite") {
  for (Scalar rho : {-0.9, -0.3, 0.0, 0.5, 0.99}) {
    for (Index n : {1, 2, 8, 17}) {
      const Matrix s = ar1_correlation(rho, n);
      CHECK(s.trace() == static_cast<Scalar>(n));
      CHECK((s - s.transpose()).norm() == 0);
      CHECK(Eigen::LLT<Matrix>(s).info() == Eigen::Success);
    }
  }
}

TEST_CASE("complex-t sampler: quadratic form follows the radial law of the density") {
  const Index n = 4;
  const Scalar lambda = 2, eta = 1;
  const ComplexMatrix sigma = ComplexMatrix::Identity(n, n);
  const ModelPair p = complex_t_scatter(lambda, eta, sigma);
  const ComplexMatrix x = to_complex_columns(sample_true(p.truth, 77, 100000));
  std::vector<Scalar> q(static_cast<std::size_t>(x.cols()));
  for (Index j = 0; j < x.cols(); ++j) q[static_cast<std::size_t>(j)] = x.col(j).squaredNorm();

  // Radial density of q = xᴴΣ̄⁻¹x implied by the t density:
  // q^{N−1}/Γ(N) · Γ(N+λ)/Γ(λ) · (λ/η)^λ · (λ/η + q)^{−(N+λ)}.
  const Scalar c = lambda / eta;
  const Scalar log_k = std::lgamma(n + lambda) - std::lgamma(lambda) - std::lgamma(static_cast<Scalar>(n)) +
                       lambda * std::log(c);
  auto radial = [&](Scalar r) {
    return v1(r <= 0 ? 0.0 : std::exp(log_k + (n - 1) * std::log(r) - (n + lambda) * std::log(c + r)));
  };
  auto cdf_quad = [&](Scalar v) { return quadrature::integrate_interval(radial, 1, 0, v, 1e-11).value[0]; };
  auto cdf_beta = [&](Scalar v) { return boost::math::ibeta(static_cast<Scalar>(n), lambda, v / (v + c)); };

  std::vector<Scalar> sorted = q;
  std::sort(sorted.begin(), sorted.end());
  Scalar worst = 0;
  for (int k = 1; k < 50; ++k) {
    const Scalar v = sorted[static_cast<std::size_t>(k * 2000)];
    const Scalar f = cdf_quad(v);
    CHECK(std::abs(f - cdf_beta(v)) < 1e-9);
    worst = std::max(worst, std::abs(f - static_cast<Scalar>(k * 2000 + 1) / 1e5));
  }
  CHECK(worst < 0.01);
  CHECK(kolmogorov_distance(q, cdf_beta) < 0.01);

  // The density integrated over the shell {q = r} (area π^N r^{N−1}/Γ(N) per dr) is the radial law.
  ComplexVector point = ComplexVector::Zero(n);
  point[0] = std::sqrt(2.0);
  const Scalar shell = n * std::log(M_PI) + (n - 1) * std::log(2.0) - std::lgamma(static_cast<Scalar>(n));
  CHECK(complex_t_log_pdf(point, sigma, lambda, eta) + shell == doctest::Approx(std::log(radial(2.0)[0])).epsilon(1e-12));
}

TEST_CASE("closed-form KLD") {
  ExpectationOptions closed{Method::closed_form};
  CHECK(kld_eval(gaussian_wrong_mean(1, 4), v1(5), closed).value == doctest::Approx(0.111572).epsilon(1e-6));
  CHECK(kld_eval(gaussian_wrong_mean(1, 4), v1(5), closed).value == doctest::Approx(gaussian_kld(1, 4, 5)));
  CHECK(kld_eval(gaussian_wrong_mean(0, 4), v1(4), closed).value == doctest::Approx(0).scale(1));
  CHECK(kld_eval(ar1_power(0, 4, 8), v1(4), closed).value == doctest::Approx(0).scale(1));
}

TEST_CASE("numeric KLD agrees with the closed form and is non-negative") {
  Engine e(derive_seed(12, 0));
  std::uniform_real_distribution<Scalar> u(0.5, 6);
  ExpectationOptions quad{Method::quadrature};
  ExpectationOptions mc{Method::monte_carlo};
  mc.draws = 200000;
  for (int k = 0; k < 10; ++k) {
    const Scalar mu = u(e) - 3, s2 = u(e), theta = u(e);
    const ModelPair p = gaussian_wrong_mean(mu, s2);
    const KldValue q = kld_eval(p, v1(theta), quad);
    CHECK(q.value == doctest::Approx(gaussian_kld(mu, s2, theta)).epsilon(1e-9));
    CHECK(q.value >= -1e-12);
    const KldValue m = kld_eval(p, v1(theta), mc);
    CHECK(std::abs(m.value - gaussian_kld(mu, s2, theta)) <= 4 * m.std_error);
  }
  // AR(1): D = ½[N σ̄²/θ − N − ln det(σ̄²Σ/θ)], an independent oracle.
  const Scalar rho = 0.6, s2 = 3, theta = 2.5;
  const Index n = 4;
  const Matrix sig = ar1_correlation(rho, n);
  const Scalar oracle = 0.5 * (n * s2 / theta - n - std::log((sig * (s2 / theta)).determinant()));
  CHECK(kld_eval(ar1_power(rho, s2, n), v1(theta), ExpectationOptions{Method::closed_form}).value ==
        doctest::Approx(oracle).epsilon(1e-12));
  CHECK(kld_eval(ar1_power(rho, s2, n), v1(theta), quad).value == doctest::Approx(oracle).epsilon(1e-10));
  CHECK(kld_eval(ar1_power(0, 4, n), v1(4), quad).value == doctest::Approx(0).scale(1));
}

TEST_CASE("reference solutions of the built-ins") {
  const ReferenceSolution g = reference_solution(gaussian_wrong_mean(1, 4));
  CHECK(g.theta0[0] == 5);
  CHECK(g.a(0, 0) == doctest::Approx(-0.02));
  CHECK(g.b(0, 0) == doctest::Approx(0.0192));
  CHECK(g.mcrb_per_sample()(0, 0) == doctest::Approx(48));
  CHECK((*g.r)[0] == -1);

  const ReferenceSolution a = reference_solution(ar1_power(0.5, 4, 8));
  CHECK(a.theta0[0] == 4);
  Scalar tr = 0;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) tr += std::pow(0.25, std::abs(i - j));
  CHECK(a.a(0, 0) == doctest::Approx(-8.0 / 32));
  CHECK(a.b(0, 0) == doctest::Approx(tr / 32).epsilon(1e-14));

  CHECK_THROWS_AS(reference_solution(complex_t_scatter(2, 1, ComplexMatrix::Identity(2, 2))), CapabilityError);
}

TEST_CASE("model pairs from id and hyperparameters") {
  ModelSpec spec{"gaussian-wrong-mean", {{"mu_bar", 2}, {"sigma2_bar", 1}}};
  CHECK(reference_solution(make_model_pair(spec)).theta0[0] == 5);
  CHECK_THROWS_AS(make_model_pair(ModelSpec{"gaussian-wrong-mean", {{"rho", 0.1}}}), ParseError);
  CHECK_THROWS_AS(make_model_pair(ModelSpec{"nope", {}}), DomainError);
  CHECK_THROWS_AS(make_model_pair(ModelSpec{"gaussian-wrong-mean", {{"sigma2_bar", 0}}}), DomainError);
  CHECK_THROWS_AS(make_model_pair(ModelSpec{"ar1-power", {{"rho", 1}}}), DomainError);
  CHECK_THROWS_AS(make_model_pair(ModelSpec{"ar1-power", {{"N", 2.5}}}), DomainError);
  CHECK_THROWS_AS(make_model_pair(ModelSpec{"complex-t-scatter", {{"lambda", -1}}}), DomainError);

  ModelSpec t{"complex-t-scatter", {{"N", 3}}, "ar1:0.4"};
  const ModelPair p = make_model_pair(t);
  REQUIRE(p.scatter);
  CHECK(p.scatter->sigma_bar.trace().real() == doctest::Approx(3));
  CHECK(std::abs(p.scatter->sigma_bar(0, 1).real() - 0.4) < 1e-15);
  CHECK(*p.scatter->power == doctest::Approx(2.0));  // (λ/η)/(λ−1) at λ = 2, η = 1
  CHECK_THROWS_AS(make_model_pair(ModelSpec{"complex-t-scatter", {}, "toeplitz"}), ParseError);
}

TEST_CASE("complex packing round-trips") {
  ComplexMatrix s(2, 2);
  s << 1.2, std::complex<Scalar>(0.3, -0.4), std::complex<Scalar>(0.3, 0.4), 0.8;
  const Vector theta = pack_complex_gaussian(1.7, s);
  CHECK(theta.size() == 5);
  const auto [s2, back] = unpack_complex_gaussian(theta, 2);
  CHECK(s2 == 1.7);
  CHECK((back - s).norm() < 1e-15);

  ComplexMatrix z(2, 3);
  z << std::complex<Scalar>(1, 2), 3, std::complex<Scalar>(0, -1), 4, std::complex<Scalar>(5, 6), 7;
  CHECK((to_complex_columns(interleave(z)) - z).norm() == 0);
}
