#include <doctest.h>

#include "mcrb/bayes.hpp"
#include "mcrb/errors.hpp"
#include "mcrb/harness.hpp"
#include "mcrb/random.hpp"

#include <cmath>
#include <random>

using namespace mcrb;

namespace {

Observations row(std::initializer_list<Scalar> xs) {
  Observations o(1, static_cast<Index>(xs.size()));
  Index j = 0;
  for (Scalar x : xs) o(0, j++) = x;
  return o;
}

// Conjugate update for 𝒩(0, θ) data under an inverse-gamma(a, b) prior.
struct InverseGamma {
  Scalar a, b;
  Scalar mean() const { return b / (a - 1); }
  Scalar variance() const { return b * b / ((a - 1) * (a - 1) * (a - 2)); }
};

InverseGamma conjugate(Scalar a, Scalar b, const Observations& x) {
  return {a + 0.5 * static_cast<Scalar>(x.cols()), b + 0.5 * x.squaredNorm()};
}

// A grid posterior with two equal bumps at ±2.
PosteriorGrid twin_peaks() {
  const Index n = 2001;
  const Vector nodes = Vector::LinSpaced(n, -6, 6);
  Vector logd(n);
  for (Index i = 0; i < n; ++i) {
    const Scalar t = nodes[i];
    logd[i] = std::log(std::exp(-8 * (t - 2) * (t - 2)) + std::exp(-8 * (t + 2) * (t + 2)));
  }
  return PosteriorGrid::from_nodes(nodes, logd);
}

}  // namespace

TEST_CASE("priors are normalized densities") {
  const Prior ig = inverse_gamma_prior(3, 2);
  // Midpoint sum in u = ln θ, dθ = θ du.
  Scalar mass = 0;
  const int n = 200000;
  const Scalar lo = -12, hi = 12, h = (hi - lo) / n;
  for (int i = 0; i < n; ++i) {
    const Scalar u = lo + (i + 0.5) * h;
    mass += std::exp(ig.log_density(Vector::Constant(1, std::exp(u))) + u) * h;
  }
  CHECK(mass == doctest::Approx(1).epsilon(1e-9));
  const Prior flat = uniform_prior(0.1, 100);
  CHECK(std::exp(flat.log_density(Vector::Constant(1, 3.0))) * 99.9 == doctest::Approx(1));
  CHECK_THROWS_AS(inverse_gamma_prior(0, 1), DomainError);
  CHECK_THROWS_AS(uniform_prior(2, 1), DomainError);
}

TEST_CASE("conjugate inverse-gamma posterior") {
  const PosteriorGrid p = posterior_compute(gaussian_variance_family(), inverse_gamma_prior(3, 2), row({1, -1}));
  const InverseGamma oracle = conjugate(3, 2, row({1, -1}));
  CHECK(oracle.a == 4);
  CHECK(oracle.b == 3);
  CHECK(p.total_mass() == doctest::Approx(1).epsilon(1e-8));
  CHECK(p.masses().sum() == doctest::Approx(1).epsilon(1e-8));
  CHECK((p.masses().array() >= 0).all());
  CHECK(std::abs(p.mean() - 1.0) < 1e-6);
  CHECK(std::abs(p.variance() / oracle.variance() - 1) < 1e-5);
  CHECK(mb_estimate(p, squared_loss())[0] == doctest::Approx(1.0).epsilon(1e-6));
  // The inverse-gamma mode is b/(a + 1).
  CHECK(p.mode() == doctest::Approx(0.6).epsilon(1e-4));
}

TEST_CASE("posterior mean matches the conjugate oracle on random draws") {
  std::mt19937_64 rng(derive_seed(3, 33));
  std::uniform_real_distribution<Scalar> shape(2.5, 8), scale(0.2, 6), s2(0.1, 10);
  std::uniform_int_distribution<int> size(1, 60);
  for (int k = 0; k < 50; ++k) {
    const Scalar a = shape(rng), b = scale(rng);
    const ModelPair truth = gaussian_wrong_mean(0, s2(rng));
    const Observations x = truth.truth.sample(rng(), size(rng));
    const PosteriorGrid p = posterior_compute(gaussian_variance_family(), inverse_gamma_prior(a, b), x);
    const InverseGamma oracle = conjugate(a, b, x);
    CHECK(std::abs(p.mean() / oracle.mean() - 1) < 1e-6);
    CHECK(std::abs(p.variance() / oracle.variance() - 1) < 1e-5);
  }
}

TEST_CASE("flat-prior posterior peaks at the likelihood maximizer") {
  const PosteriorGrid p = posterior_compute(gaussian_variance_family(), uniform_prior(0.1, 100), row({1, -1, 2}));
  CHECK(p.total_mass() == doctest::Approx(1).epsilon(1e-8));
  CHECK(std::abs(p.mode() - 2) < 1e-3);
  CHECK(p.nodes().minCoeff() >= 0.1);
  CHECK(p.nodes().maxCoeff() <= 100);
}

TEST_CASE("posterior grid failures") {
  CHECK_THROWS_AS(
      posterior_compute(complex_gaussian_family(2), inverse_gamma_prior(3, 2), Observations::Ones(4, 3)),
      CapabilityError);
  CHECK_THROWS_AS(posterior_compute(gaussian_variance_family(), inverse_gamma_prior(3, 2), Observations(1, 0)),
                  DomainError);
  PosteriorOptions narrow;
  narrow.half_width_sds = 0.5;
  narrow.max_extensions = 0;
  CHECK_THROWS_AS(posterior_compute(gaussian_variance_family(), inverse_gamma_prior(3, 2), row({1, -1, 2}), narrow),
                  NumericError);
}

TEST_CASE("point estimates on a symmetric posterior") {
  const Index n = 801;
  const Vector nodes = Vector::LinSpaced(n, 1, 5);
  const Vector logd = -(nodes.array() - 3).square() * 4;
  const PosteriorGrid p = PosteriorGrid::from_nodes(nodes, logd);
  CHECK(mb_estimate(p, squared_loss())[0] == doctest::Approx(3).epsilon(1e-12));
  CHECK(mb_estimate(p, absolute_loss())[0] == doctest::Approx(3).epsilon(1e-9));
  CHECK(mb_estimate(p, weighted_squared_loss(Matrix::Constant(1, 1, 2.0)))[0] == doctest::Approx(3).epsilon(1e-12));
  const Loss quartic = custom_loss("quartic", [](const Vector& a, const Vector& b) { return std::pow(a[0] - b[0], 4); });
  CHECK(mb_estimate(p, quartic)[0] == doctest::Approx(3).epsilon(1e-6));
  CHECK(p.mode() == doctest::Approx(3).epsilon(1e-9));
  CHECK(p.quantile(0.5) == doctest::Approx(3).epsilon(1e-9));
}

TEST_CASE("tied minimizers of the expected loss are reported") {
  const PosteriorGrid p = twin_peaks();
  // A bounded 0-1 style loss prefers either peak equally.
  const Loss notch = custom_loss("notch", [](const Vector& a, const Vector& b) {
    return 1 - std::exp(-(a[0] - b[0]) * (a[0] - b[0]) / 0.02);
  });
  CHECK_THROWS_AS(mb_estimate(p, notch), NonUniqueError);
  // Squared loss still has a unique minimizer, the mean 0.
  CHECK(std::abs(mb_estimate(p, squared_loss())[0]) < 1e-12);
}

TEST_CASE("loss curvature") {
  const Vector t0 = Vector::Constant(1, 5.0);
  const LossCurvature sq = loss_curvature(squared_loss(), t0);
  CHECK(std::abs(sq.l1(0, 0)) == 2);
  CHECK(std::abs(sq.l2(0, 0)) == 2);
  CHECK(sq.l2.inverse()(0, 0) * sq.l1(0, 0) == -1);

  Matrix w(2, 2);
  w << 3, 1, 1, 2;
  const LossCurvature wc = loss_curvature(weighted_squared_loss(w), Vector::Ones(2));
  CHECK((wc.l2.inverse() * wc.l1 + Matrix::Identity(2, 2)).norm() < 1e-14);
  Matrix indefinite(1, 1);
  indefinite << -1;
  CHECK_THROWS_AS(weighted_squared_loss(indefinite), DomainError);

  CHECK_THROWS_AS(loss_curvature(absolute_loss(), t0), CapabilityError);
  const Loss kinked = custom_loss("kinked", [](const Vector& a, const Vector& b) { return std::abs(a[0] - b[0]); },
                                  false);
  CHECK_THROWS_AS(loss_curvature(kinked, t0), CapabilityError);

  // Finite differences on a custom weighted form: L1 = −(W + Wᵀ), L2 = W + Wᵀ.
  const Loss custom = custom_loss("custom-weighted", [w](const Vector& a, const Vector& b) {
    const Vector e = a - b;
    return Scalar(e.dot(w * e));
  });
  const LossCurvature cc = loss_curvature(custom, Vector::Ones(2));
  CHECK((cc.l2 - 2 * w).norm() < 1e-5);
  CHECK((cc.l1 + 2 * w).norm() < 1e-5);
}

TEST_CASE("MB asymptotic covariance") {
  const ModelPair g = gaussian_wrong_mean(1, 4);
  const SandwichPair s = sandwich_matrices(g, Vector::Constant(1, 5.0), {Method::closed_form});
  const Matrix lambda = mb_asymptotic_cov(loss_curvature(squared_loss(), s.at), s);
  CHECK(lambda(0, 0) == doctest::Approx(48).epsilon(1e-14));
  CHECK(lambda(0, 0) == mcrb_from(s, 1).c_per_sample(0, 0));

  SandwichPair matched = s;
  matched.b = -matched.a;
  CHECK(mb_asymptotic_cov(loss_curvature(squared_loss(), s.at), matched)(0, 0) ==
        doctest::Approx(-1 / s.a(0, 0)).epsilon(1e-14));

  SandwichPair two;
  two.a = Matrix(2, 2);
  two.a << -2, 0.4, 0.4, -1;
  two.b = Matrix(2, 2);
  two.b << 1, 0.3, 0.3, 2;
  two.at = Vector::Ones(2);
  Matrix w(2, 2);
  w << 3, 1, 1, 2;
  const Matrix lw = mb_asymptotic_cov(loss_curvature(weighted_squared_loss(w), two.at), two);
  CHECK((lw - sandwich_product(two.a, two.b)).norm() < 1e-13);

  const Loss quartic = custom_loss("quartic", [](const Vector& a, const Vector& b) { return std::pow(a[0] - b[0], 4); });
  // A quartic loss is flat to second order, so its own curvature vanishes.
  CHECK(std::abs(loss_curvature(quartic, s.at).l2(0, 0)) < 1e-6);
  LossCurvature flat;
  flat.l1 = Matrix::Constant(1, 1, -2.0);
  flat.l2 = Matrix::Zero(1, 1);
  CHECK_THROWS_AS(mb_asymptotic_cov(flat, s), RegularityError);
}

TEST_CASE("MB estimate converges to the pseudo-true parameter") {
  const ModelPair g = gaussian_wrong_mean(1, 4);
  const Observations x = g.truth.sample(derive_seed(4, 4), 100000);
  const PosteriorGrid p = posterior_compute(g.family, inverse_gamma_prior(3, 2), x);
  CHECK(std::abs(mb_estimate(p, squared_loss())[0] - 5) < 0.05);
}

TEST_CASE("posterior concentration along growing samples") {
  for (const ModelPair& pair : {gaussian_wrong_mean(1, 4), gaussian_wrong_mean(0, 4), ar1_power(0.5, 4, 8)}) {
    const Vector theta0 = reference_solution(pair).theta0;
    const Observations x = pair.truth.sample(derive_seed(12, 1), 12800);
    std::vector<PosteriorGrid> posts;
    std::vector<Index> sizes;
    for (Index m = 100; m <= 12800; m *= 2) {
      posts.push_back(posterior_compute(pair.family, inverse_gamma_prior(3, 2), x.leftCols(m)));
      sizes.push_back(m);
    }
    const auto rows = concentration_stat(posts, sizes, theta0);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      CHECK(rows[i].std < rows[i - 1].std);
      CHECK(rows[i].std / rows[i - 1].std == doctest::Approx(1 / std::sqrt(2.0)).epsilon(0.2));
    }
    // Within four posterior standard deviations of θ0 at the largest M.
    CHECK(rows.back().dist_to_theta0 < 4 * rows.back().std);
    if (pair.spec.id == "gaussian-wrong-mean" && pair.spec.get("mu_bar") == 1) {
      const PosteriorGrid p = posterior_compute(pair.family, inverse_gamma_prior(3, 2), x.leftCols(10000));
      CHECK(std::abs(p.mean() - 5) <= 0.1);
    }
  }
  CHECK(concentration_csv({{100, 5.1, 0.5, 0.1}}) == "M,mean,std,dist_to_theta0\n100,5.1,0.5,0.1\n");
  CHECK_THROWS_AS(concentration_stat({}, {1}, Vector::Ones(1)), DomainError);
}

TEST_CASE("scaled MB errors follow the asymptotic covariance") {
  Scenario s;
  s.spec = {"gaussian-wrong-mean", {{"mu_bar", 1}, {"sigma2_bar", 4}}};
  s.estimator = EstimatorKind::mb_squared;
  s.m = 10000;
  s.trials = 2000;
  s.master_seed = 77;
  s.workers = 0;
  const TrialSummary t = run_trials(s);
  CHECK(t.failures == 0);
  const Scalar scaled = t.emp_cov(0, 0) * static_cast<Scalar>(s.m);
  CHECK(std::abs(scaled / 48 - 1) < 0.1);
}
