#include <doctest.h>

#include "mcrb/errors.hpp"
#include "mcrb/harness.hpp"

#include <cmath>
#include <sstream>

using namespace mcrb;

namespace {

Scenario gaussian(Scalar mu_bar, Index trials, std::uint64_t seed = 5) {
  Scenario s;
  s.spec = {"gaussian-wrong-mean", {{"mu_bar", mu_bar}, {"sigma2_bar", 4}}};
  s.m = 10;
  s.trials = trials;
  s.master_seed = seed;
  s.workers = 0;
  return s;
}

Scenario ar1(Scalar rho, Index trials) {
  Scenario s;
  s.spec = {"ar1-power", {{"rho", rho}, {"sigma2_bar", 4}, {"N", 8}}};
  s.m = 24;
  s.trials = trials;
  s.master_seed = 6;
  s.workers = 0;
  return s;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("empirical covariance and MSE of the wrong-mean gaussian") {
  const TrialSummary t = run_trials(gaussian(1, 100000));
  CHECK(t.failures == 0);
  CHECK(t.estimates.size() == 100000);
  CHECK(t.theta0[0] == 5);
  REQUIRE(t.emp_mse.has_value());
  CHECK(std::abs(t.emp_cov(0, 0) / 4.8 - 1) < 0.03);
  CHECK(std::abs((*t.emp_mse)(0, 0) / 5.8 - 1) < 0.03);
  // mse − cov = (θ0 − θ̄)² + 2(θ0 − θ̄)·bias; the bias term is Monte Carlo noise.
  const Scalar r = 5 - 4;
  const Scalar gap = (*t.emp_mse)(0, 0) - t.emp_cov(0, 0) - r * r;
  CHECK(std::abs(gap) < 3 * 2 * r * t.bias_std_error[0]);
  CHECK(std::abs(t.bias[0]) < 3 * t.bias_std_error[0]);
}

TEST_CASE("trial results do not depend on the worker count") {
  Scenario a = gaussian(1, 3000, 99);
  a.workers = 1;
  Scenario b = a;
  b.workers = 4;
  const TrialSummary x = run_trials(a), y = run_trials(b);
  REQUIRE(x.estimates.size() == y.estimates.size());
  for (std::size_t i = 0; i < x.estimates.size(); ++i) CHECK(x.estimates[i][0] == y.estimates[i][0]);
  CHECK(x.emp_cov(0, 0) == y.emp_cov(0, 0));
  CHECK(run_trials(a).emp_cov(0, 0) == x.emp_cov(0, 0));
  Scenario c = a;
  c.master_seed = 100;
  CHECK(run_trials(c).emp_cov(0, 0) != x.emp_cov(0, 0));

  Scenario sa = ar1(0.5, 500), sb = ar1(0.5, 500);
  sa.workers = 1;
  sb.workers = 3;
  const auto ga = sweep(sa, "rho", {0, 0.5}), gb = sweep(sb, "rho", {0, 0.5});
  CHECK(ga.csv() == gb.csv());
  CHECK(ga.metadata.dump() == gb.metadata.dump());
}

TEST_CASE("scenario validation") {
  const ModelPair g = gaussian_wrong_mean(1, 4);
  Scenario s = gaussian(1, 1);
  CHECK_THROWS_AS(validate(s, g), DomainError);
  s.trials = 10;
  s.m = 0;
  CHECK_THROWS_AS(validate(s, g), DomainError);
  s.m = 10;
  s.estimator = EstimatorKind::cmml;
  CHECK_THROWS_AS(validate(s, g), CapabilityError);

  Scenario ct;
  ct.spec = {"complex-t-scatter", {{"lambda", 2}, {"eta", 1}, {"N", 4}}};
  ct.estimator = EstimatorKind::cmml;
  ct.m = 3;
  const ModelPair cp = make_model_pair(ct.spec);
  CHECK_THROWS_AS(validate(ct, cp), DomainError);
  ct.m = 4;
  validate(ct, cp);
  ct.estimator = EstimatorKind::mml_numeric;
  CHECK_THROWS_AS(validate(ct, cp), CapabilityError);

  CHECK(estimator_from_string("mml") == EstimatorKind::mml_numeric);
  CHECK(estimator_from_string("mb") == EstimatorKind::mb_squared);
  CHECK_THROWS_AS(estimator_from_string("huber"), ParseError);
  CHECK(default_estimator("complex-t-scatter") == EstimatorKind::cmml);
}

TEST_CASE("numeric and closed-form estimators agree trial by trial") {
  Scenario a = gaussian(0.5, 200);
  Scenario b = a;
  b.estimator = EstimatorKind::mml_numeric;
  const TrialSummary x = run_trials(a), y = run_trials(b);
  for (std::size_t i = 0; i < x.estimates.size(); ++i) {
    CHECK(std::abs(y.estimates[i][0] / x.estimates[i][0] - 1) < 1e-8);
  }
}

TEST_CASE("sweep table layout") {
  CHECK(sweep_csv_header(1) ==
        "sweep_param,sweep_value,M,trials,theta0,mcrb,lb,crb,sample_mcrb,emp_cov,emp_mse,bias,stderr_cov,failures");
  const std::string h2 = sweep_csv_header(2);
  CHECK(h2.find("theta0_0,theta0_1,mcrb_00,mcrb_01,mcrb_10,mcrb_11") != std::string::npos);

  Scenario s = gaussian(0, 2000);
  s.calibration_m = 20000;
  const SweepTable t = sweep(s, "sigma2_bar", {4, -1});
  const auto rows = lines(t.csv());
  REQUIRE(rows.size() == 3);
  CHECK(rows[1].rfind("sigma2_bar,4,10,2000,4,3.2,3.2,3.2,", 0) == 0);
  CHECK(rows[2] == "sigma2_bar,-1,10,2000,,,,,,,,,,error:domain");
  CHECK(t.metadata["errors"].size() == 1);
  CHECK(t.metadata["sweep"]["point_seeds"].size() == 2);
  CHECK(t.metadata["version"] == kToolVersion);
  CHECK_FALSE(t.metadata.contains("workers"));

  CHECK_THROWS_AS(sweep(s, "rho", {0.5}), ParseError);
  CHECK_THROWS_AS(sweep(s, "mu_bar", {}), DomainError);
  Scenario ct;
  ct.spec = {"complex-t-scatter", {{"lambda", 2}, {"eta", 1}, {"N", 4}}};
  ct.estimator = EstimatorKind::cmml;
  CHECK_THROWS_AS(sweep(ct, "lambda", {2}), CapabilityError);
}

TEST_CASE("sweep rows satisfy the bias decomposition and bound validity") {
  Scenario s = gaussian(0, 20000);
  s.calibration_m = 100000;
  const SweepTable t = sweep(s, "mu_bar", {0, 1, 2});
  for (const auto& row : t.rows) {
    REQUIRE(row.error.empty());
    const TrialSummary& sum = *row.summary;
    const BoundReport& b = *row.bounds;
    const Scalar r = (*b.r)[0];
    // emp_mse − emp_cov = r² − 2 r·bias exactly; the bias part is noise with known SE.
    const Scalar identity_gap = (*sum.emp_mse)(0, 0) - sum.emp_cov(0, 0) - r * r;
    CHECK(std::abs(identity_gap) <= 3 * 2 * std::abs(r) * sum.bias_std_error[0] + 1e-12 * r * r);
    CHECK(sum.emp_cov(0, 0) >= b.mcrb(0, 0) - 3 * sum.stderr_cov(0, 0));
    CHECK(std::abs(sum.emp_cov(0, 0) - b.mcrb(0, 0)) < 3 * sum.stderr_cov(0, 0));
    CHECK(std::abs((*row.sample_mcrb)(0, 0) / b.mcrb(0, 0) - 1) < 0.05);
  }
  CHECK((*t.rows[0].bounds->lb)(0, 0) == (*t.rows[0].bounds->crb)(0, 0));
}

TEST_CASE("scatter sweep reports the Frobenius MSE only") {
  Scenario s;
  s.spec = {"complex-t-scatter", {{"lambda", 3}, {"eta", 1}, {"N", 4}}};
  s.estimator = EstimatorKind::cmml;
  s.m = 40;
  s.trials = 300;
  const ScatterTable t = scatter_sweep(s, "lambda", {3, 10});
  const auto rows = lines(t.csv());
  CHECK(rows[0] == "sweep_param,sweep_value,M,trials,frobenius_mse,stderr,failures");
  REQUIRE(t.rows.size() == 2);
  // Lighter tails give a smaller error.
  CHECK(t.rows[1].frobenius_mse < t.rows[0].frobenius_mse);
  CHECK(t.metadata["quantity"] == "cmml-frobenius-mse");
  const ScatterTable bad = scatter_sweep(s, "lambda", {-1});
  CHECK(lines(bad.csv())[1] == "lambda,-1,40,300,,,error:domain");
  CHECK_THROWS_AS(scatter_sweep(s, "mu_bar", {1}), ParseError);
}

TEST_CASE("consistency curves") {
  Scenario g = gaussian(1, 200);
  const ConsistencyTable tg = consistency_curve(g, {100, 1000, 10000, 100000});
  CHECK(tg.slope == doctest::Approx(-0.5).epsilon(0.2));
  for (std::size_t i = 1; i < tg.rows.size(); ++i) CHECK(tg.rows[i].median_error < tg.rows[i - 1].median_error);
  REQUIRE(tg.rows.back().sandwich_ratio.has_value());
  CHECK(std::abs(*tg.rows.back().sandwich_ratio - 1) < 0.05);
  CHECK(lines(tg.csv())[0] == "M,median_error,mean_error,sandwich_ratio,failures");

  const ConsistencyTable ta = consistency_curve(ar1(0.5, 200), {100, 1000, 10000, 100000});
  for (std::size_t i = 1; i < ta.rows.size(); ++i) CHECK(ta.rows[i].median_error < ta.rows[i - 1].median_error);
  CHECK(ta.rows.back().median_error < 0.01);

  Scenario ct;
  ct.spec = {"complex-t-scatter", {{"lambda", 2}, {"eta", 1}, {"N", 4}}};
  ct.estimator = EstimatorKind::cmml;
  ct.trials = 200;
  ct.workers = 0;
  const ConsistencyTable tc = consistency_curve(ct, {100, 1000, 10000});
  CHECK(tc.error_label == "frobenius_error_scatter");
  for (std::size_t i = 1; i < tc.rows.size(); ++i) CHECK(tc.rows[i].median_error < tc.rows[i - 1].median_error);
  CHECK(tc.slope == doctest::Approx(-0.5).epsilon(0.3));

  CHECK_THROWS_AS(consistency_curve(g, {100}), DomainError);
  CHECK_THROWS_AS(consistency_curve(g, {1000, 100}), DomainError);
}
