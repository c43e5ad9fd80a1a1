#include "mcrb/acceptance.hpp"

#include "mcrb/bayes.hpp"
#include "mcrb/bounds.hpp"
#include "mcrb/errors.hpp"
#include "mcrb/estimators.hpp"
#include "mcrb/harness.hpp"
#include "mcrb/parallel.hpp"
#include "mcrb/random.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <fmt/format.h>

#include <cmath>
#include <functional>
#include <random>

namespace mcrb {

namespace {

constexpr std::uint64_t kAcceptanceTag = 0xACC0;

struct Checker {
  bool ok = true;
  std::vector<std::string> notes;

  void check(bool cond, const std::string& note) {
    if (!cond) ok = false;
    notes.push_back((cond ? "" : "FAILED ") + note);
  }
  std::string detail() const {
    std::string out;
    for (std::size_t i = 0; i < notes.size(); ++i) out += (i ? "; " : "") + notes[i];
    return out;
  }
};

Engine engine_for(const AcceptanceOptions& o, int id) { return Engine(derive_seed(o.seed, kAcceptanceTag, id)); }

Scalar uniform(Engine& e, Scalar lo, Scalar hi) { return std::uniform_real_distribution<Scalar>(lo, hi)(e); }

Scenario base_scenario(const std::string& id, std::map<std::string, Scalar> hyper, Index m, Index trials,
                       const AcceptanceOptions& o, std::uint64_t tag) {
  Scenario s;
  s.spec.id = id;
  s.spec.hyper = std::move(hyper);
  s.estimator = default_estimator(id);
  s.m = m;
  s.trials = trials;
  s.master_seed = derive_seed(o.seed, kAcceptanceTag, tag);
  s.workers = o.workers;
  return s;
}

Scalar rel(Scalar a, Scalar b) { return std::abs(a - b) / std::abs(b); }

// Wrong-mean sweep shared by criteria 1 and 2.
SweepTable wrong_mean_sweep(const AcceptanceOptions& o) {
  Scenario s = base_scenario("gaussian-wrong-mean", {{"sigma2_bar", 4}}, 10, 100000, o, 1);
  s.calibration_m = 100000;
  return sweep(s, "mu_bar", {0, 0.5, 1, 1.5, 2});
}

CriterionResult criterion1(const AcceptanceOptions& o) {
  Checker c;
  const SweepTable t = wrong_mean_sweep(o);
  for (const auto& r : t.rows) {
    if (!r.error.empty()) {
      c.check(false, fmt::format("mu_bar={} {}", r.value, r.error));
      continue;
    }
    const Scalar mu = r.value, s2 = 4;
    const Scalar oracle = (2 * s2 * s2 + 4 * s2 * mu * mu) / 10;
    const Scalar mcrb = r.bounds->mcrb(0, 0);
    const Scalar ratio = r.summary->emp_cov(0, 0) / mcrb;
    const Scalar sample_ratio = (*r.sample_mcrb)(0, 0) / oracle;
    c.check(rel(mcrb, oracle) < 1e-12 && std::abs(ratio - 1) <= 0.03 && std::abs(sample_ratio - 1) <= 0.05,
            fmt::format("mu_bar={}: mcrb={:.6g} emp_cov/mcrb={:.4f} sample_mcrb/mcrb={:.4f}", mu, mcrb, ratio,
                        sample_ratio));
  }
  return {1, "Wrong-mean sweep: empirical covariance and sample MCRB vs MCRB", c.ok, c.detail()};
}

CriterionResult criterion2(const AcceptanceOptions& o) {
  Checker c;
  const SweepTable t = wrong_mean_sweep(o);
  Scalar previous = -kInf;
  bool increasing = true;
  for (const auto& r : t.rows) {
    if (!r.error.empty()) {
      c.check(false, fmt::format("mu_bar={} {}", r.value, r.error));
      continue;
    }
    const Scalar lb = (*r.bounds->lb)(0, 0);
    const Scalar ratio = (*r.summary->emp_mse)(0, 0) / lb;
    c.check(std::abs(ratio - 1) <= 0.03, fmt::format("mu_bar={}: lb={:.6g} emp_mse/lb={:.4f}", r.value, lb, ratio));
    if (r.value == 0) {
      const Scalar crb = (*r.bounds->crb)(0, 0);
      c.check(rel(lb, 3.2) <= 4e-16 && rel(crb, 3.2) <= 4e-16 && rel(lb, crb) <= 4e-16,
              fmt::format("mu_bar=0: lb={} crb={}", lb, crb));
    }
    increasing = increasing && lb > previous;
    previous = lb;
  }
  c.check(increasing, "lb strictly increasing in mu_bar");
  return {2, "Wrong-mean sweep: empirical MSE vs LB, LB = CRB at mu_bar = 0", c.ok, c.detail()};
}

CriterionResult criterion3(const AcceptanceOptions& o) {
  Checker c;
  Scenario s = base_scenario("ar1-power", {{"sigma2_bar", 4}, {"N", 8}}, 24, 100000, o, 3);
  s.calibration_m = 20000;
  const SweepTable t = sweep(s, "rho", {0, 0.25, 0.5, 0.75});
  for (const auto& r : t.rows) {
    if (!r.error.empty()) {
      c.check(false, fmt::format("rho={} {}", r.value, r.error));
      continue;
    }
    const Scalar mcrb = r.bounds->mcrb(0, 0);
    const Scalar crb = (*r.bounds->crb)(0, 0);
    const Scalar ratio = (*r.summary->emp_mse)(0, 0) / mcrb;
    c.check(std::abs(ratio - 1) <= 0.03, fmt::format("rho={}: mcrb={:.6g} emp_mse/mcrb={:.4f}", r.value, mcrb, ratio));
    if (r.value == 0) {
      c.check(rel(mcrb, 32.0 / 192) <= 1e-12 && rel(crb, 32.0 / 192) <= 1e-12,
              fmt::format("rho=0: mcrb={} crb={} (32/192={})", mcrb, crb, 32.0 / 192));
    }
    if (r.value == 0.5) {
      Scalar tr = 0;  // tr(Σ²) = Σ_ij ρ^{2|i−j|}
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) tr += std::pow(0.5, 2 * std::abs(i - j));
      c.check(rel(mcrb / crb, tr / 8) <= 1e-6,
              fmt::format("rho=0.5: mcrb/crb={:.9f} tr(S^2)/N={:.9f} (tr={})", mcrb / crb, tr / 8, tr));
    }
  }
  return {3, "AR(1) sweep: empirical MSE vs MCRB for the power model", c.ok, c.detail()};
}

CriterionResult criterion4(const AcceptanceOptions& o) {
  Checker c;
  for (const ModelPair& pair : {gaussian_wrong_mean(0, 4), ar1_power(0, 4, 8)}) {
    const ReferenceSolution ref = reference_solution(pair);
    const Scalar closed = (ref.b + ref.a).norm() / ref.a.norm();
    ExpectationOptions mc{Method::monte_carlo};
    mc.draws = 1'000'000;
    mc.seed = derive_seed(o.seed, kAcceptanceTag, 4);
    mc.workers = o.workers;
    const SandwichPair sp = sandwich_matrices(pair, ref.theta0, mc);
    const Scalar sampled = (sp.b + sp.a).norm() / sp.a.norm();
    c.check(closed <= 1e-6 && sampled <= 0.03,
            fmt::format("{}: closed {:.3g}, monte-carlo {:.4f}", pair.spec.id, closed, sampled));
  }
  return {4, "Matched collapse: B = -A when the model is correct", c.ok, c.detail()};
}

CriterionResult criterion5(const AcceptanceOptions& o) {
  Checker c;
  Engine e = engine_for(o, 5);
  Scalar worst = 0, worst_spread = 0;
  int failures = 0;
  for (int k = 0; k < 50; ++k) {
    for (int model = 0; model < 2; ++model) {
      const Scalar s2 = uniform(e, 0.5, 8);
      const Scalar h = uniform(e, -0.9, 0.9);
      const ModelPair pair = model == 0 ? gaussian_wrong_mean(2 * h, s2) : ar1_power(h, s2, 8);
      const Scalar oracle = model == 0 ? s2 + 4 * h * h : s2;
      PseudoTrueOptions pt;
      pt.expectation.method = Method::quadrature;
      // Three Gauss-Hermite nodes integrate the quadratic cross-entropy exactly.
      pt.expectation.hermite_nodes = 3;
      try {
        const PseudoTrueResult r = pseudo_true(pair, Vector::Ones(1), pt);
        Scalar lo = kInf, hi = -kInf;
        for (const auto& t : r.start_results) {
          lo = std::min(lo, t[0]);
          hi = std::max(hi, t[0]);
        }
        worst = std::max(worst, std::abs(r.theta0[0] - oracle));
        worst_spread = std::max(worst_spread, hi - lo);
      } catch (const Error& err) {
        ++failures;
        c.check(false, fmt::format("{} draw {}: {}", pair.spec.id, k, err.what()));
      }
    }
  }
  c.check(failures == 0 && worst <= 1e-4 && worst_spread <= 1e-6,
          fmt::format("100 draws: max |theta0 - oracle| = {:.3g}, max multi-start spread = {:.3g}", worst,
                      worst_spread));
  return {5, "Pseudo-true solver recovers theta0 by quadrature", c.ok, c.detail()};
}

CriterionResult criterion6(const AcceptanceOptions& o) {
  Checker c;
  for (const ModelPair& pair : {gaussian_wrong_mean(1, 4), ar1_power(0.5, 4, 8)}) {
    const ReferenceSolution ref = reference_solution(pair);
    ExpectationOptions quad{Method::quadrature};
    const SandwichPair q = sandwich_matrices(pair, ref.theta0, quad);
    const Scalar qa = rel(q.a(0, 0), ref.a(0, 0)), qb = rel(q.b(0, 0), ref.b(0, 0));
    c.check(qa <= 1e-4 && qb <= 1e-4, fmt::format("{} quadrature: rel err A {:.2g}, B {:.2g}", pair.spec.id, qa, qb));

    ExpectationOptions mc{Method::monte_carlo};
    mc.draws = 1'000'000;
    mc.seed = derive_seed(o.seed, kAcceptanceTag, 6);
    mc.workers = o.workers;
    const SandwichPair m = sandwich_matrices(pair, ref.theta0, mc);
    const Scalar za = std::abs(m.a(0, 0) - ref.a(0, 0)) / m.a_std_error(0, 0);
    const Scalar zb = std::abs(m.b(0, 0) - ref.b(0, 0)) / m.b_std_error(0, 0);
    const bool a_exact = m.a_std_error(0, 0) == 0 && rel(m.a(0, 0), ref.a(0, 0)) <= 1e-12;
    c.check((a_exact || za <= 3) && zb <= 3,
            fmt::format("{} monte-carlo: A off by {} SE, B off by {:.2f} SE", pair.spec.id,
                        a_exact ? std::string("0 (constant Hessian)") : fmt::format("{:.2f}", za), zb));
  }
  return {6, "Sandwich oracle equivalence (quadrature and Monte Carlo vs closed form)", c.ok, c.detail()};
}

CriterionResult criterion7(const AcceptanceOptions& o) {
  Checker c;
  const AssumedFamily family = gaussian_variance_family();

  // Conjugate oracle: inverse-gamma(a, b) prior, 𝒩(0, θ) data → inverse-gamma(a + M/2, b + Σx²/2).
  Engine e = engine_for(o, 7);
  Scalar worst = 0;
  for (int k = 0; k < 50; ++k) {
    const Scalar a = uniform(e, 2, 6), b = uniform(e, 0.5, 5), var = uniform(e, 0.2, 10);
    const Index m = 1 + static_cast<Index>(uniform(e, 0, 30));
    Observations x = standard_normal_matrix(e, 1, m) * std::sqrt(var);
    const Scalar a_post = a + static_cast<Scalar>(m) / 2, b_post = b + x.squaredNorm() / 2;
    const PosteriorGrid post = posterior_compute(family, inverse_gamma_prior(a, b), x);
    worst = std::max(worst, rel(post.mean(), b_post / (a_post - 1)));
  }
  c.check(worst <= 1e-6, fmt::format("conjugate posterior mean, 50 cases: max rel err {:.3g}", worst));

  // √M (MB − θ0) covariance vs Λ.
  Scenario s = base_scenario("gaussian-wrong-mean", {{"mu_bar", 1}, {"sigma2_bar", 4}}, 10000, 2000, o, 7);
  s.estimator = EstimatorKind::mb_squared;
  const ModelPair pair = make_model_pair(s.spec);
  const ReferenceSolution ref = reference_solution(pair);
  SandwichPair sp;
  sp.a = ref.a;
  sp.b = ref.b;
  sp.at = ref.theta0;
  const Matrix lambda = mb_asymptotic_cov(loss_curvature(squared_loss(), ref.theta0), sp);
  const TrialSummary t = run_trials(s, pair, ref.theta0);
  const Scalar emp = t.emp_cov(0, 0) * static_cast<Scalar>(s.m);
  c.check(lambda(0, 0) == ref.mcrb_per_sample()(0, 0), fmt::format("Lambda={} equals C={}", lambda(0, 0),
                                                                    ref.mcrb_per_sample()(0, 0)));
  c.check(std::abs(emp / lambda(0, 0) - 1) <= 0.10,
          fmt::format("M=1e4, {} trials: M*emp_cov={:.4g}, ratio to Lambda {:.4f}", s.trials, emp, emp / lambda(0, 0)));

  // Posterior concentration along nested prefixes of one data stream.
  for (const ModelPair& p : {gaussian_wrong_mean(1, 4), ar1_power(0.5, 4, 8)}) {
    const Observations data = p.truth.sample(derive_seed(o.seed, kAcceptanceTag, 70), 10000);
    std::vector<PosteriorGrid> posts;
    std::vector<Index> sizes = {100, 1000, 10000};
    for (Index m : sizes) posts.push_back(posterior_compute(p.family, inverse_gamma_prior(3, 2), data.leftCols(m)));
    const auto rows = concentration_stat(posts, sizes, reference_solution(p).theta0);
    c.check(rows[1].std < rows[0].std && rows[2].std < rows[1].std,
            fmt::format("{} posterior std {:.4g} > {:.4g} > {:.4g}", p.spec.id, rows[0].std, rows[1].std,
                        rows[2].std));
  }
  return {7, "Mismatched Bayes: conjugate oracle, Lambda = C, posterior concentration", c.ok, c.detail()};
}

CriterionResult criterion8(const AcceptanceOptions& o) {
  Checker c;
  Engine e = engine_for(o, 8);
  std::normal_distribution<Scalar> normal(0, 1);

  Scalar worst_trace = 0, worst_generic = 0;
  bool bitwise = true;
  for (int k = 0; k < 200; ++k) {
    const Index n = 1 + static_cast<Index>(uniform(e, 0, 8));
    const Index m = n + static_cast<Index>(uniform(e, 0, 3 * static_cast<Scalar>(n) + 5));
    const Scalar scale = std::pow(10.0, uniform(e, -8, 8));
    ComplexMatrix x(n, m);
    for (Index j = 0; j < m; ++j)
      for (Index i = 0; i < n; ++i) x(i, j) = {scale * normal(e), scale * normal(e)};
    const auto est = cmml_scatter(x);
    worst_trace = std::max(worst_trace, std::abs(est.sigma_hat.trace().real() - static_cast<Scalar>(n)));
    const Scalar pow2 = std::ldexp(1.0, static_cast<int>(uniform(e, -30, 30)));
    const auto scaled = cmml_scatter(ComplexMatrix(x * pow2));
    bitwise = bitwise && (scaled.sigma_hat.array() == est.sigma_hat.array()).all();
    const Scalar generic = uniform(e, 0.01, 100);
    const auto g = cmml_scatter(ComplexMatrix(x * generic));
    worst_generic = std::max(worst_generic, (g.sigma_hat - est.sigma_hat).cwiseAbs().maxCoeff());
  }
  c.check(worst_trace <= 1e-12, fmt::format("max |tr - N| = {:.3g} over 200 inputs", worst_trace));
  c.check(bitwise && worst_generic <= 1e-12,
          fmt::format("scale invariance: power-of-two scalings bit-identical, generic scalings max diff {:.3g}",
                      worst_generic));

  for (Scalar lambda : {1.0, 2.0, 5.0}) {
    Scenario s = base_scenario("complex-t-scatter", {{"lambda", lambda}, {"eta", 1}, {"N", 4}}, 100, 200, o,
                               80 + static_cast<std::uint64_t>(lambda));
    const ConsistencyTable t = consistency_curve(s, {100, 1000, 10000});
    c.check(std::abs(t.slope + 0.5) <= 0.15,
            fmt::format("lambda={}: median Frobenius error {:.4g}, {:.4g}, {:.4g}; slope {:.3f}", lambda,
                        t.rows[0].median_error, t.rows[1].median_error, t.rows[2].median_error, t.slope));
  }

  for (Scalar lambda : {1.0, 2.0, 5.0}) {
    const Index n = 4;
    const ComplexMatrix sigma_bar = ar1_correlation(0.5, n).cast<std::complex<Scalar>>();
    const ModelPair p = complex_t_scatter(lambda, 1, sigma_bar);
    const ComplexMatrix x = to_complex_columns(p.truth.sample(derive_seed(o.seed, kAcceptanceTag, 88), 100000));
    const Eigen::LLT<ComplexMatrix> llt(sigma_bar);
    std::vector<Scalar> q(static_cast<std::size_t>(x.cols()));
    for (Index j = 0; j < x.cols(); ++j) q[static_cast<std::size_t>(j)] = llt.matrixL().solve(x.col(j)).squaredNorm();
    const Scalar ratio = lambda / 1.0;
    const Scalar d = kolmogorov_distance(q, [&](Scalar v) {
      return boost::math::ibeta(static_cast<Scalar>(n), lambda, v / (v + ratio));
    });
    c.check(d <= 0.01, fmt::format("lambda={}: quadratic-form Kolmogorov distance {:.4f}", lambda, d));
  }
  return {8, "Scatter suite: trace constraint, scale invariance, consistency, sampler fit", c.ok, c.detail()};
}

CriterionResult criterion9(const AcceptanceOptions& o) {
  Checker c;
  const boost::math::normal_distribution<Scalar> std_normal;
  for (const auto& id : {std::string("gaussian-wrong-mean"), std::string("ar1-power")}) {
    Scenario s = base_scenario(id, {}, 1000, 10000, o, 9);
    const ModelPair pair = make_model_pair(s.spec);
    const ReferenceSolution ref = reference_solution(pair);
    const TrialSummary t = run_trials(s, pair, ref.theta0);
    const Scalar scale = std::sqrt(static_cast<Scalar>(s.m) / ref.mcrb_per_sample()(0, 0));
    std::vector<Scalar> z;
    for (const auto& est : t.estimates) z.push_back(scale * (est[0] - ref.theta0[0]));
    const Scalar d = kolmogorov_distance(z, [&](Scalar v) { return boost::math::cdf(std_normal, v); });
    c.check(d <= 0.02, fmt::format("{}: Kolmogorov distance {:.4f} ({} trials, M={})", id, d, t.estimates.size(), s.m));
  }
  return {9, "Asymptotic normality of the standardized MML error", c.ok, c.detail()};
}

CriterionResult criterion10(const AcceptanceOptions& o) {
  Checker c;
  const unsigned many = std::max(3u, resolve_workers(o.workers));
  auto both = [&](const std::string& what, const std::function<std::string(unsigned)>& run) {
    const std::string one = run(1), other = run(many);
    c.check(one == other, fmt::format("{}: 1 vs {} workers {}", what, many, one == other ? "identical" : "DIFFER"));
  };
  both("gaussian sweep", [&](unsigned w) {
    Scenario s = base_scenario("gaussian-wrong-mean", {}, 10, 3000, o, 10);
    s.workers = w;
    s.calibration_m = 1000;
    const SweepTable t = sweep(s, "mu_bar", {0, 1, 2});
    return t.csv() + t.metadata.dump();
  });
  both("ar1 sweep", [&](unsigned w) {
    Scenario s = base_scenario("ar1-power", {}, 24, 1000, o, 10);
    s.workers = w;
    s.calibration_m = 1000;
    return sweep(s, "rho", {0, 0.5}).csv();
  });
  both("scatter sweep", [&](unsigned w) {
    Scenario s = base_scenario("complex-t-scatter", {}, 50, 300, o, 10);
    s.workers = w;
    return scatter_sweep(s, "lambda", {1, 2, 5}).csv();
  });
  both("consistency", [&](unsigned w) {
    Scenario s = base_scenario("gaussian-wrong-mean", {}, 10, 300, o, 10);
    s.workers = w;
    return consistency_curve(s, {10, 100, 1000}).csv();
  });
  both("mb trials", [&](unsigned w) {
    Scenario s = base_scenario("gaussian-wrong-mean", {}, 50, 60, o, 10);
    s.workers = w;
    s.estimator = EstimatorKind::mb_squared;
    const TrialSummary t = run_trials(s);
    return fmt::format("{:a} {:a}", t.emp_cov(0, 0), t.bias[0]);
  });
  both("monte-carlo sandwich", [&](unsigned w) {
    ExpectationOptions mc{Method::monte_carlo};
    mc.draws = 200000;
    mc.workers = w;
    return to_key_value(compute_bounds(gaussian_wrong_mean(1, 4), 10, mc));
  });
  return {10, "Determinism across worker counts", c.ok, c.detail()};
}

}  // namespace

CriterionResult run_criterion(int id, const AcceptanceOptions& options) {
  static const std::vector<std::function<CriterionResult(const AcceptanceOptions&)>> table = {
      criterion1, criterion2, criterion3, criterion4, criterion5,
      criterion6, criterion7, criterion8, criterion9, criterion10};
  if (id < 1 || id > kCriterionCount) throw DomainError(fmt::format("no acceptance criterion {}", id));
  try {
    return table[static_cast<std::size_t>(id - 1)](options);
  } catch (const Error& e) {
    return {id, fmt::format("criterion {}", id), false, fmt::format("error: {}", e.what())};
  }
}

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options) {
  std::vector<int> ids = options.only;
  if (ids.empty())
    for (int i = 1; i <= kCriterionCount; ++i) ids.push_back(i);
  std::vector<CriterionResult> out;
  for (int id : ids) out.push_back(run_criterion(id, options));
  return out;
}

std::string format_result(const CriterionResult& r) {
  return fmt::format("{} [{}] {}: {}", r.passed ? "PASS" : "FAIL", r.id, r.name, r.detail);
}

}  // namespace mcrb
