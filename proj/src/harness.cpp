#include "mcrb/harness.hpp"

#include "mcrb/errors.hpp"
#include "mcrb/estimators.hpp"
#include "mcrb/parallel.hpp"
#include "mcrb/random.hpp"
#include "mcrb/table.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mcrb {

namespace {

constexpr std::uint64_t kTrialTag = 0x5452;        // trial data
constexpr std::uint64_t kCalibrationTag = 0x4341;  // sample-sandwich calibration data
constexpr std::uint64_t kPointTag = 0x5054 + 1;    // per-grid-point master seeds

const char* kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::parse: return "parse";
    case ErrorKind::domain: return "domain";
    case ErrorKind::capability: return "capability";
    case ErrorKind::regularity: return "regularity";
    case ErrorKind::numeric: return "numeric";
  }
  return "error";
}

Vector estimate_once(EstimatorKind kind, const ModelPair& pair, const Prior& prior, const Observations& data) {
  switch (kind) {
    case EstimatorKind::mml_closed: return mml_closed(pair.spec.id, data).theta_hat;
    case EstimatorKind::mml_numeric: {
      const Vector init = pair.truth.nested ? pair.truth.nested->theta_bar : Vector::Ones(pair.family.dim);
      return mml_fit(pair.family, data, init).theta_hat;
    }
    case EstimatorKind::mb_squared:
      return mb_estimate(posterior_compute(pair.family, prior, data), squared_loss());
    case EstimatorKind::cmml: {
      const auto est = cmml_scatter_interleaved(data);
      return pack_complex_gaussian(est.sigma2_hat, est.sigma_hat);
    }
  }
  throw CapabilityError("unknown estimator");
}

Prior scenario_prior(const Scenario& s) { return s.prior ? *s.prior : inverse_gamma_prior(3, 2); }

/// Runs `body(t, data)` for each trial; results land in per-trial slots.
template <typename T, typename Body>
std::vector<std::optional<T>> per_trial(const Scenario& s, const ModelPair& pair, std::uint64_t master, Body&& body) {
  std::vector<std::optional<T>> slots(static_cast<std::size_t>(s.trials));
  parallel_for(slots.size(), s.workers, [&](std::size_t t) {
    try {
      const Observations data = pair.truth.sample(derive_seed(master, kTrialTag, t), s.m);
      slots[t] = body(data);
    } catch (const Error&) {
      // counted as a failed trial
    }
  });
  return slots;
}

void check_failures(Index failures, Index trials) {
  if (failures * 100 > trials) {
    throw NumericError(fmt::format("{} of {} trials failed (more than 1%)", failures, trials));
  }
}

Scalar median(std::vector<Scalar> v) {
  if (v.empty()) throw DomainError("median of an empty sample");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const Scalar hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const Scalar lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

// Mean of e eᵀ over the sample and the standard error of each entry.
std::pair<Matrix, Matrix> outer_moments(const std::vector<Vector>& errors) {
  const Index d = errors.front().size();
  const Scalar n = static_cast<Scalar>(errors.size());
  Matrix mean = Matrix::Zero(d, d);
  for (const auto& e : errors) mean.noalias() += e * e.transpose();
  mean /= n;
  Matrix sq = Matrix::Zero(d, d);
  for (const auto& e : errors) sq.array() += (e * e.transpose() - mean).array().square();
  const Matrix se = (sq / (n - 1) / n).cwiseSqrt();
  return {symmetrize(mean), se};
}

std::string matrix_cells(const std::optional<Matrix>& m, Index d) {
  if (!m) return table::join(std::vector<std::string>(static_cast<std::size_t>(d * d), ""));
  return table::join(table::values(*m));
}

std::string vector_cells(const std::optional<Vector>& v, Index d) {
  if (!v) return table::join(std::vector<std::string>(static_cast<std::size_t>(d), ""));
  return table::join(table::values(*v));
}

nlohmann::json grid_json(const std::vector<Scalar>& grid) {
  nlohmann::json g = nlohmann::json::array();
  for (Scalar v : grid) g.push_back(v);
  return g;
}

}  // namespace

const char* to_string(EstimatorKind e) {
  switch (e) {
    case EstimatorKind::mml_closed: return "mml-closed";
    case EstimatorKind::mml_numeric: return "mml-numeric";
    case EstimatorKind::mb_squared: return "mb-squared";
    case EstimatorKind::cmml: return "cmml";
  }
  return "unknown";
}

EstimatorKind estimator_from_string(const std::string& s) {
  if (s == "mml-closed") return EstimatorKind::mml_closed;
  if (s == "mml-numeric" || s == "mml") return EstimatorKind::mml_numeric;
  if (s == "mb-squared" || s == "mb") return EstimatorKind::mb_squared;
  if (s == "cmml") return EstimatorKind::cmml;
  throw ParseError("unknown estimator '" + s + "' (expected mml-closed, mml-numeric, mb-squared or cmml)");
}

EstimatorKind default_estimator(const std::string& model_id) {
  return model_id == "complex-t-scatter" ? EstimatorKind::cmml : EstimatorKind::mml_closed;
}

void validate(const Scenario& s, const ModelPair& pair) {
  if (s.trials < 2) throw DomainError(fmt::format("trials must be at least 2, got {}", s.trials));
  if (s.m < 1) throw DomainError(fmt::format("M must be at least 1, got {}", s.m));
  if (s.calibration_m < 2) throw DomainError("calibration M must be at least 2");
  if (pair.scatter) {
    if (s.estimator != EstimatorKind::cmml) {
      throw CapabilityError(fmt::format("estimator {} is not available for scatter models", to_string(s.estimator)));
    }
    const Index n = pair.scatter->sigma_bar.rows();
    if (s.m < n) throw DomainError(fmt::format("scatter scenarios need M >= N ({} < {})", s.m, n));
  } else if (s.estimator == EstimatorKind::cmml) {
    throw CapabilityError("cmml needs a scatter model");
  }
}

Vector scenario_theta0(const ModelPair& pair, const ExpectationOptions& options) {
  if (pair.scatter) {
    if (!pair.scatter->power) {
      throw CapabilityError(fmt::format("lambda = {} gives an infinite texture mean; theta0 is undefined",
                                        pair.scatter->lambda));
    }
    return pack_complex_gaussian(*pair.scatter->power, pair.scatter->sigma_bar);
  }
  if (options.method == Method::closed_form) return reference_solution(pair).theta0;
  PseudoTrueOptions pt;
  pt.expectation = options;
  const Vector init = pair.truth.nested ? pair.truth.nested->theta_bar : Vector::Ones(pair.family.dim);
  return pseudo_true(pair, init, pt).theta0;
}

TrialSummary run_trials(const Scenario& s) {
  const ModelPair pair = make_model_pair(s.spec);
  validate(s, pair);
  return run_trials(s, pair, scenario_theta0(pair, s.expectation));
}

TrialSummary run_trials(const Scenario& s, const ModelPair& pair, const Vector& theta0) {
  validate(s, pair);
  const Prior prior = scenario_prior(s);
  auto slots = per_trial<Vector>(s, pair, s.master_seed,
                                 [&](const Observations& data) { return estimate_once(s.estimator, pair, prior, data); });

  TrialSummary out;
  out.theta0 = theta0;
  out.trials = s.trials;
  for (auto& slot : slots) {
    if (slot && slot->allFinite()) out.estimates.push_back(std::move(*slot));
    else ++out.failures;
  }
  check_failures(out.failures, s.trials);
  const Index d = theta0.size();
  const Scalar n = static_cast<Scalar>(out.estimates.size());

  std::vector<Vector> err;
  err.reserve(out.estimates.size());
  Vector mean = Vector::Zero(d);
  for (const auto& e : out.estimates) {
    err.push_back(e - theta0);
    mean += e;
  }
  mean /= n;
  out.bias = mean - theta0;
  Vector var = Vector::Zero(d);
  for (const auto& e : out.estimates) var.array() += (e - mean).array().square();
  out.bias_std_error = (var / (n - 1) / n).cwiseSqrt();
  std::tie(out.emp_cov, out.stderr_cov) = outer_moments(err);

  if (pair.truth.nested && pair.truth.nested->theta_bar.size() == d) {
    out.theta_bar = pair.truth.nested->theta_bar;
    for (auto& e : err) e = e + theta0 - *out.theta_bar;
    auto [mse, se] = outer_moments(err);
    out.emp_mse = mse;
    out.stderr_mse = se;
  }
  return out;
}

std::string sweep_csv_header(Index d) {
  std::vector<std::string> cols = {"sweep_param", "sweep_value", "M", "trials"};
  auto vec = [&](const std::string& p) {
    if (d == 1) cols.push_back(p);
    else table::append(cols, table::vector_names(p, d));
  };
  auto mat = [&](const std::string& p) {
    if (d == 1) cols.push_back(p);
    else table::append(cols, table::matrix_names(p, d, d));
  };
  vec("theta0");
  for (const char* p : {"mcrb", "lb", "crb", "sample_mcrb", "emp_cov", "emp_mse"}) mat(p);
  vec("bias");
  mat("stderr_cov");
  cols.push_back("failures");
  return table::join(cols);
}

std::string SweepTable::csv() const {
  std::string out = sweep_csv_header(dim) + "\n";
  for (const auto& r : rows) {
    std::vector<std::string> f = {param, table::number(r.value), std::to_string(m), std::to_string(trials)};
    const bool ok = r.error.empty();
    f.push_back(vector_cells(ok ? std::optional<Vector>(r.bounds->theta0) : std::nullopt, dim));
    f.push_back(matrix_cells(ok ? std::optional<Matrix>(r.bounds->mcrb) : std::nullopt, dim));
    f.push_back(matrix_cells(ok ? r.bounds->lb : std::nullopt, dim));
    f.push_back(matrix_cells(ok ? r.bounds->crb : std::nullopt, dim));
    f.push_back(matrix_cells(ok ? r.sample_mcrb : std::nullopt, dim));
    f.push_back(matrix_cells(ok ? std::optional<Matrix>(r.summary->emp_cov) : std::nullopt, dim));
    f.push_back(matrix_cells(ok ? r.summary->emp_mse : std::nullopt, dim));
    f.push_back(vector_cells(ok ? std::optional<Vector>(r.summary->bias) : std::nullopt, dim));
    f.push_back(matrix_cells(ok ? std::optional<Matrix>(r.summary->stderr_cov) : std::nullopt, dim));
    f.push_back(ok ? std::to_string(r.summary->failures) : "error:" + r.error.substr(0, r.error.find(':')));
    out += table::join(f) + "\n";
  }
  return out;
}

nlohmann::json scenario_metadata(const Scenario& s) {
  nlohmann::json j;
  j["tool"] = "mcrb";
  j["version"] = kToolVersion;
  j["model"]["id"] = s.spec.id;
  for (const auto& [k, v] : s.spec.hyper) j["model"]["hyperparameters"][k] = v;
  if (s.spec.id == "complex-t-scatter") j["model"]["scatter"] = s.spec.scatter;
  j["estimator"] = to_string(s.estimator);
  j["M"] = s.m;
  j["trials"] = s.trials;
  j["master_seed"] = s.master_seed;
  j["seed_scheme"] = "splitmix64 counter split of (master_seed, tag, trial) feeding mt19937_64";
  j["calibration_M"] = s.calibration_m;
  j["bound_method"] = to_string(s.expectation.method);
  j["expectation"] = {{"draws", s.expectation.draws},
                      {"seed", s.expectation.seed},
                      {"hermite_nodes", s.expectation.hermite_nodes},
                      {"truncation_sds", s.expectation.truncation_sds},
                      {"tolerance", s.expectation.tolerance}};
  if (s.estimator == EstimatorKind::mb_squared) j["prior"] = scenario_prior(s).name;
  return j;
}

SweepTable sweep(const Scenario& base, const std::string& param, const std::vector<Scalar>& grid) {
  const auto names = hyperparameter_names(base.spec.id);
  if (std::find(names.begin(), names.end(), param) == names.end()) {
    throw ParseError(fmt::format("'{}' is not a hyperparameter of model '{}'", param, base.spec.id));
  }
  if (grid.empty()) throw DomainError("sweep grid is empty");
  {
    ModelSpec probe = base.spec;
    probe.hyper[param] = grid.front();
    if (make_model_pair(probe).scatter) throw CapabilityError("scatter models are swept with scatter_sweep");
  }

  SweepTable table;
  table.param = param;
  table.m = base.m;
  table.trials = base.trials;
  table.metadata = scenario_metadata(base);
  table.metadata["sweep"] = {{"param", param}, {"grid", grid_json(grid)}};
  nlohmann::json point_seeds = nlohmann::json::array();

  for (std::size_t i = 0; i < grid.size(); ++i) {
    SweepRow row;
    row.value = grid[i];
    Scenario s = base;
    s.spec.hyper[param] = grid[i];
    s.master_seed = derive_seed(base.master_seed, kPointTag, i);
    point_seeds.push_back(s.master_seed);
    try {
      const ModelPair pair = make_model_pair(s.spec);
      validate(s, pair);
      row.bounds = compute_bounds(pair, s.m, s.expectation);
      table.dim = row.bounds->theta0.size();
      row.summary = run_trials(s, pair, row.bounds->theta0);

      const Observations cal = pair.truth.sample(derive_seed(s.master_seed, kCalibrationTag, 0), s.calibration_m);
      const Vector theta_cal = s.estimator == EstimatorKind::mml_closed
                                   ? mml_closed(pair.spec.id, cal).theta_hat
                                   : mml_fit(pair.family, cal, row.bounds->theta0).theta_hat;
      row.sample_mcrb = Matrix(sample_sandwich(cal, pair.family, theta_cal).c / static_cast<Scalar>(s.m));
    } catch (const Error& e) {
      row.error = fmt::format("{}: {}", kind_name(e.kind()), e.what());
      row.bounds.reset();
      row.summary.reset();
      row.sample_mcrb.reset();
    }
    if (!row.error.empty()) table.metadata["errors"].push_back({{"sweep_value", grid[i]}, {"message", row.error}});
    table.rows.push_back(std::move(row));
  }
  table.metadata["sweep"]["point_seeds"] = point_seeds;
  return table;
}

std::string ScatterTable::csv() const {
  std::string out = "sweep_param,sweep_value,M,trials,frobenius_mse,stderr,failures\n";
  for (const auto& r : rows) {
    const bool ok = r.error.empty();
    out += table::join({param, table::number(r.value), std::to_string(m), std::to_string(trials),
                        ok ? table::number(r.frobenius_mse) : "", ok ? table::number(r.std_error) : "",
                        ok ? std::to_string(r.failures) : "error:" + r.error.substr(0, r.error.find(':'))}) +
           "\n";
  }
  return out;
}

namespace {

// ‖Σ̂ − Σ̄‖_F per trial (failed trials empty).
std::vector<std::optional<Scalar>> scatter_errors(const Scenario& s, const ModelPair& pair, std::uint64_t master) {
  const ComplexMatrix& sigma_bar = pair.scatter->sigma_bar;
  return per_trial<Scalar>(s, pair, master, [&](const Observations& data) {
    return (cmml_scatter_interleaved(data).sigma_hat - sigma_bar).norm();
  });
}

}  // namespace

ScatterTable scatter_sweep(const Scenario& base, const std::string& param, const std::vector<Scalar>& grid) {
  const auto names = hyperparameter_names(base.spec.id);
  if (std::find(names.begin(), names.end(), param) == names.end()) {
    throw ParseError(fmt::format("'{}' is not a hyperparameter of model '{}'", param, base.spec.id));
  }
  if (grid.empty()) throw DomainError("sweep grid is empty");
  ScatterTable table;
  table.param = param;
  table.m = base.m;
  table.trials = base.trials;
  table.metadata = scenario_metadata(base);
  table.metadata["quantity"] = "cmml-frobenius-mse";
  table.metadata["note"] =
      "Frobenius MSE of the constrained ML scatter estimate only; CMCRB and CCRB curves are not produced";
  table.metadata["sweep"] = {{"param", param}, {"grid", grid_json(grid)}};

  for (std::size_t i = 0; i < grid.size(); ++i) {
    ScatterRow row;
    row.value = grid[i];
    Scenario s = base;
    s.spec.hyper[param] = grid[i];
    try {
      const ModelPair pair = make_model_pair(s.spec);
      if (!pair.scatter) throw CapabilityError("scatter sweeps need a scatter model");
      validate(s, pair);
      const auto errs = scatter_errors(s, pair, derive_seed(base.master_seed, kPointTag, i));
      std::vector<Scalar> sq;
      for (const auto& e : errs) {
        if (e && std::isfinite(*e)) sq.push_back(*e * *e);
        else ++row.failures;
      }
      check_failures(row.failures, s.trials);
      const Scalar n = static_cast<Scalar>(sq.size());
      row.frobenius_mse = std::accumulate(sq.begin(), sq.end(), Scalar(0)) / n;
      Scalar var = 0;
      for (Scalar v : sq) var += (v - row.frobenius_mse) * (v - row.frobenius_mse);
      row.std_error = std::sqrt(var / (n - 1) / n);
    } catch (const Error& e) {
      row.error = fmt::format("{}: {}", kind_name(e.kind()), e.what());
      table.metadata["errors"].push_back({{"sweep_value", grid[i]}, {"message", row.error}});
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

Scalar loglog_slope(const std::vector<Scalar>& x, const std::vector<Scalar>& y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("log-log slope needs at least two points");
  const Index n = static_cast<Index>(x.size());
  Vector lx(n), ly(n);
  for (Index i = 0; i < n; ++i) {
    if (!(x[i] > 0) || !(y[i] > 0)) throw DomainError("log-log slope needs positive values");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  const Vector cx = lx.array() - lx.mean();
  const Vector cy = ly.array() - ly.mean();
  if (cx.squaredNorm() == 0) throw DomainError("log-log slope needs distinct x values");
  return cx.dot(cy) / cx.squaredNorm();
}

std::string ConsistencyTable::csv() const {
  std::string out = "M,median_error,mean_error,sandwich_ratio,failures\n";
  for (const auto& r : rows) {
    out += table::join({std::to_string(r.m), table::number(r.median_error), table::number(r.mean_error),
                        r.sandwich_ratio ? table::number(*r.sandwich_ratio) : "", std::to_string(r.failures)}) +
           "\n";
  }
  return out;
}

ConsistencyTable consistency_curve(const Scenario& base, const std::vector<Index>& m_grid) {
  if (m_grid.size() < 2) throw DomainError("consistency curve needs at least two sample sizes");
  for (std::size_t i = 1; i < m_grid.size(); ++i) {
    if (m_grid[i] <= m_grid[i - 1]) throw DomainError("consistency M grid must be strictly increasing");
  }
  const ModelPair pair = make_model_pair(base.spec);
  ConsistencyTable table;
  table.metadata = scenario_metadata(base);
  nlohmann::json mj = nlohmann::json::array();
  for (Index m : m_grid) mj.push_back(m);
  table.metadata["M_grid"] = mj;

  std::optional<BoundReport> bounds;
  Vector theta0;
  if (pair.scatter) {
    table.error_label = "frobenius_error_scatter";
  } else {
    table.error_label = "norm_error_theta0";
    bounds = compute_bounds(pair, 1, base.expectation);
    theta0 = bounds->theta0;
  }
  table.metadata["error"] = table.error_label;

  const Prior prior = scenario_prior(base);
  std::vector<Scalar> ms, medians;
  for (std::size_t i = 0; i < m_grid.size(); ++i) {
    Scenario s = base;
    s.m = m_grid[i];
    validate(s, pair);
    const std::uint64_t master = derive_seed(base.master_seed, kPointTag, i);
    ConsistencyRow row;
    row.m = s.m;
    std::vector<std::optional<Scalar>> errs;
    if (pair.scatter) {
      errs = scatter_errors(s, pair, master);
    } else {
      errs = per_trial<Scalar>(s, pair, master, [&](const Observations& data) {
        return (estimate_once(s.estimator, pair, prior, data) - theta0).norm();
      });
    }
    std::vector<Scalar> ok;
    for (const auto& e : errs) {
      if (e && std::isfinite(*e)) ok.push_back(*e);
      else ++row.failures;
    }
    check_failures(row.failures, s.trials);
    row.median_error = median(ok);
    row.mean_error = std::accumulate(ok.begin(), ok.end(), Scalar(0)) / static_cast<Scalar>(ok.size());
    if (bounds) {
      try {
        const Observations data = pair.truth.sample(derive_seed(master, kTrialTag, 0), s.m);
        const Vector est = estimate_once(s.estimator, pair, prior, data);
        row.sandwich_ratio = sample_sandwich(data, pair.family, est).c.trace() / bounds->c_per_sample.trace();
      } catch (const Error&) {
        // ratio left empty for degenerate first-trial data
      }
    }
    ms.push_back(static_cast<Scalar>(s.m));
    medians.push_back(row.median_error);
    table.rows.push_back(row);
  }
  table.slope = loglog_slope(ms, medians);
  table.metadata["loglog_slope"] = table.slope;
  return table;
}

}  // namespace mcrb
