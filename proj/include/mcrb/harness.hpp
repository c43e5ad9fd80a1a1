#pragma once

#include "mcrb/bayes.hpp"
#include "mcrb/bounds.hpp"
#include "mcrb/models.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mcrb {

enum class EstimatorKind { mml_closed, mml_numeric, mb_squared, cmml };

const char* to_string(EstimatorKind e);
EstimatorKind estimator_from_string(const std::string& s);
/// mml-closed for the scalar built-ins, cmml for scatter models.
EstimatorKind default_estimator(const std::string& model_id);

struct Scenario {
  ModelSpec spec;
  EstimatorKind estimator = EstimatorKind::mml_closed;
  Index m = 10;
  Index trials = 1000;
  std::uint64_t master_seed = 42;
  unsigned workers = 1;
  /// Sample size of the calibration run behind sample_mcrb.
  Index calibration_m = 100'000;
  /// Bound computation (θ0, A, B).
  ExpectationOptions expectation{Method::closed_form};
  /// Prior for MB estimators; inverse-gamma(3, 2) when empty.
  std::optional<Prior> prior;
};

/// Validates trial count, sample size and estimator/model compatibility.
void validate(const Scenario& scenario, const ModelPair& pair);

struct TrialSummary {
  Vector theta0;
  std::optional<Vector> theta_bar;
  /// Trial average of (θ̂ − θ0)(θ̂ − θ0)ᵀ.
  Matrix emp_cov;
  /// Trial average of (θ̂ − θ̄)(θ̂ − θ̄)ᵀ (nested pairs only).
  std::optional<Matrix> emp_mse;
  Vector bias;  // mean(θ̂) − θ0
  Vector bias_std_error;
  Matrix stderr_cov;
  std::optional<Matrix> stderr_mse;
  Index trials = 0;
  Index failures = 0;
  /// Successful estimates in trial order.
  std::vector<Vector> estimates;
};

/// θ0 for a pair: closed form when available, the numeric KLD minimizer
/// otherwise, and (power, Σ̄) for scatter models with a finite power.
Vector scenario_theta0(const ModelPair& pair, const ExpectationOptions& options);

/// Runs the estimator on `trials` independent data sets of size M. Trial t
/// uses a seed derived from (master_seed, t) only, so the result does not
/// depend on the worker count. Trials whose estimator throws are excluded and
/// counted; more than 1% failures raises NumericError.
TrialSummary run_trials(const Scenario& scenario);
TrialSummary run_trials(const Scenario& scenario, const ModelPair& pair, const Vector& theta0);

struct SweepRow {
  Scalar value = 0;
  std::optional<BoundReport> bounds;
  std::optional<Matrix> sample_mcrb;
  std::optional<TrialSummary> summary;
  /// Set when the point failed; the row is then emitted with empty fields.
  std::string error;
};

struct SweepTable {
  std::string param;
  Index dim = 1;
  Index m = 0;
  Index trials = 0;
  std::vector<SweepRow> rows;
  nlohmann::json metadata;

  std::string csv() const;
};

/// Header of the sweep CSV. Scalar parameters use bare column names; matrix
/// columns get row-major _ij suffixes when d > 1.
std::string sweep_csv_header(Index d);

/// One run_trials plus bound computation per grid value of a registered
/// hyperparameter. Per-point failures are recorded in the row, not thrown.
SweepTable sweep(const Scenario& base, const std::string& param, const std::vector<Scalar>& grid);

/// CMML Frobenius MSE E‖Σ̂ − Σ̄‖²_F versus a hyperparameter; the scatter
/// replacement for bound curves that have no closed form here.
struct ScatterRow {
  Scalar value = 0;
  Scalar frobenius_mse = 0;
  Scalar std_error = 0;
  Index failures = 0;
  std::string error;
};

struct ScatterTable {
  std::string param;
  Index m = 0;
  Index trials = 0;
  std::vector<ScatterRow> rows;
  nlohmann::json metadata;

  std::string csv() const;
};

ScatterTable scatter_sweep(const Scenario& base, const std::string& param, const std::vector<Scalar>& grid);

struct ConsistencyRow {
  Index m = 0;
  Scalar median_error = 0;
  Scalar mean_error = 0;
  /// tr(C_M)/tr(A⁻¹BA⁻¹) from the first trial's data (empty without a reference sandwich).
  std::optional<Scalar> sandwich_ratio;
  Index failures = 0;
};

struct ConsistencyTable {
  std::string error_label;
  std::vector<ConsistencyRow> rows;
  /// Least-squares slope of ln(median error) against ln M.
  Scalar slope = 0;
  nlohmann::json metadata;

  std::string csv() const;
};

/// Estimation error versus M: ‖θ̂ − θ0‖ for parametric pairs, ‖Σ̂ − Σ̄‖_F for
/// scatter models. `base.trials` trials per grid point.
ConsistencyTable consistency_curve(const Scenario& base, const std::vector<Index>& m_grid);

/// Least-squares slope of ln y on ln x.
Scalar loglog_slope(const std::vector<Scalar>& x, const std::vector<Scalar>& y);

/// Kolmogorov distance between the empirical law of `samples` and a CDF.
template <typename Cdf>
Scalar kolmogorov_distance(std::vector<Scalar> samples, Cdf&& cdf) {
  std::sort(samples.begin(), samples.end());
  const Scalar n = static_cast<Scalar>(samples.size());
  Scalar d = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Scalar f = cdf(samples[i]);
    d = std::max({d, static_cast<Scalar>(i + 1) / n - f, f - static_cast<Scalar>(i) / n});
  }
  return d;
}

/// Common metadata: model, estimator, seeds, method choices, tool version.
nlohmann::json scenario_metadata(const Scenario& scenario);

inline constexpr const char* kToolVersion = "1.0.0";

}  // namespace mcrb

