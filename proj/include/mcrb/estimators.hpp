#pragma once

#include "mcrb/models.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mcrb {

enum class EstimateMethod { closed_form, numeric };

struct EstimateRecord {
  Vector theta_hat;
  Index m = 0;
  EstimateMethod method = EstimateMethod::numeric;
  std::uint64_t seed = 0;
  int iterations = 0;
  /// ∞-norm of the per-sample log-likelihood gradient in free coordinates.
  Scalar grad_norm = 0;
  /// Smallest-magnitude Hessian eigenvalue below 1e-8·‖H‖.
  bool flat_warning = false;
};

struct FitOptions {
  Scalar gradient_tolerance = 1e-10;
  int max_iterations = 500;
};

/// Mismatched ML: maximizes Σ_m ln f(x_m | θ) over Θ.
/// Throws NumericError on non-convergence, BoundaryError when the maximizer
/// sits on the edge of Θ.
EstimateRecord mml_fit(const AssumedFamily& family, const Observations& data, const Vector& init,
                       const FitOptions& options = {});

/// Closed-form MML for the two scalar built-ins:
/// gaussian-wrong-mean → M⁻¹ Σ x²; ar1-power → (MN)⁻¹ Σ xᵀx.
EstimateRecord mml_closed(const std::string& model_id, const Observations& data);

template <typename T = Scalar>
struct ScatterEstimate {
  MatrixX<std::complex<T>> sigma_hat;
  T sigma2_hat = 0;
};

/// Constrained MML under the complex Gaussian model: Σ̂ = N·S / tr(S),
/// S = Σ x xᴴ; σ̂² = (NM)⁻¹ Σ xᴴ Σ̂⁻¹ x. Columns of `data` are observations.
template <typename T>
ScatterEstimate<T> cmml_scatter(const MatrixX<std::complex<T>>& data);

/// Interleaved-real overload.
ScatterEstimate<Scalar> cmml_scatter_interleaved(const Observations& data);

struct BiasEstimate {
  Vector bias;
  Vector std_error;
};

/// mean(estimates) − theta0 with its Monte Carlo standard error.
BiasEstimate empirical_ms_bias(const std::vector<Vector>& estimates, const Vector& theta0);

const char* to_string(EstimateMethod m);

std::string estimate_csv_header(Index d);
std::string estimate_csv_row(const EstimateRecord& record);

}  // namespace mcrb

#include "mcrb/estimators_impl.hpp"
