#pragma once

#include "mcrb/types.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mcrb {

using LogPdf = std::function<Scalar(const Vector& theta, const ObservationRef& x)>;
using ScoreFn = std::function<Vector(const Vector& theta, const ObservationRef& x)>;
using HessianFn = std::function<Matrix(const Vector& theta, const ObservationRef& x)>;

/// Σ_m ln f(x_m | θ) and its θ-derivatives over one fixed data set.
struct LogLikelihood {
  std::function<Scalar(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  std::function<Matrix(const Vector&)> hessian;
  Index count = 0;
};

/// The assumed parametric family {f(x | θ) : θ ∈ Θ}.
///
/// `score` and `hessian` are optional; when absent, derivatives fall back to
/// central differences. `likelihood_factory`, when present, builds a
/// sufficient-statistic log-likelihood for a data set.
struct AssumedFamily {
  std::string name;
  Index dim = 0;
  Index obs_dim = 0;
  Domain domain;
  LogPdf log_pdf;
  ScoreFn score;
  HessianFn hessian;
  std::function<LogLikelihood(const Observations&)> likelihood_factory;
  /// Constraints beyond the open box (e.g. a trace normalization).
  std::function<void(const Vector&)> extra_check;

  /// Throws DomainError unless θ lies in Θ.
  void check(const Vector& theta) const;
  bool contains(const Vector& theta) const;

  Vector score_at(const Vector& theta, const ObservationRef& x) const;
  Matrix hessian_at(const Vector& theta, const ObservationRef& x) const;
  LogLikelihood likelihood(const Observations& data) const;
};

struct GaussianLaw {
  Vector mean;
  Matrix cov;
};

/// Nested models: θ̄ lives in the assumed space Θ, γ collects the nuisance part.
struct NestedSpec {
  Vector theta_bar;
  Vector gamma;
};

struct TrueModel {
  std::string name;
  Index obs_dim = 0;
  /// Deterministic in the seed; returns obs_dim × count.
  std::function<Observations(std::uint64_t seed, Index count)> sampler;
  std::function<Scalar(const ObservationRef&)> log_pdf;
  std::optional<GaussianLaw> gaussian;
  std::optional<NestedSpec> nested;
  /// 1-D quadrature window: center ± truncation_sds·spread.
  Scalar center = 0;
  Scalar spread = 1;

  Observations sample(std::uint64_t seed, Index count) const;
};

/// Complex-t truth parameters kept alongside the pair for scatter checks.
struct ScatterTruth {
  ComplexMatrix sigma_bar;
  Scalar lambda = 0;
  Scalar eta = 0;
  /// E[τ] = (λ/η)/(λ − 1); finite only for λ > 1.
  std::optional<Scalar> power;
};

/// Closed-form expressions available for a built-in pair.
struct ClosedForms {
  Vector theta0;
  std::function<Scalar(const Vector&)> kld;
  /// (A(θ), B(θ)) as exact expectations under the truth.
  std::function<std::pair<Matrix, Matrix>(const Vector&)> sandwich;
  /// True-model CRB (per sample) in the shared parameter, as a function of θ̄.
  std::function<Matrix(const Vector&)> crb_per_sample;
};

/// Model id plus named hyperparameters; the configuration-facing description.
struct ModelSpec {
  std::string id;
  std::map<std::string, Scalar> hyper;
  std::string scatter = "identity";

  Scalar get(const std::string& key) const;
};

struct ModelPair {
  ModelSpec spec;
  TrueModel truth;
  AssumedFamily family;
  std::optional<ClosedForms> closed;
  std::optional<ScatterTruth> scatter;
};

struct ReferenceSolution {
  Vector theta0;
  Matrix a;
  Matrix b;
  std::optional<Vector> r;
  std::optional<Matrix> crb_per_sample;

  /// A⁻¹BA⁻¹, recomputed from A and B.
  Matrix mcrb_per_sample() const { return sandwich_product(a, b); }
};

// Families

/// 𝒩(0, θ), θ > 0, scalar observations.
AssumedFamily gaussian_variance_family();
/// 𝒩(0, θ I_N), θ > 0.
AssumedFamily isotropic_gaussian_family(Index n);
/// Complex Gaussian 𝒞𝒩(0, σ²Σ) with tr(Σ) = N. θ packs (σ², Σ); see pack_complex_gaussian.
AssumedFamily complex_gaussian_family(Index n);

Vector pack_complex_gaussian(Scalar sigma2, const ComplexMatrix& sigma);
std::pair<Scalar, ComplexMatrix> unpack_complex_gaussian(const Vector& theta, Index n);

// Complex data as interleaved (re, im) rows.
ComplexVector to_complex(const ObservationRef& x);
ComplexMatrix to_complex_columns(const Observations& data);
Observations interleave(const ComplexMatrix& data);

/// [Σ]_ij = ρ^|i−j|.
Matrix ar1_correlation(Scalar rho, Index n);

/// ln of the complex-t density with scatter Σ̄, shape λ, scale η.
Scalar complex_t_log_pdf(const ComplexVector& x, const ComplexMatrix& sigma_bar, Scalar lambda, Scalar eta);

// Built-in pairs

ModelPair gaussian_wrong_mean(Scalar mu_bar, Scalar sigma2_bar);
ModelPair ar1_power(Scalar rho, Scalar sigma2_bar, Index n);
ModelPair complex_t_scatter(Scalar lambda, Scalar eta, const ComplexMatrix& sigma_bar);

/// Builds a pair from id + hyperparameters; unknown keys and domain
/// violations are rejected.
ModelPair make_model_pair(const ModelSpec& spec);

/// Hyperparameter names accepted by a model id (empty for unknown ids).
std::vector<std::string> hyperparameter_names(const std::string& id);

// Operations

Scalar log_pdf_assumed(const AssumedFamily& family, const Vector& theta, const ObservationRef& x);

Observations sample_true(const TrueModel& model, std::uint64_t seed, Index count);

enum class Method { closed_form, quadrature, monte_carlo };

const char* to_string(Method m);
Method method_from_string(const std::string& s);

/// Budget for numeric expectations.
struct ExpectationOptions {
  Method method = Method::quadrature;
  std::size_t draws = 1'000'000;
  std::uint64_t seed = 0x5eed;
  unsigned workers = 1;
  int hermite_nodes = 0;  // 0 = automatic
  Scalar truncation_sds = 14;
  Scalar tolerance = 1e-13;
};

struct KldValue {
  Scalar value = 0;
  Scalar std_error = 0;
  std::string detail;
};

KldValue kld_eval(const ModelPair& pair, const Vector& theta, const ExpectationOptions& options);

ReferenceSolution reference_solution(const ModelPair& pair);

}  // namespace mcrb
