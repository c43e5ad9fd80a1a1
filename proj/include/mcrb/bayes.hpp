#pragma once

#include "mcrb/bounds.hpp"
#include "mcrb/models.hpp"

#include <functional>
#include <string>
#include <vector>

namespace mcrb {

struct Prior {
  std::string name;
  std::function<Scalar(const Vector&)> log_density;
  Domain support;
};

/// Inverse-gamma prior with density b^a/Γ(a) θ^{−a−1} e^{−b/θ}.
Prior inverse_gamma_prior(Scalar shape, Scalar scale);
/// Uniform prior on (lo, hi).
Prior uniform_prior(Scalar lo, Scalar hi);

/// Normalized 1-D posterior on a grid. `weights` are quadrature weights for
/// the θ-measure, so Σ wᵢ pᵢ = 1 with pᵢ the θ-density at node i.
class PosteriorGrid {
 public:
  PosteriorGrid(Vector nodes, const Vector& log_density, Vector weights);

  /// Trapezoid weights on (possibly non-uniform) θ nodes.
  static PosteriorGrid from_nodes(Vector nodes, const Vector& log_density);

  const Vector& nodes() const { return nodes_; }
  const Vector& density() const { return density_; }
  const Vector& weights() const { return weights_; }
  /// Probability carried by each node, wᵢ pᵢ.
  Vector masses() const { return weights_.cwiseProduct(density_); }
  /// ln of the normalizer removed from the input log-density.
  Scalar log_normalizer() const { return log_normalizer_; }

  Scalar total_mass() const;
  Scalar mean() const;
  Scalar variance() const;
  Scalar std_dev() const;
  /// Maximizer of the θ-density (parabolic refinement around the best node).
  Scalar mode() const;
  Scalar quantile(Scalar probability) const;

 private:
  Vector nodes_;
  Vector density_;
  Vector weights_;
  Scalar log_normalizer_ = 0;
};

struct PosteriorOptions {
  Index nodes = 4001;
  Scalar half_width_sds = 10;
  /// Grid sides are pushed outward while the outer edge_fraction of nodes
  /// carries more than this mass.
  Scalar boundary_mass = 1e-12;
  Scalar edge_fraction = 0.01;
  int max_extensions = 60;
};

/// Posterior f(θ | x) ∝ Π f(x_m | θ) f(θ) for scalar θ. Log coordinates are
/// used when the support is positive. Throws NumericError when mass keeps
/// piling up at a grid edge that is not a support boundary.
PosteriorGrid posterior_compute(const AssumedFamily& family, const Prior& prior, const Observations& data,
                                const PosteriorOptions& options = {});

struct Loss {
  enum class Kind { squared, weighted_squared, absolute, custom };
  std::string name;
  Kind kind = Kind::custom;
  std::function<Scalar(const Vector& estimate, const Vector& theta)> value;
  Matrix weight;
  bool differentiable = true;
};

Loss squared_loss();
Loss weighted_squared_loss(const Matrix& weight);
Loss absolute_loss();
Loss custom_loss(std::string name, std::function<Scalar(const Vector&, const Vector&)> value,
                 bool differentiable = true);

/// Minimizer of the posterior expected loss. Squared losses return the
/// posterior mean, the absolute loss the median; other losses are minimized
/// over the grid and refined locally. Throws NonUniqueError when distinct
/// minimizers tie.
Vector mb_estimate(const PosteriorGrid& posterior, const Loss& loss);

struct ConcentrationRow {
  Index m = 0;
  Scalar mean = 0;
  Scalar std = 0;
  Scalar dist_to_theta0 = 0;
};

std::vector<ConcentrationRow> concentration_stat(const std::vector<PosteriorGrid>& posteriors,
                                                 const std::vector<Index>& sizes, const Vector& theta0);

std::string concentration_csv(const std::vector<ConcentrationRow>& rows);

/// Cross (L1) and own (L2) second derivatives of the loss at (θ0, θ0).
struct LossCurvature {
  Matrix l1;
  Matrix l2;
};

LossCurvature loss_curvature(const Loss& loss, const Vector& theta0);

/// Λ = (L2⁻¹L1) A⁻¹BA⁻¹ (L2⁻¹L1)ᵀ, per sample.
Matrix mb_asymptotic_cov(const LossCurvature& curvature, const SandwichPair& sandwich);

}  // namespace mcrb
