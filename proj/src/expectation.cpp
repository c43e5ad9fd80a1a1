#include "mcrb/expectation.hpp"

#include "mcrb/errors.hpp"
#include "mcrb/parallel.hpp"
#include "mcrb/quadrature.hpp"
#include "mcrb/random.hpp"

#include <fmt/format.h>

#include <cmath>

namespace mcrb {

namespace {

constexpr std::uint64_t kMonteCarloTag = 0x4d43;  // "MC"
constexpr std::size_t kBlockDraws = std::size_t{1} << 15;

struct BlockMoments {
  Scalar count = 0;
  Vector mean;
  Vector m2;
};

ExpectationResult monte_carlo(const TrueModel& truth, const PointFunction& g, Index components,
                              const ExpectationOptions& options) {
  if (options.draws < 2) throw DomainError("monte-carlo expectation needs at least 2 draws");
  const std::size_t blocks = (options.draws + kBlockDraws - 1) / kBlockDraws;
  std::vector<BlockMoments> moments(blocks);
  parallel_for(blocks, options.workers, [&](std::size_t b) {
    const std::size_t n = std::min(kBlockDraws, options.draws - b * kBlockDraws);
    const Observations data = truth.sample(derive_seed(options.seed, kMonteCarloTag, b), static_cast<Index>(n));
    BlockMoments m{0, Vector::Zero(components), Vector::Zero(components)};
    for (Index j = 0; j < data.cols(); ++j) {
      const Vector v = g(data.col(j));
      m.count += 1;
      const Vector delta = v - m.mean;
      m.mean += delta / m.count;
      m.m2 += delta.cwiseProduct(v - m.mean);
    }
    moments[b] = std::move(m);
  });
  BlockMoments total{0, Vector::Zero(components), Vector::Zero(components)};
  for (const auto& m : moments) {
    const Scalar n = total.count + m.count;
    const Vector delta = m.mean - total.mean;
    total.mean += delta * (m.count / n);
    total.m2 += m.m2 + delta.cwiseProduct(delta) * (total.count * m.count / n);
    total.count = n;
  }
  ExpectationResult out;
  out.mean = total.mean;
  out.std_error = (total.m2 / (total.count - 1) / total.count).cwiseSqrt();
  out.provenance = Provenance::monte_carlo;
  out.detail = fmt::format("monte-carlo: {} draws, seed {}", options.draws, options.seed);
  return out;
}

ExpectationResult quadrature_expectation(const TrueModel& truth, const PointFunction& g, Index components,
                                         const ExpectationOptions& options) {
  ExpectationResult out;
  out.provenance = Provenance::quadrature;
  if (truth.obs_dim == 1 && truth.log_pdf) {
    const Scalar lo = truth.center - options.truncation_sds * truth.spread;
    const Scalar hi = truth.center + options.truncation_sds * truth.spread;
    Vector point(1);
    auto integrand = [&](Scalar x) -> Vector {
      point[0] = x;
      const Scalar p = std::exp(truth.log_pdf(point));
      if (p == 0) return Vector::Zero(components);
      return p * g(point);
    };
    auto r = quadrature::integrate_interval(integrand, components, lo, hi, options.tolerance);
    out.mean = r.value;
    out.std_error = r.error;
    out.detail = fmt::format("quadrature: gauss-kronrod-61 on [{:.6g}, {:.6g}] ({} sds truncation)", lo, hi,
                             options.truncation_sds);
    return out;
  }
  if (truth.gaussian) {
    const int nodes = options.hermite_nodes > 0 ? options.hermite_nodes
                                                : quadrature::default_hermite_nodes(truth.obs_dim);
    auto r = quadrature::gaussian_cubature(g, components, truth.gaussian->mean, truth.gaussian->cov, nodes);
    out.mean = r.value;
    out.std_error = r.error;
    out.detail = fmt::format("quadrature: tensor gauss-hermite, {} nodes/axis, {} points", nodes, r.evaluations);
    return out;
  }
  throw CapabilityError("quadrature needs a scalar true density or a Gaussian truth; model '" + truth.name + "'");
}

}  // namespace

ExpectationResult expect(const TrueModel& truth, const PointFunction& g, Index components,
                         const ExpectationOptions& options) {
  switch (options.method) {
    case Method::monte_carlo: return monte_carlo(truth, g, components, options);
    case Method::quadrature: return quadrature_expectation(truth, g, components, options);
    case Method::closed_form: break;
  }
  throw CapabilityError("closed-form expectations are not computed numerically");
}

}  // namespace mcrb
