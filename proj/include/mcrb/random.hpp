#pragma once

#include "mcrb/types.hpp"

#include <cstdint>
#include <random>

namespace mcrb {

using Engine = std::mt19937_64;

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Counter-based stream splitting: the seed for stream `index` under
/// `master` depends only on the pair, never on which worker asks for it.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

/// Same as derive_seed with an extra tag separating independent purposes
/// (trial data, calibration data, Monte Carlo expectation blocks, ...).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t index);

/// Fills `out` with i.i.d. standard normals.
template <typename Derived>
void fill_standard_normal(Engine& engine, Eigen::DenseBase<Derived>& out) {
  std::normal_distribution<Scalar> normal(0.0, 1.0);
  for (Index j = 0; j < out.cols(); ++j) {
    for (Index i = 0; i < out.rows(); ++i) out(i, j) = normal(engine);
  }
}

Matrix standard_normal_matrix(Engine& engine, Index rows, Index cols);

}  // namespace mcrb
