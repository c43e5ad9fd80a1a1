#pragma once

#include "mcrb/types.hpp"

#include <fmt/format.h>

#include <string>
#include <vector>

namespace mcrb::table {

/// Shortest round-trip decimal representation.
inline std::string number(Scalar v) { return fmt::format("{}", v); }

inline std::vector<std::string> vector_names(const std::string& prefix, Index n) {
  std::vector<std::string> out;
  for (Index i = 0; i < n; ++i) out.push_back(fmt::format("{}_{}", prefix, i));
  return out;
}

/// prefix_ij, row-major (prefix_i_j once an index needs two digits).
inline std::vector<std::string> matrix_names(const std::string& prefix, Index rows, Index cols) {
  std::vector<std::string> out;
  const bool wide = rows > 10 || cols > 10;
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j)
      out.push_back(wide ? fmt::format("{}_{}_{}", prefix, i, j) : fmt::format("{}_{}{}", prefix, i, j));
  return out;
}

template <typename Derived>
std::vector<std::string> values(const Eigen::MatrixBase<Derived>& m) {
  std::vector<std::string> out;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) out.push_back(number(m(i, j)));
  return out;
}

inline std::string join(const std::vector<std::string>& fields, char sep = ',') {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += sep;
    out += fields[i];
  }
  return out;
}

inline void append(std::vector<std::string>& to, const std::vector<std::string>& from) {
  to.insert(to.end(), from.begin(), from.end());
}

}  // namespace mcrb::table
