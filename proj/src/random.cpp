#include "mcrb/random.hpp"

namespace mcrb {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(mix64(master) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t index) {
  return derive_seed(derive_seed(master, tag ^ 0xa0761d6478bd642fULL), index);
}

Matrix standard_normal_matrix(Engine& engine, Index rows, Index cols) {
  Matrix out(rows, cols);
  fill_standard_normal(engine, out);
  return out;
}

}  // namespace mcrb
