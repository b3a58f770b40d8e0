#include "substab/random.hpp"

namespace substab {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t substream_seed(std::uint64_t seed, std::string_view name, std::uint64_t index) {
  std::uint64_t h = splitmix64(seed);
  for (unsigned char c : name) h = splitmix64(h ^ c);
  return splitmix64(h ^ splitmix64(index));
}

Matrix gaussian_matrix(Index rows, Index cols, Rng& rng, double sd) {
  std::normal_distribution<double> normal(0.0, sd);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

Vector gaussian_vector(Index size, Rng& rng, double sd) {
  std::normal_distribution<double> normal(0.0, sd);
  Vector v(size);
  for (Index i = 0; i < size; ++i) v(i) = normal(rng);
  return v;
}

}  // namespace substab
