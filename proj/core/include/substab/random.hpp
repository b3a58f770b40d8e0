#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "substab/common.hpp"

namespace substab {

using Rng = std::mt19937_64;

/// Derives an independent seed for a named sub-stream ("plan", "walk", ...)
/// so every random consumer can be reproduced from one user seed.
std::uint64_t substream_seed(std::uint64_t seed, std::string_view name, std::uint64_t index = 0);

inline Rng make_rng(std::uint64_t seed, std::string_view name, std::uint64_t index = 0) {
  return Rng(substream_seed(seed, name, index));
}

/// n×p matrix of i.i.d. N(0, sd²) draws, filled column by column.
Matrix gaussian_matrix(Index rows, Index cols, Rng& rng, double sd = 1.0);
Vector gaussian_vector(Index size, Rng& rng, double sd = 1.0);

}  // namespace substab
