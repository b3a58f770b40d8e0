#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace substab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Default relative cutoff on singular values used to decide numerical rank.
inline constexpr double kDefaultRankTolerance = 1e-10;

/// Raised when a caller violates an operation's preconditions (bad index,
/// mismatched shapes, out-of-range threshold).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when input data cannot be parsed.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string version();

}  // namespace substab
