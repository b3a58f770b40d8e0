#pragma once

#include <string>
#include <string_view>

#include "substab/common.hpp"
#include "substab/feature_set.hpp"

namespace substab {

enum class BaseKind { l0, lasso };

std::string_view to_string(BaseKind kind);
BaseKind parse_base_kind(std::string_view text);

struct BaseProcedureConfig {
  BaseKind kind = BaseKind::l0;
  int s0 = 1;
  int l0_swap_rounds = 2;
  int lasso_path_length = 100;
  double lasso_eps_ratio = 1e-3;

  /// Throws UsageError unless 1 ≤ s0 ≤ p and s0 ≤ ⌊n/2⌋.
  void validate(Index n, Index p) const;
};

struct L0Fit {
  FeatureSet selected;
  double rss = 0;
  /// Set when the design ran out of rank before s0 features were added.
  bool rank_limited = false;
  int swaps = 0;
};

/// Approximate ℓ0-constrained least squares: forward steps that add the
/// feature most correlated with the current residual, then up to
/// `swap_rounds` passes that apply the best
/// single exchange (drop one selected, add one unselected) when it strictly
/// lowers RSS. Columns are scaled to unit norm internally; ties go to the
/// lowest index. X_sub and y_sub are expected to be centered.
L0Fit fit_l0(const Matrix& x_sub, const Vector& y_sub, int s0, int swap_rounds);

/// RSS of the least-squares fit of y on the columns in s.
double least_squares_rss(const Matrix& x, const Vector& y, const FeatureSet& s);

struct LassoSolution {
  Vector beta;
  FeatureSet active;
  int sweeps = 0;
  bool converged = false;
};

/// Coordinate descent for (1/(2n))‖y − Xβ‖² + λ‖β‖₁ on X exactly as given.
/// Stops when a full sweep moves no coefficient by more than `tol`.
LassoSolution lasso_coordinate_descent(const Matrix& x, const Vector& y, double lambda,
                                       const Vector* warm_start = nullptr, double tol = 1e-7,
                                       int max_sweeps = 10000);

struct LassoFit {
  FeatureSet selected;
  double lambda = 0;
  double lambda_max = 0;
  /// False when no λ on the path reached support size s0.
  bool reached_target = false;
};

/// Walks a log-spaced λ path from λ_max down to eps_ratio·λ_max (unit-norm
/// columns) and returns the active set at the first λ whose support reaches
/// s0, truncated to the s0 largest |β_j|.
LassoFit fit_lasso(const Matrix& x_sub, const Vector& y_sub, int s0, int path_length = 100,
                   double eps_ratio = 1e-3);

/// Runs the configured procedure.
FeatureSet run_base_procedure(const Matrix& x_sub, const Vector& y_sub,
                              const BaseProcedureConfig& config);

}  // namespace substab
