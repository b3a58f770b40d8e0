#include "substab/base_procedures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace substab {

std::string_view to_string(BaseKind kind) {
  switch (kind) {
    case BaseKind::l0:
      return "l0";
    case BaseKind::lasso:
      return "lasso";
  }
  return "unknown";
}

BaseKind parse_base_kind(std::string_view text) {
  if (text == "l0") return BaseKind::l0;
  if (text == "lasso") return BaseKind::lasso;
  throw UsageError("unknown base procedure '" + std::string(text) + "' (expected l0 or lasso)");
}

void BaseProcedureConfig::validate(Index n, Index p) const {
  if (s0 < 1) throw UsageError("s0 must be at least 1");
  if (s0 > p) throw UsageError("s0 = " + std::to_string(s0) + " exceeds p = " + std::to_string(p));
  if (s0 > n / 2) {
    throw UsageError("s0 = " + std::to_string(s0) + " cannot be fit on half-samples of size " +
                     std::to_string(n / 2));
  }
  if (l0_swap_rounds < 0) throw UsageError("l0 swap rounds must be non-negative");
  if (lasso_path_length < 1) throw UsageError("lasso path length must be positive");
  if (!(lasso_eps_ratio > 0 && lasso_eps_ratio < 1)) throw UsageError("lasso eps ratio must lie in (0,1)");
}

namespace {

constexpr double kResidualTol = 1e-10;

// Forward Gram-Schmidt carried out on the Gram matrix of unit-norm columns.
// For the current ordered set S it tracks, for every column j, the squared
// norm of X_j's residual on col(X_S) and the inner product of that residual
// with y.
class GramPath {
 public:
  GramPath(const Matrix& gram, const Vector& xty, double yy)
      : gram_(gram), xty_(xty), yy_(yy), resid_(gram.diagonal()), rho_(xty) {
    z_.resize(0, gram.cols());
  }

  void add(int k) {
    const double d = resid_(k);
    const double sd = std::sqrt(d);
    Vector row = gram_.row(k).transpose();
    if (z_.rows() > 0) row.noalias() -= z_.transpose() * z_.col(k);
    row /= sd;
    double zc_new = xty_(k);
    if (zc_.size() > 0) zc_new -= z_.col(k).dot(zc_);
    zc_new /= sd;
    z_.conservativeResize(z_.rows() + 1, Eigen::NoChange);
    z_.row(z_.rows() - 1) = row.transpose();
    zc_.conservativeResize(zc_.size() + 1);
    zc_(zc_.size() - 1) = zc_new;
    resid_.array() -= row.array().square();
    rho_ -= row * zc_new;
    resid_(k) = 0;
    members_.push_back(k);
  }

  double rss() const { return yy_ - (zc_.size() > 0 ? zc_.squaredNorm() : 0.0); }

  bool adds_direction(int j) const { return gram_(j, j) > 0 && resid_(j) > kResidualTol * gram_(j, j); }

  // RSS reduction from adding j, or a negative value when j adds no direction.
  double gain(int j) const { return adds_direction(j) ? rho_(j) * rho_(j) / resid_(j) : -1.0; }

  // Squared inner product of unit-norm X_j with the current residual.
  double residual_correlation(int j) const { return adds_direction(j) ? rho_(j) * rho_(j) : -1.0; }

  const std::vector<int>& members() const { return members_; }

 private:
  const Matrix& gram_;
  const Vector& xty_;
  double yy_;
  Vector resid_;
  Vector rho_;
  Matrix z_;
  Vector zc_;
  std::vector<int> members_;
};

struct Best {
  int index = -1;
  double gain = -1.0;
};

template <typename Score>
Best best_by(const std::vector<char>& excluded, Score score) {
  Best best;
  const int p = static_cast<int>(excluded.size());
  for (int j = 0; j < p; ++j) {
    if (excluded[static_cast<std::size_t>(j)]) continue;
    const double g = score(j);
    if (g < 0) continue;
    if (g > best.gain) best = {j, g};
  }
  return best;
}

Best best_addition(const GramPath& path, const std::vector<char>& excluded) {
  return best_by(excluded, [&](int j) { return path.gain(j); });
}

GramPath build_path(const Matrix& gram, const Vector& xty, double yy, const std::vector<int>& order) {
  GramPath path(gram, xty, yy);
  for (int k : order) path.add(k);
  return path;
}

Vector unit_scales(const Matrix& x) {
  Vector norms = x.colwise().norm().transpose();
  const double nmax = norms.size() > 0 ? norms.maxCoeff() : 0.0;
  Vector scale(norms.size());
  for (Index j = 0; j < norms.size(); ++j) {
    scale(j) = norms(j) > 1e-12 * std::max(nmax, 1e-300) ? 1.0 / norms(j) : 0.0;
  }
  return scale;
}

}  // namespace

L0Fit fit_l0(const Matrix& x_sub, const Vector& y_sub, int s0, int swap_rounds) {
  if (x_sub.rows() != y_sub.size()) throw UsageError("x and y disagree on the number of rows");
  if (s0 < 1) throw UsageError("s0 must be at least 1");
  if (swap_rounds < 0) throw UsageError("swap rounds must be non-negative");
  const int p = static_cast<int>(x_sub.cols());

  const Vector scale = unit_scales(x_sub);
  const Matrix xs = x_sub * scale.asDiagonal();
  const Matrix gram = xs.transpose() * xs;
  const Vector xty = xs.transpose() * y_sub;
  const double yy = y_sub.squaredNorm();

  L0Fit fit;
  std::vector<char> in_set(static_cast<std::size_t>(p), 0);
  GramPath path(gram, xty, yy);
  for (int step = 0; step < s0; ++step) {
    const Best b = best_by(in_set, [&](int j) { return path.residual_correlation(j); });
    if (b.index < 0) {
      fit.rank_limited = true;
      break;
    }
    path.add(b.index);
    in_set[static_cast<std::size_t>(b.index)] = 1;
  }
  std::vector<int> current = path.members();
  double current_rss = path.rss();

  for (int round = 0; round < swap_rounds && current.size() > 0; ++round) {
    double best_rss = current_rss;
    int best_pos = -1;
    int best_in = -1;
    for (std::size_t pos = 0; pos < current.size(); ++pos) {
      std::vector<int> rest;
      rest.reserve(current.size() - 1);
      for (std::size_t q = 0; q < current.size(); ++q)
        if (q != pos) rest.push_back(current[q]);
      const GramPath reduced = build_path(gram, xty, yy, rest);
      const Best b = best_addition(reduced, in_set);
      if (b.index < 0) continue;
      const double candidate = reduced.rss() - b.gain;
      if (candidate < best_rss) {
        best_rss = candidate;
        best_pos = static_cast<int>(pos);
        best_in = b.index;
      }
    }
    const double margin = 1e-12 * std::max(yy, 1e-300);
    if (best_pos < 0 || !(best_rss < current_rss - margin)) break;
    in_set[static_cast<std::size_t>(current[static_cast<std::size_t>(best_pos)])] = 0;
    in_set[static_cast<std::size_t>(best_in)] = 1;
    current[static_cast<std::size_t>(best_pos)] = best_in;
    current_rss = build_path(gram, xty, yy, current).rss();
    ++fit.swaps;
  }

  fit.selected = FeatureSet::of(current);
  fit.rss = std::max(0.0, current_rss);
  return fit;
}

double least_squares_rss(const Matrix& x, const Vector& y, const FeatureSet& s) {
  if (s.empty()) return y.squaredNorm();
  Matrix xs(x.rows(), static_cast<Index>(s.size()));
  Index k = 0;
  for (int j : s) xs.col(k++) = x.col(j);
  Eigen::ColPivHouseholderQR<Matrix> qr(xs);
  const Vector beta = qr.solve(y);
  return (y - xs * beta).squaredNorm();
}

namespace {

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

}  // namespace

LassoSolution lasso_coordinate_descent(const Matrix& x, const Vector& y, double lambda,
                                       const Vector* warm_start, double tol, int max_sweeps) {
  if (x.rows() != y.size()) throw UsageError("x and y disagree on the number of rows");
  if (!(lambda >= 0)) throw UsageError("lambda must be non-negative");
  const double n = static_cast<double>(x.rows());
  const Index p = x.cols();
  const Vector colsq = x.colwise().squaredNorm().transpose() / n;

  LassoSolution sol;
  sol.beta = warm_start != nullptr ? *warm_start : Vector::Zero(p);
  if (sol.beta.size() != p) throw UsageError("warm start has the wrong length");
  Vector r = y - x * sol.beta;

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_delta = 0;
    for (Index j = 0; j < p; ++j) {
      if (colsq(j) <= 0) {
        sol.beta(j) = 0;
        continue;
      }
      const double old = sol.beta(j);
      const double rho = x.col(j).dot(r) / n + colsq(j) * old;
      const double updated = soft_threshold(rho, lambda) / colsq(j);
      if (updated != old) {
        r.noalias() -= x.col(j) * (updated - old);
        sol.beta(j) = updated;
        max_delta = std::max(max_delta, std::abs(updated - old));
      }
    }
    sol.sweeps = sweep + 1;
    if (max_delta < tol) {
      sol.converged = true;
      break;
    }
  }
  std::vector<int> active;
  for (Index j = 0; j < p; ++j)
    if (sol.beta(j) != 0.0) active.push_back(static_cast<int>(j));
  sol.active = FeatureSet::of(std::move(active));
  return sol;
}

LassoFit fit_lasso(const Matrix& x_sub, const Vector& y_sub, int s0, int path_length,
                   double eps_ratio) {
  if (x_sub.rows() != y_sub.size()) throw UsageError("x and y disagree on the number of rows");
  if (s0 < 1) throw UsageError("s0 must be at least 1");
  if (path_length < 1) throw UsageError("path length must be positive");
  if (!(eps_ratio > 0 && eps_ratio < 1)) throw UsageError("eps ratio must lie in (0,1)");

  const double n = static_cast<double>(x_sub.rows());
  const Matrix xs = x_sub * unit_scales(x_sub).asDiagonal();
  const Vector score = (xs.transpose() * y_sub).cwiseAbs() / n;

  LassoFit fit;
  fit.lambda_max = score.size() > 0 ? score.maxCoeff() : 0.0;
  if (!(fit.lambda_max > 0)) return fit;

  Vector beta = Vector::Zero(xs.cols());
  LassoSolution last;
  for (int k = 0; k < path_length; ++k) {
    const double frac = path_length == 1 ? 0.0 : static_cast<double>(k) / (path_length - 1);
    const double lambda = fit.lambda_max * std::pow(eps_ratio, frac);
    last = lasso_coordinate_descent(xs, y_sub, lambda, &beta);
    beta = last.beta;
    fit.lambda = lambda;
    if (static_cast<int>(last.active.size()) >= s0) {
      fit.reached_target = true;
      break;
    }
  }

  std::vector<int> order(last.active.begin(), last.active.end());
  if (static_cast<int>(order.size()) > s0) {
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return std::abs(beta(a)) > std::abs(beta(b));
    });
    order.resize(static_cast<std::size_t>(s0));
  }
  fit.selected = FeatureSet::of(std::move(order));
  return fit;
}

FeatureSet run_base_procedure(const Matrix& x_sub, const Vector& y_sub,
                              const BaseProcedureConfig& config) {
  switch (config.kind) {
    case BaseKind::l0:
      return fit_l0(x_sub, y_sub, config.s0, config.l0_swap_rounds).selected;
    case BaseKind::lasso:
      return fit_lasso(x_sub, y_sub, config.s0, config.lasso_path_length, config.lasso_eps_ratio)
          .selected;
  }
  throw UsageError("unknown base procedure");
}

}  // namespace substab
