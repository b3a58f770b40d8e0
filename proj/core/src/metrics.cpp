#include "substab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>

#include "substab/diagnostics.hpp"

namespace substab {

BasisCache::BasisCache(const DesignMatrix& X, double tol) : x_(&X), tol_(tol) {}

std::shared_ptr<const SubspaceBasis> BasisCache::get(const FeatureSet& s) const {
  {
    std::shared_lock lock(mutex_);
    auto it = map_.find(s);
    if (it != map_.end()) return it->second;
  }
  auto basis = std::make_shared<const SubspaceBasis>(orthonormal_basis(*x_, s, tol_));
  std::unique_lock lock(mutex_);
  auto [it, inserted] = map_.emplace(s, std::move(basis));
  return it->second;
}

std::size_t BasisCache::size() const {
  std::shared_lock lock(mutex_);
  return map_.size();
}

namespace {

std::shared_ptr<const SubspaceBasis> basis_of(const DesignMatrix& X, const FeatureSet& s,
                                              const MetricContext& ctx) {
  if (ctx.cache != nullptr) {
    if (&ctx.cache->design() != &X) throw UsageError("basis cache was built for a different design");
    X.check_indices(s);
    return ctx.cache->get(s);
  }
  return std::make_shared<const SubspaceBasis>(orthonormal_basis(X, s, ctx.rank_tolerance));
}

// Orthonormal coordinates for span(Q1, Q2[, extra]) and the two projections
// expressed in them.
struct JointFrame {
  Matrix w;
  Matrix p1;
  Matrix p2;
};

JointFrame joint_frame(const SubspaceBasis& b1, const SubspaceBasis& b2, const Vector* extra,
                       double tol) {
  const Index extra_cols = extra != nullptr ? 1 : 0;
  Matrix stacked(b1.ambient_dim(), b1.rank() + b2.rank() + extra_cols);
  stacked << b1.q, b2.q;
  if (extra != nullptr) stacked.rightCols(1) = *extra;
  JointFrame f;
  f.w = orthonormal_basis(stacked, tol).q;
  const Matrix d = f.w.transpose() * b1.q;
  const Matrix e = f.w.transpose() * b2.q;
  f.p1 = d * d.transpose();
  f.p2 = e * e.transpose();
  return f;
}

// max uᵀAu over unit u with uᵀc_dir ≥ c, when the maximum sits on the
// boundary uᵀc_dir = c. u = c·ŷ + s·w with w ⟂ ŷ reduces this to maximizing
// wᵀHw + 2gᵀw over the unit sphere of ŷ⊥, solved through the secular equation.
double cap_boundary_max(const Matrix& a, const Vector& yhat, double c) {
  const Index m = a.rows();
  const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
  if (m == 1 || s == 0.0) {
    return yhat.dot(a * yhat);
  }
  Eigen::HouseholderQR<Matrix> qr(yhat);
  const Matrix full_q = qr.householderQ() * Matrix::Identity(m, m);
  const Matrix nbasis = full_q.rightCols(m - 1);
  const Matrix h = s * s * (nbasis.transpose() * a * nbasis);
  const Vector g = c * s * (nbasis.transpose() * (a * yhat));

  Eigen::SelfAdjointEigenSolver<Matrix> eig(h);
  const Vector& hv = eig.eigenvalues();
  const Matrix& ev = eig.eigenvectors();
  const Vector gamma = ev.transpose() * g;
  const Index k = hv.size();
  const double hmax = hv(k - 1);
  const double gnorm = g.norm();
  const double top_tol = 1e-12 * std::max(1.0, std::abs(hmax));

  std::vector<bool> top(static_cast<std::size_t>(k));
  double gamma_top2 = 0;
  for (Index i = 0; i < k; ++i) {
    top[static_cast<std::size_t>(i)] = hv(i) >= hmax - top_tol;
    if (top[static_cast<std::size_t>(i)]) gamma_top2 += gamma(i) * gamma(i);
  }

  auto phi = [&](double lambda) {
    double acc = 0;
    for (Index i = 0; i < k; ++i) {
      const double d = lambda - hv(i);
      acc += gamma(i) * gamma(i) / (d * d);
    }
    return acc;
  };

  Vector wcoef(k);
  const bool hard_case_possible = gamma_top2 <= 1e-28 * std::max(1.0, gnorm * gnorm);
  double psi = 0;
  if (hard_case_possible) {
    for (Index i = 0; i < k; ++i) {
      if (top[static_cast<std::size_t>(i)]) continue;
      const double d = hmax - hv(i);
      psi += gamma(i) * gamma(i) / (d * d);
    }
  }
  if (hard_case_possible && psi <= 1.0) {
    Index top_index = k - 1;
    for (Index i = 0; i < k; ++i) {
      if (top[static_cast<std::size_t>(i)]) {
        wcoef(i) = 0;
      } else {
        wcoef(i) = gamma(i) / (hmax - hv(i));
      }
    }
    wcoef(top_index) = std::sqrt(std::max(0.0, 1.0 - psi));
  } else {
    double lo = hmax;
    double hi = hmax + std::max(gnorm, 1e-300);
    for (int it = 0; it < 200 && hi - lo > 1e-16 * std::max(1.0, std::abs(hi)); ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (phi(mid) > 1.0) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    for (Index i = 0; i < k; ++i) wcoef(i) = gamma(i) / (hi - hv(i));
  }
  Vector w = ev * wcoef;
  const double wn = w.norm();
  if (wn > 0) w /= wn;
  const Vector u = c * yhat + s * (nbasis * w);
  return u.dot(a * u);
}

}  // namespace

double similarity_tau(const DesignMatrix& X, const FeatureSet& s1, const FeatureSet& s2,
                      const MetricContext& ctx) {
  return trace_inner(*basis_of(X, s1, ctx), *basis_of(X, s2, ctx));
}

double similarity_tau_bar(const DesignMatrix& X, const FeatureSet& s1, const FeatureSet& s2,
                          const MetricContext& ctx) {
  const std::size_t k = std::min(s1.size(), s2.size());
  if (k == 0) {
    X.check_indices(s1);
    X.check_indices(s2);
    // τ is 0 whenever either set is empty, so this is always the 0/0 case.
    return 1.0;
  }
  return std::clamp(similarity_tau(X, s1, s2, ctx) / static_cast<double>(k), 0.0, 1.0);
}

double similarity_tau_tilde(const DesignMatrix& X, const FeatureSet& s1, const FeatureSet& s2,
                            const MetricContext& ctx) {
  X.check_indices(s1);
  X.check_indices(s2);
  if (s1.size() != s2.size()) return 0.0;
  const std::size_t l = s1.size();
  if (l == 0) return 1.0;
  const Vector cos2 = principal_cosines(*basis_of(X, s1, ctx), *basis_of(X, s2, ctx));
  if (static_cast<std::size_t>(cos2.size()) < l) return 0.0;
  return cos2(static_cast<Index>(l) - 1);
}

double worst_case_prediction_gap(const DesignMatrix& X, const FeatureSet& s1,
                                 const FeatureSet& s2, const MetricContext& ctx) {
  X.check_indices(s1);
  X.check_indices(s2);
  if (s1.size() != s2.size()) return 1.0;
  if (s1.empty()) return 0.0;
  const auto b1 = basis_of(X, s1, ctx);
  const auto b2 = basis_of(X, s2, ctx);
  const JointFrame f = joint_frame(*b1, *b2, nullptr, ctx.rank_tolerance);
  if (f.w.cols() == 0) return 0.0;
  const Matrix delta = f.p1 - f.p2;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(delta, Eigen::EigenvaluesOnly);
  const double ext = std::max(std::abs(eig.eigenvalues()(0)),
                              std::abs(eig.eigenvalues()(eig.eigenvalues().size() - 1)));
  return std::clamp(ext * ext, 0.0, 1.0);
}

double similarity_tau_y(const DesignMatrix& X, const Vector& y, const FeatureSet& s1,
                        const FeatureSet& s2, const MetricContext& ctx) {
  if (y.size() != X.n()) throw UsageError("response length does not match the design");
  const double yy = y.squaredNorm();
  if (!(yy > 0)) throw UsageError("response-aware similarity needs a nonzero response");
  const auto b1 = basis_of(X, s1, ctx);
  const auto b2 = basis_of(X, s2, ctx);
  const Vector diff = b1->q * (b1->q.transpose() * y) - b2->q * (b2->q.transpose() * y);
  return std::clamp(1.0 - diff.squaredNorm() / yy, 0.0, 1.0);
}

double similarity_tau_cone(const DesignMatrix& X, const Vector& y, const FeatureSet& s1,
                           const FeatureSet& s2, double eta, const MetricContext& ctx) {
  if (!(eta >= 0.0 && eta <= M_PI / 2 + 1e-15)) throw UsageError("cone angle must lie in [0, pi/2]");
  if (y.size() != X.n()) throw UsageError("response length does not match the design");
  const double ynorm = y.norm();
  if (!(ynorm > 0)) throw UsageError("response-aware similarity needs a nonzero response");
  const auto b1 = basis_of(X, s1, ctx);
  const auto b2 = basis_of(X, s2, ctx);
  const Vector yunit = y / ynorm;
  const JointFrame f = joint_frame(*b1, *b2, &yunit, ctx.rank_tolerance);
  const Matrix delta = f.p1 - f.p2;
  const Matrix a = delta * delta;
  Vector yr = f.w.transpose() * yunit;
  yr.normalize();
  const double c = std::clamp(std::cos(eta), 0.0, 1.0);

  Eigen::SelfAdjointEigenSolver<Matrix> eig(a);
  const Vector& lam = eig.eigenvalues();
  const Index m = lam.size();
  const double lmax = lam(m - 1);
  const double tol = 1e-12 * std::max(1.0, lmax);
  double proj2 = 0;
  for (Index i = 0; i < m; ++i) {
    if (lam(i) >= lmax - tol) {
      const double t = eig.eigenvectors().col(i).dot(yr);
      proj2 += t * t;
    }
  }
  double sup;
  if (std::sqrt(proj2) >= c - 1e-15) {
    // A top eigendirection of (P1 − P2)² lies inside the cone.
    sup = lmax;
  } else {
    sup = cap_boundary_max(a, yr, c);
  }
  return std::clamp(1.0 - sup, 0.0, 1.0);
}

SimilarityReport similarity_report(const DesignMatrix& X, const FeatureSet& s1,
                                   const FeatureSet& s2, const Vector* y,
                                   const MetricContext& ctx) {
  SimilarityReport r;
  r.tau = similarity_tau(X, s1, s2, ctx);
  r.tau_bar = similarity_tau_bar(X, s1, s2, ctx);
  r.tau_tilde = similarity_tau_tilde(X, s1, s2, ctx);
  if (y != nullptr) r.tau_y = similarity_tau_y(X, *y, s1, s2, ctx);
  return r;
}

PositiveCounts true_false_positives(const DesignMatrix& X, const FeatureSet& s_hat,
                                    const FeatureSet& s_star, const MetricContext& ctx) {
  const auto truth = basis_of(X, s_star, ctx);
  if (!truth->full_rank()) {
    throw UsageError("true support " + s_star.to_string() + " has linearly dependent columns");
  }
  PositiveCounts out;
  out.tp = trace_inner(*basis_of(X, s_hat, ctx), *truth);
  out.tp = std::clamp(out.tp, 0.0, static_cast<double>(std::min(s_hat.size(), s_star.size())));
  out.fp = static_cast<double>(s_hat.size()) - out.tp;
  return out;
}

double stability_pi(const DesignMatrix& X, const FeatureSet& s, const AvgProjection& p,
                    const MetricContext& ctx) {
  X.check_indices(s);
  if (s.empty()) return 1.0;
  const auto basis = basis_of(X, s, ctx);
  if (!basis->full_rank()) return 0.0;
  if (basis->condition_ratio < 1e-7) {
    std::ostringstream msg;
    msg << "stability of " << s.to_string() << " evaluated on a nearly rank-deficient design (sigma_min/sigma_max = "
        << basis->condition_ratio << ")";
    warn(msg.str());
  }
  return smallest_singular_projected(*basis, p);
}

bool is_maximal_alpha_stable(const DesignMatrix& X, const FeatureSet& s, const AvgProjection& p,
                             double alpha, const MetricContext& ctx) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError("alpha must lie in (0, 1)");
  if (stability_pi(X, s, p, ctx) < alpha) return false;
  for (int j = 0; j < X.p(); ++j) {
    if (s.contains(j)) continue;
    if (stability_pi(X, s.with(j), p, ctx) >= alpha) return false;
  }
  return true;
}

double output_stability(const DesignMatrix& X, const std::vector<FeatureSet>& sets,
                        const MetricContext& ctx) {
  const std::size_t m = sets.size();
  if (m < 2) throw UsageError("output stability needs at least two selection sets");
  double acc = 0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) acc += similarity_tau_bar(X, sets[i], sets[j], ctx);
  return std::clamp(2.0 * acc / (static_cast<double>(m) * static_cast<double>(m - 1)), 0.0, 1.0);
}

}  // namespace substab
