#pragma once

#include <memory>
#include <optional>
#include <shared_mutex>
#include <unordered_map>
#include <vector>

#include "substab/feature_set.hpp"
#include "substab/linalg.hpp"

namespace substab {

/// Memoizes orthonormal bases of col(X_S) for one design.
///
/// Safe for concurrent readers; inserts take an exclusive lock.
class BasisCache {
 public:
  explicit BasisCache(const DesignMatrix& X, double tol = kDefaultRankTolerance);

  std::shared_ptr<const SubspaceBasis> get(const FeatureSet& s) const;

  const DesignMatrix& design() const noexcept { return *x_; }
  double tolerance() const noexcept { return tol_; }
  std::size_t size() const;

 private:
  const DesignMatrix* x_;
  double tol_;
  mutable std::shared_mutex mutex_;
  mutable std::unordered_map<FeatureSet, std::shared_ptr<const SubspaceBasis>, FeatureSetHash> map_;
};

/// Shared knobs for metric evaluation. A cache, when given, must be built
/// over the same DesignMatrix object the metric is called with.
struct MetricContext {
  const BasisCache* cache = nullptr;
  double rank_tolerance = kDefaultRankTolerance;
};

struct SimilarityReport {
  double tau = 0;
  double tau_bar = 0;
  double tau_tilde = 0;
  std::optional<double> tau_y;
};

/// τ(S1,S2) = trace(P1 P2).
double similarity_tau(const DesignMatrix& X, const FeatureSet& s1, const FeatureSet& s2,
                      const MetricContext& ctx = {});

/// τ̄ = τ / min(|S1|,|S2|), with 0/0 = 1.
double similarity_tau_bar(const DesignMatrix& X, const FeatureSet& s1, const FeatureSet& s2,
                          const MetricContext& ctx = {});

/// τ̃ = cos² of the max(|S1|,|S2|)-th principal angle; 0 when sizes differ.
double similarity_tau_tilde(const DesignMatrix& X, const FeatureSet& s1, const FeatureSet& s2,
                            const MetricContext& ctx = {});

/// sup_{‖y‖=1} ‖P1 y − P2 y‖², i.e. the largest eigenvalue of (P1 − P2)².
/// Returns 1 when |S1| ≠ |S2|.
double worst_case_prediction_gap(const DesignMatrix& X, const FeatureSet& s1,
                                 const FeatureSet& s2, const MetricContext& ctx = {});

/// τ^y = 1 − ‖P1 y − P2 y‖² / ‖y‖².
double similarity_tau_y(const DesignMatrix& X, const Vector& y, const FeatureSet& s1,
                        const FeatureSet& s2, const MetricContext& ctx = {});

/// Response-aware similarity over the cone of unit directions within angle
/// eta of y: 1 − sup_{∠(y', y) ≤ eta} ‖P1 y' − P2 y'‖². eta = 0 gives τ^y and
/// eta = π/2 gives τ̃.
double similarity_tau_cone(const DesignMatrix& X, const Vector& y, const FeatureSet& s1,
                           const FeatureSet& s2, double eta, const MetricContext& ctx = {});

SimilarityReport similarity_report(const DesignMatrix& X, const FeatureSet& s1,
                                   const FeatureSet& s2, const Vector* y = nullptr,
                                   const MetricContext& ctx = {});

struct PositiveCounts {
  double tp = 0;
  double fp = 0;
};

/// TP = τ(Ŝ, S*), FP = |Ŝ| − TP. X_{S*} must have full column rank.
PositiveCounts true_false_positives(const DesignMatrix& X, const FeatureSet& s_hat,
                                    const FeatureSet& s_star, const MetricContext& ctx = {});

/// π(S) = σ_|S|(P_S P_avg P_S); 0 when X_S is rank deficient, 1 for S = ∅.
double stability_pi(const DesignMatrix& X, const FeatureSet& s, const AvgProjection& p,
                    const MetricContext& ctx = {});

/// π(S) ≥ alpha and π(S ∪ {j}) < alpha for every j ∉ S.
bool is_maximal_alpha_stable(const DesignMatrix& X, const FeatureSet& s, const AvgProjection& p,
                             double alpha, const MetricContext& ctx = {});

/// Mean pairwise τ̄ over M ≥ 2 selection sets.
double output_stability(const DesignMatrix& X, const std::vector<FeatureSet>& sets,
                        const MetricContext& ctx = {});

}  // namespace substab
