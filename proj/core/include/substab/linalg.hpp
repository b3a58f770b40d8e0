#pragma once

#include <span>
#include <vector>

#include "substab/common.hpp"
#include "substab/feature_set.hpp"

namespace substab {

/// n×p predictor matrix (rows = samples, columns = features).
///
/// Every feature vector used by the metrics comes from here. Designs built
/// with `centered()` have zero column sums; `raw()` keeps the values as given
/// and exists for hand-built geometric instances.
class DesignMatrix {
 public:
  static DesignMatrix centered(Matrix values);
  static DesignMatrix raw(Matrix values);

  const Matrix& values() const noexcept { return values_; }
  Index n() const noexcept { return values_.rows(); }
  Index p() const noexcept { return values_.cols(); }
  const Vector& column_norms() const noexcept { return column_norms_; }
  bool is_centered() const noexcept { return centered_; }

  auto column(Index j) const { return values_.col(j); }
  Matrix columns(const FeatureSet& s) const;

  /// Rows `rows` of this design, re-centered when this design is centered.
  DesignMatrix restrict_rows(std::span<const int> rows) const;

  void check_indices(const FeatureSet& s) const;

 private:
  DesignMatrix(Matrix values, bool centered);

  Matrix values_;
  Vector column_norms_;
  bool centered_ = false;
};

/// Orthonormal basis of col(X_S). rank() is the numerical rank of X_S.
struct SubspaceBasis {
  Matrix q;  // n × rank, orthonormal columns
  FeatureSet source;
  /// Smallest kept singular value of X_S over the largest (1 when rank ≤ 1).
  double condition_ratio = 1.0;

  Index rank() const noexcept { return q.cols(); }
  Index ambient_dim() const noexcept { return q.rows(); }
  bool full_rank() const noexcept { return rank() == static_cast<Index>(source.size()); }
};

/// The B subsample bases standing in for P_avg = (1/B) Σ_ℓ Q_ℓ Q_ℓᵀ.
///
/// The n×n average projection is never formed. All bases are also kept
/// side by side in one n × (Σ rank_ℓ) matrix so that Σ_ℓ ‖Q_ℓᵀ v‖² is a
/// single product.
class AvgProjection {
 public:
  explicit AvgProjection(std::vector<SubspaceBasis> bases);

  Index B() const noexcept { return static_cast<Index>(bases_.size()); }
  Index ambient_dim() const noexcept { return stacked_.rows(); }
  const std::vector<SubspaceBasis>& bases() const noexcept { return bases_; }
  const Matrix& stacked() const noexcept { return stacked_; }

 private:
  std::vector<SubspaceBasis> bases_;
  Matrix stacked_;
};

/// Rank-revealing orthonormal basis of span{X_j : j ∈ S}. Singular values of
/// X_S below tol·σ_max are treated as zero. Empty S yields a rank-0 basis.
SubspaceBasis orthonormal_basis(const DesignMatrix& X, const FeatureSet& s,
                                double tol = kDefaultRankTolerance);

/// Same as above for an arbitrary set of column vectors.
SubspaceBasis orthonormal_basis(const Matrix& columns, double tol = kDefaultRankTolerance);

/// trace(P_A P_B) = ‖Q_Aᵀ Q_B‖_F² = Σ cos² of the principal angles.
double trace_inner(const SubspaceBasis& a, const SubspaceBasis& b);

/// Squared cosines of the principal angles, nonincreasing, length
/// min(rank_a, rank_b).
Vector principal_cosines(const SubspaceBasis& a, const SubspaceBasis& b);

/// (1/B) Σ_ℓ ‖Q_ℓᵀ v‖² / ‖v‖², the alignment of direction v with P_avg.
double avg_alignment(const Eigen::Ref<const Vector>& v, const AvgProjection& p);

/// Smallest eigenvalue of M = (1/B) Σ_ℓ (Q_sᵀ Q_ℓ)(Q_ℓᵀ Q_s), clipped to [0,1].
/// Equals σ_rank(P_s P_avg P_s) restricted to col(Q_s).
double smallest_singular_projected(const SubspaceBasis& qs, const AvgProjection& p);

/// The rank × rank matrix M used by smallest_singular_projected.
Matrix projected_average(const SubspaceBasis& qs, const AvgProjection& p);

}  // namespace substab
