#include "substab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace substab {

DesignMatrix::DesignMatrix(Matrix values, bool centered)
    : values_(std::move(values)), centered_(centered) {
  if (values_.rows() < 2) throw UsageError("design matrix needs at least 2 rows");
  if (values_.cols() < 1) throw UsageError("design matrix needs at least 1 column");
  if (!values_.allFinite()) throw UsageError("design matrix contains non-finite values");
  if (centered_) values_.rowwise() -= values_.colwise().mean();
  column_norms_ = values_.colwise().norm().transpose();
}

DesignMatrix DesignMatrix::centered(Matrix values) { return DesignMatrix(std::move(values), true); }

DesignMatrix DesignMatrix::raw(Matrix values) { return DesignMatrix(std::move(values), false); }

void DesignMatrix::check_indices(const FeatureSet& s) const {
  if (!s.empty() && s.bound() > p()) {
    throw UsageError("feature index " + std::to_string(s.bound() - 1) + " out of range for p = " +
                     std::to_string(p()));
  }
}

Matrix DesignMatrix::columns(const FeatureSet& s) const {
  check_indices(s);
  Matrix out(n(), static_cast<Index>(s.size()));
  Index k = 0;
  for (int j : s) out.col(k++) = values_.col(j);
  return out;
}

DesignMatrix DesignMatrix::restrict_rows(std::span<const int> rows) const {
  Matrix sub(static_cast<Index>(rows.size()), p());
  for (Index i = 0; i < sub.rows(); ++i) {
    const int r = rows[static_cast<std::size_t>(i)];
    if (r < 0 || r >= n()) throw UsageError("row index out of range");
    sub.row(i) = values_.row(r);
  }
  return DesignMatrix(std::move(sub), centered_);
}

AvgProjection::AvgProjection(std::vector<SubspaceBasis> bases) : bases_(std::move(bases)) {
  if (bases_.size() < 2 || bases_.size() % 2 != 0) {
    throw UsageError("average projection needs an even number B >= 2 of bases, got " +
                     std::to_string(bases_.size()));
  }
  const Index n = bases_.front().ambient_dim();
  Index total = 0;
  for (const auto& b : bases_) {
    if (b.ambient_dim() != n) throw UsageError("subsample bases disagree on ambient dimension");
    total += b.rank();
  }
  stacked_.resize(n, total);
  Index offset = 0;
  for (const auto& b : bases_) {
    stacked_.middleCols(offset, b.rank()) = b.q;
    offset += b.rank();
  }
}

SubspaceBasis orthonormal_basis(const Matrix& columns, double tol) {
  if (!(tol > 0)) throw UsageError("rank tolerance must be positive");
  SubspaceBasis out;
  if (columns.cols() == 0) {
    out.q.resize(columns.rows(), 0);
    return out;
  }
  Eigen::JacobiSVD<Matrix> svd(columns, Eigen::ComputeThinU);
  const Vector& sv = svd.singularValues();
  const double smax = sv(0);
  Index rank = 0;
  if (smax > 0) {
    while (rank < sv.size() && sv(rank) > tol * smax) ++rank;
  }
  out.q = svd.matrixU().leftCols(rank);
  out.condition_ratio = rank > 0 ? sv(rank - 1) / smax : 1.0;
  return out;
}

SubspaceBasis orthonormal_basis(const DesignMatrix& X, const FeatureSet& s, double tol) {
  SubspaceBasis out = orthonormal_basis(X.columns(s), tol);
  out.source = s;
  return out;
}

namespace {

void check_same_ambient(const SubspaceBasis& a, const SubspaceBasis& b) {
  if (a.ambient_dim() != b.ambient_dim()) {
    throw UsageError("bases live in different ambient dimensions (" +
                     std::to_string(a.ambient_dim()) + " vs " + std::to_string(b.ambient_dim()) +
                     ")");
  }
}

}  // namespace

double trace_inner(const SubspaceBasis& a, const SubspaceBasis& b) {
  check_same_ambient(a, b);
  if (a.rank() == 0 || b.rank() == 0) return 0.0;
  return (a.q.transpose() * b.q).squaredNorm();
}

Vector principal_cosines(const SubspaceBasis& a, const SubspaceBasis& b) {
  check_same_ambient(a, b);
  const Index k = std::min(a.rank(), b.rank());
  if (k == 0) return Vector(0);
  const Matrix cross = a.q.transpose() * b.q;
  Eigen::JacobiSVD<Matrix> svd(cross);
  Vector cos2 = svd.singularValues().head(k).array().square().min(1.0).max(0.0).matrix();
  return cos2;
}

double avg_alignment(const Eigen::Ref<const Vector>& v, const AvgProjection& p) {
  if (v.size() != p.ambient_dim()) throw UsageError("vector length does not match ambient dimension");
  const double vv = v.squaredNorm();
  if (!(vv > 0)) throw UsageError("avg_alignment of a zero vector is undefined");
  const double num = (p.stacked().transpose() * v).squaredNorm();
  return std::clamp(num / (static_cast<double>(p.B()) * vv), 0.0, 1.0);
}

Matrix projected_average(const SubspaceBasis& qs, const AvgProjection& p) {
  if (qs.ambient_dim() != p.ambient_dim()) {
    throw UsageError("basis and average projection live in different ambient dimensions");
  }
  const Matrix y = p.stacked().transpose() * qs.q;
  Matrix m = y.transpose() * y;
  m /= static_cast<double>(p.B());
  return m;
}

double smallest_singular_projected(const SubspaceBasis& qs, const AvgProjection& p) {
  if (qs.rank() < 1) throw UsageError("smallest_singular_projected needs a basis of rank >= 1");
  const Matrix m = projected_average(qs, p);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
  return std::clamp(eig.eigenvalues()(0), 0.0, 1.0);
}

}  // namespace substab
