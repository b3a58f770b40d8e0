#pragma once

#include <string>
#include <vector>

#include "substab/feature_set.hpp"
#include "substab/linalg.hpp"
#include "substab/subsampling.hpp"

namespace substab {

struct ClusterAssignment {
  /// Cluster id per feature, contiguous from 0 in order of first appearance.
  std::vector<int> labels;
  double cutoff_h = 0;
  std::string linkage = "average";

  int count() const;
  std::vector<FeatureSet> members() const;
};

/// {j : selection proportion of j ≥ alpha}.
FeatureSet stability_selection(const std::vector<SelectionRecord>& records, Index p, double alpha);

/// Average-linkage agglomerative clustering on 1 − |corr(X_j, X_k)|, cut at
/// height h (merges at height ≤ h are kept).
ClusterAssignment hierarchical_clusters(const DesignMatrix& X, double h);

/// Fraction of subsamples that select at least one member of each cluster.
Vector cluster_proportions(const std::vector<SelectionRecord>& records,
                           const ClusterAssignment& clusters);

/// Cluster stability selection, SPS variant: for each cluster whose proportion
/// clears alpha, the member with the highest individual proportion (ties go to
/// the lowest index).
FeatureSet cluster_stability_selection_sps(const std::vector<SelectionRecord>& records,
                                           const ClusterAssignment& clusters, double alpha);

}  // namespace substab
