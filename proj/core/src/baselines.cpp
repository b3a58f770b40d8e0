#include "substab/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace substab {

int ClusterAssignment::count() const {
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
}

std::vector<FeatureSet> ClusterAssignment::members() const {
  std::vector<std::vector<int>> groups(static_cast<std::size_t>(count()));
  for (std::size_t j = 0; j < labels.size(); ++j)
    groups[static_cast<std::size_t>(labels[j])].push_back(static_cast<int>(j));
  std::vector<FeatureSet> out;
  out.reserve(groups.size());
  for (auto& g : groups) out.push_back(FeatureSet::of(std::move(g)));
  return out;
}

FeatureSet stability_selection(const std::vector<SelectionRecord>& records, Index p, double alpha) {
  if (records.empty()) throw UsageError("stability selection needs at least one selection record");
  const Vector prop = selection_proportions(records, p);
  std::vector<int> out;
  for (Index j = 0; j < p; ++j)
    if (prop(j) >= alpha) out.push_back(static_cast<int>(j));
  return FeatureSet::of(std::move(out));
}

ClusterAssignment hierarchical_clusters(const DesignMatrix& X, double h) {
  if (!(h >= 0)) throw UsageError("cutoff height must be non-negative");
  const Index p = X.p();
  const Matrix gram = X.values().transpose() * X.values();
  const Vector& norms = X.column_norms();

  // Average-linkage distances between active clusters, updated with the
  // Lance-Williams rule.
  Matrix dist(p, p);
  for (Index j = 0; j < p; ++j)
    for (Index k = 0; k < p; ++k) {
      const double d = norms(j) * norms(k);
      const double corr = d > 0 ? std::min(1.0, std::abs(gram(j, k)) / d) : 0.0;
      dist(j, k) = j == k ? 0.0 : 1.0 - corr;
    }
  std::vector<int> size(static_cast<std::size_t>(p), 1);
  std::vector<char> active(static_cast<std::size_t>(p), 1);
  std::vector<int> root(static_cast<std::size_t>(p));
  for (Index j = 0; j < p; ++j) root[static_cast<std::size_t>(j)] = static_cast<int>(j);

  for (;;) {
    double best = std::numeric_limits<double>::infinity();
    Index bi = -1, bj = -1;
    for (Index i = 0; i < p; ++i) {
      if (!active[static_cast<std::size_t>(i)]) continue;
      for (Index j = i + 1; j < p; ++j) {
        if (!active[static_cast<std::size_t>(j)]) continue;
        if (dist(i, j) < best) {
          best = dist(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    if (bi < 0 || best > h + 1e-12) break;
    const double si = size[static_cast<std::size_t>(bi)];
    const double sj = size[static_cast<std::size_t>(bj)];
    for (Index k = 0; k < p; ++k) {
      if (!active[static_cast<std::size_t>(k)] || k == bi || k == bj) continue;
      const double d = (si * dist(bi, k) + sj * dist(bj, k)) / (si + sj);
      dist(bi, k) = dist(k, bi) = d;
    }
    size[static_cast<std::size_t>(bi)] += size[static_cast<std::size_t>(bj)];
    active[static_cast<std::size_t>(bj)] = 0;
    for (auto& r : root)
      if (r == bj) r = static_cast<int>(bi);
  }

  ClusterAssignment out;
  out.cutoff_h = h;
  out.labels.assign(static_cast<std::size_t>(p), -1);
  std::vector<int> relabel(static_cast<std::size_t>(p), -1);
  int next = 0;
  for (Index j = 0; j < p; ++j) {
    int& id = relabel[static_cast<std::size_t>(root[static_cast<std::size_t>(j)])];
    if (id < 0) id = next++;
    out.labels[static_cast<std::size_t>(j)] = id;
  }
  return out;
}

Vector cluster_proportions(const std::vector<SelectionRecord>& records,
                           const ClusterAssignment& clusters) {
  const int c = clusters.count();
  Vector prop = Vector::Zero(c);
  if (records.empty()) return prop;
  std::vector<char> hit(static_cast<std::size_t>(c));
  for (const auto& r : records) {
    std::fill(hit.begin(), hit.end(), 0);
    for (int j : r.selected) {
      if (j >= static_cast<int>(clusters.labels.size())) {
        throw UsageError("selection record references feature beyond the clustering");
      }
      hit[static_cast<std::size_t>(clusters.labels[static_cast<std::size_t>(j)])] = 1;
    }
    for (int k = 0; k < c; ++k)
      if (hit[static_cast<std::size_t>(k)]) prop(k) += 1.0;
  }
  prop /= static_cast<double>(records.size());
  return prop;
}

FeatureSet cluster_stability_selection_sps(const std::vector<SelectionRecord>& records,
                                           const ClusterAssignment& clusters, double alpha) {
  if (records.empty()) throw UsageError("cluster stability selection needs selection records");
  const Index p = static_cast<Index>(clusters.labels.size());
  const Vector individual = selection_proportions(records, p);
  const Vector cluster = cluster_proportions(records, clusters);
  std::vector<int> out;
  const auto groups = clusters.members();
  for (std::size_t k = 0; k < groups.size(); ++k) {
    if (cluster(static_cast<Index>(k)) < alpha) continue;
    int best = -1;
    for (int j : groups[k])
      if (best < 0 || individual(j) > individual(best)) best = j;
    out.push_back(best);
  }
  return FeatureSet::of(std::move(out));
}

}  // namespace substab
