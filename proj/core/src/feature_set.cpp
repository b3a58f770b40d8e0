#include "substab/feature_set.hpp"

#include <algorithm>
#include <iterator>
#include <sstream>

#include "substab/common.hpp"

namespace substab {

FeatureSet::FeatureSet(std::initializer_list<int> indices)
    : FeatureSet(of(std::vector<int>(indices))) {}

FeatureSet FeatureSet::of(std::vector<int> indices) {
  for (int j : indices) {
    if (j < 0) throw UsageError("feature index must be non-negative, got " + std::to_string(j));
  }
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
  FeatureSet s;
  s.indices_ = std::move(indices);
  return s;
}

bool FeatureSet::contains(int j) const {
  return std::binary_search(indices_.begin(), indices_.end(), j);
}

bool FeatureSet::is_subset_of(const FeatureSet& other) const {
  return std::includes(other.indices_.begin(), other.indices_.end(), indices_.begin(),
                       indices_.end());
}

FeatureSet FeatureSet::with(int j) const {
  if (j < 0) throw UsageError("feature index must be non-negative");
  FeatureSet s = *this;
  auto it = std::lower_bound(s.indices_.begin(), s.indices_.end(), j);
  if (it == s.indices_.end() || *it != j) s.indices_.insert(it, j);
  return s;
}

FeatureSet FeatureSet::without(int j) const {
  FeatureSet s = *this;
  auto it = std::lower_bound(s.indices_.begin(), s.indices_.end(), j);
  if (it != s.indices_.end() && *it == j) s.indices_.erase(it);
  return s;
}

FeatureSet FeatureSet::united(const FeatureSet& other) const {
  FeatureSet s;
  std::set_union(indices_.begin(), indices_.end(), other.indices_.begin(), other.indices_.end(),
                 std::back_inserter(s.indices_));
  return s;
}

FeatureSet FeatureSet::intersected(const FeatureSet& other) const {
  FeatureSet s;
  std::set_intersection(indices_.begin(), indices_.end(), other.indices_.begin(),
                        other.indices_.end(), std::back_inserter(s.indices_));
  return s;
}

std::string FeatureSet::to_string() const {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < indices_.size(); ++i) {
    if (i) os << ',';
    os << indices_[i];
  }
  os << '}';
  return os.str();
}

std::size_t FeatureSetHash::operator()(const FeatureSet& s) const noexcept {
  // FNV-1a over the index sequence.
  std::size_t h = 1469598103934665603ULL;
  for (int j : s) {
    h ^= static_cast<std::size_t>(static_cast<unsigned>(j)) + 0x9e3779b97f4a7c15ULL;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace substab
