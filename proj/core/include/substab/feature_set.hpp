#pragma once

#include <compare>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace substab {

/// Sorted, duplicate-free set of feature (column) indices.
///
/// This is the discrete model object: every selection set, candidate model,
/// and ground-truth support is a FeatureSet. Indices are 0-based.
class FeatureSet {
 public:
  FeatureSet() = default;
  FeatureSet(std::initializer_list<int> indices);

  /// Builds a set from arbitrary indices; sorts and removes duplicates.
  static FeatureSet of(std::vector<int> indices);

  const std::vector<int>& indices() const noexcept { return indices_; }
  std::size_t size() const noexcept { return indices_.size(); }
  bool empty() const noexcept { return indices_.empty(); }
  int operator[](std::size_t i) const { return indices_[i]; }
  auto begin() const noexcept { return indices_.begin(); }
  auto end() const noexcept { return indices_.end(); }

  bool contains(int j) const;
  bool is_subset_of(const FeatureSet& other) const;

  FeatureSet with(int j) const;
  FeatureSet without(int j) const;
  FeatureSet united(const FeatureSet& other) const;
  FeatureSet intersected(const FeatureSet& other) const;

  /// Largest index + 1, or 0 for the empty set.
  int bound() const noexcept { return indices_.empty() ? 0 : indices_.back() + 1; }

  std::string to_string() const;

  friend bool operator==(const FeatureSet&, const FeatureSet&) = default;
  friend auto operator<=>(const FeatureSet&, const FeatureSet&) = default;

 private:
  std::vector<int> indices_;
};

struct FeatureSetHash {
  std::size_t operator()(const FeatureSet& s) const noexcept;
};

}  // namespace substab
