#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "substab/feature_set.hpp"
#include "substab/linalg.hpp"
#include "substab/random.hpp"

namespace substab {

enum class SearchMode { random_walk, greedy };

std::string_view to_string(SearchMode mode);
SearchMode parse_search_mode(std::string_view text);

struct FsssOptions {
  double alpha = 0.8;
  int K = 1;
  std::uint64_t seed = 0;
  SearchMode mode = SearchMode::random_walk;
  /// Rejects extensions that would pair two features with squared
  /// correlation above this value.
  std::optional<double> corr_guard;
  /// Restart cap for the random walk; 0 selects max(50·K, 1000).
  int max_restarts = 0;
  /// Hard cap on candidate-set constructions plus π evaluations.
  std::int64_t evaluation_budget = 20'000'000;
  double rank_tolerance = kDefaultRankTolerance;
};

struct Candidate {
  int feature = -1;
  /// trace(P_{v_j} P_avg) for the residual v_j of X_j on col(X_S).
  double weight = 0;
};

struct StableModel {
  FeatureSet features;
  double pi = 0;
};

struct FsssDiagnostics {
  int restarts = 0;
  std::int64_t pi_evaluations = 0;
  std::int64_t pi_cache_hits = 0;
  std::int64_t candidate_sets = 0;
  std::int64_t prescreen_rejections = 0;
  std::int64_t unstable_extensions = 0;
  std::int64_t superset_shortcuts = 0;
  std::int64_t residual_exclusions = 0;
  std::int64_t corr_guard_rejections = 0;
  std::int64_t visited_exclusions = 0;
};

struct FsssResult {
  double alpha = 0;
  SearchMode mode = SearchMode::random_walk;
  std::vector<StableModel> models;
  /// True when the root's candidate set emptied, i.e. every maximal
  /// α-stable model was found.
  bool exhausted = false;
  FsssDiagnostics diagnostics;
};

/// MAX_STABLE and VISITED bookkeeping for one search.
class SearchState {
 public:
  bool in_max_stable(const FeatureSet& s) const { return max_index_.contains(s); }
  bool in_visited(const FeatureSet& s) const { return visited_.contains(s); }
  bool explored(const FeatureSet& s) const { return in_max_stable(s) || in_visited(s); }
  bool has_superset_in_max_stable(const FeatureSet& s) const;

  void add_max_stable(const FeatureSet& s, double pi);
  void add_visited(const FeatureSet& s) { visited_.insert(s); }

  const std::vector<StableModel>& max_stable() const noexcept { return max_stable_; }
  std::size_t visited_count() const noexcept { return visited_.size(); }

 private:
  std::vector<StableModel> max_stable_;
  std::unordered_set<FeatureSet, FeatureSetHash> max_index_;
  std::unordered_set<FeatureSet, FeatureSetHash> visited_;
};

/// Incremental view of the model space at a current set S.
///
/// Holds Q_all = [Q_1 … Q_B] and C = Q_allᵀ X once, then keeps an orthonormal
/// basis of col(X_S) together with Q_allᵀ Q_S while S grows one feature at a
/// time, so one-step alignments and π(S ∪ {j}) come from small matrices.
class SubspaceSearch {
 public:
  SubspaceSearch(const DesignMatrix& X, const AvgProjection& P,
                 double rank_tolerance = kDefaultRankTolerance,
                 std::optional<double> corr_guard = std::nullopt);

  void reset();
  void extend(int j);
  const FeatureSet& current() const noexcept { return current_; }
  Index p() const noexcept { return x_->p(); }

  /// Refreshes per-feature residual directions for the current S. Returns
  /// trace(P_{v_j} P_avg) for every j, or a negative value when j ∈ S, its
  /// residual vanishes, or the correlation guard rejects it.
  const Vector& refresh_alignments(FsssDiagnostics* diag = nullptr);

  /// π(S ∪ {j}); requires refresh_alignments() at the current S.
  double extension_pi(int j) const;

  /// π(S) for the current S.
  double current_pi() const;

 private:
  const DesignMatrix* x_;
  const AvgProjection* p_;
  double tol_;
  std::optional<double> corr_guard_;
  Matrix cross_;  // C = Q_allᵀ X
  Matrix corr2_;  // squared correlations, only with a guard
  FeatureSet current_;
  Matrix qs_;  // n × |S|
  Matrix ys_;  // D × |S|, Q_allᵀ Q_S
  Matrix ygram_;
  Matrix resid_dirs_;   // n × p, unit residual directions
  Matrix resid_cross_;  // D × p, Q_allᵀ of the unit residual directions
  Vector alignment_;
  bool fresh_ = false;
};

/// 𝓕 at the current S: features whose extension is unexplored and whose
/// residual alignment clears alpha, weighted by that alignment.
std::vector<Candidate> candidate_set(SubspaceSearch& search, double alpha, const SearchState& state,
                                     FsssDiagnostics* diag = nullptr);

/// Draws a feature with probability weight / Σ weights.
int sample_next(const std::vector<Candidate>& candidates, Rng& rng);

/// Enumerates maximal α-stable models by randomized (or greedy) one-feature
/// expansion from the empty set, with MAX_STABLE/VISITED pruning, the
/// residual pre-screen, and the super-set shortcut.
FsssResult fsss(const DesignMatrix& X, const AvgProjection& P, const FsssOptions& options);

/// Exhaustive depth-first enumeration of all maximal α-stable sets, p ≤ 20.
/// The empty set is never reported.
std::vector<FeatureSet> enumerate_all_maximal(const DesignMatrix& X, const AvgProjection& P,
                                              double alpha,
                                              double rank_tolerance = kDefaultRankTolerance);

void to_json(nlohmann::json& j, const FsssDiagnostics& d);
void to_json(nlohmann::json& j, const FsssResult& r);

}  // namespace substab
