#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "substab/base_procedures.hpp"
#include "substab/linalg.hpp"

namespace substab {

/// B/2 complementary pairs of disjoint half-samples.
struct SubsamplePlan {
  int B = 0;
  std::uint64_t seed = 0;
  Index n = 0;
  std::vector<std::pair<std::vector<int>, std::vector<int>>> pairs;

  /// Rows of subsample ℓ ∈ [0, B): ℓ = 2k and 2k+1 are the two halves of pair k.
  const std::vector<int>& rows(int ell) const;
};

/// Each pair comes from a fresh uniform permutation of [0, n): the first
/// ⌊n/2⌋ rows against the next ⌊n/2⌋ (one row unused when n is odd).
SubsamplePlan make_plan(Index n, int B, std::uint64_t seed);

struct SelectionRecord {
  int subsample_index = 0;
  std::vector<int> rows;
  FeatureSet selected;
};

struct SubsamplingOptions {
  /// 0 means "use SUBSTAB_WORKERS or hardware concurrency".
  int workers = 0;
  double rank_tolerance = kDefaultRankTolerance;
  /// When set, subspace bases are built from these rows of X only (the
  /// partitioned index/subspace estimation variant); stability must then be
  /// evaluated on X.restrict_rows(*subspace_rows).
  std::optional<std::vector<int>> subspace_rows;
};

struct SubsamplingResult {
  std::vector<SelectionRecord> records;
  AvgProjection projection;
};

/// Fits the base procedure on every subsample (rows centered per subsample)
/// and assembles P_avg from the selected sets. Records are ordered by
/// subsample index whatever the worker count.
SubsamplingResult run_subsampling(const DesignMatrix& X, const Vector& y, const SubsamplePlan& plan,
                                  const BaseProcedureConfig& config,
                                  const SubsamplingOptions& options = {});

/// Builds P_avg for given selections (e.g. synthetic or replayed records).
AvgProjection projection_from_records(const DesignMatrix& X,
                                      const std::vector<SelectionRecord>& records,
                                      double rank_tolerance = kDefaultRankTolerance);

/// (1/B) Σ_ℓ 𝟙[j ∈ Ŝ⁽ℓ⁾] for every feature j < p.
Vector selection_proportions(const std::vector<SelectionRecord>& records, Index p);

/// Resolves a requested worker count (0 → SUBSTAB_WORKERS → hardware).
int resolve_workers(int requested);

void to_json(nlohmann::json& j, const SelectionRecord& r);
void from_json(const nlohmann::json& j, SelectionRecord& r);

}  // namespace substab
