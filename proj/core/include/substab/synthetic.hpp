#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "substab/feature_set.hpp"
#include "substab/linalg.hpp"

namespace substab {

struct ClusterDef {
  int proxies = 2;
  /// Coefficient of the representative; proxies always get zero.
  double beta = 0;
};

/// Clusters of one representative plus proxies X_j = X_k + δ_j.
struct ClusterSpec {
  std::vector<ClusterDef> clusters;
  double eta1 = 0.5;
  /// Scale representatives to unit norm (perturbations then have norm ≈ eta1).
  bool normalize_reps = false;
};

/// Parent–child block: children are linear combinations of the parents plus
/// N(0, child_eta²) noise.
struct BlockSpec {
  int parents = 2;
  double child_eta = 0.1;
  std::vector<double> parent_betas;
  /// One coefficient row per child; empty means a single child equal to the
  /// sum of the parents.
  std::vector<std::vector<double>> child_coefs;
};

struct WeakSignalSpec {
  int count = 5;
  double beta = 0.2;
};

/// Full column layout: clusters first, then blocks, then individual features.
struct DataSpec {
  ClusterSpec clusters;
  std::vector<BlockSpec> blocks;
  std::vector<double> individual_betas;

  Index p() const;
};

enum class FeatureLabel { signal, correlated_signal, noise };
std::string_view to_string(FeatureLabel label);

struct ClusterGroup {
  int representative = 0;
  FeatureSet members;  // includes the representative
  bool signal = false;
};

struct BlockGroup {
  FeatureSet parents;
  FeatureSet children;
  FeatureSet members() const { return parents.united(children); }
};

struct GroundTruth {
  Vector beta_star;
  FeatureSet s_star;
  std::vector<ClusterGroup> clusters;
  std::vector<BlockGroup> blocks;
  FeatureSet individuals;
  std::vector<FeatureLabel> labels;
  std::vector<std::string> names;
};

struct Dataset {
  Matrix x;  // columns centered
  Vector y;
  GroundTruth truth;
};

/// Draws a dataset for an arbitrary layout. Deterministic in seed.
Dataset generate(const DataSpec& spec, Index n, double noise_sigma, std::uint64_t seed);

Dataset gen_cluster_data(const ClusterSpec& spec, Index n, double noise_sigma, std::uint64_t seed,
                         std::vector<double> individual_betas = {});

Dataset gen_block_data(const std::vector<BlockSpec>& blocks, int individual_count,
                       const WeakSignalSpec& weak, Index n, double noise_sigma, std::uint64_t seed,
                       const ClusterSpec& clusters = {});

/// Three signal clusters of size 3, blocks with 2/3/4 parents, 179
/// individual features of which 5 are weak signals (p = 200).
DataSpec block_experiment_spec();
inline constexpr double kBlockExperimentSigma = 1.5;

/// 8 signal clusters of size 3, two four-feature parent–child blocks and 50
/// noise features (p = 82).
DataSpec figure1_spec();
inline constexpr double kFigure1Sigma = 0.2;
inline constexpr Index kFigure1N = 100;

Dataset gen_figure1_data(std::uint64_t seed, Index n = kFigure1N);

/// Membership in the class of equally good models: one feature per signal
/// cluster and none from noise clusters; for blocks whose parents are all
/// signals, as many block features as parents, otherwise exactly the true
/// block support; exactly the signal individuals.
bool membership_in_S(const FeatureSet& candidate, const GroundTruth& truth);

void to_json(nlohmann::json& j, const GroundTruth& truth);
GroundTruth ground_truth_from_json(const nlohmann::json& j);

}  // namespace substab
