#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "substab/base_procedures.hpp"
#include "substab/feature_set.hpp"
#include "substab/linalg.hpp"
#include "substab/synthetic.hpp"

namespace substab {

enum class Method { l0, lasso, ss, css, fsss_greedy, fsss };

std::string_view to_string(Method m);
Method parse_method(std::string_view text);

struct ExperimentConfig {
  std::vector<Method> methods{Method::l0, Method::ss, Method::css, Method::fsss_greedy};
  std::vector<int> s0_grid{10, 15, 20};
  std::vector<double> alpha_grid{0.8, 0.85, 0.9, 0.95};
  std::vector<double> h_grid{0.1, 0.3, 0.5};
  BaseKind base = BaseKind::l0;
  int B = 200;
  Index n_fit = 200;
  Index n_model = 200;
  Index n_val = 200;
  Index n_test = 500;
  int repetitions = 20;
  /// Extra training trials used for output stability; 0 disables OS.
  int os_trials = 10;
  /// Model count for the random-walk FSSS method.
  int fsss_K = 5;
  std::uint64_t seed = 0;
  int workers = 0;
  DataSpec data = block_experiment_spec();
  double noise_sigma = kBlockExperimentSigma;

  void validate() const;
};

/// One dataset split into the three training folds and a test set.
struct FoldedData {
  Matrix x_fit, x_model, x_val, x_test;
  Vector y_fit, y_model, y_val, y_test;
  GroundTruth truth;
};

FoldedData draw_folds(const ExperimentConfig& config, std::uint64_t seed);

struct MethodParams {
  Method method = Method::fsss_greedy;
  int s0 = 1;
  BaseKind base = BaseKind::l0;
  int B = 200;
  std::vector<double> alpha_grid{0.8};
  std::vector<double> h_grid{0.3};
  int fsss_K = 5;
  std::uint64_t seed = 0;
  int workers = 0;
};

struct ScoredSelection {
  FeatureSet selected;
  std::optional<double> alpha;
  std::optional<double> h;
  double validation_mse = 0;
  double test_mse = 0;
  double tp = 0;
  double fp = 0;
};

/// Selection on the fitting fold, OLS with intercept on the model fold,
/// α (and h) chosen by validation MSE, then test MSE and TP/FP measured on
/// the test data.
ScoredSelection fit_and_score(const FoldedData& data, const MethodParams& params);

/// OLS with intercept on (x, y) restricted to S, evaluated on (x_eval, y_eval).
/// Empty S gives the mean predictor.
double holdout_mse(const Matrix& x, const Vector& y, const FeatureSet& s, const Matrix& x_eval,
                   const Vector& y_eval);

struct MetricRow {
  Method method = Method::l0;
  int s0 = 0;
  double mse = 0, tp = 0, fp = 0, model_size = 0;
  double mse_sd = 0, tp_sd = 0, fp_sd = 0, model_size_sd = 0;
  std::optional<double> os;
  int repetitions = 0;
};

struct RepetitionRow {
  Method method = Method::l0;
  int s0 = 0;
  int repetition = 0;
  ScoredSelection score;
};

struct ExperimentResult {
  std::vector<RepetitionRow> rows;
  std::vector<MetricRow> summary;
  /// Per method, the summary row at the s0 minimizing mean test MSE.
  std::vector<MetricRow> best;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

/// Aggregates per-repetition rows (mean and sample standard deviation).
MetricRow aggregate(Method method, int s0, const std::vector<ScoredSelection>& reps);

struct PathRow {
  int s0 = 0;
  int feature = 0;
  std::string name;
  std::optional<FeatureLabel> label;
  double ss = 0;
  double css = 0;
  double subspace = 0;
};

/// Per s0: selection proportion, cluster proportion (cutoff h) and π({j})
/// for every feature.
std::vector<PathRow> stability_paths(const DesignMatrix& X, const Vector& y, const std::vector<int>& s0_grid,
                                     int B, std::uint64_t seed, BaseKind base = BaseKind::l0, double h = 0.2,
                                     const GroundTruth* truth = nullptr, int workers = 0);

struct TileEntry {
  int row = 0;
  int col = 0;
  bool jointly_stable = false;
  /// τ̄, or τ^y when a response is supplied.
  double upper = 0;
  double lower = 0;  // τ̃
};

/// Pairwise similarity table over subsets (row ≤ col). Pairs whose union is
/// α-stable are flagged and carry no values.
std::vector<TileEntry> tile_similarity(const DesignMatrix& X, const Vector* y,
                                       const std::vector<FeatureSet>& subsets, const AvgProjection& P,
                                       double alpha);

std::string repetition_csv(const std::vector<RepetitionRow>& rows);
std::string paths_csv(const std::vector<PathRow>& rows);
std::string tiles_csv(const std::vector<TileEntry>& rows, const std::vector<FeatureSet>& subsets,
                      const std::vector<std::string>& names);

void to_json(nlohmann::json& j, const MetricRow& row);
void to_json(nlohmann::json& j, const ExperimentConfig& config);
nlohmann::json summary_json(const ExperimentResult& result);

}  // namespace substab
