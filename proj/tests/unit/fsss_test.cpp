#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include <nlohmann/json.hpp>

#include "substab/fsss.hpp"
#include "substab/metrics.hpp"
#include "substab/subsampling.hpp"
#include "support/testing.hpp"

namespace substab {
namespace {

using testing::rng_for;

std::vector<FeatureSet> model_sets(const FsssResult& r) {
  std::vector<FeatureSet> out;
  for (const auto& m : r.models) out.push_back(m.features);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<SelectionRecord> proportional_records(const std::vector<int>& counts, int B) {
  std::vector<FeatureSet> sets;
  for (int ell = 0; ell < B; ++ell) {
    std::vector<int> s;
    for (int j = 0; j < static_cast<int>(counts.size()); ++j)
      if (ell < counts[j]) s.push_back(j);
    sets.push_back(FeatureSet::of(s));
  }
  return testing::records_from(sets);
}

// p = 4: X0 and X1 have correlation ≈ 0.99 and split the votes evenly, X2 is
// always selected, X3 never.
struct InterchangeablePair {
  DesignMatrix X;
  AvgProjection P;
};

InterchangeablePair interchangeable_pair() {
  Rng rng = rng_for(77);
  Matrix x = testing::orthonormal_columns(30, 4, rng);
  x.col(1) = x.col(0) + 0.1 * x.col(3);
  x.col(3) = testing::orthonormal_columns(30, 5, rng).col(4);
  DesignMatrix X = DesignMatrix::centered(x);
  std::vector<FeatureSet> sets;
  for (int ell = 0; ell < 20; ++ell) sets.push_back(ell % 2 == 0 ? FeatureSet{0, 2} : FeatureSet{1, 2});
  AvgProjection P = projection_from_records(X, testing::records_from(sets));
  return {std::move(X), std::move(P)};
}

TEST(SearchMode, RoundTripsNames) {
  EXPECT_EQ(parse_search_mode("greedy"), SearchMode::greedy);
  EXPECT_EQ(to_string(SearchMode::random_walk), "random_walk");
  EXPECT_THROW(parse_search_mode("dfs"), UsageError);
}

TEST(CandidateSet, OrthonormalDesignUsesProportions) {
  Rng rng = rng_for(1);
  DesignMatrix X = DesignMatrix::centered(testing::orthonormal_columns(20, 4, rng));
  auto records = proportional_records({10, 9, 6, 8}, 10);
  AvgProjection P = projection_from_records(X, records);
  SubspaceSearch search(X, P);
  SearchState state;
  std::vector<Candidate> f = candidate_set(search, 0.75, state);
  ASSERT_EQ(f.size(), 3u);
  EXPECT_EQ(f[0].feature, 0);
  EXPECT_NEAR(f[0].weight, 1.0, 1e-12);
  EXPECT_EQ(f[1].feature, 1);
  EXPECT_NEAR(f[1].weight, 0.9, 1e-12);
  EXPECT_EQ(f[2].feature, 3);
  EXPECT_NEAR(f[2].weight, 0.8, 1e-12);
  search.extend(0);
  state.add_visited({0, 1});
  FsssDiagnostics diag;
  f = candidate_set(search, 0.75, state, &diag);
  ASSERT_EQ(f.size(), 1u);
  EXPECT_EQ(f[0].feature, 3);
  EXPECT_EQ(diag.visited_exclusions, 1);
  EXPECT_EQ(diag.prescreen_rejections, 1);
}

TEST(CandidateSet, ColumnInsideCurrentSpanIsExcluded) {
  Rng rng = rng_for(2);
  Matrix x = testing::orthonormal_columns(20, 3, rng);
  x.col(2) = 2 * x.col(0) - x.col(1);
  DesignMatrix X = DesignMatrix::centered(x);
  AvgProjection P = projection_from_records(X, proportional_records({10, 10, 10}, 10));
  SubspaceSearch search(X, P);
  SearchState state;
  search.refresh_alignments();
  search.extend(0);
  search.refresh_alignments();
  search.extend(1);
  FsssDiagnostics diag;
  EXPECT_TRUE(candidate_set(search, 0.6, state, &diag).empty());
  EXPECT_EQ(diag.residual_exclusions, 1);
}

TEST(CandidateSet, CorrelatedDecoyResidualIsScreenedOut) {
  Rng rng = rng_for(3);
  Matrix x = testing::orthonormal_columns(25, 3, rng);
  x.col(1) = x.col(0) + 0.14 * x.col(2);
  DesignMatrix X = DesignMatrix::centered(x);
  const double corr = X.column(0).dot(X.column(1)) / (X.column_norms()(0) * X.column_norms()(1));
  ASSERT_GT(corr, 0.99);
  std::vector<FeatureSet> sets(10, FeatureSet{0});
  for (int ell = 0; ell < 3; ++ell) sets[ell] = FeatureSet{0, 1};
  auto records = testing::records_from(sets);
  AvgProjection P = projection_from_records(X, records);
  Matrix avg = testing::dense_average(X, records);
  Vector resid = X.column(1) - testing::dense_projection(X, {0}) * X.column(1);
  const double oracle = resid.dot(avg * resid) / resid.squaredNorm();
  EXPECT_NEAR(oracle, 0.3, 1e-10);
  SubspaceSearch search(X, P);
  SearchState state;
  search.refresh_alignments();
  search.extend(0);
  EXPECT_NEAR(search.refresh_alignments()(1), oracle, 1e-10);
  EXPECT_TRUE(candidate_set(search, 0.7, state).empty());
}

TEST(SubspaceSearch, ExtensionPiMatchesDirectStability) {
  for (int seed = 0; seed < 30; ++seed) {
    Rng rng = rng_for(100 + seed);
    const Index p = 6;
    DesignMatrix X = DesignMatrix::centered(gaussian_matrix(15, p, rng));
    std::vector<double> probs(p);
    for (auto& q : probs) q = testing::uniform_real(rng, 0.2, 1.0);
    AvgProjection P = projection_from_records(X, testing::random_records(probs, 10, rng));
    SubspaceSearch search(X, P);
    for (int step = 0; step < 3; ++step) {
      const Vector& align = search.refresh_alignments();
      for (int j = 0; j < p; ++j) {
        if (search.current().contains(j)) continue;
        EXPECT_NEAR(search.extension_pi(j), stability_pi(X, search.current().with(j), P), 1e-9);
        Vector resid = X.column(j) - testing::dense_projection(X, search.current()) * X.column(j);
        EXPECT_NEAR(align(j), avg_alignment(resid, P), 1e-9);
      }
      int next = 0;
      while (search.current().contains(next)) ++next;
      search.extend(next);
      EXPECT_NEAR(search.current_pi(), stability_pi(X, search.current(), P), 1e-9);
    }
  }
}

TEST(SampleNext, NormalizesWeights) {
  Rng rng = rng_for(4);
  EXPECT_THROW(sample_next({}, rng), UsageError);
  EXPECT_EQ(sample_next({{5, 0.3}}, rng), 5);
  std::map<int, int> hits;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) ++hits[sample_next({{1, 0.9}, {2, 0.6}}, rng)];
  EXPECT_NEAR(hits[1] / static_cast<double>(draws), 0.6, 0.01);
  hits.clear();
  for (int i = 0; i < draws; ++i) ++hits[sample_next({{3, 0.8}, {4, 0.8}}, rng)];
  EXPECT_NEAR(hits[3] / static_cast<double>(draws), 0.5, 0.01);
}

TEST(Fsss, OrthonormalDesignReducesToStabilitySelection) {
  Rng rng = rng_for(5);
  DesignMatrix X = DesignMatrix::centered(testing::orthonormal_columns(20, 5, rng));
  AvgProjection P = projection_from_records(X, proportional_records({10, 3, 9, 8, 5}, 10));
  for (SearchMode mode : {SearchMode::greedy, SearchMode::random_walk}) {
    FsssOptions o;
    o.alpha = 0.75;
    o.mode = mode;
    o.K = 3;
    FsssResult r = fsss(X, P, o);
    EXPECT_EQ(model_sets(r), (std::vector<FeatureSet>{{0, 2, 3}}));
    EXPECT_NEAR(r.models[0].pi, 0.8, 1e-12);
    if (mode == SearchMode::random_walk) EXPECT_TRUE(r.exhausted);
  }
}

TEST(Fsss, NothingPassesPrescreen) {
  Rng rng = rng_for(6);
  DesignMatrix X = DesignMatrix::centered(testing::orthonormal_columns(20, 4, rng));
  AvgProjection P = projection_from_records(X, proportional_records({5, 4, 3, 2}, 10));
  FsssOptions o;
  o.K = 5;
  FsssResult r = fsss(X, P, o);
  EXPECT_TRUE(r.models.empty());
  EXPECT_TRUE(r.exhausted);
  EXPECT_EQ(r.diagnostics.pi_evaluations, 0);
  EXPECT_TRUE(enumerate_all_maximal(X, P, 0.8).empty());
}

TEST(Fsss, InterchangeablePairGivesTwoModels) {
  auto [X, P] = interchangeable_pair();
  const std::vector<FeatureSet> expected{{0, 2}, {1, 2}};
  EXPECT_EQ(enumerate_all_maximal(X, P, 0.7), expected);
  FsssOptions o;
  o.alpha = 0.7;
  o.K = 10;
  o.seed = 3;
  FsssResult r = fsss(X, P, o);
  EXPECT_EQ(model_sets(r), expected);
  EXPECT_TRUE(r.exhausted);
  for (const auto& m : r.models) {
    EXPECT_TRUE(is_maximal_alpha_stable(X, m.features, P, 0.7));
    EXPECT_NEAR(m.pi, stability_pi(X, m.features, P), 1e-10);
  }
}

TEST(Fsss, CorrelationGuardKeepsCorrelatedPairsApart) {
  Rng rng = rng_for(7);
  Matrix x = testing::orthonormal_columns(20, 3, rng);
  x.col(1) = x.col(0) + 0.2 * x.col(2);
  DesignMatrix X = DesignMatrix::centered(x);
  AvgProjection P = projection_from_records(X, proportional_records({10, 10, 0}, 10));
  FsssOptions o;
  o.alpha = 0.8;
  o.K = 10;
  const std::vector<FeatureSet> pairs{{0, 1}, {0, 2}, {1, 2}};
  EXPECT_EQ(model_sets(fsss(X, P, o)), pairs);
  EXPECT_EQ(enumerate_all_maximal(X, P, 0.8), pairs);
  o.corr_guard = 0.5;
  FsssResult guarded = fsss(X, P, o);
  EXPECT_EQ(model_sets(guarded), (std::vector<FeatureSet>{{0, 2}, {1, 2}}));
  EXPECT_GT(guarded.diagnostics.corr_guard_rejections, 0);
}

TEST(Fsss, ValidatesOptionsAndEnforcesBudget) {
  auto [X, P] = interchangeable_pair();
  FsssOptions o;
  o.alpha = 0.4;
  EXPECT_THROW(fsss(X, P, o), UsageError);
  o.alpha = 1.0;
  EXPECT_THROW(fsss(X, P, o), UsageError);
  o.alpha = 0.7;
  o.K = 0;
  EXPECT_THROW(fsss(X, P, o), UsageError);
  o.K = 10;
  o.evaluation_budget = 3;
  EXPECT_THROW(fsss(X, P, o), std::runtime_error);
}

TEST(Fsss, GreedyIsDeterministicAndSingleModel) {
  Rng rng = rng_for(8);
  DesignMatrix X = DesignMatrix::centered(gaussian_matrix(40, 8, rng));
  Vector y = X.column(0) + X.column(3) + 0.5 * gaussian_vector(40, rng);
  BaseProcedureConfig cfg;
  cfg.s0 = 3;
  SubsamplingResult one = run_subsampling(X, y, make_plan(40, 20, 1), cfg, {.workers = 1});
  SubsamplingResult two = run_subsampling(X, y, make_plan(40, 20, 1), cfg, {.workers = 2});
  FsssOptions o;
  o.alpha = 0.6;
  o.mode = SearchMode::greedy;
  o.K = 7;
  FsssResult a = fsss(X, one.projection, o), b = fsss(X, two.projection, o);
  o.seed = 99;
  FsssResult c = fsss(X, one.projection, o);
  ASSERT_EQ(a.models.size(), 1u);
  EXPECT_EQ(model_sets(a), model_sets(b));
  EXPECT_EQ(model_sets(a), model_sets(c));
  EXPECT_EQ(a.models[0].pi, b.models[0].pi);
}

TEST(Fsss, ResultSerializesModelsAndDiagnostics) {
  auto [X, P] = interchangeable_pair();
  FsssOptions o;
  o.alpha = 0.7;
  o.K = 10;
  nlohmann::json j = fsss(X, P, o);
  EXPECT_EQ(j["mode"], "random_walk");
  EXPECT_EQ(j["models"].size(), 2u);
  EXPECT_TRUE(j["models"][0].contains("features"));
  EXPECT_TRUE(j["models"][0].contains("pi"));
  EXPECT_TRUE(j["diagnostics"].contains("restarts"));
  EXPECT_TRUE(j["diagnostics"].contains("pi_evaluations"));
  EXPECT_TRUE(j["diagnostics"].contains("prescreen_rejections"));
  EXPECT_TRUE(j["exhausted"].get<bool>());
}

TEST(EnumerateAllMaximal, OrthonormalThresholdSetAndSizeGuard) {
  Rng rng = rng_for(9);
  DesignMatrix X = DesignMatrix::centered(testing::orthonormal_columns(20, 4, rng));
  AvgProjection P = projection_from_records(X, proportional_records({10, 2, 9, 8}, 10));
  EXPECT_EQ(enumerate_all_maximal(X, P, 0.75), (std::vector<FeatureSet>{{0, 2, 3}}));
  DesignMatrix wide = DesignMatrix::centered(gaussian_matrix(30, 21, rng));
  AvgProjection Pw = projection_from_records(wide, testing::records_from({{0}, {1}}));
  EXPECT_THROW(enumerate_all_maximal(wide, Pw, 0.8), UsageError);
}

class RandomSearchInstance : public ::testing::TestWithParam<int> {};

TEST_P(RandomSearchInstance, RandomWalkMatchesExhaustiveEnumeration) {
  Rng rng = rng_for(500 + GetParam());
  const Index p = testing::uniform_int(rng, 3, 8);
  Matrix x = testing::centered_gaussian(20, p, rng);
  if (p > 4) x.col(1) = x.col(0) + 0.2 * testing::centered_gaussian(20, 1, rng);
  DesignMatrix X = DesignMatrix::centered(x);
  std::vector<double> probs(p);
  for (auto& q : probs) q = testing::uniform_real(rng, 0.3, 1.0);
  AvgProjection P = projection_from_records(X, testing::random_records(probs, 20, rng));
  const double alpha = testing::uniform_real(rng, 0.55, 0.9);
  FsssOptions o;
  o.alpha = alpha;
  o.K = 50;
  o.seed = static_cast<std::uint64_t>(GetParam());
  FsssResult r = fsss(X, P, o);
  const auto expected = enumerate_all_maximal(X, P, alpha);
  EXPECT_EQ(model_sets(r), expected);
  for (const auto& m : r.models) EXPECT_TRUE(is_maximal_alpha_stable(X, m.features, P, alpha));
  for (const auto& a : r.models)
    for (const auto& b : r.models)
      if (a.features != b.features) EXPECT_FALSE(a.features.is_subset_of(b.features));
  EXPECT_LE(r.models.size(), 50u);
}

INSTANTIATE_TEST_SUITE_P(Seeds, RandomSearchInstance, ::testing::Range(0, 40));

}  // namespace
}  // namespace substab
