#include <gtest/gtest.h>

#include <set>

#include <nlohmann/json.hpp>

#include "substab/metrics.hpp"
#include "substab/subsampling.hpp"
#include "support/testing.hpp"

namespace substab {
namespace {

using testing::rng_for;

TEST(MakePlan, EvenSizePartitionsRows) {
  SubsamplePlan plan = make_plan(4, 2, 11);
  ASSERT_EQ(plan.pairs.size(), 1u);
  std::set<int> all(plan.rows(0).begin(), plan.rows(0).end());
  all.insert(plan.rows(1).begin(), plan.rows(1).end());
  EXPECT_EQ(plan.rows(0).size(), 2u);
  EXPECT_EQ(plan.rows(1).size(), 2u);
  EXPECT_EQ(all, (std::set<int>{0, 1, 2, 3}));
}

TEST(MakePlan, OddSizeLeavesOneRowUnused) {
  SubsamplePlan plan = make_plan(5, 2, 12);
  std::set<int> all(plan.rows(0).begin(), plan.rows(0).end());
  all.insert(plan.rows(1).begin(), plan.rows(1).end());
  EXPECT_EQ(plan.rows(0).size(), 2u);
  EXPECT_EQ(all.size(), 4u);
}

TEST(MakePlan, DeterministicAndValidated) {
  SubsamplePlan a = make_plan(31, 10, 5), b = make_plan(31, 10, 5), c = make_plan(31, 10, 6);
  EXPECT_EQ(a.pairs, b.pairs);
  EXPECT_NE(a.pairs, c.pairs);
  EXPECT_THROW(make_plan(10, 3, 1), UsageError);
  EXPECT_THROW(make_plan(10, 0, 1), UsageError);
  EXPECT_THROW(make_plan(3, 2, 1), UsageError);
  EXPECT_THROW(a.rows(10), UsageError);
}

TEST(MakePlan, PairsAreDisjointHalves) {
  for (int seed = 0; seed < 50; ++seed) {
    Rng rng = rng_for(seed);
    const Index n = testing::uniform_int(rng, 4, 40);
    SubsamplePlan plan = make_plan(n, 2 * testing::uniform_int(rng, 1, 8), seed);
    for (const auto& [first, second] : plan.pairs) {
      EXPECT_EQ(first.size(), static_cast<std::size_t>(n / 2));
      EXPECT_EQ(second.size(), static_cast<std::size_t>(n / 2));
      std::set<int> u(first.begin(), first.end());
      for (int r : second) EXPECT_FALSE(u.contains(r));
      for (int r : first) EXPECT_LT(r, n);
    }
  }
}

TEST(RunSubsampling, StrongSingleSignalOnOrthonormalDesign) {
  Rng rng = rng_for(1);
  DesignMatrix X = DesignMatrix::centered(testing::orthonormal_columns(20, 5, rng, true, 5.0));
  Vector y = 4.0 * X.column(2);
  BaseProcedureConfig cfg;
  cfg.s0 = 1;
  SubsamplingResult r = run_subsampling(X, y, make_plan(20, 2, 3), cfg);
  ASSERT_EQ(r.records.size(), 2u);
  for (const auto& rec : r.records) EXPECT_EQ(rec.selected, (FeatureSet{2}));
  EXPECT_NEAR(avg_alignment(X.column(2), r.projection), 1.0, 1e-12);
}

TEST(RunSubsampling, PureNoiseSelectionsAreNearUniform) {
  Rng rng = rng_for(2);
  const Index p = 50;
  DesignMatrix X = DesignMatrix::centered(gaussian_matrix(200, p, rng));
  // Noise with zero full-sample correlation to every feature, so no column is
  // favored before subsampling.
  Vector noise = gaussian_vector(200, rng);
  Vector y = noise - testing::dense_projection(X.values()) * noise;
  BaseProcedureConfig cfg;
  cfg.s0 = 1;
  SubsamplingResult r = run_subsampling(X, y, make_plan(200, 1000, 4), cfg);
  // The two halves of a pair see mirrored correlations, so only one half per
  // pair counts as an independent draw: 500 draws in total.
  Vector counts = Vector::Zero(p);
  for (std::size_t ell = 0; ell < r.records.size(); ell += 2)
    for (int j : r.records[ell].selected) counts(j) += 1.0;
  ASSERT_EQ(counts.sum(), 500.0);
  const double expected = 500.0 / static_cast<double>(p);
  const double chi2 = (counts.array() - expected).square().sum() / expected;
  // Upper 1% point of χ² with 49 degrees of freedom.
  EXPECT_LT(chi2, 74.919);
}

TEST(RunSubsampling, RecordsReproduceHandStabilityExample) {
  Rng rng = rng_for(3);
  DesignMatrix X = DesignMatrix::centered(testing::orthonormal_columns(8, 2, rng));
  auto records = testing::records_from({{0}, {0, 1}});
  AvgProjection p = projection_from_records(X, records);
  EXPECT_NEAR(stability_pi(X, {0}, p), 1.0, 1e-12);
  EXPECT_NEAR(stability_pi(X, {1}, p), 0.5, 1e-12);
  EXPECT_NEAR(stability_pi(X, {0, 1}, p), 0.5, 1e-12);
  Vector prop = selection_proportions(records, 2);
  EXPECT_EQ(prop(0), 1.0);
  EXPECT_EQ(prop(1), 0.5);
}

TEST(RunSubsampling, SizesAlignmentAndDeterminismAcrossWorkers) {
  Rng rng = rng_for(4);
  DesignMatrix X = DesignMatrix::centered(testing::orthonormal_columns(40, 10, rng, true, 6.0));
  Vector y = 3 * X.column(0) + 2 * X.column(4) + 0.5 * gaussian_vector(40, rng);
  BaseProcedureConfig cfg;
  cfg.s0 = 3;
  SubsamplePlan plan = make_plan(40, 20, 9);
  SubsamplingResult one = run_subsampling(X, y, plan, cfg, {.workers = 1});
  SubsamplingResult many = run_subsampling(X, y, plan, cfg, {.workers = 3});
  ASSERT_EQ(one.records.size(), 20u);
  for (std::size_t ell = 0; ell < one.records.size(); ++ell) {
    EXPECT_EQ(one.records[ell].subsample_index, static_cast<int>(ell));
    EXPECT_EQ(one.records[ell].selected, many.records[ell].selected);
    EXPECT_EQ(one.records[ell].rows, plan.rows(static_cast<int>(ell)));
    EXPECT_LE(one.records[ell].selected.size(), 3u);
  }
  EXPECT_EQ(one.projection.stacked(), many.projection.stacked());
  Vector prop = selection_proportions(one.records, 10);
  for (int j = 0; j < 10; ++j)
    if (prop(j) == 1.0) EXPECT_NEAR(avg_alignment(X.column(j), one.projection), 1.0, 1e-12);
}

TEST(RunSubsampling, PartitionedSubspaceRows) {
  Rng rng = rng_for(5);
  DesignMatrix X = DesignMatrix::centered(gaussian_matrix(30, 6, rng));
  Vector y = X.column(1) + 0.1 * gaussian_vector(30, rng);
  BaseProcedureConfig cfg;
  cfg.s0 = 2;
  std::vector<int> rows{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
  SubsamplingResult r = run_subsampling(X, y, make_plan(30, 4, 1), cfg, {.subspace_rows = rows});
  EXPECT_EQ(r.projection.ambient_dim(), 12);
}

TEST(RunSubsampling, RejectsMismatchedInputs) {
  Rng rng = rng_for(6);
  DesignMatrix X = DesignMatrix::centered(gaussian_matrix(20, 4, rng));
  BaseProcedureConfig cfg;
  EXPECT_THROW(run_subsampling(X, Vector::Zero(19), make_plan(20, 2, 1), cfg), UsageError);
  EXPECT_THROW(run_subsampling(X, Vector::Zero(20), make_plan(22, 2, 1), cfg), UsageError);
  cfg.s0 = 11;
  EXPECT_THROW(run_subsampling(X, Vector::Zero(20), make_plan(20, 2, 1), cfg), UsageError);
}

TEST(SelectionRecord, JsonRoundTrip) {
  SelectionRecord r{3, {1, 4, 9}, {0, 7}};
  nlohmann::json j = r;
  EXPECT_EQ(j["selected"], nlohmann::json::array({0, 7}));
  SelectionRecord back = j.get<SelectionRecord>();
  EXPECT_EQ(back.subsample_index, 3);
  EXPECT_EQ(back.rows, r.rows);
  EXPECT_EQ(back.selected, r.selected);
}

TEST(ResolveWorkers, ExplicitRequestWins) {
  EXPECT_EQ(resolve_workers(3), 3);
  EXPECT_GE(resolve_workers(0), 1);
}

}  // namespace
}  // namespace substab
