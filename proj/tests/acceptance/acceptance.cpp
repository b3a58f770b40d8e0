#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "substab/base_procedures.hpp"
#include "substab/baselines.hpp"
#include "substab/eval.hpp"
#include "substab/fsss.hpp"
#include "substab/metrics.hpp"
#include "substab/random.hpp"
#include "substab/subsampling.hpp"
#include "substab/synthetic.hpp"
#include "support/testing.hpp"

namespace substab {
namespace {

using testing::rng_for;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

std::vector<double> random_probs(Index p, Rng& rng, double lo = 0.0, double hi = 1.0) {
  std::vector<double> probs(static_cast<std::size_t>(p));
  for (auto& q : probs) q = testing::uniform_real(rng, lo, hi);
  return probs;
}

Outcome orthogonal_reduction() {
  double worst_pi = 0, worst_tau = 0;
  int greedy_mismatch = 0;
  for (int inst = 0; inst < 100; ++inst) {
    Rng rng = rng_for(1000 + inst);
    const Index p = testing::uniform_int(rng, 2, 12);
    const Index n = p + testing::uniform_int(rng, 2, 20);
    DesignMatrix X = DesignMatrix::centered(testing::orthonormal_columns(n, p, rng, true, testing::uniform_real(rng, 0.5, 3)));
    auto records = testing::random_records(random_probs(p, rng), 2 * testing::uniform_int(rng, 5, 50), rng);
    AvgProjection P = projection_from_records(X, records);
    const Vector props = selection_proportions(records, p);
    for (int draw = 0; draw < 5; ++draw) {
      FeatureSet s = testing::random_nonempty_subset(p, rng);
      double min_prop = 1;
      for (int j : s) min_prop = std::min(min_prop, props(j));
      worst_pi = std::max(worst_pi, std::abs(stability_pi(X, s, P) - min_prop));
      FeatureSet t = testing::random_subset(p, rng);
      worst_tau = std::max(worst_tau, std::abs(similarity_tau(X, s, t) - static_cast<double>(s.intersected(t).size())));
    }
    const double alpha = testing::uniform_real(rng, 0.51, 0.99);
    FsssOptions o;
    o.alpha = alpha;
    o.mode = SearchMode::greedy;
    FsssResult r = fsss(X, P, o);
    const FeatureSet ss = stability_selection(records, p, alpha);
    const FeatureSet got = r.models.empty() ? FeatureSet{} : r.models.front().features;
    if (got != ss || r.models.size() > 1) ++greedy_mismatch;
  }
  return {worst_pi <= 1e-12 && worst_tau <= 1e-10 && greedy_mismatch == 0,
          fmt("max |pi - min proportion| = %.2e, max |tau - |S1 n S2|| = %.2e, greedy mismatches %d/100", worst_pi,
              worst_tau, greedy_mismatch)};
}

Outcome eigen_oracle() {
  double worst = 0, worst_below = 0;
  for (int inst = 0; inst < 50; ++inst) {
    Rng rng = rng_for(2000 + inst);
    const Index p = testing::uniform_int(rng, 1, 8);
    const Index n = testing::uniform_int(rng, p + 2, 25);
    DesignMatrix X = DesignMatrix::centered(gaussian_matrix(n, p, rng));
    auto records = testing::random_records(random_probs(p, rng, 0.2, 1.0), 20, rng);
    AvgProjection P = projection_from_records(X, records);
    const SubspaceBasis qs = orthonormal_basis(X, testing::random_nonempty_subset(p, rng, 0.7));
    const double sigma = smallest_singular_projected(qs, P);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(projected_average(qs, P));
    double best = avg_alignment(qs.q * eig.eigenvectors().col(0), P);
    for (int k = 0; k < 10000; ++k) {
      const double a = avg_alignment(qs.q * gaussian_vector(qs.rank(), rng), P);
      worst_below = std::max(worst_below, sigma - a);
      best = std::min(best, a);
    }
    worst = std::max(worst, std::abs(best - sigma));
  }
  return {worst <= 1e-8 && worst_below <= 1e-8,
          fmt("max |min alignment - smallest eigenvalue| = %.2e, max undershoot = %.2e", worst, worst_below)};
}

Outcome monotonicity_and_bounds() {
  double mono = 0, order = 0, counts = 0, gap = 0;
  for (int inst = 0; inst < 200; ++inst) {
    Rng rng = rng_for(3000 + inst);
    const Index p = testing::uniform_int(rng, 2, 10);
    const Index n = testing::uniform_int(rng, p + 2, 30);
    Matrix x = testing::centered_gaussian(n, p, rng);
    x.col(1) = x.col(0) + testing::uniform_real(rng, 0.05, 0.5) * testing::centered_gaussian(n, 1, rng);
    DesignMatrix X = DesignMatrix::centered(x);
    AvgProjection P = projection_from_records(X, testing::random_records(random_probs(p, rng), 20, rng));
    const FeatureSet s = testing::random_nonempty_subset(p, rng, 0.6);
    std::vector<int> keep;
    for (int j : s)
      if (testing::uniform_int(rng, 0, 1) == 1) keep.push_back(j);
    const FeatureSet sub = FeatureSet::of(keep);
    mono = std::max(mono, stability_pi(X, s, P) - stability_pi(X, sub, P));
    const FeatureSet t = testing::random_nonempty_subset(p, rng);
    order = std::max(order, similarity_tau_tilde(X, s, t) - similarity_tau_bar(X, s, t));
    const PositiveCounts pc = true_false_positives(X, s, testing::random_subset(p, rng));
    counts = std::max(counts, std::abs(pc.tp + pc.fp - static_cast<double>(s.size())));
    std::vector<int> pool(static_cast<std::size_t>(p));
    std::iota(pool.begin(), pool.end(), 0);
    std::shuffle(pool.begin(), pool.end(), rng);
    const FeatureSet u = FeatureSet::of(std::vector<int>(pool.begin(), pool.begin() + static_cast<long>(s.size())));
    gap = std::max(gap, std::abs(worst_case_prediction_gap(X, s, u) - (1 - similarity_tau_tilde(X, s, u))));
  }
  return {mono <= 1e-8 && order <= 1e-8 && counts <= 1e-8 && gap <= 1e-8,
          fmt("pi(S) - pi(subset) <= %.2e, tau~ - tau_bar <= %.2e, |TP+FP-|S|| <= %.2e, |gap - (1 - tau~)| <= %.2e",
              mono, order, counts, gap)};
}

Outcome exhaustive_equivalence() {
  int mismatches = 0, total_models = 0;
  for (int inst = 0; inst < 50; ++inst) {
    Rng rng = rng_for(4000 + inst);
    const Index p = testing::uniform_int(rng, 3, 10);
    const Index n = testing::uniform_int(rng, p + 5, 30);
    Matrix x = testing::centered_gaussian(n, p, rng);
    for (int pair = 0; pair + 1 < p / 2; pair += 2)
      x.col(pair + 1) = x.col(pair) + testing::uniform_real(rng, 0.05, 0.3) * testing::centered_gaussian(n, 1, rng);
    DesignMatrix X = DesignMatrix::centered(x);
    AvgProjection P = projection_from_records(X, testing::random_records(random_probs(p, rng, 0.3, 1.0), 20, rng));
    const double alpha = testing::uniform_real(rng, 0.55, 0.9);
    FsssOptions o;
    o.alpha = alpha;
    o.K = 50;
    o.max_restarts = 100000;
    o.seed = static_cast<std::uint64_t>(inst);
    FsssResult r = fsss(X, P, o);
    std::vector<FeatureSet> got;
    for (const auto& m : r.models) got.push_back(m.features);
    std::sort(got.begin(), got.end());
    const auto expected = enumerate_all_maximal(X, P, alpha);
    total_models += static_cast<int>(expected.size());
    if (got != expected) ++mismatches;
  }
  return {mismatches == 0, fmt("%d/50 instances differ from exhaustive enumeration (%d maximal models in total)",
                               mismatches, total_models)};
}

Outcome figure1_reproduction() {
  const std::uint64_t seed = 7;
  Dataset d = gen_figure1_data(seed);
  Dataset test = gen_figure1_data(substream_seed(seed, "test"), 1000);
  DesignMatrix X = DesignMatrix::centered(d.x);
  const Vector y = d.y.array() - d.y.mean();
  BaseProcedureConfig cfg;
  cfg.s0 = 12;
  const SubsamplingResult sub = run_subsampling(X, y, make_plan(X.n(), 100, substream_seed(seed, "plan")), cfg, {});
  const double alpha = 0.8;
  const FeatureSet ss = stability_selection(sub.records, X.p(), alpha);
  const FeatureSet css = cluster_stability_selection_sps(sub.records, hierarchical_clusters(X, 0.2), alpha);
  FsssOptions o;
  o.alpha = alpha;
  o.mode = SearchMode::greedy;
  const FsssResult r = fsss(X, sub.projection, o);
  const FeatureSet model = r.models.empty() ? FeatureSet{} : r.models.front().features;
  auto mse = [&](const FeatureSet& s) { return holdout_mse(d.x, d.y, s, test.x, test.y); };
  const double m_fsss = mse(model), m_css = mse(css), m_ss = mse(ss);
  const bool pass = ss.empty() && model.size() >= 10 && m_fsss < m_css && m_css < m_ss && m_fsss < 2.0 && m_ss > 10;
  return {pass, fmt("SS size %zu mse %.2f, CSS size %zu mse %.2f, FSSS size %zu mse %.2f", ss.size(), m_ss,
                    css.size(), m_css, model.size(), m_fsss)};
}

// One feature per signal cluster, |parents| features from each block and
// nothing else.
bool block_structure(const FeatureSet& s, const GroundTruth& t) {
  std::size_t used = 0;
  for (const auto& c : t.clusters) {
    const std::size_t hit = s.intersected(c.members).size();
    if (c.signal && hit != 1) return false;
    used += hit;
  }
  for (const auto& b : t.blocks) {
    const std::size_t hit = s.intersected(b.members()).size();
    if (hit != b.parents.size()) return false;
    used += hit;
  }
  return used == s.size();
}

Outcome block_structure_experiment() {
  int good = 0, total = 0;
  std::ostringstream per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Dataset d = generate(block_experiment_spec(), 600, kBlockExperimentSigma, seed);
    DesignMatrix X = DesignMatrix::centered(d.x);
    const Vector y = d.y.array() - d.y.mean();
    BaseProcedureConfig cfg;
    cfg.s0 = 35;
    const SubsamplingResult sub = run_subsampling(X, y, make_plan(X.n(), 100, substream_seed(seed, "plan")), cfg, {});
    FsssOptions o;
    o.alpha = 0.7;
    o.K = 20;
    o.seed = seed;
    const FsssResult r = fsss(X, sub.projection, o);
    int g = 0;
    for (const auto& m : r.models) g += block_structure(m.features, d.truth);
    good += g;
    total += static_cast<int>(r.models.size());
    per_seed << (seed > 1 ? " " : "") << g << '/' << r.models.size();
  }
  const double share = total > 0 ? static_cast<double>(good) / total : 0.0;
  return {total > 0 && share >= 0.9,
          fmt("%d/%d returned models have the block structure (%.0f%%, per seed %s)", good, total, 100 * share,
              per_seed.str().c_str())};
}

Outcome cluster_consistency() {
  ClusterSpec spec;
  spec.eta1 = 0.05;
  for (int k = 0; k < 4; ++k) spec.clusters.push_back({2, 1.0});
  for (int k = 0; k < 4; ++k) spec.clusters.push_back({2, 0.0});
  int in_class = 0, premise = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Dataset d = gen_cluster_data(spec, 200, 1.0, seed, std::vector<double>(20, 0.0));
    DesignMatrix X = DesignMatrix::centered(d.x);
    const Vector y = d.y.array() - d.y.mean();
    BaseProcedureConfig cfg;
    cfg.s0 = 2 * static_cast<int>(d.truth.s_star.size());
    const SubsamplingResult sub = run_subsampling(X, y, make_plan(X.n(), 100, substream_seed(seed, "plan")), cfg, {});
    bool hits_all = true;
    for (const auto& rec : sub.records)
      for (const auto& c : d.truth.clusters)
        if (c.signal && rec.selected.intersected(c.members).empty()) hits_all = false;
    premise += hits_all;
    FsssOptions o;
    o.alpha = 0.75;
    o.K = 10;
    o.seed = seed;
    const FsssResult r = fsss(X, sub.projection, o);
    bool all = !r.models.empty();
    for (const auto& m : r.models) all = all && membership_in_S(m.features, d.truth);
    in_class += all;
  }
  return {in_class >= 18 && premise >= 18,
          fmt("%d/20 runs with every model in the equivalence class; base-procedure premise held in %d/20", in_class,
              premise)};
}

Outcome table1_directions() {
  ExperimentConfig c;
  c.methods = {Method::l0, Method::ss, Method::fsss_greedy};
  c.repetitions = 20;
  c.seed = 7;
  const ExperimentResult r = run_experiment(c);
  const MetricRow* row[3] = {};
  for (const auto& b : r.best) {
    if (b.method == Method::l0) row[0] = &b;
    if (b.method == Method::ss) row[1] = &b;
    if (b.method == Method::fsss_greedy) row[2] = &b;
  }
  const MetricRow &l0 = *row[0], &ss = *row[1], &fs = *row[2];
  const bool pass = *fs.os >= *ss.os && fs.fp <= l0.fp && fs.tp > ss.tp;
  return {pass, fmt("OS fsss %.3f vs ss %.3f; FP fsss %.2f vs l0 %.2f; TP fsss %.2f vs ss %.2f (best s0: l0 %d, "
                    "ss %d, fsss %d)",
                    *fs.os, *ss.os, fs.fp, l0.fp, fs.tp, ss.tp, l0.s0, ss.s0, fs.s0)};
}

Outcome lasso_soft_threshold() {
  int mismatches = 0, path_mismatches = 0;
  for (int draw = 0; draw < 100; ++draw) {
    Rng rng = rng_for(9000 + draw);
    const Index p = testing::uniform_int(rng, 2, 12);
    const Index n = p + testing::uniform_int(rng, 3, 30);
    const Matrix x = testing::orthonormal_columns(n, p, rng);
    Vector beta = Vector::Zero(p);
    for (Index j = 0; j < p; ++j)
      if (testing::uniform_int(rng, 0, 2) == 0) beta(j) = testing::uniform_real(rng, -3, 3);
    Vector y = x * beta + testing::uniform_real(rng, 0.05, 1.0) * gaussian_vector(n, rng);
    y.array() -= y.mean();
    const Vector z = x.transpose() * y;
    const double nd = static_cast<double>(n);
    double lambda = testing::uniform_real(rng, 0.02, 1.0) * z.cwiseAbs().maxCoeff() / nd;
    // Keep λ away from a kink of the soft-threshold map.
    for (Index j = 0; j < p; ++j)
      if (std::abs(std::abs(z(j)) - nd * lambda) < 1e-6) lambda *= 1.01;
    std::vector<int> expected;
    for (Index j = 0; j < p; ++j)
      if (std::abs(z(j)) > nd * lambda) expected.push_back(static_cast<int>(j));
    const LassoSolution sol = lasso_coordinate_descent(x, y, lambda, nullptr, 1e-12);
    if (sol.active != FeatureSet::of(expected)) ++mismatches;

    const int s0 = testing::uniform_int(rng, 1, static_cast<int>(p));
    std::vector<int> order(static_cast<std::size_t>(p));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return std::abs(z(a)) > std::abs(z(b)); });
    const LassoFit fit = fit_lasso(x, y, s0);
    if (fit.reached_target && fit.selected != FeatureSet::of(std::vector<int>(order.begin(), order.begin() + s0)))
      ++path_mismatches;
  }
  return {mismatches == 0 && path_mismatches == 0,
          fmt("coordinate descent active set differs from soft-thresholding in %d/100 draws; path selection differs "
              "from the top-s0 coordinates in %d/100",
              mismatches, path_mismatches)};
}

Outcome l0_best_subset() {
  int exact = 0, above_forward = 0;
  for (int inst = 0; inst < 100; ++inst) {
    Rng rng = rng_for(10000 + inst);
    const Index p = testing::uniform_int(rng, 3, 8);
    const Index n = testing::uniform_int(rng, 2 * p, 40);
    Matrix x = testing::centered_gaussian(n, p, rng);
    const Vector common = testing::centered_gaussian(n, 1, rng);
    for (Index j = 0; j < p; ++j) x.col(j) += testing::uniform_real(rng, 0, 1.5) * common;
    Vector beta = Vector::Zero(p);
    for (Index j = 0; j < p; ++j)
      if (testing::uniform_int(rng, 0, 1) == 1) beta(j) = testing::uniform_real(rng, -2, 2);
    Vector y = x * beta + gaussian_vector(n, rng);
    y.array() -= y.mean();
    const int s0 = testing::uniform_int(rng, 1, static_cast<int>(p) - 1);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : testing::all_subsets(static_cast<int>(p)))
      if (static_cast<int>(s.size()) == s0) best = std::min(best, least_squares_rss(x, y, s));
    const L0Fit swapped = fit_l0(x, y, s0, 2);
    const L0Fit forward = fit_l0(x, y, s0, 0);
    if (swapped.rss <= best + 1e-9) ++exact;
    if (swapped.rss > forward.rss + 1e-9) ++above_forward;
  }
  return {exact >= 80 && above_forward == 0,
          fmt("best-subset RSS attained in %d/100 instances; above forward-only RSS in %d", exact, above_forward)};
}

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all{
      {"orthogonal reduction", orthogonal_reduction},
      {"eigenvalue oracle", eigen_oracle},
      {"monotonicity and bounds", monotonicity_and_bounds},
      {"exhaustive-oracle equivalence", exhaustive_equivalence},
      {"figure-1 reproduction", figure1_reproduction},
      {"multiple stable models structure", block_structure_experiment},
      {"cluster consistency", cluster_consistency},
      {"comparison table directions", table1_directions},
      {"lasso correctness", lasso_soft_threshold},
      {"l0 correctness", l0_best_subset},
  };
  return all;
}

}  // namespace
}  // namespace substab

int main(int argc, char** argv) {
  using namespace substab;
  const auto& all = criteria();
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  if (selected.empty())
    for (int i = 1; i <= static_cast<int>(all.size()); ++i) selected.push_back(i);
  int failures = 0;
  for (int id : selected) {
    if (id < 1 || id > static_cast<int>(all.size())) {
      std::fprintf(stderr, "unknown criterion %d\n", id);
      return 2;
    }
    const auto& c = all[static_cast<std::size_t>(id - 1)];
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %2d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
