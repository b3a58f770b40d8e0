#include "substab/fsss.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include "substab/metrics.hpp"

namespace substab {

std::string_view to_string(SearchMode mode) {
  switch (mode) {
    case SearchMode::random_walk:
      return "random_walk";
    case SearchMode::greedy:
      return "greedy";
  }
  return "unknown";
}

SearchMode parse_search_mode(std::string_view text) {
  if (text == "random_walk" || text == "random-walk" || text == "random") return SearchMode::random_walk;
  if (text == "greedy") return SearchMode::greedy;
  throw UsageError("unknown search mode '" + std::string(text) + "' (expected random_walk or greedy)");
}

bool SearchState::has_superset_in_max_stable(const FeatureSet& s) const {
  return std::any_of(max_stable_.begin(), max_stable_.end(),
                     [&](const StableModel& m) { return s.is_subset_of(m.features); });
}

void SearchState::add_max_stable(const FeatureSet& s, double pi) {
  if (max_index_.insert(s).second) max_stable_.push_back({s, pi});
}

namespace {

// Below this relative residual norm the cancellation in C − Y·Z costs too
// many digits, so Q_allᵀ v_j is formed directly.
constexpr double kDirectCrossRatio = 1e-3;

double min_eigenvalue(const Matrix& m, double scale) {
  if (m.rows() == 0) return 1.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(m * scale, Eigen::EigenvaluesOnly);
  return std::clamp(es.eigenvalues()(0), 0.0, 1.0);
}

}  // namespace

SubspaceSearch::SubspaceSearch(const DesignMatrix& X, const AvgProjection& P, double rank_tolerance,
                               std::optional<double> corr_guard)
    : x_(&X), p_(&P), tol_(rank_tolerance), corr_guard_(corr_guard) {
  if (P.ambient_dim() != X.n()) throw UsageError("average projection and design disagree on n");
  if (!(rank_tolerance > 0)) throw UsageError("rank tolerance must be positive");
  if (corr_guard_ && !(*corr_guard_ >= 0 && *corr_guard_ <= 1)) {
    throw UsageError("correlation guard must lie in [0, 1]");
  }
  cross_ = P.stacked().transpose() * X.values();
  if (corr_guard_) {
    const Matrix gram = X.values().transpose() * X.values();
    const Vector& norms = X.column_norms();
    corr2_.resize(X.p(), X.p());
    for (Index j = 0; j < X.p(); ++j)
      for (Index k = 0; k < X.p(); ++k) {
        const double d = norms(j) * norms(k);
        corr2_(j, k) = d > 0 ? (gram(j, k) * gram(j, k)) / (d * d) : 0.0;
      }
  }
  reset();
}

void SubspaceSearch::reset() {
  current_ = {};
  qs_.resize(x_->n(), 0);
  ys_.resize(cross_.rows(), 0);
  ygram_.resize(0, 0);
  fresh_ = false;
}

const Vector& SubspaceSearch::refresh_alignments(FsssDiagnostics* diag) {
  const Matrix& x = x_->values();
  const Index p = x_->p();
  const Index r = qs_.cols();
  const double inv_b = 1.0 / static_cast<double>(p_->B());

  if (r == 0) {
    resid_dirs_ = x;
    resid_cross_ = cross_;
  } else {
    const Matrix z = qs_.transpose() * x;
    resid_dirs_ = x;
    resid_dirs_.noalias() -= qs_ * z;
    resid_cross_ = cross_;
    resid_cross_.noalias() -= ys_ * z;
  }

  alignment_.setConstant(p, -1.0);
  for (Index j = 0; j < p; ++j) {
    if (current_.contains(static_cast<int>(j))) continue;
    const double xnorm = x_->column_norms()(j);
    const double rnorm = resid_dirs_.col(j).norm();
    if (!(xnorm > 0) || rnorm <= tol_ * xnorm) {
      if (diag) ++diag->residual_exclusions;
      continue;
    }
    if (corr_guard_) {
      bool rejected = false;
      for (int k : current_) {
        if (corr2_(j, k) > *corr_guard_) {
          rejected = true;
          break;
        }
      }
      if (rejected) {
        if (diag) ++diag->corr_guard_rejections;
        continue;
      }
    }
    if (rnorm < kDirectCrossRatio * xnorm) {
      resid_cross_.col(j).noalias() = p_->stacked().transpose() * resid_dirs_.col(j);
    }
    resid_dirs_.col(j) /= rnorm;
    resid_cross_.col(j) /= rnorm;
    alignment_(j) = std::clamp(resid_cross_.col(j).squaredNorm() * inv_b, 0.0, 1.0);
  }
  fresh_ = true;
  return alignment_;
}

double SubspaceSearch::extension_pi(int j) const {
  if (!fresh_) throw std::logic_error("extension_pi requires refreshed alignments");
  if (j < 0 || j >= x_->p()) throw UsageError("feature index out of range");
  if (alignment_(j) < 0) return 0.0;
  const Index r = ys_.cols();
  const auto u = resid_cross_.col(j);
  Matrix m(r + 1, r + 1);
  m.topLeftCorner(r, r) = ygram_;
  const Vector off = ys_.transpose() * u;
  m.topRightCorner(r, 1) = off;
  m.bottomLeftCorner(1, r) = off.transpose();
  m(r, r) = u.squaredNorm();
  return min_eigenvalue(m, 1.0 / static_cast<double>(p_->B()));
}

double SubspaceSearch::current_pi() const {
  return min_eigenvalue(ygram_, 1.0 / static_cast<double>(p_->B()));
}

void SubspaceSearch::extend(int j) {
  if (!fresh_) throw std::logic_error("extend requires refreshed alignments");
  if (j < 0 || j >= x_->p() || alignment_(j) < 0) {
    throw UsageError("feature " + std::to_string(j) + " does not extend the current set");
  }
  Vector q = resid_dirs_.col(j);
  if (qs_.cols() > 0) q.noalias() -= qs_ * (qs_.transpose() * q);
  q.normalize();
  const Vector y_new = p_->stacked().transpose() * q;
  const Index r = qs_.cols();
  qs_.conservativeResize(Eigen::NoChange, r + 1);
  qs_.col(r) = q;
  const Vector off = ys_.transpose() * y_new;
  ys_.conservativeResize(Eigen::NoChange, r + 1);
  ys_.col(r) = y_new;
  ygram_.conservativeResize(r + 1, r + 1);
  ygram_.topRightCorner(r, 1) = off;
  ygram_.bottomLeftCorner(1, r) = off.transpose();
  ygram_(r, r) = y_new.squaredNorm();
  current_ = current_.with(j);
  fresh_ = false;
}

std::vector<Candidate> candidate_set(SubspaceSearch& search, double alpha, const SearchState& state,
                                     FsssDiagnostics* diag) {
  const Vector& align = search.refresh_alignments(diag);
  if (diag) ++diag->candidate_sets;
  std::vector<Candidate> out;
  for (Index j = 0; j < align.size(); ++j) {
    if (align(j) < 0) continue;
    if (state.explored(search.current().with(static_cast<int>(j)))) {
      if (diag) ++diag->visited_exclusions;
      continue;
    }
    if (align(j) < alpha) {
      if (diag) ++diag->prescreen_rejections;
      continue;
    }
    out.push_back({static_cast<int>(j), align(j)});
  }
  return out;
}

int sample_next(const std::vector<Candidate>& candidates, Rng& rng) {
  if (candidates.empty()) throw UsageError("cannot sample from an empty candidate set");
  std::vector<double> weights;
  weights.reserve(candidates.size());
  for (const auto& c : candidates) weights.push_back(c.weight);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  return candidates[pick(rng)].feature;
}

namespace {

std::size_t greedy_pick(const std::vector<Candidate>& candidates) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    const auto& b = candidates[best];
    if (c.weight > b.weight || (c.weight == b.weight && c.feature < b.feature)) best = i;
  }
  return best;
}

}  // namespace

FsssResult fsss(const DesignMatrix& X, const AvgProjection& P, const FsssOptions& options) {
  if (!(options.alpha > 0.5 && options.alpha < 1.0)) {
    throw UsageError("alpha must lie in (1/2, 1), got " + std::to_string(options.alpha));
  }
  if (options.K < 1) throw UsageError("K must be at least 1");
  if (options.evaluation_budget < 1) throw UsageError("evaluation budget must be positive");

  const bool greedy = options.mode == SearchMode::greedy;
  const int K = greedy ? 1 : options.K;
  const int max_restarts = options.max_restarts > 0 ? options.max_restarts : std::max(50 * K, 1000);

  FsssResult result;
  result.alpha = options.alpha;
  result.mode = options.mode;
  FsssDiagnostics& diag = result.diagnostics;

  SubspaceSearch search(X, P, options.rank_tolerance, options.corr_guard);
  SearchState state;
  std::unordered_map<FeatureSet, double, FeatureSetHash> pi_cache;
  Rng rng = make_rng(options.seed, "walk");

  auto charge = [&] {
    if (diag.candidate_sets + diag.pi_evaluations > options.evaluation_budget) {
      throw std::runtime_error("FSSS evaluation budget of " + std::to_string(options.evaluation_budget) +
                               " exhausted after " + std::to_string(diag.restarts) + " restarts, " +
                               std::to_string(state.max_stable().size()) + " models and " +
                               std::to_string(state.visited_count()) + " visited sets");
    }
  };

  for (;;) {
    search.reset();
    double current_pi = 1.0;
    for (;;) {
      std::vector<Candidate> f = candidate_set(search, options.alpha, state, &diag);
      charge();
      bool moved = false;
      while (!f.empty()) {
        std::size_t pos = 0;
        if (greedy) {
          pos = greedy_pick(f);
        } else {
          const int drawn = sample_next(f, rng);
          while (f[pos].feature != drawn) ++pos;
        }
        const int j = f[pos].feature;
        const FeatureSet next = search.current().with(j);
        double pi_next = 1.0;
        bool stable = false;
        if (state.has_superset_in_max_stable(next)) {
          ++diag.superset_shortcuts;
          stable = true;
          pi_next = std::numeric_limits<double>::quiet_NaN();
        } else if (auto it = pi_cache.find(next); it != pi_cache.end()) {
          ++diag.pi_cache_hits;
          pi_next = it->second;
          stable = pi_next >= options.alpha;
        } else {
          ++diag.pi_evaluations;
          charge();
          pi_next = search.extension_pi(j);
          pi_cache.emplace(next, pi_next);
          stable = pi_next >= options.alpha;
        }
        if (stable) {
          search.extend(j);
          current_pi = pi_next;
          moved = true;
          break;
        }
        ++diag.unstable_extensions;
        state.add_visited(next);
        f.erase(f.begin() + static_cast<std::ptrdiff_t>(pos));
      }
      if (moved) continue;

      const FeatureSet& s = search.current();
      if (s.empty()) {
        result.exhausted = true;
        break;
      }
      if (!state.has_superset_in_max_stable(s)) {
        if (std::isnan(current_pi)) current_pi = search.current_pi();
        state.add_max_stable(s, current_pi);
      } else {
        state.add_visited(s);
      }
      break;
    }
    if (result.exhausted || static_cast<int>(state.max_stable().size()) >= K) break;
    if (diag.restarts >= max_restarts) break;
    ++diag.restarts;
  }

  result.models = state.max_stable();
  return result;
}

std::vector<FeatureSet> enumerate_all_maximal(const DesignMatrix& X, const AvgProjection& P,
                                              double alpha, double rank_tolerance) {
  if (X.p() > 20) throw UsageError("exhaustive enumeration is limited to p <= 20");
  if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError("alpha must lie in (0, 1)");
  const int p = static_cast<int>(X.p());
  MetricContext ctx;
  ctx.rank_tolerance = rank_tolerance;

  // Stable sets are closed under taking subsets, so growing each set only by
  // indices above its largest member visits every stable set exactly once.
  std::unordered_set<FeatureSet, FeatureSetHash> stable;
  std::function<void(const FeatureSet&)> dfs = [&](const FeatureSet& s) {
    stable.insert(s);
    for (int j = s.bound(); j < p; ++j) {
      const FeatureSet t = s.with(j);
      if (stability_pi(X, t, P, ctx) >= alpha) dfs(t);
    }
  };
  dfs(FeatureSet{});

  std::vector<FeatureSet> maximal;
  for (const auto& s : stable) {
    if (s.empty()) continue;
    bool extendable = false;
    for (int j = 0; j < p && !extendable; ++j)
      if (!s.contains(j) && stable.contains(s.with(j))) extendable = true;
    if (!extendable) maximal.push_back(s);
  }
  std::sort(maximal.begin(), maximal.end());
  return maximal;
}

void to_json(nlohmann::json& j, const FsssDiagnostics& d) {
  j = nlohmann::json{{"restarts", d.restarts},
                     {"pi_evaluations", d.pi_evaluations},
                     {"pi_cache_hits", d.pi_cache_hits},
                     {"candidate_sets", d.candidate_sets},
                     {"prescreen_rejections", d.prescreen_rejections},
                     {"unstable_extensions", d.unstable_extensions},
                     {"superset_shortcuts", d.superset_shortcuts},
                     {"residual_exclusions", d.residual_exclusions},
                     {"corr_guard_rejections", d.corr_guard_rejections},
                     {"visited_exclusions", d.visited_exclusions}};
}

void to_json(nlohmann::json& j, const FsssResult& r) {
  nlohmann::json models = nlohmann::json::array();
  for (const auto& m : r.models) models.push_back({{"features", m.features.indices()}, {"pi", m.pi}});
  j = nlohmann::json{{"alpha", r.alpha},
                     {"mode", std::string(to_string(r.mode))},
                     {"exhausted", r.exhausted},
                     {"models", std::move(models)},
                     {"diagnostics", r.diagnostics}};
}

}  // namespace substab
