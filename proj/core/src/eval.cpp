#include "substab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "substab/baselines.hpp"
#include "substab/fsss.hpp"
#include "substab/io.hpp"
#include "substab/metrics.hpp"
#include "substab/random.hpp"
#include "substab/subsampling.hpp"

namespace substab {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::l0:
      return "l0";
    case Method::lasso:
      return "lasso";
    case Method::ss:
      return "ss";
    case Method::css:
      return "css";
    case Method::fsss_greedy:
      return "fsss_greedy";
    case Method::fsss:
      return "fsss";
  }
  return "unknown";
}

Method parse_method(std::string_view text) {
  for (Method m : {Method::l0, Method::lasso, Method::ss, Method::css, Method::fsss_greedy, Method::fsss})
    if (text == to_string(m)) return m;
  throw UsageError("unknown method '" + std::string(text) + "'");
}

namespace {

bool uses_subsampling(Method m) { return m != Method::l0 && m != Method::lasso; }

void check_grid(const std::vector<double>& grid, const char* what, double lo, double hi) {
  if (grid.empty()) throw UsageError(std::string(what) + " grid is empty");
  for (double v : grid)
    if (!(v > lo && v < hi)) throw UsageError(std::string(what) + " grid value out of range");
}

}  // namespace

void ExperimentConfig::validate() const {
  if (methods.empty()) throw UsageError("no methods configured");
  if (s0_grid.empty()) throw UsageError("s0 grid is empty");
  check_grid(alpha_grid, "alpha", 0.5, 1.0);
  if (h_grid.empty()) throw UsageError("h grid is empty");
  for (double h : h_grid)
    if (!(h >= 0)) throw UsageError("cutoff heights must be non-negative");
  if (B < 2 || B % 2 != 0) throw UsageError("B must be an even integer >= 2");
  if (n_fit < 4 || n_model < 2 || n_val < 1 || n_test < 2) throw UsageError("fold sizes are too small");
  if (repetitions < 1) throw UsageError("repetitions must be positive");
  if (os_trials == 1 || os_trials < 0) throw UsageError("output stability needs 0 or at least 2 trials");
  if (fsss_K < 1) throw UsageError("K must be at least 1");
  const Index p = data.p();
  for (int s0 : s0_grid) {
    if (s0 < 1 || s0 > p) throw UsageError("s0 grid value out of range");
    if (s0 > n_fit / 2) throw UsageError("s0 exceeds the half-sample size of the fitting fold");
  }
}

FoldedData draw_folds(const ExperimentConfig& config, std::uint64_t seed) {
  const Index total = config.n_fit + config.n_model + config.n_val;
  Dataset train = generate(config.data, total, config.noise_sigma, seed);
  Dataset test = generate(config.data, config.n_test, config.noise_sigma, substream_seed(seed, "test"));
  FoldedData f;
  f.x_fit = train.x.topRows(config.n_fit);
  f.y_fit = train.y.head(config.n_fit);
  f.x_model = train.x.middleRows(config.n_fit, config.n_model);
  f.y_model = train.y.segment(config.n_fit, config.n_model);
  f.x_val = train.x.bottomRows(config.n_val);
  f.y_val = train.y.tail(config.n_val);
  f.x_test = std::move(test.x);
  f.y_test = std::move(test.y);
  f.truth = std::move(train.truth);
  return f;
}

double holdout_mse(const Matrix& x, const Vector& y, const FeatureSet& s, const Matrix& x_eval,
                   const Vector& y_eval) {
  if (x.rows() != y.size() || x_eval.rows() != y_eval.size()) throw UsageError("holdout shapes disagree");
  const double ybar = y.mean();
  Vector pred = Vector::Constant(y_eval.size(), ybar);
  if (!s.empty()) {
    Matrix xs(x.rows(), static_cast<Index>(s.size()));
    Matrix xe(x_eval.rows(), static_cast<Index>(s.size()));
    Index k = 0;
    for (int j : s) {
      xs.col(k) = x.col(j);
      xe.col(k) = x_eval.col(j);
      ++k;
    }
    const Eigen::RowVectorXd mean = xs.colwise().mean();
    xs.rowwise() -= mean;
    xe.rowwise() -= mean;
    const Vector yc = y.array() - ybar;
    const Vector beta = Eigen::ColPivHouseholderQR<Matrix>(xs).solve(yc);
    pred += xe * beta;
  }
  return (y_eval - pred).squaredNorm() / static_cast<double>(y_eval.size());
}

namespace {

struct CandidateModel {
  FeatureSet selected;
  std::optional<double> alpha;
  std::optional<double> h;
};

BaseProcedureConfig base_config(const MethodParams& params) {
  BaseProcedureConfig cfg;
  cfg.kind = params.method == Method::lasso ? BaseKind::lasso
             : params.method == Method::l0  ? BaseKind::l0
                                            : params.base;
  cfg.s0 = params.s0;
  return cfg;
}

std::vector<CandidateModel> candidates_for(const FoldedData& data, const MethodParams& params,
                                           const SubsamplingResult* shared) {
  const DesignMatrix fit = DesignMatrix::centered(data.x_fit);
  const Vector y_fit = data.y_fit.array() - data.y_fit.mean();
  const BaseProcedureConfig cfg = base_config(params);
  std::vector<CandidateModel> out;

  if (!uses_subsampling(params.method)) {
    if (cfg.s0 > fit.p()) throw UsageError("s0 exceeds p");
    out.push_back({run_base_procedure(fit.values(), y_fit, cfg), std::nullopt, std::nullopt});
    return out;
  }

  std::optional<SubsamplingResult> own;
  if (shared == nullptr) {
    const SubsamplePlan plan = make_plan(fit.n(), params.B, substream_seed(params.seed, "plan"));
    SubsamplingOptions opts;
    opts.workers = params.workers;
    own.emplace(run_subsampling(fit, y_fit, plan, cfg, opts));
    shared = &*own;
  }
  const auto& records = shared->records;

  switch (params.method) {
    case Method::ss:
      for (double a : params.alpha_grid) out.push_back({stability_selection(records, fit.p(), a), a, std::nullopt});
      break;
    case Method::css:
      for (double h : params.h_grid) {
        const ClusterAssignment clusters = hierarchical_clusters(fit, h);
        for (double a : params.alpha_grid)
          out.push_back({cluster_stability_selection_sps(records, clusters, a), a, h});
      }
      break;
    case Method::fsss_greedy:
    case Method::fsss:
      for (double a : params.alpha_grid) {
        FsssOptions opts;
        opts.alpha = a;
        opts.K = params.fsss_K;
        opts.seed = substream_seed(params.seed, "fsss");
        opts.mode = params.method == Method::fsss_greedy ? SearchMode::greedy : SearchMode::random_walk;
        const FsssResult r = fsss(fit, shared->projection, opts);
        if (r.models.empty()) out.push_back({FeatureSet{}, a, std::nullopt});
        for (const auto& m : r.models) out.push_back({m.features, a, std::nullopt});
      }
      break;
    default:
      break;
  }
  return out;
}

ScoredSelection score_candidates(const FoldedData& data, const std::vector<CandidateModel>& candidates) {
  std::map<FeatureSet, double> val_cache;
  const CandidateModel* best = nullptr;
  double best_val = std::numeric_limits<double>::infinity();
  for (const auto& c : candidates) {
    auto it = val_cache.find(c.selected);
    if (it == val_cache.end())
      it = val_cache.emplace(c.selected, holdout_mse(data.x_model, data.y_model, c.selected, data.x_val, data.y_val)).first;
    if (it->second < best_val) {
      best_val = it->second;
      best = &c;
    }
  }
  if (best == nullptr) throw std::logic_error("no candidate models to score");
  ScoredSelection s;
  s.selected = best->selected;
  s.alpha = best->alpha;
  s.h = best->h;
  s.validation_mse = best_val;
  s.test_mse = holdout_mse(data.x_model, data.y_model, s.selected, data.x_test, data.y_test);
  const PositiveCounts counts =
      true_false_positives(DesignMatrix::centered(data.x_test), s.selected, data.truth.s_star);
  s.tp = counts.tp;
  s.fp = counts.fp;
  return s;
}

ScoredSelection fit_and_score_shared(const FoldedData& data, const MethodParams& params,
                                     const SubsamplingResult* shared) {
  return score_candidates(data, candidates_for(data, params, shared));
}

double mean_of(const std::vector<double>& v) {
  double acc = 0;
  for (double x : v) acc += x;
  return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double acc = 0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

}  // namespace

ScoredSelection fit_and_score(const FoldedData& data, const MethodParams& params) {
  return fit_and_score_shared(data, params, nullptr);
}

MetricRow aggregate(Method method, int s0, const std::vector<ScoredSelection>& reps) {
  std::vector<double> mse, tp, fp, size;
  for (const auto& r : reps) {
    mse.push_back(r.test_mse);
    tp.push_back(r.tp);
    fp.push_back(r.fp);
    size.push_back(static_cast<double>(r.selected.size()));
  }
  MetricRow row;
  row.method = method;
  row.s0 = s0;
  row.repetitions = static_cast<int>(reps.size());
  row.mse = mean_of(mse);
  row.tp = mean_of(tp);
  row.fp = mean_of(fp);
  row.model_size = mean_of(size);
  row.mse_sd = sd_of(mse);
  row.tp_sd = sd_of(tp);
  row.fp_sd = sd_of(fp);
  row.model_size_sd = sd_of(size);
  return row;
}

namespace {

MethodParams params_for(const ExperimentConfig& config, Method m, int s0, std::uint64_t seed) {
  MethodParams p;
  p.method = m;
  p.s0 = s0;
  p.base = config.base;
  p.B = config.B;
  p.alpha_grid = config.alpha_grid;
  p.h_grid = config.h_grid;
  p.fsss_K = config.fsss_K;
  p.seed = seed;
  p.workers = config.workers;
  return p;
}

// Runs every configured method at one s0 on one draw, sharing a single
// subsampling pass among the stability-based methods.
std::vector<ScoredSelection> run_methods(const ExperimentConfig& config, const FoldedData& data, int s0,
                                         std::uint64_t seed) {
  std::optional<SubsamplingResult> shared;
  if (std::any_of(config.methods.begin(), config.methods.end(), uses_subsampling)) {
    const DesignMatrix fit = DesignMatrix::centered(data.x_fit);
    const Vector y_fit = data.y_fit.array() - data.y_fit.mean();
    BaseProcedureConfig cfg;
    cfg.kind = config.base;
    cfg.s0 = s0;
    const SubsamplePlan plan = make_plan(fit.n(), config.B, substream_seed(seed, "plan"));
    SubsamplingOptions opts;
    opts.workers = config.workers;
    shared.emplace(run_subsampling(fit, y_fit, plan, cfg, opts));
  }
  std::vector<ScoredSelection> out;
  for (Method m : config.methods)
    out.push_back(fit_and_score_shared(data, params_for(config, m, s0, seed), shared ? &*shared : nullptr));
  return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentResult result;
  const std::size_t nm = config.methods.size();
  const std::size_t ns = config.s0_grid.size();
  std::vector<std::vector<std::vector<ScoredSelection>>> per(nm, std::vector<std::vector<ScoredSelection>>(ns));

  for (int r = 0; r < config.repetitions; ++r) {
    const std::uint64_t rs = substream_seed(config.seed, "rep", static_cast<std::uint64_t>(r));
    const FoldedData data = draw_folds(config, rs);
    for (std::size_t si = 0; si < ns; ++si) {
      const int s0 = config.s0_grid[si];
      const auto scores = run_methods(config, data, s0, substream_seed(rs, "s0", static_cast<std::uint64_t>(s0)));
      for (std::size_t mi = 0; mi < nm; ++mi) {
        result.rows.push_back({config.methods[mi], s0, r, scores[mi]});
        per[mi][si].push_back(scores[mi]);
      }
    }
  }

  std::vector<std::vector<std::optional<double>>> os(nm, std::vector<std::optional<double>>(ns));
  if (config.os_trials >= 2) {
    const DesignMatrix reference =
        DesignMatrix::centered(draw_folds(config, substream_seed(config.seed, "os_reference")).x_test);
    std::vector<std::vector<std::vector<FeatureSet>>> sets(nm, std::vector<std::vector<FeatureSet>>(ns));
    for (int t = 0; t < config.os_trials; ++t) {
      const std::uint64_t ts = substream_seed(config.seed, "os", static_cast<std::uint64_t>(t));
      const FoldedData data = draw_folds(config, ts);
      for (std::size_t si = 0; si < ns; ++si) {
        const int s0 = config.s0_grid[si];
        const auto scores = run_methods(config, data, s0, substream_seed(ts, "s0", static_cast<std::uint64_t>(s0)));
        for (std::size_t mi = 0; mi < nm; ++mi) sets[mi][si].push_back(scores[mi].selected);
      }
    }
    for (std::size_t mi = 0; mi < nm; ++mi)
      for (std::size_t si = 0; si < ns; ++si) os[mi][si] = output_stability(reference, sets[mi][si]);
  }

  for (std::size_t mi = 0; mi < nm; ++mi) {
    const MetricRow* best = nullptr;
    const std::size_t start = result.summary.size();
    for (std::size_t si = 0; si < ns; ++si) {
      MetricRow row = aggregate(config.methods[mi], config.s0_grid[si], per[mi][si]);
      row.os = os[mi][si];
      result.summary.push_back(row);
    }
    for (std::size_t k = start; k < result.summary.size(); ++k)
      if (best == nullptr || result.summary[k].mse < best->mse) best = &result.summary[k];
    result.best.push_back(*best);
  }
  return result;
}

std::vector<PathRow> stability_paths(const DesignMatrix& X, const Vector& y, const std::vector<int>& s0_grid,
                                     int B, std::uint64_t seed, BaseKind base, double h,
                                     const GroundTruth* truth, int workers) {
  if (s0_grid.empty()) throw UsageError("s0 grid is empty");
  if (truth != nullptr && static_cast<Index>(truth->labels.size()) != X.p()) {
    throw UsageError("ground truth does not match the design");
  }
  const ClusterAssignment clusters = hierarchical_clusters(X, h);
  std::vector<PathRow> rows;
  for (int s0 : s0_grid) {
    BaseProcedureConfig cfg;
    cfg.kind = base;
    cfg.s0 = s0;
    const SubsamplePlan plan = make_plan(X.n(), B, substream_seed(seed, "plan", static_cast<std::uint64_t>(s0)));
    SubsamplingOptions opts;
    opts.workers = workers;
    const SubsamplingResult sub = run_subsampling(X, y, plan, cfg, opts);
    const Vector prop = selection_proportions(sub.records, X.p());
    const Vector cprop = cluster_proportions(sub.records, clusters);
    const BasisCache cache(X);
    MetricContext ctx;
    ctx.cache = &cache;
    for (Index j = 0; j < X.p(); ++j) {
      PathRow row;
      row.s0 = s0;
      row.feature = static_cast<int>(j);
      if (truth != nullptr) {
        row.name = truth->names[static_cast<std::size_t>(j)];
        row.label = truth->labels[static_cast<std::size_t>(j)];
      } else {
        row.name = "x" + std::to_string(j);
      }
      row.ss = prop(j);
      row.css = cprop(clusters.labels[static_cast<std::size_t>(j)]);
      row.subspace = stability_pi(X, FeatureSet{static_cast<int>(j)}, sub.projection, ctx);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<TileEntry> tile_similarity(const DesignMatrix& X, const Vector* y,
                                       const std::vector<FeatureSet>& subsets, const AvgProjection& P,
                                       double alpha) {
  if (!(alpha > 0 && alpha < 1)) throw UsageError("alpha must lie in (0, 1)");
  const BasisCache cache(X);
  MetricContext ctx;
  ctx.cache = &cache;
  std::vector<TileEntry> out;
  for (std::size_t i = 0; i < subsets.size(); ++i) {
    for (std::size_t k = i; k < subsets.size(); ++k) {
      TileEntry e;
      e.row = static_cast<int>(i);
      e.col = static_cast<int>(k);
      const FeatureSet joint = subsets[i].united(subsets[k]);
      e.jointly_stable = stability_pi(X, joint, P, ctx) >= alpha;
      if (!e.jointly_stable) {
        e.upper = y != nullptr ? similarity_tau_y(X, *y, subsets[i], subsets[k], ctx)
                               : similarity_tau_bar(X, subsets[i], subsets[k], ctx);
        e.lower = similarity_tau_tilde(X, subsets[i], subsets[k], ctx);
      }
      out.push_back(e);
    }
  }
  return out;
}

namespace {

std::string optional_cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::string join_names(const FeatureSet& s, const std::vector<std::string>& names) {
  std::string out;
  for (int j : s) {
    if (!out.empty()) out += ';';
    out += j < static_cast<int>(names.size()) ? names[static_cast<std::size_t>(j)] : std::to_string(j);
  }
  return out;
}

std::string join_indices(const FeatureSet& s) {
  std::string out;
  for (int j : s) {
    if (!out.empty()) out += ';';
    out += std::to_string(j);
  }
  return out;
}

}  // namespace

std::string repetition_csv(const std::vector<RepetitionRow>& rows) {
  std::ostringstream out;
  out << "method,s0,repetition,alpha,h,model_size,test_mse,validation_mse,tp,fp,selected\n";
  for (const auto& r : rows) {
    out << to_string(r.method) << ',' << r.s0 << ',' << r.repetition << ',' << optional_cell(r.score.alpha) << ','
        << optional_cell(r.score.h) << ',' << r.score.selected.size() << ',' << format_double(r.score.test_mse) << ','
        << format_double(r.score.validation_mse) << ',' << format_double(r.score.tp) << ','
        << format_double(r.score.fp) << ',' << join_indices(r.score.selected) << '\n';
  }
  return out.str();
}

std::string paths_csv(const std::vector<PathRow>& rows) {
  std::ostringstream out;
  out << "s0,feature,name,label,ss,css,subspace\n";
  for (const auto& r : rows) {
    out << r.s0 << ',' << r.feature << ',' << r.name << ',' << (r.label ? to_string(*r.label) : "") << ','
        << format_double(r.ss) << ',' << format_double(r.css) << ',' << format_double(r.subspace) << '\n';
  }
  return out.str();
}

std::string tiles_csv(const std::vector<TileEntry>& rows, const std::vector<FeatureSet>& subsets,
                      const std::vector<std::string>& names) {
  std::ostringstream out;
  out << "row,col,row_set,col_set,jointly_stable,upper,lower\n";
  for (const auto& e : rows) {
    out << e.row << ',' << e.col << ',' << join_names(subsets[static_cast<std::size_t>(e.row)], names) << ','
        << join_names(subsets[static_cast<std::size_t>(e.col)], names) << ',' << (e.jointly_stable ? "true" : "false")
        << ',';
    if (!e.jointly_stable) out << format_double(e.upper) << ',' << format_double(e.lower);
    else out << ',';
    out << '\n';
  }
  return out.str();
}

void to_json(nlohmann::json& j, const MetricRow& r) {
  j = nlohmann::json{{"method", std::string(to_string(r.method))},
                     {"s0", r.s0},
                     {"repetitions", r.repetitions},
                     {"mse", r.mse},
                     {"tp", r.tp},
                     {"fp", r.fp},
                     {"model_size", r.model_size},
                     {"mse_sd", r.mse_sd},
                     {"tp_sd", r.tp_sd},
                     {"fp_sd", r.fp_sd},
                     {"model_size_sd", r.model_size_sd},
                     {"os", r.os ? nlohmann::json(*r.os) : nlohmann::json(nullptr)}};
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  std::vector<std::string> methods;
  for (Method m : c.methods) methods.emplace_back(to_string(m));
  j = nlohmann::json{{"methods", methods},
                     {"s0_grid", c.s0_grid},
                     {"alpha_grid", c.alpha_grid},
                     {"h_grid", c.h_grid},
                     {"base", std::string(to_string(c.base))},
                     {"B", c.B},
                     {"n_fit", c.n_fit},
                     {"n_model", c.n_model},
                     {"n_val", c.n_val},
                     {"n_test", c.n_test},
                     {"repetitions", c.repetitions},
                     {"os_trials", c.os_trials},
                     {"fsss_K", c.fsss_K},
                     {"seed", c.seed},
                     {"p", c.data.p()},
                     {"noise_sigma", c.noise_sigma}};
}

nlohmann::json summary_json(const ExperimentResult& result) {
  return nlohmann::json{{"summary", result.summary}, {"best", result.best}};
}

}  // namespace substab
