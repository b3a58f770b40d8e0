#include "cli.hpp"

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "substab/baselines.hpp"
#include "substab/eval.hpp"
#include "substab/fsss.hpp"
#include "substab/io.hpp"
#include "substab/metrics.hpp"
#include "substab/random.hpp"
#include "substab/subsampling.hpp"
#include "substab/synthetic.hpp"

namespace fs = std::filesystem;

namespace substab::cli {

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j{{"command", c.command},   {"input", c.input},     {"response", c.response},
                   {"alpha", c.alpha},       {"B", c.B},             {"s0", c.s0},
                   {"K", c.K},               {"base", c.base},       {"mode", c.mode},
                   {"max_restarts", c.max_restarts}, {"seed", c.seed}, {"h", c.h},
                   {"s0_grid", c.s0_grid},   {"use_response", c.use_response}, {"recipe", c.recipe},
                   {"n", c.n},               {"methods", c.methods}, {"alpha_grid", c.alpha_grid},
                   {"h_grid", c.h_grid},     {"repetitions", c.repetitions}, {"os_trials", c.os_trials},
                   {"n_fit", c.n_fit},       {"n_model", c.n_model}, {"n_val", c.n_val},
                   {"n_test", c.n_test},     {"scale", c.scale},     {"truth", c.truth}};
  j["corr_guard"] = c.corr_guard ? nlohmann::json(*c.corr_guard) : nlohmann::json(nullptr);
  return j;
}

namespace {

struct Problem {
  LoadedData data;
  Vector y;
};

Problem load_problem(const RunConfig& c) {
  if (c.input.empty()) throw UsageError("--input is required for '" + c.command + "'");
  CsvOptions opts;
  opts.response = c.response;
  LoadedData data = load_csv(c.input, opts);
  Vector y = *data.y;
  return {std::move(data), std::move(y)};
}

void check_b(int B) {
  if (B < 2 || B % 2 != 0) throw UsageError("--B must be an even integer >= 2, got " + std::to_string(B));
}

SubsamplingResult subsample(const RunConfig& c, const Problem& prob) {
  check_b(c.B);
  BaseProcedureConfig cfg;
  cfg.kind = parse_base_kind(c.base);
  cfg.s0 = c.s0;
  cfg.validate(prob.data.x.n(), prob.data.x.p());
  const SubsamplePlan plan = make_plan(prob.data.x.n(), c.B, substream_seed(c.seed, "plan"));
  SubsamplingOptions opts;
  opts.workers = c.workers;
  return run_subsampling(prob.data.x, prob.y, plan, cfg, opts);
}

std::vector<std::string> names_of(const FeatureSet& s, const std::vector<std::string>& names) {
  std::vector<std::string> out;
  for (int j : s) out.push_back(names[static_cast<std::size_t>(j)]);
  return out;
}

void write_manifest(const RunConfig& c) {
  write_json(fs::path(c.out_dir) / "manifest.json", make_manifest(c.command, c.seed, to_json(c)));
}

FsssResult run_search(const RunConfig& c, const Problem& prob, const AvgProjection& P) {
  FsssOptions opts;
  opts.alpha = c.alpha;
  opts.K = c.K;
  opts.seed = c.seed;
  opts.mode = parse_search_mode(c.mode);
  opts.corr_guard = c.corr_guard;
  opts.max_restarts = c.max_restarts;
  return fsss(prob.data.x, P, opts);
}

nlohmann::json models_json(const FsssResult& r, const std::vector<std::string>& names, int K) {
  nlohmann::json models = nlohmann::json::array();
  for (const auto& m : r.models) {
    models.push_back({{"features", m.features.indices()},
                      {"names", names_of(m.features, names)},
                      {"size", m.features.size()},
                      {"pi", m.pi}});
  }
  return nlohmann::json{{"alpha", r.alpha},
                        {"mode", std::string(to_string(r.mode))},
                        {"K", K},
                        {"exhausted", r.exhausted},
                        {"models", std::move(models)},
                        {"diagnostics", r.diagnostics}};
}

std::string models_table(const FsssResult& r, const std::vector<std::string>& names) {
  std::ostringstream out;
  out << "alpha = " << r.alpha << ", " << r.models.size() << " maximal stable model(s)"
      << (r.exhausted ? ", search space exhausted" : "") << '\n';
  out << std::left << std::setw(7) << "model" << std::setw(6) << "size" << std::setw(10) << "pi" << "features\n";
  int k = 1;
  for (const auto& m : r.models) {
    std::ostringstream pi;
    pi << std::fixed << std::setprecision(4) << m.pi;
    out << std::left << std::setw(7) << k++ << std::setw(6) << m.features.size() << std::setw(10) << pi.str();
    bool first = true;
    for (const auto& n : names_of(m.features, names)) {
      out << (first ? "" : ", ") << n;
      first = false;
    }
    out << '\n';
  }
  return out.str();
}

nlohmann::json selection_json(const std::string& method, double alpha, const FeatureSet& selected,
                              const Vector& proportions, const std::vector<std::string>& names) {
  nlohmann::json props = nlohmann::json::array();
  for (Index j = 0; j < proportions.size(); ++j)
    props.push_back({{"feature", j}, {"name", names[static_cast<std::size_t>(j)]}, {"proportion", proportions(j)}});
  return nlohmann::json{{"method", method},
                        {"alpha", alpha},
                        {"selected", selected.indices()},
                        {"names", names_of(selected, names)},
                        {"proportions", std::move(props)}};
}

void cmd_fsss(const RunConfig& c, std::ostream& out) {
  if (!(c.alpha > 0.5 && c.alpha < 1.0)) throw UsageError("--alpha must lie in (0.5, 1) for fsss");
  const Problem prob = load_problem(c);
  const SubsamplingResult sub = subsample(c, prob);
  const FsssResult r = run_search(c, prob, sub.projection);
  const fs::path dir(c.out_dir);
  write_json(dir / "models.json", models_json(r, prob.data.names, c.K));
  write_json(dir / "records.json", sub.records);
  const std::string table = models_table(r, prob.data.names);
  write_text(dir / "models.txt", table);
  write_manifest(c);
  out << table;
}

void cmd_ss(const RunConfig& c, std::ostream& out) {
  if (!(c.alpha > 0.0 && c.alpha <= 1.0)) throw UsageError("--alpha must lie in (0, 1]");
  const Problem prob = load_problem(c);
  const SubsamplingResult sub = subsample(c, prob);
  const FeatureSet sel = stability_selection(sub.records, prob.data.x.p(), c.alpha);
  const Vector prop = selection_proportions(sub.records, prob.data.x.p());
  write_json(fs::path(c.out_dir) / "selection.json", selection_json("ss", c.alpha, sel, prop, prob.data.names));
  write_manifest(c);
  out << "ss selected " << sel.size() << " feature(s):";
  for (const auto& n : names_of(sel, prob.data.names)) out << ' ' << n;
  out << '\n';
}

void cmd_css(const RunConfig& c, std::ostream& out) {
  if (!(c.alpha > 0.0 && c.alpha <= 1.0)) throw UsageError("--alpha must lie in (0, 1]");
  const Problem prob = load_problem(c);
  const SubsamplingResult sub = subsample(c, prob);
  const ClusterAssignment clusters = hierarchical_clusters(prob.data.x, c.h);
  const FeatureSet sel = cluster_stability_selection_sps(sub.records, clusters, c.alpha);
  const Vector prop = selection_proportions(sub.records, prob.data.x.p());
  nlohmann::json j = selection_json("css", c.alpha, sel, prop, prob.data.names);
  j["h"] = c.h;
  j["linkage"] = clusters.linkage;
  j["cluster_labels"] = clusters.labels;
  const Vector cprop = cluster_proportions(sub.records, clusters);
  j["cluster_proportions"] = std::vector<double>(cprop.data(), cprop.data() + cprop.size());
  write_json(fs::path(c.out_dir) / "selection.json", j);
  write_manifest(c);
  out << "css selected " << sel.size() << " feature(s) from " << clusters.count() << " clusters:";
  for (const auto& n : names_of(sel, prob.data.names)) out << ' ' << n;
  out << '\n';
}

void cmd_paths(const RunConfig& c, std::ostream& out) {
  const Problem prob = load_problem(c);
  check_b(c.B);
  std::optional<GroundTruth> truth;
  if (!c.truth.empty()) {
    truth = ground_truth_from_json(read_json(c.truth));
    if (static_cast<Index>(truth->labels.size()) != prob.data.x.p()) {
      throw UsageError("ground truth has " + std::to_string(truth->labels.size()) + " features, data has " +
                       std::to_string(prob.data.x.p()));
    }
    truth->names = prob.data.names;
  }
  const std::vector<int> grid = c.s0_grid.empty() ? std::vector<int>{c.s0} : c.s0_grid;
  auto rows = stability_paths(prob.data.x, prob.y, grid, c.B, c.seed, parse_base_kind(c.base), c.h,
                              truth ? &*truth : nullptr, c.workers);
  if (!truth)
    for (auto& r : rows) r.name = prob.data.names[static_cast<std::size_t>(r.feature)];
  write_text(fs::path(c.out_dir) / "paths.csv", paths_csv(rows));
  write_manifest(c);
  out << "wrote " << rows.size() << " path rows for " << grid.size() << " s0 value(s)\n";
}

void cmd_tiles(const RunConfig& c, std::ostream& out) {
  if (!(c.alpha > 0.5 && c.alpha < 1.0)) throw UsageError("--alpha must lie in (0.5, 1) for tiles");
  const Problem prob = load_problem(c);
  const SubsamplingResult sub = subsample(c, prob);
  const FsssResult r = run_search(c, prob, sub.projection);
  std::vector<FeatureSet> subsets;
  for (const auto& m : r.models) subsets.push_back(m.features);
  const auto tiles = tile_similarity(prob.data.x, c.use_response ? &prob.y : nullptr, subsets, sub.projection, c.alpha);
  const fs::path dir(c.out_dir);
  write_text(dir / "tiles.csv", tiles_csv(tiles, subsets, prob.data.names));
  write_json(dir / "models.json", models_json(r, prob.data.names, c.K));
  write_manifest(c);
  out << "wrote " << tiles.size() << " tile entries for " << subsets.size() << " model(s)\n";
}

DataSpec recipe_spec(const std::string& recipe, double* sigma, Index* default_n) {
  if (recipe == "figure1") {
    *sigma = kFigure1Sigma;
    *default_n = kFigure1N;
    return figure1_spec();
  }
  if (recipe == "block") {
    *sigma = kBlockExperimentSigma;
    *default_n = 600;
    return block_experiment_spec();
  }
  if (recipe == "cluster") {
    DataSpec spec;
    spec.clusters.eta1 = 0.5;
    spec.clusters.clusters = {{2, 1.0}, {2, 1.0}, {2, 1.0}, {2, 0.0}, {2, 0.0}};
    spec.individual_betas.assign(20, 0.0);
    *sigma = 1.0;
    *default_n = 200;
    return spec;
  }
  throw UsageError("unknown recipe '" + recipe + "' (expected figure1, block or cluster)");
}

void cmd_gen(const RunConfig& c, std::ostream& out) {
  double sigma = 0;
  Index default_n = 0;
  const DataSpec spec = recipe_spec(c.recipe, &sigma, &default_n);
  const Index n = c.n > 0 ? static_cast<Index>(c.n) : default_n;
  const Dataset d = generate(spec, n, sigma, c.seed);
  const fs::path dir(c.out_dir);
  write_csv(dir / "data.csv", d.x, d.truth.names, &d.y, c.response);
  write_json(dir / "truth.json", d.truth);
  write_manifest(c);
  out << "wrote " << c.recipe << " dataset with n = " << n << ", p = " << d.x.cols() << " to "
      << (dir / "data.csv").string() << '\n';
}

void cmd_bench(const RunConfig& c, std::ostream& out) {
  ExperimentConfig cfg;
  Index unused = 0;
  cfg.data = recipe_spec(c.recipe, &cfg.noise_sigma, &unused);
  if (!c.methods.empty()) {
    cfg.methods.clear();
    for (const auto& m : c.methods) cfg.methods.push_back(parse_method(m));
  }
  if (!c.s0_grid.empty()) cfg.s0_grid = c.s0_grid;
  if (!c.alpha_grid.empty()) cfg.alpha_grid = c.alpha_grid;
  if (!c.h_grid.empty()) cfg.h_grid = c.h_grid;
  if (!(c.scale > 0 && c.scale <= 1)) throw UsageError("--scale must lie in (0, 1]");
  auto scaled = [&](long v) { return static_cast<Index>(std::max(2.0, std::round(static_cast<double>(v) * c.scale))); };
  cfg.base = parse_base_kind(c.base);
  cfg.B = c.B;
  cfg.n_fit = scaled(c.n_fit);
  cfg.n_model = scaled(c.n_model);
  cfg.n_val = scaled(c.n_val);
  cfg.n_test = scaled(c.n_test);
  cfg.repetitions = c.repetitions;
  cfg.os_trials = c.os_trials;
  cfg.fsss_K = c.K;
  cfg.seed = c.seed;
  cfg.workers = c.workers;
  check_b(cfg.B);
  const ExperimentResult result = run_experiment(cfg);
  const fs::path dir(c.out_dir);
  write_text(dir / "results.csv", repetition_csv(result.rows));
  nlohmann::json summary = summary_json(result);
  summary["config"] = cfg;
  write_json(dir / "summary.json", summary);
  write_manifest(c);
  out << std::left << std::setw(13) << "method" << std::setw(5) << "s0" << std::setw(10) << "mse" << std::setw(8)
      << "tp" << std::setw(8) << "fp" << std::setw(8) << "size" << "os\n";
  for (const auto& row : result.best) {
    out << std::left << std::setw(13) << to_string(row.method) << std::setw(5) << row.s0 << std::fixed
        << std::setprecision(3) << std::setw(10) << row.mse << std::setw(8) << row.tp << std::setw(8) << row.fp
        << std::setw(8) << row.model_size;
    if (row.os) out << *row.os;
    else out << "-";
    out << '\n';
  }
}

}  // namespace

void run(const RunConfig& c, std::ostream& out) {
  fs::create_directories(c.out_dir);
  if (c.command == "fsss") return cmd_fsss(c, out);
  if (c.command == "ss") return cmd_ss(c, out);
  if (c.command == "css") return cmd_css(c, out);
  if (c.command == "paths") return cmd_paths(c, out);
  if (c.command == "tiles") return cmd_tiles(c, out);
  if (c.command == "gen") return cmd_gen(c, out);
  if (c.command == "bench") return cmd_bench(c, out);
  throw UsageError("unknown command '" + c.command + "'");
}

namespace {

void print_error(std::ostream& err, const char* kind, const std::string& message) {
  err << nlohmann::json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
}

}  // namespace

int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Feature-subspace stability selection"};
  app.require_subcommand(1);
  RunConfig c;

  auto data_opts = [&](CLI::App* sub) {
    sub->add_option("--input,-i", c.input, "CSV with a header row")->required();
    sub->add_option("--response", c.response, "name of the response column")->capture_default_str();
  };
  auto common = [&](CLI::App* sub) {
    sub->add_option("--out,-o", c.out_dir, "output directory")->capture_default_str();
    sub->add_option("--seed", c.seed, "master random seed")->capture_default_str();
    sub->add_option("--workers", c.workers, "worker threads (0: SUBSTAB_WORKERS or all cores)");
  };
  auto subsampling_opts = [&](CLI::App* sub) {
    sub->add_option("--B", c.B, "number of subsamples (even)")->capture_default_str();
    sub->add_option("--s0", c.s0, "features selected per subsample")->capture_default_str();
    sub->add_option("--base", c.base, "base procedure: l0 or lasso")->capture_default_str();
  };
  auto search_opts = [&](CLI::App* sub) {
    sub->add_option("--alpha", c.alpha, "stability threshold in (0.5, 1)")->capture_default_str();
    sub->add_option("--K", c.K, "number of maximal stable models to find")->capture_default_str();
    sub->add_option("--mode", c.mode, "random_walk or greedy (greedy forces K = 1)")->capture_default_str();
    sub->add_option("--corr-guard", c.corr_guard, "reject pairs with squared correlation above this");
    sub->add_option("--max-restarts", c.max_restarts, "random-walk restart cap (0: automatic)");
  };

  CLI::App* fsss_cmd = app.add_subcommand("fsss", "enumerate maximal alpha-stable models");
  data_opts(fsss_cmd);
  common(fsss_cmd);
  subsampling_opts(fsss_cmd);
  search_opts(fsss_cmd);

  CLI::App* ss_cmd = app.add_subcommand("ss", "stability selection");
  data_opts(ss_cmd);
  common(ss_cmd);
  subsampling_opts(ss_cmd);
  ss_cmd->add_option("--alpha", c.alpha, "selection proportion threshold")->capture_default_str();

  CLI::App* css_cmd = app.add_subcommand("css", "cluster stability selection (SPS)");
  data_opts(css_cmd);
  common(css_cmd);
  subsampling_opts(css_cmd);
  css_cmd->add_option("--alpha", c.alpha, "cluster proportion threshold")->capture_default_str();
  css_cmd->add_option("--height", c.h, "clustering cutoff height")->capture_default_str();

  CLI::App* paths_cmd = app.add_subcommand("paths", "stability paths over s0");
  data_opts(paths_cmd);
  common(paths_cmd);
  subsampling_opts(paths_cmd);
  paths_cmd->add_option("--s0-grid", c.s0_grid, "s0 values (defaults to --s0)")->delimiter(',');
  paths_cmd->add_option("--height", c.h, "clustering cutoff height")->capture_default_str();
  paths_cmd->add_option("--truth", c.truth, "ground-truth JSON for feature labels");

  CLI::App* tiles_cmd = app.add_subcommand("tiles", "pairwise similarity of stable models");
  data_opts(tiles_cmd);
  common(tiles_cmd);
  subsampling_opts(tiles_cmd);
  search_opts(tiles_cmd);
  tiles_cmd->add_flag("--use-response", c.use_response, "report tau^y instead of tau-bar above the diagonal");

  CLI::App* gen_cmd = app.add_subcommand("gen", "write a synthetic dataset and its ground truth");
  common(gen_cmd);
  gen_cmd->add_option("--recipe", c.recipe, "figure1, block or cluster")->capture_default_str();
  gen_cmd->add_option("--n", c.n, "rows (0: recipe default)");
  gen_cmd->add_option("--response", c.response, "name of the response column")->capture_default_str();

  CLI::App* bench_cmd = app.add_subcommand("bench", "repeated train/validate/test comparison");
  common(bench_cmd);
  bench_cmd->add_option("--recipe", c.recipe, "data recipe: block, figure1 or cluster");
  bench_cmd->add_option("--methods", c.methods, "l0,lasso,ss,css,fsss_greedy,fsss")->delimiter(',');
  bench_cmd->add_option("--s0-grid", c.s0_grid, "s0 values")->delimiter(',');
  bench_cmd->add_option("--alpha-grid", c.alpha_grid, "alpha values")->delimiter(',');
  bench_cmd->add_option("--h-grid", c.h_grid, "cutoff heights for css")->delimiter(',');
  bench_cmd->add_option("--base", c.base, "base procedure for stability methods")->capture_default_str();
  bench_cmd->add_option("--B", c.B, "number of subsamples (even)")->capture_default_str();
  bench_cmd->add_option("--K", c.K, "models per random-walk search")->capture_default_str();
  bench_cmd->add_option("--repetitions", c.repetitions, "repetitions")->capture_default_str();
  bench_cmd->add_option("--os-trials", c.os_trials, "extra trials for output stability (0: skip)");
  bench_cmd->add_option("--n-fit", c.n_fit, "fitting fold size")->capture_default_str();
  bench_cmd->add_option("--n-model", c.n_model, "model fold size")->capture_default_str();
  bench_cmd->add_option("--n-val", c.n_val, "validation fold size")->capture_default_str();
  bench_cmd->add_option("--n-test", c.n_test, "test size")->capture_default_str();
  bench_cmd->add_option("--scale", c.scale, "multiplier applied to all fold sizes")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    print_error(err, "usage", e.what());
    return 2;
  }
  c.command = app.get_subcommands().front()->get_name();
  if (c.command == "bench" && bench_cmd->count("--recipe") == 0) c.recipe = "block";

  try {
    run(c, out);
  } catch (const UsageError& e) {
    print_error(err, "usage", e.what());
    return 2;
  } catch (const ParseError& e) {
    print_error(err, "parse", e.what());
    return 3;
  } catch (const std::exception& e) {
    print_error(err, "runtime", e.what());
    return 1;
  }
  return 0;
}

}  // namespace substab::cli
