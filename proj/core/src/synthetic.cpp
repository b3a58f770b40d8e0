#include "substab/synthetic.hpp"

#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "substab/diagnostics.hpp"
#include "substab/random.hpp"

namespace substab {

std::string_view to_string(FeatureLabel label) {
  switch (label) {
    case FeatureLabel::signal:
      return "signal";
    case FeatureLabel::correlated_signal:
      return "correlated_signal";
    case FeatureLabel::noise:
      return "noise";
  }
  return "unknown";
}

namespace {

FeatureLabel parse_label(const std::string& s) {
  if (s == "signal") return FeatureLabel::signal;
  if (s == "correlated_signal") return FeatureLabel::correlated_signal;
  if (s == "noise") return FeatureLabel::noise;
  throw ParseError("unknown feature label '" + s + "'");
}

std::size_t children_of(const BlockSpec& b) { return b.child_coefs.empty() ? 1 : b.child_coefs.size(); }

FeatureSet range_set(int first, int count) {
  std::vector<int> v;
  for (int k = 0; k < count; ++k) v.push_back(first + k);
  return FeatureSet::of(std::move(v));
}

}  // namespace

Index DataSpec::p() const {
  Index p = 0;
  for (const auto& c : clusters.clusters) p += 1 + c.proxies;
  for (const auto& b : blocks) p += b.parents + static_cast<Index>(children_of(b));
  return p + static_cast<Index>(individual_betas.size());
}

Dataset generate(const DataSpec& spec, Index n, double noise_sigma, std::uint64_t seed) {
  if (n < 2) throw UsageError("synthetic data needs n >= 2");
  if (!(noise_sigma >= 0)) throw UsageError("noise sigma must be non-negative");
  if (!(spec.clusters.eta1 >= 0)) throw UsageError("cluster perturbation scale must be non-negative");
  for (const auto& c : spec.clusters.clusters)
    if (c.proxies < 0) throw UsageError("proxy count must be non-negative");
  for (const auto& b : spec.blocks) {
    if (b.parents < 2) throw UsageError("a block needs at least two parents");
    if (!(b.child_eta >= 0)) throw UsageError("child perturbation scale must be non-negative");
    if (!b.parent_betas.empty() && static_cast<int>(b.parent_betas.size()) != b.parents) {
      throw UsageError("parent coefficient count does not match the number of parents");
    }
    for (const auto& row : b.child_coefs)
      if (static_cast<int>(row.size()) != b.parents) throw UsageError("child coefficient row has the wrong length");
  }

  const Index p = spec.p();
  if (p < 1) throw UsageError("synthetic layout has no features");
  if (n <= p) {
    std::ostringstream msg;
    msg << "generating n = " << n << " rows for p = " << p << " features";
    warn(msg.str());
  }

  Rng rng = make_rng(seed, "design");
  Dataset d;
  d.x.resize(n, p);
  GroundTruth& t = d.truth;
  t.beta_star = Vector::Zero(p);
  t.labels.assign(static_cast<std::size_t>(p), FeatureLabel::noise);
  const double unit = std::sqrt(static_cast<double>(n));

  auto base_column = [&](bool normalize) {
    Vector v = gaussian_vector(n, rng);
    if (normalize) v /= v.norm();
    return v;
  };

  int col = 0;
  const bool norm = spec.clusters.normalize_reps;
  for (const auto& c : spec.clusters.clusters) {
    ClusterGroup g;
    g.representative = col;
    g.signal = c.beta != 0;
    const Vector rep = base_column(norm);
    d.x.col(col) = rep;
    t.beta_star(col) = c.beta;
    const double sd = norm ? spec.clusters.eta1 / unit : spec.clusters.eta1;
    for (int k = 1; k <= c.proxies; ++k) d.x.col(col + k) = rep + gaussian_vector(n, rng, sd);
    g.members = range_set(col, 1 + c.proxies);
    t.labels[static_cast<std::size_t>(col)] = g.signal ? FeatureLabel::signal : FeatureLabel::noise;
    for (int k = 1; k <= c.proxies; ++k)
      t.labels[static_cast<std::size_t>(col + k)] = g.signal ? FeatureLabel::correlated_signal : FeatureLabel::noise;
    t.clusters.push_back(std::move(g));
    col += 1 + c.proxies;
  }

  for (const auto& b : spec.blocks) {
    BlockGroup g;
    const int first = col;
    bool any_signal = false;
    for (int k = 0; k < b.parents; ++k) {
      d.x.col(col + k) = base_column(norm);
      const double beta = b.parent_betas.empty() ? 0.0 : b.parent_betas[static_cast<std::size_t>(k)];
      t.beta_star(col + k) = beta;
      any_signal = any_signal || beta != 0;
    }
    g.parents = range_set(first, b.parents);
    col += b.parents;
    const std::size_t nc = children_of(b);
    const double sd = norm ? b.child_eta / unit : b.child_eta;
    for (std::size_t c = 0; c < nc; ++c) {
      Vector child = gaussian_vector(n, rng, sd);
      for (int k = 0; k < b.parents; ++k) {
        const double w = b.child_coefs.empty() ? 1.0 : b.child_coefs[c][static_cast<std::size_t>(k)];
        child += w * d.x.col(first + k);
      }
      d.x.col(col) = child;
      ++col;
    }
    g.children = range_set(first + b.parents, static_cast<int>(nc));
    for (int j : g.parents)
      t.labels[static_cast<std::size_t>(j)] = t.beta_star(j) != 0 ? FeatureLabel::signal
                                              : any_signal     ? FeatureLabel::correlated_signal
                                                               : FeatureLabel::noise;
    for (int j : g.children)
      t.labels[static_cast<std::size_t>(j)] = any_signal ? FeatureLabel::correlated_signal : FeatureLabel::noise;
    t.blocks.push_back(std::move(g));
  }

  const int first_individual = col;
  for (double beta : spec.individual_betas) {
    d.x.col(col) = base_column(norm);
    t.beta_star(col) = beta;
    t.labels[static_cast<std::size_t>(col)] = beta != 0 ? FeatureLabel::signal : FeatureLabel::noise;
    ++col;
  }
  t.individuals = range_set(first_individual, static_cast<int>(spec.individual_betas.size()));

  Rng noise_rng = make_rng(seed, "noise");
  d.y = d.x * t.beta_star + gaussian_vector(n, noise_rng, noise_sigma);
  d.x.rowwise() -= d.x.colwise().mean();

  std::vector<int> support;
  for (Index j = 0; j < p; ++j)
    if (t.beta_star(j) != 0) support.push_back(static_cast<int>(j));
  t.s_star = FeatureSet::of(std::move(support));
  t.names.reserve(static_cast<std::size_t>(p));
  for (Index j = 0; j < p; ++j) t.names.push_back("x" + std::to_string(j));
  return d;
}

Dataset gen_cluster_data(const ClusterSpec& spec, Index n, double noise_sigma, std::uint64_t seed,
                         std::vector<double> individual_betas) {
  DataSpec full;
  full.clusters = spec;
  full.individual_betas = std::move(individual_betas);
  return generate(full, n, noise_sigma, seed);
}

Dataset gen_block_data(const std::vector<BlockSpec>& blocks, int individual_count,
                       const WeakSignalSpec& weak, Index n, double noise_sigma, std::uint64_t seed,
                       const ClusterSpec& clusters) {
  if (individual_count < 0 || weak.count < 0 || weak.count > individual_count) {
    throw UsageError("weak signals must be a subset of the individual features");
  }
  DataSpec full;
  full.clusters = clusters;
  full.blocks = blocks;
  full.individual_betas.assign(static_cast<std::size_t>(individual_count), 0.0);
  for (int k = 0; k < weak.count; ++k) full.individual_betas[static_cast<std::size_t>(k)] = weak.beta;
  return generate(full, n, noise_sigma, seed);
}

DataSpec block_experiment_spec() {
  DataSpec spec;
  spec.clusters.eta1 = 0.5;
  spec.clusters.clusters = {{2, 1.0}, {2, 1.0}, {2, 1.0}};
  spec.blocks = {
      {2, 0.01, {1, -1}, {}},
      {3, 0.1, {1, -1, 1}, {}},
      {4, 0.1, {1, -1, 1, -1}, {}},
  };
  spec.individual_betas.assign(179, 0.0);
  for (int k = 0; k < 5; ++k) spec.individual_betas[static_cast<std::size_t>(k)] = 0.2;
  return spec;
}

DataSpec figure1_spec() {
  DataSpec spec;
  spec.clusters.eta1 = 0.2;
  spec.clusters.clusters.assign(8, ClusterDef{2, 1.0});
  const BlockSpec block{2, 0.2, {1.5, 1.0}, {{1.0, 1.0}, {1.0, -1.0}}};
  spec.blocks = {block, block};
  spec.individual_betas.assign(50, 0.0);
  return spec;
}

Dataset gen_figure1_data(std::uint64_t seed, Index n) {
  return generate(figure1_spec(), n, kFigure1Sigma, seed);
}

bool membership_in_S(const FeatureSet& candidate, const GroundTruth& truth) {
  for (const auto& c : truth.clusters) {
    const std::size_t hit = candidate.intersected(c.members).size();
    if (c.signal ? hit != 1 : hit != 0) return false;
  }
  for (const auto& b : truth.blocks) {
    const FeatureSet members = b.members();
    bool all_parents_signal = true;
    for (int j : b.parents) all_parents_signal = all_parents_signal && truth.beta_star(j) != 0;
    const FeatureSet chosen = candidate.intersected(members);
    if (all_parents_signal) {
      if (chosen.size() != b.parents.size()) return false;
    } else if (chosen != truth.s_star.intersected(members)) {
      return false;
    }
  }
  return candidate.intersected(truth.individuals) == truth.s_star.intersected(truth.individuals);
}

void to_json(nlohmann::json& j, const GroundTruth& t) {
  nlohmann::json clusters = nlohmann::json::array();
  for (const auto& c : t.clusters)
    clusters.push_back({{"representative", c.representative}, {"members", c.members.indices()}, {"signal", c.signal}});
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : t.blocks)
    blocks.push_back({{"parents", b.parents.indices()}, {"children", b.children.indices()}});
  std::vector<std::string> labels;
  for (auto l : t.labels) labels.emplace_back(to_string(l));
  j = nlohmann::json{{"names", t.names},
                     {"beta_star", std::vector<double>(t.beta_star.data(), t.beta_star.data() + t.beta_star.size())},
                     {"s_star", t.s_star.indices()},
                     {"clusters", std::move(clusters)},
                     {"blocks", std::move(blocks)},
                     {"individuals", t.individuals.indices()},
                     {"labels", labels}};
}

GroundTruth ground_truth_from_json(const nlohmann::json& j) {
  GroundTruth t;
  const auto beta = j.at("beta_star").get<std::vector<double>>();
  t.beta_star = Eigen::Map<const Vector>(beta.data(), static_cast<Index>(beta.size()));
  t.s_star = FeatureSet::of(j.at("s_star").get<std::vector<int>>());
  for (const auto& c : j.at("clusters")) {
    t.clusters.push_back({c.at("representative").get<int>(), FeatureSet::of(c.at("members").get<std::vector<int>>()),
                          c.at("signal").get<bool>()});
  }
  for (const auto& b : j.at("blocks")) {
    t.blocks.push_back({FeatureSet::of(b.at("parents").get<std::vector<int>>()),
                        FeatureSet::of(b.at("children").get<std::vector<int>>())});
  }
  t.individuals = FeatureSet::of(j.at("individuals").get<std::vector<int>>());
  for (const auto& l : j.at("labels")) t.labels.push_back(parse_label(l.get<std::string>()));
  t.names = j.at("names").get<std::vector<std::string>>();
  if (t.labels.size() != static_cast<std::size_t>(t.beta_star.size()) || t.names.size() != t.labels.size()) {
    throw ParseError("ground truth arrays disagree on p");
  }
  return t;
}

}  // namespace substab
