#include "substab/subsampling.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "parallel.hpp"
#include "substab/random.hpp"

namespace substab {

const std::vector<int>& SubsamplePlan::rows(int ell) const {
  if (ell < 0 || ell >= B) throw UsageError("subsample index out of range");
  const auto& pair = pairs[static_cast<std::size_t>(ell / 2)];
  return ell % 2 == 0 ? pair.first : pair.second;
}

SubsamplePlan make_plan(Index n, int B, std::uint64_t seed) {
  if (B < 2 || B % 2 != 0) throw UsageError("B must be an even integer >= 2, got " + std::to_string(B));
  if (n < 4) throw UsageError("complementary subsampling needs n >= 4");
  SubsamplePlan plan;
  plan.B = B;
  plan.seed = seed;
  plan.n = n;
  Rng rng = make_rng(seed, "plan");
  const auto half = static_cast<std::size_t>(n / 2);
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int k = 0; k < B / 2; ++k) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> first(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(half));
    std::vector<int> second(perm.begin() + static_cast<std::ptrdiff_t>(half),
                            perm.begin() + static_cast<std::ptrdiff_t>(2 * half));
    std::sort(first.begin(), first.end());
    std::sort(second.begin(), second.end());
    plan.pairs.emplace_back(std::move(first), std::move(second));
  }
  return plan;
}

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("SUBSTAB_WORKERS")) {
    const int w = std::atoi(env);
    if (w > 0) return w;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

AvgProjection projection_from_records(const DesignMatrix& X,
                                      const std::vector<SelectionRecord>& records,
                                      double rank_tolerance) {
  std::vector<SubspaceBasis> bases;
  bases.reserve(records.size());
  for (const auto& r : records) bases.push_back(orthonormal_basis(X, r.selected, rank_tolerance));
  return AvgProjection(std::move(bases));
}

SubsamplingResult run_subsampling(const DesignMatrix& X, const Vector& y, const SubsamplePlan& plan,
                                  const BaseProcedureConfig& config,
                                  const SubsamplingOptions& options) {
  if (y.size() != X.n()) throw UsageError("response length does not match the design");
  if (plan.n != X.n()) throw UsageError("subsample plan was drawn for a different n");
  config.validate(X.n(), X.p());

  const auto B = static_cast<std::size_t>(plan.B);
  std::vector<SelectionRecord> records(B);
  const int workers = resolve_workers(options.workers);
  detail::parallel_for(B, workers, [&](std::size_t ell) {
    const std::vector<int>& rows = plan.rows(static_cast<int>(ell));
    Matrix xs(static_cast<Index>(rows.size()), X.p());
    Vector ys(static_cast<Index>(rows.size()));
    for (Index i = 0; i < xs.rows(); ++i) {
      xs.row(i) = X.values().row(rows[static_cast<std::size_t>(i)]);
      ys(i) = y(rows[static_cast<std::size_t>(i)]);
    }
    xs.rowwise() -= xs.colwise().mean();
    ys.array() -= ys.mean();
    SelectionRecord rec;
    rec.subsample_index = static_cast<int>(ell);
    rec.rows = rows;
    try {
      rec.selected = run_base_procedure(xs, ys, config);
    } catch (const std::exception& e) {
      throw std::runtime_error("base procedure failed on subsample " + std::to_string(ell) + ": " +
                               e.what());
    }
    records[ell] = std::move(rec);
  });

  if (options.subspace_rows) {
    const DesignMatrix xd = X.restrict_rows(*options.subspace_rows);
    AvgProjection p = projection_from_records(xd, records, options.rank_tolerance);
    return {std::move(records), std::move(p)};
  }
  AvgProjection p = projection_from_records(X, records, options.rank_tolerance);
  return {std::move(records), std::move(p)};
}

Vector selection_proportions(const std::vector<SelectionRecord>& records, Index p) {
  Vector prop = Vector::Zero(p);
  if (records.empty()) return prop;
  for (const auto& r : records) {
    for (int j : r.selected) {
      if (j >= p) throw UsageError("selection record references feature beyond p");
      prop(j) += 1.0;
    }
  }
  prop /= static_cast<double>(records.size());
  return prop;
}

void to_json(nlohmann::json& j, const SelectionRecord& r) {
  j = nlohmann::json{{"subsample_index", r.subsample_index},
                     {"rows", r.rows},
                     {"selected", r.selected.indices()}};
}

void from_json(const nlohmann::json& j, SelectionRecord& r) {
  r.subsample_index = j.at("subsample_index").get<int>();
  r.rows = j.at("rows").get<std::vector<int>>();
  r.selected = FeatureSet::of(j.at("selected").get<std::vector<int>>());
}

}  // namespace substab
