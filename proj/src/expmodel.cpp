#include "ala/expmodel.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>

#include "ala/error.hpp"
#include "ala/log.hpp"

namespace ala {
namespace {

constexpr double kFloor = 1e-5;
constexpr double kBatchEps = 1e-3;

std::size_t distinct_batches(std::span<const BatchPoint> group) {
  std::set<double> s;
  for (const auto& p : group) s.insert(p.bb);
  return s.size();
}

Eigen::Vector3d to_vec(const ExpParams& p) { return {p.a, p.b, p.c}; }
ExpParams from_vec(const Eigen::Vector3d& v) { return {v[0], v[1], v[2]}; }

Eigen::Vector3d upper_bounds() {
  return {ParamBounds::upper_ac, ParamBounds::upper_b, ParamBounds::upper_ac};
}

// Gradient of the objective with components that point out of the box zeroed.
double projected_gradient_norm(const Eigen::Vector3d& p, const Eigen::Vector3d& descent) {
  const Eigen::Vector3d hi = upper_bounds();
  Eigen::Vector3d g = descent;
  for (int k = 0; k < 3; ++k) {
    if (p[k] <= ParamBounds::lower && g[k] < 0.0) g[k] = 0.0;
    if (p[k] >= hi[k] && g[k] > 0.0) g[k] = 0.0;
  }
  return 2.0 * g.norm();
}

std::optional<DbEntry> process_group(std::span<const BatchPoint> group, std::string& why) {
  const ExpParams init = init_estimates(group);
  DbEntry entry;
  entry.n_points = group.size();
  if (distinct_batches(group) < 3) {
    entry.params = init;
    return entry;
  }
  try {
    const FitResult fit = fit_group(group, init);
    if (!std::isfinite(fit.residual)) {
      why = "non-finite residual after fit";
      return std::nullopt;
    }
    entry.params = fit.params;
    entry.residual = fit.residual;
    return entry;
  } catch (const FitError& e) {
    why = e.what();
    return std::nullopt;
  }
}

DatabaseBuild assemble(const std::vector<WorkloadKey>& keys,
                       std::vector<std::optional<DbEntry>>& entries,
                       const std::vector<std::string>& reasons) {
  DatabaseBuild out;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (entries[i]) {
      out.db.emplace(keys[i], std::move(*entries[i]));
    } else {
      out.failed.push_back({keys[i], reasons[i]});
      log::info("fit failed for ii=" + std::to_string(keys[i].ii) +
                " oo=" + std::to_string(keys[i].oo) + ": " + reasons[i]);
    }
  }
  out.table = training_table(out.db);
  return out;
}

DatabaseBuild build_impl(const Dataset& d, bool parallel) {
  if (d.empty()) throw EmptyInputError("build_param_db: empty dataset");
  const auto groups = group_by_workload(d);
  std::vector<WorkloadKey> keys;
  std::vector<const std::vector<BatchPoint>*> points;
  for (const auto& [k, g] : groups) {
    keys.push_back(k);
    points.push_back(&g);
  }
  const auto n = static_cast<long>(keys.size());
  std::vector<std::optional<DbEntry>> entries(keys.size());
  std::vector<std::string> reasons(keys.size());
  if (parallel) {
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < n; ++i) entries[i] = process_group(*points[i], reasons[i]);
  } else {
    for (long i = 0; i < n; ++i) entries[i] = process_group(*points[i], reasons[i]);
  }
  return assemble(keys, entries, reasons);
}

}  // namespace

double percentile(std::span<const double> values, double q) {
  if (values.empty()) throw PreconditionError("percentile of an empty list");
  if (!(q >= 0.0 && q <= 100.0)) throw PreconditionError("percentile q must lie in [0, 100]");
  std::vector<double> x(values.begin(), values.end());
  std::sort(x.begin(), x.end());
  const double rank = q / 100.0 * static_cast<double>(x.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  if (lo + 1 >= x.size()) return x.back();
  return x[lo] + (rank - static_cast<double>(lo)) * (x[lo + 1] - x[lo]);
}

ExpParams init_estimates(std::span<const BatchPoint> group) {
  if (group.empty()) throw PreconditionError("init_estimates: empty group");
  if (distinct_batches(group) <= 1) return clamp_to_bounds({1.0, 0.001, 0.0});

  std::vector<double> bb, thpt;
  for (const auto& p : group) {
    bb.push_back(p.bb);
    thpt.push_back(p.thpt);
  }
  const double t10 = percentile(thpt, 10.0);
  const double t90 = percentile(thpt, 90.0);
  const double b10 = percentile(bb, 10.0);
  const double b90 = std::max(percentile(bb, 90.0), b10 + kBatchEps);
  return {std::max(t90 - t10, kFloor), 1.0 / std::max(b90 - b10, kFloor),
          std::max(t90, kFloor)};
}

double sum_squared_residual(std::span<const BatchPoint> group, const ExpParams& p) {
  double s = 0.0;
  for (const auto& pt : group) {
    const double r = pt.thpt - eval_throughput(p, pt.bb);
    s += r * r;
  }
  return s;
}

FitResult fit_group(std::span<const BatchPoint> group, const ExpParams& init,
                    const FitOptions& opts) {
  if (distinct_batches(group) < 3)
    throw PreconditionError("fit_group needs at least 3 distinct batch sizes");

  const Eigen::Vector3d hi = upper_bounds();
  auto clamp = [&](Eigen::Vector3d v) {
    for (int k = 0; k < 3; ++k) v[k] = std::clamp(v[k], ParamBounds::lower, hi[k]);
    return v;
  };

  Eigen::Vector3d p = to_vec(clamp_to_bounds(init));
  double sse = sum_squared_residual(group, from_vec(p));
  if (!std::isfinite(sse)) throw FitError("objective is not finite at the initial estimate");

  double lambda = 1e-3;
  int iter = 0;
  for (; iter < opts.max_iterations && sse > 0.0; ++iter) {
    // J holds d(model)/d(a, b, c); descent = J^T r points downhill.
    Eigen::Matrix3d jtj = Eigen::Matrix3d::Zero();
    Eigen::Vector3d descent = Eigen::Vector3d::Zero();
    for (const auto& pt : group) {
      const double e = std::exp(-p[1] * pt.bb);
      const Eigen::Vector3d j(-e, p[0] * pt.bb * e, 1.0);
      const double r = pt.thpt - (p[2] - p[0] * e);
      jtj.noalias() += j * j.transpose();
      descent += j * r;
    }
    if (projected_gradient_norm(p, descent) < opts.gradient_tol) break;

    bool accepted = false;
    bool converged = false;
    while (!accepted) {
      Eigen::Matrix3d damped = jtj;
      for (int k = 0; k < 3; ++k) damped(k, k) += lambda * std::max(jtj(k, k), 1e-12);
      const Eigen::Vector3d step = damped.ldlt().solve(descent);
      const Eigen::Vector3d trial = clamp(p + step);
      if (!step.allFinite() || (trial - p).norm() < opts.step_tol) {
        converged = true;
        break;
      }
      const double trial_sse = sum_squared_residual(group, from_vec(trial));
      if (std::isfinite(trial_sse) && trial_sse < sse) {
        p = trial;
        sse = trial_sse;
        lambda = std::max(lambda * 0.1, 1e-12);
        accepted = true;
      } else {
        lambda *= 10.0;
        if (lambda > 1e16) {
          converged = true;
          break;
        }
      }
    }
    if (converged) break;
  }
  return {from_vec(p), sse, iter};
}

std::map<WorkloadKey, std::vector<BatchPoint>> group_by_workload(const Dataset& d) {
  std::map<WorkloadKey, std::vector<BatchPoint>> groups;
  for (const auto& r : d.records)
    groups[r.workload()].push_back({static_cast<double>(r.bb), r.thpt});
  return groups;
}

DatabaseBuild build_param_db(const Dataset& d) { return build_impl(d, true); }
DatabaseBuild build_param_db_serial(const Dataset& d) { return build_impl(d, false); }

TrainingTable training_table(const ParamDatabase& db) {
  TrainingTable t;
  t.reserve(db.size());
  for (const auto& [k, e] : db) t.push_back({k.ii, k.oo, e.params});
  return t;
}

nlohmann::json database_to_json(const ParamDatabase& db) {
  auto arr = nlohmann::json::array();
  for (const auto& [k, e] : db) {
    arr.push_back({{"ii", k.ii},
                   {"oo", k.oo},
                   {"a", e.params.a},
                   {"b", e.params.b},
                   {"c", e.params.c},
                   {"n_points", e.n_points},
                   {"residual", e.residual ? nlohmann::json(*e.residual) : nlohmann::json()}});
  }
  return arr;
}

ParamDatabase database_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw InputError("parameter database must be a JSON array");
  ParamDatabase db;
  try {
    for (const auto& row : j) {
      DbEntry e;
      e.params = {row.at("a").get<double>(), row.at("b").get<double>(),
                  row.at("c").get<double>()};
      e.n_points = row.at("n_points").get<std::size_t>();
      if (row.contains("residual") && !row.at("residual").is_null())
        e.residual = row.at("residual").get<double>();
      db.emplace(WorkloadKey{row.at("ii").get<std::int64_t>(), row.at("oo").get<std::int64_t>()},
                 e);
    }
  } catch (const nlohmann::json::exception& ex) {
    throw InputError(std::string("malformed parameter database: ") + ex.what());
  }
  return db;
}

}  // namespace ala
