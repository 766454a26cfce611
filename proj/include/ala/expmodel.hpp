#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ala/data.hpp"
#include "ala/exp_params.hpp"
#include "json.hpp"

namespace ala {

struct BatchPoint {
  double bb = 0.0;
  double thpt = 0.0;
};

// Sorted linear-interpolation quantile, q in [0, 100].
double percentile(std::span<const double> values, double q);

// Percentile-based starting point for the curve fit. Groups with a single
// distinct batch size get the fixed defaults (1.0, 0.001, 0.0), clamped into
// the parameter box.
ExpParams init_estimates(std::span<const BatchPoint> group);

double sum_squared_residual(std::span<const BatchPoint> group, const ExpParams& p);

struct FitOptions {
  int max_iterations = 200;
  double gradient_tol = 1e-8;
  double step_tol = 1e-10;
};

struct FitResult {
  ExpParams params;
  double residual = 0.0;  // sum of squared residuals at params
  int iterations = 0;
};

// Box-constrained Levenberg-Marquardt on sum (thpt - (c - a*exp(-b*bb)))^2.
// Requires at least three distinct batch sizes. Throws FitError when the
// objective is not finite at the (clamped) starting point.
FitResult fit_group(std::span<const BatchPoint> group, const ExpParams& init,
                    const FitOptions& opts = {});

struct DbEntry {
  ExpParams params;
  std::size_t n_points = 0;
  std::optional<double> residual;  // empty when the group was not fitted
};

using ParamDatabase = std::map<WorkloadKey, DbEntry>;

struct TrainingRow {
  std::int64_t ii = 0;
  std::int64_t oo = 0;
  ExpParams params;
};

using TrainingTable = std::vector<TrainingRow>;

struct SkippedGroup {
  WorkloadKey key;
  std::string reason;
};

struct DatabaseBuild {
  ParamDatabase db;
  TrainingTable table;
  std::vector<SkippedGroup> failed;
};

std::map<WorkloadKey, std::vector<BatchPoint>> group_by_workload(const Dataset& d);

// Fits every (ii, oo) group of a single-configuration dataset. Groups are
// fitted concurrently with OpenMP; results are identical to the serial path.
DatabaseBuild build_param_db(const Dataset& d);
DatabaseBuild build_param_db_serial(const Dataset& d);

TrainingTable training_table(const ParamDatabase& db);

// Array of {ii, oo, a, b, c, n_points, residual}, sorted by (ii, oo).
nlohmann::json database_to_json(const ParamDatabase& db);
ParamDatabase database_from_json(const nlohmann::json& j);

}  // namespace ala
