#include "ala/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

#include "ala/error.hpp"
#include "ala/expmodel.hpp"
#include "ala/log.hpp"

namespace ala {
namespace {

std::vector<std::int64_t> sorted(const std::set<std::int64_t>& s) { return {s.begin(), s.end()}; }

void append_bits(std::vector<double>& x, const std::vector<std::int64_t>& universe,
                 const std::set<std::int64_t>& present) {
  for (auto v : universe) x.push_back(present.count(v) ? 1.0 : 0.0);
}

template <typename Get>
std::vector<double> column(std::span<const BenchmarkRecord> rs, Get get) {
  std::vector<double> out;
  out.reserve(rs.size());
  for (const auto& r : rs) out.push_back(get(r));
  return out;
}

double feature_distance(const std::vector<double>& a, const std::vector<double>& b,
                        std::size_t n_bins) {
  const auto [amin, amax] = std::minmax_element(a.begin(), a.end());
  const auto [bmin, bmax] = std::minmax_element(b.begin(), b.end());
  const double lo = std::min(*amin, *bmin);
  const double hi = std::max(*amax, *bmax);
  // Every value identical on both sides: both histograms are a single spike.
  if (!(lo < hi)) return 0.0;
  return cosine_distance(feature_histogram(a, lo, hi, n_bins),
                         feature_histogram(b, lo, hi, n_bins));
}

struct Candidate {
  std::size_t index;
  std::vector<BenchmarkRecord> records;
};

std::vector<Candidate> materialize(const AnnealLog& log, const Dataset& train_d) {
  std::vector<Candidate> out;
  for (std::size_t i = 0; i < log.size(); ++i) {
    Candidate c{i, {}};
    for (const auto& r : train_d.records)
      if (log[i].signature.contains(r)) c.records.push_back(r);
    if (!c.records.empty()) out.push_back(std::move(c));
  }
  if (out.empty())
    throw PreconditionError("no logged subset induces any record of the training dataset");
  return out;
}

NearestSubset argmin(const std::vector<Candidate>& cands, const std::vector<double>& dist) {
  NearestSubset best{std::numeric_limits<double>::infinity(), 0};
  for (std::size_t k = 0; k < cands.size(); ++k) {
    if (dist[k] < best.distance) best = {dist[k], cands[k].index};
  }
  return best;
}

NearestSubset nearest_impl(const Dataset& query, const AnnealLog& log, const Dataset& train_d,
                           std::size_t n_bins, bool parallel) {
  if (query.empty()) throw EmptyInputError("query dataset is empty");
  if (log.empty()) throw EmptyInputError("annealing log is empty");
  const bool with_thpt = query.has_thpt && train_d.has_thpt;
  const auto cands = materialize(log, train_d);
  const auto n = static_cast<long>(cands.size());
  std::vector<double> dist(cands.size());
  if (parallel) {
#pragma omp parallel for schedule(dynamic)
    for (long k = 0; k < n; ++k)
      dist[k] = subset_distance(query.records, cands[k].records, n_bins, with_thpt);
  } else {
    for (long k = 0; k < n; ++k)
      dist[k] = subset_distance(query.records, cands[k].records, n_bins, with_thpt);
  }
  return argmin(cands, dist);
}

std::string fmt2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

EncodingUniverse encoding_universe(const Dataset& d) {
  const SubsetSignature u = universe_of(d);
  return {sorted(u.ii), sorted(u.bb), sorted(u.oo)};
}

std::vector<double> encode_signature(const SubsetSignature& s, const EncodingUniverse& u) {
  std::vector<double> x;
  x.reserve(u.width());
  append_bits(x, u.ii, s.ii);
  append_bits(x, u.bb, s.bb);
  append_bits(x, u.oo, s.oo);
  return x;
}

double ErrorPredictor::predict(const SubsetSignature& s) const {
  return gbt::predict(ensemble, encode_signature(s, universe));
}

ErrorPredictor train_error_predictor(const AnnealLog& log, const EncodingUniverse& u,
                                     const gbt::TrainConfig& cfg) {
  gbt::Matrix x;
  std::vector<double> y;
  std::size_t dropped = 0;
  for (const auto& e : log) {
    if (!std::isfinite(e.error)) {
      ++dropped;
      continue;
    }
    x.push_row(encode_signature(e.signature, u));
    y.push_back(e.error);
  }
  if (y.size() < 2)
    throw EmptyInputError("error predictor needs at least 2 finite log entries, got " +
                          std::to_string(y.size()));
  if (dropped > 0) log::info("dropped " + std::to_string(dropped) + " unfittable log entries");
  ErrorPredictor f;
  f.ensemble = gbt::train(x, y, cfg);
  f.universe = u;
  f.n_train = y.size();
  f.n_dropped = dropped;
  return f;
}

nlohmann::json error_predictor_to_json(const ErrorPredictor& f) {
  return {{"version", kErrorModelVersion},
          {"universe", {{"ii", f.universe.ii}, {"bb", f.universe.bb}, {"oo", f.universe.oo}}},
          {"n_train", f.n_train},
          {"n_dropped", f.n_dropped},
          {"model", gbt::to_json(f.ensemble)}};
}

ErrorPredictor error_predictor_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("version"))
    throw InputError("error model payload has no version");
  if (j.at("version") != kErrorModelVersion)
    throw VersionError("unsupported error model version " + j.at("version").dump());
  ErrorPredictor f;
  try {
    const auto& u = j.at("universe");
    f.universe = {u.at("ii").get<std::vector<std::int64_t>>(),
                  u.at("bb").get<std::vector<std::int64_t>>(),
                  u.at("oo").get<std::vector<std::int64_t>>()};
    f.n_train = j.value("n_train", std::size_t{0});
    f.n_dropped = j.value("n_dropped", std::size_t{0});
    f.ensemble = gbt::from_json(j.at("model"));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed error model: ") + e.what());
  }
  if (f.ensemble.n_features != f.universe.width())
    throw VersionError("error model expects " + std::to_string(f.ensemble.n_features) +
                       " features but its universe encodes " +
                       std::to_string(f.universe.width()));
  return f;
}

std::vector<double> feature_histogram(std::span<const double> values, double lo, double hi,
                                      std::size_t n_bins) {
  if (!(lo < hi)) throw PreconditionError("feature_histogram: lo must be below hi");
  if (n_bins < 1) throw PreconditionError("feature_histogram: n_bins must be >= 1");
  std::vector<double> counts(n_bins, 0.0);
  const double width = (hi - lo) / static_cast<double>(n_bins);
  const auto last = static_cast<long>(n_bins) - 1;
  for (double v : values) {
    const auto bin = static_cast<long>(std::floor((v - lo) / width));
    counts[static_cast<std::size_t>(std::clamp(bin, 0L, last))] += 1.0;
  }
  return counts;
}

double cosine_distance(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw PreconditionError("cosine_distance: length mismatch");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) return 1.0;
  // sqrt of the product keeps u == v exact: sqrt(x*x) == x.
  const double cos = dot / std::sqrt(nu * nv);
  return std::clamp(1.0 - cos, 0.0, 1.0);
}

double subset_distance(std::span<const BenchmarkRecord> a, std::span<const BenchmarkRecord> b,
                       std::size_t n_bins, bool include_thpt) {
  if (a.empty() || b.empty()) throw PreconditionError("subset_distance: empty record set");
  auto ii = [](const BenchmarkRecord& r) { return static_cast<double>(r.ii); };
  auto oo = [](const BenchmarkRecord& r) { return static_cast<double>(r.oo); };
  auto bb = [](const BenchmarkRecord& r) { return static_cast<double>(r.bb); };
  auto thpt = [](const BenchmarkRecord& r) { return r.thpt; };

  double total = feature_distance(column(a, ii), column(b, ii), n_bins) +
                 feature_distance(column(a, oo), column(b, oo), n_bins) +
                 feature_distance(column(a, bb), column(b, bb), n_bins);
  double n_features = 3.0;
  if (include_thpt) {
    total += feature_distance(column(a, thpt), column(b, thpt), n_bins);
    n_features += 1.0;
  }
  return total / n_features;
}

NearestSubset nearest_logged_subset(const Dataset& query, const AnnealLog& log,
                                    const Dataset& train_d, std::size_t n_bins) {
  return nearest_impl(query, log, train_d, n_bins, true);
}

NearestSubset nearest_logged_subset_serial(const Dataset& query, const AnnealLog& log,
                                           const Dataset& train_d, std::size_t n_bins) {
  return nearest_impl(query, log, train_d, n_bins, false);
}

ConfidenceReport estimate_error_confidence(const Dataset& new_d, const ErrorPredictor& f,
                                           const AnnealLog& log, const Dataset& train_d) {
  if (new_d.empty()) throw EmptyInputError("estimate: new dataset is empty");
  if (log.empty()) throw EmptyInputError("estimate: annealing log is empty");
  if (f.ensemble.n_features != f.universe.width())
    throw VersionError("error model width does not match its encoding universe");

  ConfidenceReport r;
  r.dataset = new_d.source;
  r.predicted_error = std::max(0.0, f.predict(universe_of(new_d)));
  const NearestSubset nearest = nearest_logged_subset(new_d, log, train_d);
  r.d_min = nearest.distance;
  r.nearest_iteration = log[nearest.index].iteration;
  r.confidence = confidence_from_distance(r.d_min);
  return r;
}

ConfidenceReport aggregate_reports(const std::vector<ConfidenceReport>& reports,
                                   const std::string& name) {
  if (reports.empty()) throw EmptyInputError("no reports to aggregate");
  std::vector<double> errs, actual;
  const ConfidenceReport* least = &reports.front();
  for (const auto& r : reports) {
    errs.push_back(r.predicted_error);
    if (r.actual_error) actual.push_back(*r.actual_error);
    if (r.confidence < least->confidence) least = &r;
  }
  ConfidenceReport out;
  out.dataset = name;
  out.predicted_error = percentile(errs, 50.0);
  out.confidence = least->confidence;
  out.d_min = least->d_min;
  out.nearest_iteration = least->nearest_iteration;
  if (!actual.empty()) out.actual_error = percentile(actual, 50.0);
  return out;
}

nlohmann::ordered_json report_to_json(const ConfidenceReport& r) {
  nlohmann::ordered_json j;
  j["dataset"] = r.dataset;
  j["predicted_error"] = r.predicted_error;
  j["confidence"] = r.confidence;
  j["d_min"] = r.d_min;
  j["nearest_iteration"] = r.nearest_iteration;
  j["actual_error"] = r.actual_error ? nlohmann::ordered_json(*r.actual_error)
                                     : nlohmann::ordered_json();
  return j;
}

std::string format_report_table(const std::vector<ConfidenceReport>& rows) {
  const std::vector<std::string> head = {"Dataset", "Predicted Error", "Confidence",
                                         "Actual Error"};
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows) {
    cells.push_back({r.dataset, fmt2(r.predicted_error), fmt2(r.confidence),
                     r.actual_error ? fmt2(*r.actual_error) : std::string("-")});
  }
  std::vector<std::size_t> width(head.size());
  for (std::size_t c = 0; c < head.size(); ++c) {
    width[c] = head[c].size();
    for (const auto& row : cells) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream os;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) os << " | ";
      const auto pad = std::string(width[c] - row[c].size(), ' ');
      // first column left-aligned, numbers right-aligned
      os << (c == 0 ? row[c] + pad : pad + row[c]);
    }
    os << '\n';
  };
  emit(head);
  std::size_t rule = 3 * (head.size() - 1);
  for (auto w : width) rule += w;
  os << std::string(rule, '-') << '\n';
  for (const auto& row : cells) emit(row);
  return os.str();
}

}  // namespace ala
