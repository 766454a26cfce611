#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ala/anneal.hpp"
#include "ala/data.hpp"
#include "ala/gbt.hpp"
#include "json.hpp"

namespace ala {

// Sorted distinct values of the training dataset, one block per dimension.
struct EncodingUniverse {
  std::vector<std::int64_t> ii;
  std::vector<std::int64_t> bb;
  std::vector<std::int64_t> oo;

  std::size_t width() const { return ii.size() + bb.size() + oo.size(); }
  bool operator==(const EncodingUniverse&) const = default;
};

EncodingUniverse encoding_universe(const Dataset& d);

// Presence bits in the order ii block, bb block, oo block. Values of s that
// are not in u are ignored.
std::vector<double> encode_signature(const SubsetSignature& s, const EncodingUniverse& u);

struct ErrorPredictor {
  gbt::TreeEnsemble ensemble;
  EncodingUniverse universe;
  std::size_t n_train = 0;
  std::size_t n_dropped = 0;  // +inf sentinel entries excluded from training

  double predict(const SubsetSignature& s) const;
};

ErrorPredictor train_error_predictor(const AnnealLog& log, const EncodingUniverse& u,
                                     const gbt::TrainConfig& cfg);

inline constexpr int kErrorModelVersion = 1;
nlohmann::json error_predictor_to_json(const ErrorPredictor& f);
ErrorPredictor error_predictor_from_json(const nlohmann::json& j);

// Equal-width bins over [lo, hi]; out-of-range values land in the edge bins
// and the last bin is closed on the right.
std::vector<double> feature_histogram(std::span<const double> values, double lo, double hi,
                                      std::size_t n_bins);

// 1 - cos(u, v); 1 when either vector is all zero.
double cosine_distance(std::span<const double> u, std::span<const double> v);

inline constexpr std::size_t kDefaultBins = 16;

// Mean per-feature histogram cosine distance over ii, oo, bb and, when
// include_thpt is set, thpt. Histograms share the range of the union.
double subset_distance(std::span<const BenchmarkRecord> a, std::span<const BenchmarkRecord> b,
                       std::size_t n_bins = kDefaultBins, bool include_thpt = true);

struct NearestSubset {
  double distance = 0.0;
  std::size_t index = 0;  // position in the log
};

// Exhaustive search over every logged signature's induced records in
// train_d. Entries that induce no records are skipped.
NearestSubset nearest_logged_subset(const Dataset& query, const AnnealLog& log,
                                    const Dataset& train_d, std::size_t n_bins = kDefaultBins);
NearestSubset nearest_logged_subset_serial(const Dataset& query, const AnnealLog& log,
                                           const Dataset& train_d,
                                           std::size_t n_bins = kDefaultBins);

inline double confidence_from_distance(double d_min) { return 1.0 / (1.0 + d_min); }

struct ConfidenceReport {
  std::string dataset;
  double predicted_error = 0.0;
  double confidence = 0.0;
  double d_min = 0.0;
  int nearest_iteration = 0;
  std::optional<double> actual_error;
};

ConfidenceReport estimate_error_confidence(const Dataset& new_d, const ErrorPredictor& f,
                                           const AnnealLog& log, const Dataset& train_d);

// Median predicted error and minimum confidence over per-config reports;
// actual error is the median of the available actual errors.
ConfidenceReport aggregate_reports(const std::vector<ConfidenceReport>& reports,
                                   const std::string& name);

nlohmann::ordered_json report_to_json(const ConfidenceReport& r);

// Fixed-width table: Dataset | Predicted Error | Confidence | Actual Error.
std::string format_report_table(const std::vector<ConfidenceReport>& rows);

}  // namespace ala
