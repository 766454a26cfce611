#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ala/exp_params.hpp"

namespace ala {

// Hardware/software tuple identifying one benchmarked deployment.
struct ConfigKey {
  std::string acc = "na";
  std::int64_t acc_count = 0;
  std::string back = "na";
  std::string cpu = "na";
  std::int64_t cpu_count = 0;
  std::string dev = "na";
  std::string mode = "na";
  std::string model = "na";
  std::string prec = "na";

  auto operator<=>(const ConfigKey&) const = default;

  // Filesystem-safe, human readable label, e.g. "llama-8b_vllm_H100x1_...".
  std::string slug() const;
};

struct BenchmarkRecord {
  ConfigKey config;
  std::int64_t ii = 0;
  std::int64_t oo = 0;
  std::int64_t bb = 0;
  double thpt = 0.0;  // NaN when the owning Dataset has has_thpt == false

  WorkloadKey workload() const { return {ii, oo}; }
};

struct Dataset {
  std::vector<BenchmarkRecord> records;
  std::string source;
  // False for query sets loaded without a throughput column.
  bool has_thpt = true;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

struct LoadOptions {
  bool require_thpt = true;
};

// Column order used when writing; reading accepts any order and ignores
// unknown columns.
inline const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols = {
      "model", "back", "dev", "acc", "acc_count", "cpu", "cpu_count",
      "mode",  "prec", "bb",  "ii",  "oo",        "thpt"};
  return cols;
}

Dataset parse_csv(std::istream& in, const std::string& source,
                  const LoadOptions& opts = {});
Dataset load_csv(const std::filesystem::path& path, const LoadOptions& opts = {});
void write_csv(std::ostream& out, const Dataset& d);
void write_csv(const std::filesystem::path& path, const Dataset& d);

std::map<ConfigKey, Dataset> split_by_config(const Dataset& d);

struct TrainTestSplit {
  Dataset train;
  Dataset test;
};
TrainTestSplit train_test_split(const Dataset& d, double test_fraction,
                                std::uint64_t seed);

// Smooth ground-truth families for synthetic data:
//   a = alpha*log(1+ii) + beta*log(1+oo),  b = gamma/(1+oo/512),  c = a + delta
// or a fixed triple for every workload.
struct ParamFamily {
  enum class Kind { smooth, constant };
  Kind kind = Kind::smooth;
  double alpha = 400.0;
  double beta = 100.0;
  double gamma = 0.08;
  double delta = 500.0;
  ExpParams fixed{};

  ExpParams operator()(std::int64_t ii, std::int64_t oo) const;

  static ParamFamily constant(ExpParams p) {
    ParamFamily f;
    f.kind = Kind::constant;
    f.fixed = p;
    return f;
  }
};

struct SynthSpec {
  std::vector<std::int64_t> ii_values;
  std::vector<std::int64_t> oo_values;
  std::vector<std::int64_t> bb_values;
  ParamFamily family;
  double noise_rel = 0.0;
  int replicates = 1;
  ConfigKey config;
};

using TruthMap = std::map<WorkloadKey, ExpParams>;

struct SynthResult {
  Dataset data;
  TruthMap truth;
};

SynthResult synth_generate(const SynthSpec& spec, std::uint64_t seed);

}  // namespace ala
