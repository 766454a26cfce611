#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ala/data.hpp"
#include "ala/expmodel.hpp"
#include "ala/gbt.hpp"

namespace ala {

inline constexpr int kFeatureSchemaVersion = 1;
inline constexpr std::size_t kFeatureWidth = 7;

// [ii, oo, log(1+ii), log(1+oo), log(1+ii/oo), ii/(oo+1), ii/(ii+1)].
// The fifth entry keeps its historical name log_bb but depends on ii/oo only.
using FeatureVector = std::array<double, kFeatureWidth>;

FeatureVector features(std::int64_t ii, std::int64_t oo);

struct ParamPredictor {
  std::array<gbt::TreeEnsemble, 3> ensembles;  // targets a, b, c
  int schema_version = kFeatureSchemaVersion;

  // Raw ensemble outputs; not clamped.
  ExpParams predict_raw(std::int64_t ii, std::int64_t oo) const;
};

ParamPredictor train_param_predictor(const TrainingTable& t, const gbt::TrainConfig& cfg);

enum class PredictionSource { lookup, predicted };

const char* to_string(PredictionSource s);

struct ThroughputPrediction {
  double thpt = 0.0;
  PredictionSource source = PredictionSource::lookup;
  ExpParams params;
};

ThroughputPrediction predict_throughput(const ParamDatabase& db, const ParamPredictor& m,
                                        std::int64_t bb, std::int64_t ii, std::int64_t oo);

struct ConfigModel {
  ParamDatabase db;
  ParamPredictor predictor;
  std::size_t n_records = 0;
  std::size_t n_failed_groups = 0;
};

struct ConfigModelSet {
  std::map<ConfigKey, ConfigModel> models;
  std::vector<ConfigKey> skipped;  // configs whose training table was empty
};

ConfigModelSet train_all_configs(const Dataset& d, const gbt::TrainConfig& cfg);

// Artifact directory layout: params.json, model_{a,b,c}.json, manifest.json.
// The manifest is written by the caller (it carries run metadata).
void write_model_artifacts(const std::filesystem::path& dir, const ConfigModel& m);
ConfigModel read_model_artifacts(const std::filesystem::path& dir);

nlohmann::json config_key_to_json(const ConfigKey& k);
ConfigKey config_key_from_json(const nlohmann::json& j);

}  // namespace ala
