#include "ala/predictor.hpp"

#include <cmath>
#include <fstream>

#include "ala/error.hpp"
#include "ala/log.hpp"

namespace ala {
namespace {

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError("cannot parse '" + path.string() + "': " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

constexpr std::array<const char*, 3> kTargetNames = {"a", "b", "c"};

}  // namespace

FeatureVector features(std::int64_t ii, std::int64_t oo) {
  if (ii < 1 || oo < 1) throw PreconditionError("features: ii and oo must be >= 1");
  const auto i = static_cast<double>(ii);
  const auto o = static_cast<double>(oo);
  return {i, o, std::log1p(i), std::log1p(o), std::log1p(i / o), i / (o + 1.0), i / (i + 1.0)};
}

ExpParams ParamPredictor::predict_raw(std::int64_t ii, std::int64_t oo) const {
  if (schema_version != kFeatureSchemaVersion)
    throw VersionError("parameter predictor uses feature schema " +
                       std::to_string(schema_version) + ", expected " +
                       std::to_string(kFeatureSchemaVersion));
  const FeatureVector x = features(ii, oo);
  return {gbt::predict(ensembles[0], x), gbt::predict(ensembles[1], x),
          gbt::predict(ensembles[2], x)};
}

ParamPredictor train_param_predictor(const TrainingTable& t, const gbt::TrainConfig& cfg) {
  if (t.empty()) throw EmptyInputError("train_param_predictor: empty training table");
  cfg.validate();
  gbt::Matrix x;
  std::array<std::vector<double>, 3> y;
  for (const auto& row : t) {
    x.push_row(features(row.ii, row.oo));
    for (double v : {row.params.a, row.params.b, row.params.c})
      if (!std::isfinite(v)) throw PreconditionError("non-finite parameter in training table");
    y[0].push_back(row.params.a);
    y[1].push_back(row.params.b);
    y[2].push_back(row.params.c);
  }
  // The engine needs two rows; a single-row table becomes a constant model.
  if (x.rows() == 1) {
    x.push_row(x.row(0));
    for (auto& v : y) v.push_back(v.front());
  }

  ParamPredictor m;
#pragma omp parallel for
  for (int k = 0; k < 3; ++k) m.ensembles[k] = gbt::train(x, y[k], cfg);
  return m;
}

const char* to_string(PredictionSource s) {
  return s == PredictionSource::lookup ? "lookup" : "predicted";
}

ThroughputPrediction predict_throughput(const ParamDatabase& db, const ParamPredictor& m,
                                        std::int64_t bb, std::int64_t ii, std::int64_t oo) {
  if (bb < 1 || ii < 1 || oo < 1)
    throw PreconditionError("predict_throughput: bb, ii and oo must be >= 1");
  ThroughputPrediction out;
  if (auto it = db.find({ii, oo}); it != db.end()) {
    out.params = it->second.params;
    out.source = PredictionSource::lookup;
  } else {
    out.params = clamp_to_bounds(m.predict_raw(ii, oo));
    out.source = PredictionSource::predicted;
  }
  out.thpt = eval_throughput(out.params, static_cast<double>(bb));
  return out;
}

ConfigModelSet train_all_configs(const Dataset& d, const gbt::TrainConfig& cfg) {
  if (d.empty()) throw EmptyInputError("train_all_configs: empty dataset");
  ConfigModelSet out;
  for (const auto& [key, group] : split_by_config(d)) {
    DatabaseBuild built = build_param_db(group);
    if (built.table.empty()) {
      log::warn("skipping configuration " + key.slug() + ": no fittable (ii, oo) groups");
      out.skipped.push_back(key);
      continue;
    }
    ConfigModel cm;
    cm.predictor = train_param_predictor(built.table, cfg);
    cm.db = std::move(built.db);
    cm.n_records = group.size();
    cm.n_failed_groups = built.failed.size();
    out.models.emplace(key, std::move(cm));
  }
  return out;
}

void write_model_artifacts(const std::filesystem::path& dir, const ConfigModel& m) {
  std::filesystem::create_directories(dir);
  write_json(dir / "params.json", database_to_json(m.db));
  for (std::size_t k = 0; k < 3; ++k) {
    auto j = gbt::to_json(m.predictor.ensembles[k]);
    j["feature_schema"] = m.predictor.schema_version;
    write_json(dir / (std::string("model_") + kTargetNames[k] + ".json"), j);
  }
}

ConfigModel read_model_artifacts(const std::filesystem::path& dir) {
  ConfigModel m;
  m.db = database_from_json(read_json(dir / "params.json"));
  for (std::size_t k = 0; k < 3; ++k) {
    const auto j = read_json(dir / (std::string("model_") + kTargetNames[k] + ".json"));
    const int schema = j.value("feature_schema", -1);
    if (schema != kFeatureSchemaVersion)
      throw VersionError("model_" + std::string(kTargetNames[k]) + ".json has feature schema " +
                         std::to_string(schema) + ", expected " +
                         std::to_string(kFeatureSchemaVersion));
    m.predictor.ensembles[k] = gbt::from_json(j);
    if (m.predictor.ensembles[k].n_features != kFeatureWidth)
      throw VersionError("parameter model has wrong feature width");
  }
  return m;
}

nlohmann::json config_key_to_json(const ConfigKey& k) {
  return {{"model", k.model}, {"back", k.back},         {"dev", k.dev},
          {"acc", k.acc},     {"acc_count", k.acc_count}, {"cpu", k.cpu},
          {"cpu_count", k.cpu_count}, {"mode", k.mode}, {"prec", k.prec}};
}

ConfigKey config_key_from_json(const nlohmann::json& j) {
  ConfigKey k;
  k.model = j.at("model").get<std::string>();
  k.back = j.at("back").get<std::string>();
  k.dev = j.at("dev").get<std::string>();
  k.acc = j.at("acc").get<std::string>();
  k.acc_count = j.at("acc_count").get<std::int64_t>();
  k.cpu = j.at("cpu").get<std::string>();
  k.cpu_count = j.at("cpu_count").get<std::int64_t>();
  k.mode = j.at("mode").get<std::string>();
  k.prec = j.at("prec").get<std::string>();
  return k;
}

}  // namespace ala
