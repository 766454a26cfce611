#include "ala/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "ala/anneal.hpp"
#include "ala/data.hpp"
#include "ala/error.hpp"
#include "ala/expmodel.hpp"
#include "ala/gbt.hpp"
#include "ala/log.hpp"
#include "ala/predictor.hpp"
#include "ala/uncertainty.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace ala::cli {
namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Run metadata written next to every artifact.
struct RunManifest {
  std::string command;
  std::vector<std::string> inputs;
  json config;
  std::uint64_t seed = 0;
  std::string started_at = utc_now();

  ordered_json to_json() const {
    ordered_json j;
    j["command"] = command;
    j["inputs"] = inputs;
    j["config"] = config;
    j["config_hash"] = fnv1a_hex(json{{"command", command}, {"config", config}, {"seed", seed}}.dump());
    j["seed"] = seed;
    j["tool_version"] = kToolVersion;
    j["started_at"] = started_at;
    j["finished_at"] = utc_now();
    return j;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << text;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError("cannot parse '" + path.string() + "': " + e.what());
  }
}

AnnealLog read_log_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  return read_log(in);
}

void add_train_flags(CLI::App* cmd, gbt::TrainConfig& cfg) {
  cmd->add_option("--trees", cfg.n_trees, "Boosting rounds")->capture_default_str();
  cmd->add_option("--max-depth", cfg.max_depth, "Maximum tree depth")->capture_default_str();
  cmd->add_option("--learning-rate", cfg.learning_rate, "Shrinkage per tree")
      ->capture_default_str();
  cmd->add_option("--min-leaf", cfg.min_samples_leaf, "Minimum samples per leaf")
      ->capture_default_str();
  cmd->add_option("--subsample", cfg.subsample, "Row fraction per tree")->capture_default_str();
}

// Picks one configuration group, by slug when several are present.
std::pair<ConfigKey, Dataset> select_config(const Dataset& d, const std::string& selector) {
  auto groups = split_by_config(d);
  if (!selector.empty()) {
    for (auto& [k, g] : groups)
      if (k.slug() == selector) return {k, std::move(g)};
    throw InputError("no configuration '" + selector + "' in " + d.source);
  }
  if (groups.size() > 1) {
    std::string msg = "dataset holds " + std::to_string(groups.size()) +
                      " configurations; choose one with --config:";
    for (const auto& [k, g] : groups) msg += "\n  " + k.slug();
    throw InputError(msg);
  }
  auto it = groups.begin();
  return {it->first, std::move(it->second)};
}

std::string signature_text(const SubsetSignature& s) { return signature_to_json(s).dump(); }

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string out;
  std::string truth;
  std::vector<std::int64_t> ii = {128, 256, 512, 1024, 2048};
  std::vector<std::int64_t> oo = {128, 256, 512, 1024};
  std::vector<std::int64_t> bb = {1, 2, 4, 8, 16, 32, 64, 128};
  ParamFamily family;
  double noise = 0.02;
  int replicates = 3;
  std::uint64_t seed = 0;
  ConfigKey config{"H100", 1, "vllm", "na", 0, "cuda", "offline", "llama-3.1-8b", "bf16"};
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  SynthSpec spec;
  spec.ii_values = a.ii;
  spec.oo_values = a.oo;
  spec.bb_values = a.bb;
  spec.family = a.family;
  spec.noise_rel = a.noise;
  spec.replicates = a.replicates;
  spec.config = a.config;
  const SynthResult res = synth_generate(spec, a.seed);

  std::ostringstream csv;
  write_csv(csv, res.data);
  write_text(a.out, csv.str());

  auto truth = json::array();
  for (const auto& [k, p] : res.truth)
    truth.push_back({{"ii", k.ii}, {"oo", k.oo}, {"a", p.a}, {"b", p.b}, {"c", p.c}});
  const std::string truth_path = a.truth.empty() ? a.out + ".truth.json" : a.truth;
  write_text(truth_path, truth.dump(2) + "\n");

  RunManifest m{"synth", {}, {{"ii", a.ii}, {"oo", a.oo}, {"bb", a.bb},
                              {"alpha", a.family.alpha}, {"beta", a.family.beta},
                              {"gamma", a.family.gamma}, {"delta", a.family.delta},
                              {"noise", a.noise}, {"replicates", a.replicates}},
                a.seed};
  write_text(a.out + ".manifest.json", m.to_json().dump(2) + "\n");
  out << "wrote " << res.data.size() << " records to " << a.out << " (truth: " << truth_path
      << ")\n";
  return 0;
}

// ---------------------------------------------------------------- fit

int cmd_fit(const std::string& csv, const std::string& out_dir, const gbt::TrainConfig& cfg,
            std::ostream& out) {
  RunManifest run{"fit", {csv}, gbt::config_to_json(cfg), cfg.seed};
  const Dataset d = load_csv(csv);
  std::set<std::string> used;
  std::size_t written = 0;
  for (const auto& [key, group] : split_by_config(d)) {
    const DatabaseBuild built = build_param_db(group);
    for (const auto& f : built.failed)
      log::warn("config " + key.slug() + ": group ii=" + std::to_string(f.key.ii) +
                " oo=" + std::to_string(f.key.oo) + " failed: " + f.reason);
    if (built.table.empty()) {
      log::error("config " + key.slug() + ": no (ii, oo) group produced parameters");
      continue;
    }
    ConfigModel cm;
    cm.predictor = train_param_predictor(built.table, cfg);
    cm.db = built.db;
    cm.n_records = group.size();
    cm.n_failed_groups = built.failed.size();

    std::string name = key.slug();
    for (int k = 2; used.count(name); ++k) name = key.slug() + "-" + std::to_string(k);
    used.insert(name);
    const fs::path dir = fs::path(out_dir) / name;
    write_model_artifacts(dir, cm);

    std::size_t fitted = 0;
    for (const auto& [wk, e] : cm.db) fitted += e.residual.has_value();
    ordered_json manifest;
    manifest["config"] = config_key_to_json(key);
    manifest["feature_schema"] = kFeatureSchemaVersion;
    manifest["stats"] = {{"records", cm.n_records},
                         {"groups", cm.db.size() + built.failed.size()},
                         {"fitted", fitted},
                         {"defaulted", cm.db.size() - fitted},
                         {"failed", built.failed.size()}};
    manifest["run"] = run.to_json();
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
    out << name << ": " << cm.db.size() << " parameter entries (" << fitted << " fitted, "
        << built.failed.size() << " failed)\n";
    ++written;
  }
  if (written == 0) throw FitError("no configuration produced a parameter database");
  return 0;
}

// ---------------------------------------------------------------- predict

fs::path resolve_config_dir(const fs::path& root, const std::string& selector) {
  if (!fs::is_directory(root)) throw InputError("artifact directory '" + root.string() + "' not found");
  if (fs::exists(root / "params.json")) return root;
  std::vector<std::string> candidates;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory() && fs::exists(entry.path() / "params.json"))
      candidates.push_back(entry.path().filename().string());
  std::sort(candidates.begin(), candidates.end());
  if (!selector.empty()) {
    if (std::find(candidates.begin(), candidates.end(), selector) == candidates.end())
      throw InputError("no configuration '" + selector + "' under " + root.string());
    return root / selector;
  }
  if (candidates.size() == 1) return root / candidates.front();
  std::string msg = candidates.empty() ? "no model artifacts under " + root.string()
                                       : "ambiguous configuration; choose one with --config:";
  for (const auto& c : candidates) msg += "\n  " + c;
  throw InputError(msg);
}

int cmd_predict(const std::string& dir, std::int64_t bb, std::int64_t ii, std::int64_t oo,
                const std::string& selector, bool as_json, std::ostream& out) {
  const ConfigModel m = read_model_artifacts(resolve_config_dir(dir, selector));
  const ThroughputPrediction p = predict_throughput(m.db, m.predictor, bb, ii, oo);
  if (as_json) {
    ordered_json j;
    j["thpt"] = p.thpt;
    j["source"] = to_string(p.source);
    j["a"] = p.params.a;
    j["b"] = p.params.b;
    j["c"] = p.params.c;
    out << j.dump() << '\n';
  } else {
    out << std::setprecision(10) << "thpt " << p.thpt << " tokens/s (" << to_string(p.source)
        << ")\nparams a=" << p.params.a << " b=" << p.params.b << " c=" << p.params.c << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------- anneal

int cmd_anneal(const std::string& csv, const std::string& out_log, const AnnealConfig& acfg,
               gbt::TrainConfig tcfg, const std::string& selector, std::ostream& out) {
  tcfg.seed = acfg.seed;
  RunManifest run{"anneal", {csv},
                  {{"tau0", acfg.tau0}, {"alpha", acfg.alpha}, {"iters", acfg.n_iters},
                   {"gbt", gbt::config_to_json(tcfg)}},
                  acfg.seed};
  const auto [key, d] = select_config(load_csv(csv), selector);
  const SubsetSignature s0 = default_initial_subset(d);
  const AnnealLog log = run_annealing(d, s0, acfg, tcfg);

  std::ostringstream os;
  write_log(os, log);
  write_text(out_log, os.str());
  write_text(out_log + ".manifest.json", run.to_json().dump(2) + "\n");

  const auto best = best_so_far(log);
  std::size_t best_idx = 0;
  for (std::size_t i = 0; i < log.size(); ++i)
    if (log[i].accepted && log[i].error == best.back()) best_idx = i;
  out << "initial error " << log.front().error << "%\n"
      << "best error " << best.back() << "% at iteration " << log[best_idx].iteration << '\n'
      << "best signature " << signature_text(log[best_idx].signature) << '\n';
  return 0;
}

// ---------------------------------------------------------------- train-error-predictor

int cmd_train_error(const std::string& log_path, const std::string& train_csv,
                     const std::string& out_model, gbt::TrainConfig cfg, std::uint64_t seed,
                     const std::string& selector, std::ostream& out) {
  cfg.seed = seed;
  RunManifest run{"train-error-predictor", {log_path, train_csv}, gbt::config_to_json(cfg), seed};
  const AnnealLog log = read_log_file(log_path);
  const auto [key, d] = select_config(load_csv(train_csv), selector);
  const ErrorPredictor f = train_error_predictor(log, encoding_universe(d), cfg);
  write_text(out_model, error_predictor_to_json(f).dump() + "\n");
  write_text(out_model + ".manifest.json", run.to_json().dump(2) + "\n");
  out << "trained error predictor on " << f.n_train << " entries (" << f.n_dropped
      << " unfittable dropped), encoding width " << f.universe.width() << '\n';
  return 0;
}

// ---------------------------------------------------------------- estimate

double actual_error(const Dataset& train, const Dataset& query, const gbt::TrainConfig& cfg) {
  const DatabaseBuild built = build_param_db(train);
  if (built.table.empty()) throw FitError("training dataset produced no parameters");
  const ParamPredictor m = train_param_predictor(built.table, cfg);
  std::vector<double> pred, actual;
  for (const auto& r : query.records) {
    pred.push_back(predict_throughput(built.db, m, r.bb, r.ii, r.oo).thpt);
    actual.push_back(r.thpt);
  }
  return median_percent_error(pred, actual);
}

int cmd_estimate(const std::string& new_csv, const std::string& model_path,
                 const std::string& log_path, const std::string& train_csv,
                 const std::string& selector, std::string name, gbt::TrainConfig cfg,
                 std::uint64_t seed, bool as_json, std::ostream& out) {
  cfg.seed = seed;
  const Dataset new_d = load_csv(new_csv, LoadOptions{.require_thpt = false});
  const ErrorPredictor f = error_predictor_from_json(read_json_file(model_path));
  const AnnealLog log = read_log_file(log_path);
  const auto [key, train_d] = select_config(load_csv(train_csv), selector);
  if (encoding_universe(train_d) != f.universe)
    throw VersionError("error model universe does not match the training dataset " + train_csv);
  if (name.empty()) name = fs::path(new_csv).stem().string();

  std::vector<ConfidenceReport> reports;
  const auto groups = split_by_config(new_d);
  for (const auto& [k, g] : groups) {
    ConfidenceReport r = estimate_error_confidence(g, f, log, train_d);
    r.dataset = groups.size() == 1 ? name : name + "/" + k.slug();
    if (g.has_thpt) r.actual_error = actual_error(train_d, g, cfg);
    reports.push_back(std::move(r));
  }
  const ConfidenceReport agg = aggregate_reports(reports, name);

  if (as_json) {
    ordered_json j;
    j["reports"] = ordered_json::array();
    for (const auto& r : reports) j["reports"].push_back(report_to_json(r));
    j["aggregate"] = report_to_json(agg);
    out << j.dump() << '\n';
  } else {
    std::vector<ConfidenceReport> rows = reports;
    if (reports.size() > 1) rows.push_back(agg);
    out << format_report_table(rows);
  }
  return 0;
}

// ---------------------------------------------------------------- eval

int cmd_eval(const std::string& csv, double test_fraction, gbt::TrainConfig cfg,
             std::uint64_t seed, bool as_json, std::ostream& out) {
  cfg.seed = seed;
  const Dataset d = load_csv(csv);
  const TrainTestSplit split = train_test_split(d, test_fraction, seed);
  const ConfigModelSet models = train_all_configs(split.train, cfg);

  std::map<ConfigKey, double> mean_thpt;
  for (const auto& [k, g] : split_by_config(split.train)) {
    double s = 0.0;
    for (const auto& r : g.records) s += r.thpt;
    mean_thpt[k] = s / static_cast<double>(g.size());
  }

  std::vector<double> pred, base, actual;
  std::size_t lookups = 0, predicted = 0, uncovered = 0;
  for (const auto& r : split.test.records) {
    const auto it = models.models.find(r.config);
    if (it == models.models.end()) {
      ++uncovered;
      continue;
    }
    const auto p = predict_throughput(it->second.db, it->second.predictor, r.bb, r.ii, r.oo);
    (p.source == PredictionSource::lookup ? lookups : predicted)++;
    pred.push_back(p.thpt);
    base.push_back(mean_thpt.at(r.config));
    actual.push_back(r.thpt);
  }
  if (pred.empty()) throw FitError("no test record belongs to a trained configuration");
  const double err = median_percent_error(pred, actual);
  const double base_err = median_percent_error(base, actual);
  if (as_json) {
    ordered_json j;
    j["train"] = split.train.size();
    j["test"] = split.test.size();
    j["median_percent_error"] = err;
    j["mean_baseline_error"] = base_err;
    j["lookup"] = lookups;
    j["predicted"] = predicted;
    j["uncovered"] = uncovered;
    out << j.dump() << '\n';
  } else {
    out << "train " << split.train.size() << " / test " << split.test.size() << '\n'
        << "median percent error " << err << "% (" << lookups << " lookup, " << predicted
        << " predicted, " << uncovered << " uncovered)\n"
        << "mean-baseline median percent error " << base_err << "%\n";
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Throughput modeling with learned exponential parameters and error estimation",
               "ala"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  gbt::TrainConfig tcfg;
  std::uint64_t seed = 0;
  std::string selector;
  bool as_json = false;

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic benchmark CSV");
  synth->add_option("--out", sa.out, "Output CSV")->required();
  synth->add_option("--truth", sa.truth, "Ground-truth JSON (default <out>.truth.json)");
  synth->add_option("--ii", sa.ii, "Input token counts")->capture_default_str();
  synth->add_option("--oo", sa.oo, "Output token counts")->capture_default_str();
  synth->add_option("--bb", sa.bb, "Batch sizes")->capture_default_str();
  synth->add_option("--alpha", sa.family.alpha)->capture_default_str();
  synth->add_option("--beta", sa.family.beta)->capture_default_str();
  synth->add_option("--gamma", sa.family.gamma)->capture_default_str();
  synth->add_option("--delta", sa.family.delta)->capture_default_str();
  synth->add_option("--noise", sa.noise, "Relative Gaussian noise")->capture_default_str();
  synth->add_option("--replicates", sa.replicates)->capture_default_str();
  synth->add_option("--seed", sa.seed)->capture_default_str();
  synth->add_option("--model", sa.config.model)->capture_default_str();

  std::string csv, out_path;
  auto* fit = app.add_subcommand("fit", "Fit parameter databases and predictors per configuration");
  fit->add_option("csv", csv, "Benchmark CSV")->required();
  fit->add_option("--out", out_path, "Artifact directory")->required();
  fit->add_option("--seed", seed)->capture_default_str();
  add_train_flags(fit, tcfg);

  std::int64_t bb = 0, ii = 0, oo = 0;
  std::string artifact_dir;
  auto* predict = app.add_subcommand("predict", "Predict throughput for one workload");
  predict->add_option("artifacts", artifact_dir, "Directory written by fit")->required();
  predict->add_option("--bb", bb)->required();
  predict->add_option("--ii", ii)->required();
  predict->add_option("--oo", oo)->required();
  predict->add_option("--config", selector, "Configuration subdirectory");
  predict->add_flag("--json", as_json);

  AnnealConfig acfg;
  auto* anneal = app.add_subcommand("anneal", "Simulated annealing over training subsets");
  anneal->add_option("csv", csv)->required();
  anneal->add_option("--out", out_path, "JSONL log")->required();
  anneal->add_option("--tau0", acfg.tau0)->capture_default_str();
  anneal->add_option("--alpha", acfg.alpha)->capture_default_str();
  anneal->add_option("--iters", acfg.n_iters)->capture_default_str();
  anneal->add_option("--seed", acfg.seed)->capture_default_str();
  anneal->add_option("--config", selector);
  add_train_flags(anneal, tcfg);

  std::string log_path, train_csv, model_path;
  auto* terr = app.add_subcommand("train-error-predictor", "Train the error predictor on a log");
  terr->add_option("--log", log_path)->required();
  terr->add_option("--train", train_csv, "CSV the log was produced from")->required();
  terr->add_option("--out", model_path)->required();
  terr->add_option("--seed", seed)->capture_default_str();
  terr->add_option("--config", selector);
  add_train_flags(terr, tcfg);

  std::string new_csv, name;
  auto* estimate = app.add_subcommand("estimate", "Predict error and confidence for new workloads");
  estimate->add_option("csv", new_csv, "New workloads CSV (thpt optional)")->required();
  estimate->add_option("--model", model_path, "Error predictor JSON")->required();
  estimate->add_option("--log", log_path)->required();
  estimate->add_option("--train", train_csv)->required();
  estimate->add_option("--config", selector);
  estimate->add_option("--name", name, "Dataset label in the report");
  estimate->add_option("--seed", seed)->capture_default_str();
  estimate->add_flag("--json", as_json);
  add_train_flags(estimate, tcfg);

  double test_fraction = 0.2;
  auto* eval = app.add_subcommand("eval", "Train/test split accuracy report");
  eval->add_option("csv", csv)->required();
  eval->add_option("--test-fraction", test_fraction)->capture_default_str();
  eval->add_option("--seed", seed)->capture_default_str();
  eval->add_flag("--json", as_json);
  add_train_flags(eval, tcfg);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    tcfg.seed = seed;
    if (synth->parsed()) return cmd_synth(sa, out);
    if (fit->parsed()) return cmd_fit(csv, out_path, tcfg, out);
    if (predict->parsed()) return cmd_predict(artifact_dir, bb, ii, oo, selector, as_json, out);
    if (anneal->parsed()) return cmd_anneal(csv, out_path, acfg, tcfg, selector, out);
    if (terr->parsed())
      return cmd_train_error(log_path, train_csv, model_path, tcfg, seed, selector, out);
    if (estimate->parsed())
      return cmd_estimate(new_csv, model_path, log_path, train_csv, selector, name, tcfg, seed,
                          as_json, out);
    if (eval->parsed()) return cmd_eval(csv, test_fraction, tcfg, seed, as_json, out);
  } catch (const InputError& e) {
    err << "ala: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "ala: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "ala: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace ala::cli
