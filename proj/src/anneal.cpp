#include "ala/anneal.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include "ala/error.hpp"
#include "ala/expmodel.hpp"
#include "ala/log.hpp"
#include "ala/predictor.hpp"

namespace ala {
namespace {

constexpr int kMaxRedraws = 100;
constexpr double kInf = std::numeric_limits<double>::infinity();

std::set<std::int64_t>& dim_of(SubsetSignature& s, Dimension d) {
  switch (d) {
    case Dimension::ii: return s.ii;
    case Dimension::oo: return s.oo;
    case Dimension::bb: return s.bb;
  }
  return s.ii;
}

const std::set<std::int64_t>& dim_of(const SubsetSignature& s, Dimension d) {
  return dim_of(const_cast<SubsetSignature&>(s), d);
}

bool dim_ok(const std::set<std::int64_t>& s, const std::set<std::int64_t>& u) {
  if (s.empty()) return false;
  if (u.size() >= 2 && s.size() < 2) return false;
  return std::includes(u.begin(), u.end(), s.begin(), s.end());
}

}  // namespace

SubsetSignature universe_of(const Dataset& d) {
  SubsetSignature u;
  for (const auto& r : d.records) {
    u.ii.insert(r.ii);
    u.oo.insert(r.oo);
    u.bb.insert(r.bb);
  }
  return u;
}

InducedSplit induce(const Dataset& d, const SubsetSignature& s) {
  InducedSplit out;
  out.train.source = out.rest.source = d.source;
  out.train.has_thpt = out.rest.has_thpt = d.has_thpt;
  for (const auto& r : d.records) (s.contains(r) ? out.train : out.rest).records.push_back(r);
  return out;
}

bool satisfies_universe(const SubsetSignature& s, const SubsetSignature& universe) {
  return dim_ok(s.ii, universe.ii) && dim_ok(s.oo, universe.oo) && dim_ok(s.bb, universe.bb);
}

bool valid_for(const SubsetSignature& s, const Dataset& d) {
  if (!satisfies_universe(s, universe_of(d))) return false;
  bool any_in = false;
  bool any_out = false;
  for (const auto& r : d.records) {
    (s.contains(r) ? any_in : any_out) = true;
    if (any_in && any_out) return true;
  }
  return false;
}

double median_percent_error(std::span<const double> pred, std::span<const double> actual) {
  if (pred.size() != actual.size())
    throw PreconditionError("median_percent_error: length mismatch");
  if (pred.empty()) throw PreconditionError("median_percent_error: empty input");
  std::vector<double> errs;
  errs.reserve(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!(actual[i] > 0.0))
      throw PreconditionError("median_percent_error: actual values must be positive");
    errs.push_back(100.0 * std::abs(pred[i] - actual[i]) / actual[i]);
  }
  return percentile(errs, 50.0);
}

double evaluate_subset(const Dataset& d, const SubsetSignature& s, const gbt::TrainConfig& cfg) {
  if (!valid_for(s, d))
    throw PreconditionError("evaluate_subset: signature is not valid for the dataset");
  if (!d.has_thpt) throw PreconditionError("evaluate_subset: dataset has no throughput column");
  const InducedSplit split = induce(d, s);
  DatabaseBuild built = build_param_db(split.train);
  if (built.table.empty()) {
    log::info("evaluate_subset: no fittable group, error set to +inf");
    return kInf;
  }
  const ParamPredictor model = train_param_predictor(built.table, cfg);

  const auto& rest = split.rest.records;
  const auto n = static_cast<long>(rest.size());
  std::vector<double> pred(rest.size());
  std::vector<double> actual(rest.size());
#pragma omp parallel for
  for (long i = 0; i < n; ++i) {
    pred[i] = predict_throughput(built.db, model, rest[i].bb, rest[i].ii, rest[i].oo).thpt;
    actual[i] = rest[i].thpt;
  }
  return median_percent_error(pred, actual);
}

SubsetSignature apply_move(const SubsetSignature& s, const SubsetSignature& universe, Move move,
                           Rng& rng, const SignatureCheck& extra) {
  const auto& current = dim_of(s, move.dim);
  const auto& all = dim_of(universe, move.dim);
  std::vector<SubsetSignature> legal;
  for (auto v : all) {
    if (current.count(v) == static_cast<std::size_t>(move.add)) continue;
    SubsetSignature next = s;
    auto& target = dim_of(next, move.dim);
    if (move.add) {
      target.insert(v);
    } else {
      target.erase(v);
    }
    if (!satisfies_universe(next, universe)) continue;
    if (extra && !extra(next)) continue;
    legal.push_back(std::move(next));
  }
  if (legal.empty()) return s;
  std::uniform_int_distribution<std::size_t> pick(0, legal.size() - 1);
  return legal[pick(rng)];
}

SubsetSignature modify_subset(const SubsetSignature& s, const SubsetSignature& universe,
                              Rng& rng, const SignatureCheck& extra) {
  std::uniform_int_distribution<int> dim(0, 2);
  std::bernoulli_distribution add(0.5);
  for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
    const Move m{static_cast<Dimension>(dim(rng)), add(rng)};
    SubsetSignature next = apply_move(s, universe, m, rng, extra);
    if (!(next == s)) return next;
  }
  return s;
}

void AnnealConfig::validate() const {
  if (!(tau0 > 0.0)) throw PreconditionError("tau0 must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw PreconditionError("alpha must lie in (0, 1)");
  if (n_iters < 0) throw PreconditionError("n_iters must be >= 0");
}

double temperature_at(const AnnealConfig& cfg, int i) {
  return std::pow(cfg.alpha, static_cast<double>(i)) * cfg.tau0;
}

double acceptance_probability(double current, double candidate, double temperature) {
  if (!std::isfinite(candidate)) return 0.0;
  if (candidate < current) return 1.0;
  return std::exp((current - candidate) / temperature);
}

bool accept_move(double current, double candidate, double temperature, double u) {
  if (!std::isfinite(candidate)) return false;
  return candidate < current || std::exp((current - candidate) / temperature) > u;
}

AnnealLog run_annealing(const SubsetSignature& s0, const SubsetSignature& universe,
                        const SignatureCheck& check, const SubsetObjective& objective,
                        const AnnealConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  AnnealLog log;
  log.reserve(static_cast<std::size_t>(cfg.n_iters) + 1);
  SubsetSignature current = s0;
  double current_error = objective(current);
  log.push_back({0, cfg.tau0, current, current_error, true});

  for (int i = 1; i <= cfg.n_iters; ++i) {
    const double tau = temperature_at(cfg, i);
    SubsetSignature proposal = modify_subset(current, universe, rng, check);
    const double err = objective(proposal);
    const double u = unit(rng);
    const bool accepted = accept_move(current_error, err, tau, u);
    if (accepted) {
      current = proposal;
      current_error = err;
    }
    log::debug("anneal iter " + std::to_string(i) + " error " + std::to_string(err) +
               (accepted ? " accepted" : " rejected"));
    log.push_back({i, tau, std::move(proposal), err, accepted});
  }
  return log;
}

AnnealLog run_annealing(const Dataset& d, const SubsetSignature& s0, const AnnealConfig& cfg,
                        const gbt::TrainConfig& train_cfg) {
  if (!valid_for(s0, d))
    throw PreconditionError("run_annealing: initial signature is not valid for the dataset");
  train_cfg.validate();
  const SubsetSignature universe = universe_of(d);
  return run_annealing(
      s0, universe, [&d](const SubsetSignature& s) { return valid_for(s, d); },
      [&](const SubsetSignature& s) { return evaluate_subset(d, s, train_cfg); }, cfg);
}

SubsetSignature default_initial_subset(const Dataset& d) {
  SubsetSignature s = universe_of(d);
  for (auto* dim : {&s.ii, &s.oo, &s.bb}) {
    if (dim->size() < 3) continue;
    dim->erase(std::next(dim->begin(), static_cast<long>(dim->size() / 2)));
  }
  if (!valid_for(s, d))
    throw PreconditionError("cannot derive an initial subset: need a dimension with >= 3 values");
  return s;
}

std::vector<double> best_so_far(const AnnealLog& log) {
  std::vector<double> out;
  double best = kInf;
  for (const auto& e : log) {
    if (e.accepted) best = std::min(best, e.error);
    out.push_back(best);
  }
  return out;
}

nlohmann::json signature_to_json(const SubsetSignature& s) {
  return {{"s_ii", s.ii}, {"s_oo", s.oo}, {"s_bb", s.bb}};
}

SubsetSignature signature_from_json(const nlohmann::json& j) {
  SubsetSignature s;
  s.ii = j.at("s_ii").get<std::set<std::int64_t>>();
  s.oo = j.at("s_oo").get<std::set<std::int64_t>>();
  s.bb = j.at("s_bb").get<std::set<std::int64_t>>();
  return s;
}

void write_log(std::ostream& out, const AnnealLog& log) {
  for (const auto& e : log) {
    nlohmann::ordered_json j;
    j["iter"] = e.iteration;
    j["temp"] = e.temperature;
    j["s_ii"] = e.signature.ii;
    j["s_oo"] = e.signature.oo;
    j["s_bb"] = e.signature.bb;
    j["error"] = std::isfinite(e.error) ? nlohmann::ordered_json(e.error) : nlohmann::ordered_json();
    j["accepted"] = e.accepted;
    out << j.dump() << '\n';
  }
}

AnnealLog read_log(std::istream& in) {
  AnnealLog log;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      AnnealLogEntry e;
      e.iteration = j.at("iter").get<int>();
      e.temperature = j.at("temp").get<double>();
      e.signature = signature_from_json(j);
      e.error = j.at("error").is_null() ? kInf : j.at("error").get<double>();
      e.accepted = j.at("accepted").get<bool>();
      if (!log.empty() && e.iteration <= log.back().iteration)
        throw InputError("iterations must be strictly increasing");
      log.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw RowError(line_no, "annealing log line " + std::to_string(line_no) + ": " + ex.what());
    } catch (const InputError& ex) {
      throw RowError(line_no, "annealing log line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  if (log.empty()) throw EmptyInputError("annealing log is empty");
  return log;
}

}  // namespace ala
