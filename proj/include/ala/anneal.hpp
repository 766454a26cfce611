#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ala/data.hpp"
#include "ala/gbt.hpp"
#include "json.hpp"

namespace ala {

// Per-dimension value sets selecting a training subset.
struct SubsetSignature {
  std::set<std::int64_t> ii;
  std::set<std::int64_t> oo;
  std::set<std::int64_t> bb;

  bool operator==(const SubsetSignature&) const = default;

  bool contains(const BenchmarkRecord& r) const {
    return ii.count(r.ii) && oo.count(r.oo) && bb.count(r.bb);
  }
};

// The distinct ii/oo/bb values of a dataset.
SubsetSignature universe_of(const Dataset& d);

// Records selected by s, and the rest.
struct InducedSplit {
  Dataset train;
  Dataset rest;
};
InducedSplit induce(const Dataset& d, const SubsetSignature& s);

// Dimension-level invariants only: every set non-empty, drawn from the
// universe, and at least two values wherever the universe has two or more.
bool satisfies_universe(const SubsetSignature& s, const SubsetSignature& universe);

// Full validity for annealing on d: universe invariants plus non-empty
// induced training and evaluation sets.
bool valid_for(const SubsetSignature& s, const Dataset& d);

double median_percent_error(std::span<const double> pred, std::span<const double> actual);

// Trains on the induced subset and returns the median percent error over its
// complement; +inf when no (ii, oo) group of the subset yields parameters.
double evaluate_subset(const Dataset& d, const SubsetSignature& s, const gbt::TrainConfig& cfg);

enum class Dimension { ii = 0, oo = 1, bb = 2 };

struct Move {
  Dimension dim = Dimension::ii;
  bool add = true;
};

using Rng = std::mt19937_64;
using SignatureCheck = std::function<bool(const SubsetSignature&)>;

// Applies one add/remove on the given dimension; the value is drawn
// uniformly from the legal candidates. Returns s unchanged when no candidate
// keeps the signature valid.
SubsetSignature apply_move(const SubsetSignature& s, const SubsetSignature& universe, Move move,
                           Rng& rng, const SignatureCheck& extra = {});

// Uniform dimension, fair add/remove coin, redrawn up to 100 times.
SubsetSignature modify_subset(const SubsetSignature& s, const SubsetSignature& universe,
                              Rng& rng, const SignatureCheck& extra = {});

struct AnnealConfig {
  double tau0 = 1.0;
  double alpha = 0.95;
  int n_iters = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

struct AnnealLogEntry {
  int iteration = 0;
  double temperature = 0.0;
  SubsetSignature signature;
  double error = 0.0;  // +inf for unfittable subsets
  bool accepted = false;
};

using AnnealLog = std::vector<AnnealLogEntry>;

// Temperature at iteration i: alpha^i * tau0.
double temperature_at(const AnnealConfig& cfg, int i);

double acceptance_probability(double current, double candidate, double temperature);

// candidate < current, or exp((current - candidate) / temperature) > u.
// Non-finite candidates are never accepted.
bool accept_move(double current, double candidate, double temperature, double u);

// Entry 0 is the evaluation of s0; entries 1..N are the proposals.
AnnealLog run_annealing(const Dataset& d, const SubsetSignature& s0, const AnnealConfig& cfg,
                        const gbt::TrainConfig& train_cfg);

// Same chain with a caller-supplied objective; used by tests to exercise the
// acceptance logic without model training.
using SubsetObjective = std::function<double(const SubsetSignature&)>;
AnnealLog run_annealing(const SubsetSignature& s0, const SubsetSignature& universe,
                        const SignatureCheck& check, const SubsetObjective& objective,
                        const AnnealConfig& cfg);

// Drops the median-position value from every dimension with >= 3 values.
SubsetSignature default_initial_subset(const Dataset& d);

// Best-so-far error over accepted entries, one value per entry.
std::vector<double> best_so_far(const AnnealLog& log);

nlohmann::json signature_to_json(const SubsetSignature& s);
SubsetSignature signature_from_json(const nlohmann::json& j);

// JSON Lines: {iter, temp, s_ii, s_oo, s_bb, error, accepted}; error is
// null for the +inf sentinel.
void write_log(std::ostream& out, const AnnealLog& log);
AnnealLog read_log(std::istream& in);

}  // namespace ala
