#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <sstream>

#include "ala/anneal.hpp"
#include "ala/error.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace ala;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

gbt::TrainConfig fast_cfg() {
  gbt::TrainConfig cfg;
  cfg.n_trees = 50;
  return cfg;
}

Dataset grid(double noise = 0.0, std::uint64_t seed = 0) {
  return synth_generate(ala::testing::grid_spec({128, 256, 512, 1024}, {128, 256, 512},
                                                {1, 2, 4, 8, 16, 32, 64}, noise),
                        seed)
      .data;
}

SubsetSignature sig(std::set<std::int64_t> ii, std::set<std::int64_t> oo,
                    std::set<std::int64_t> bb) {
  return {std::move(ii), std::move(oo), std::move(bb)};
}

}  // namespace

TEST_CASE("median_percent_error") {
  CHECK(median_percent_error(std::vector<double>{110}, std::vector<double>{100}) == doctest::Approx(10.0));
  const std::vector<double> same = {3.0, 40.0, 500.0};
  CHECK(median_percent_error(same, same) == 0.0);
  CHECK(median_percent_error(std::vector<double>{90, 120, 100}, std::vector<double>{100, 100, 100}) ==
        doctest::Approx(10.0));
  CHECK(median_percent_error(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 1, 1, 1}) ==
        doctest::Approx(150.0));  // errors {0,100,200,300}; interpolated median
  CHECK_THROWS(median_percent_error(std::vector<double>{1}, std::vector<double>{1, 2}));
  CHECK_THROWS(median_percent_error(std::vector<double>{}, std::vector<double>{}));
  CHECK_THROWS(median_percent_error(std::vector<double>{1}, std::vector<double>{0}));
}

TEST_CASE("signature validity") {
  const Dataset d = grid();
  const SubsetSignature u = universe_of(d);
  CHECK(u.ii.size() == 4);
  CHECK(u.bb.size() == 7);
  CHECK(satisfies_universe(u, u));
  CHECK_FALSE(valid_for(u, d));  // empty complement
  auto s = u;
  s.bb.erase(64);
  CHECK(valid_for(s, d));
  s.ii = {128};
  CHECK_FALSE(satisfies_universe(s, u));  // fewer than two values
  s.ii = {128, 999};
  CHECK_FALSE(satisfies_universe(s, u));  // outside the universe
}

TEST_CASE("evaluate_subset") {
  const Dataset d = grid();
  auto s = universe_of(d);
  s.bb.erase(16);
  SUBCASE("held-out batch size is interpolated by the fitted curves") {
    CHECK(evaluate_subset(d, s, fast_cfg()) < 1.0);
  }
  SUBCASE("deterministic") {
    s.ii.erase(256);
    CHECK(evaluate_subset(d, s, fast_cfg()) == evaluate_subset(d, s, fast_cfg()));
  }
  SUBCASE("empty complement is a precondition error") {
    CHECK_THROWS_AS(evaluate_subset(d, universe_of(d), fast_cfg()), PreconditionError);
  }
  SUBCASE("unfittable subset yields +inf") {
    // Only two batch sizes: every group is defaulted, but defaults still
    // produce parameters, so construct a dataset where nothing fits instead.
    Dataset bad;
    for (std::int64_t ii : {1, 2})
      for (std::int64_t bb : {1, 2, 4}) bad.records.push_back({ConfigKey{}, ii, 1, bb, 1e300});
    bad.records.push_back({ConfigKey{}, 3, 1, 1, 5.0});
    auto t = universe_of(bad);
    t.ii = {1, 2};
    CHECK(evaluate_subset(bad, t, fast_cfg()) == kInf);
  }
}

TEST_CASE("apply_move and modify_subset") {
  Rng rng(1);
  const SubsetSignature u = sig({1, 2, 3}, {10, 20}, {1, 2, 4});
  SUBCASE("forced add with a single legal value") {
    const auto s = sig({1, 2}, {10, 20}, {1, 2});
    const auto next = apply_move(s, u, {Dimension::bb, true}, rng);
    CHECK(next.bb == std::set<std::int64_t>{1, 2, 4});
    CHECK(next.ii == s.ii);
  }
  SUBCASE("full universe only allows removals") {
    for (int t = 0; t < 50; ++t) {
      const auto next = modify_subset(u, u, rng);
      const std::size_t before = u.ii.size() + u.oo.size() + u.bb.size();
      const std::size_t after = next.ii.size() + next.oo.size() + next.bb.size();
      CHECK(after + 1 == before);
      CHECK(next.oo == u.oo);  // oo has exactly two values and cannot shrink
    }
  }
  SUBCASE("moves differ by exactly one element and keep invariants") {
    auto s = sig({1, 3}, {10, 20}, {2, 4});
    for (int t = 0; t < 200; ++t) {
      const auto next = modify_subset(s, u, rng);
      int diff = 0;
      for (auto [a, b] : {std::pair{&s.ii, &next.ii}, {&s.oo, &next.oo}, {&s.bb, &next.bb}}) {
        std::vector<std::int64_t> sym;
        std::set_symmetric_difference(a->begin(), a->end(), b->begin(), b->end(),
                                      std::back_inserter(sym));
        diff += static_cast<int>(sym.size());
      }
      CHECK(diff == 1);
      CHECK(satisfies_universe(next, u));
      s = next;
    }
  }
  SUBCASE("no legal move returns the input") {
    const SubsetSignature tiny = sig({1, 2}, {10, 20}, {1, 2});
    CHECK(modify_subset(tiny, tiny, rng) == tiny);
  }
  SUBCASE("fixed seed reproduces the move sequence") {
    Rng a(77), b(77);
    auto s1 = sig({1, 2}, {10, 20}, {1, 2}), s2 = s1;
    for (int t = 0; t < 30; ++t) {
      s1 = modify_subset(s1, u, a);
      s2 = modify_subset(s2, u, b);
      CHECK(s1 == s2);
    }
  }
}

TEST_CASE("acceptance rule") {
  CHECK(accept_move(10.0, 9.0, 1e-12, 0.999));
  CHECK_FALSE(accept_move(10.0, 10.5, 1e-12, 0.0));
  CHECK_FALSE(accept_move(10.0, kInf, 1e9, 0.0));
  CHECK(acceptance_probability(10.0, 12.0, 2.0) == doctest::Approx(0.36787944117));
  CHECK(acceptance_probability(10.0, kInf, 2.0) == 0.0);

  Rng rng(2024);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int hits = 0;
  for (int t = 0; t < 10000; ++t) hits += accept_move(10.0, 12.0, 2.0, unit(rng));
  CHECK(std::abs(hits / 10000.0 - std::exp(-1.0)) <= 0.02);
}

TEST_CASE("annealing chain mechanics with a synthetic objective") {
  const SubsetSignature u = sig({1, 2, 3, 4, 5}, {10, 20, 30}, {1, 2, 4, 8});
  // Error grows with the distance from a preferred subset.
  auto objective = [](const SubsetSignature& s) {
    return 5.0 + 3.0 * static_cast<double>(s.ii.size()) - (s.bb.count(8) ? 4.0 : 0.0) +
           static_cast<double>(s.oo.size());
  };
  const SubsetSignature s0 = sig({1, 2, 3}, {10, 20}, {1, 2});

  SUBCASE("log length, temperatures and initial entry") {
    AnnealConfig cfg;
    cfg.n_iters = 40;
    cfg.tau0 = 3.0;
    cfg.alpha = 0.9;
    const AnnealLog log = run_annealing(s0, u, {}, objective, cfg);
    REQUIRE(log.size() == 41);
    CHECK(log[0].iteration == 0);
    CHECK(log[0].accepted);
    CHECK(log[0].signature == s0);
    for (std::size_t i = 0; i < log.size(); ++i) {
      CHECK(log[i].iteration == static_cast<int>(i));
      CHECK(log[i].temperature == std::pow(0.9, static_cast<double>(i)) * 3.0);
    }
    const auto best = best_so_far(log);
    for (std::size_t i = 1; i < best.size(); ++i) CHECK(best[i] <= best[i - 1]);
  }
  SUBCASE("near-zero temperature is greedy") {
    AnnealConfig cfg;
    cfg.n_iters = 60;
    cfg.tau0 = 1e-12;
    const AnnealLog log = run_annealing(s0, u, {}, objective, cfg);
    std::vector<double> accepted;
    for (const auto& e : log)
      if (e.accepted) accepted.push_back(e.error);
    for (std::size_t i = 1; i < accepted.size(); ++i) CHECK(accepted[i] <= accepted[i - 1]);
    const auto best = best_so_far(log);
    std::vector<double> best_at_accepts;
    for (std::size_t i = 0; i < log.size(); ++i)
      if (log[i].accepted) best_at_accepts.push_back(best[i]);
    CHECK(best_at_accepts == accepted);
  }
  SUBCASE("zero iterations") {
    AnnealConfig cfg;
    cfg.n_iters = 0;
    CHECK(run_annealing(s0, u, {}, objective, cfg).size() == 1);
  }
  SUBCASE("infinite errors are logged but never accepted") {
    AnnealConfig cfg;
    cfg.n_iters = 30;
    cfg.tau0 = 1e6;
    auto sometimes_inf = [&](const SubsetSignature& s) {
      return s.bb.count(4) ? kInf : objective(s);
    };
    const AnnealLog log = run_annealing(s0, u, {}, sometimes_inf, cfg);
    bool saw_inf = false;
    for (const auto& e : log.size() > 1 ? AnnealLog(log.begin() + 1, log.end()) : AnnealLog{}) {
      if (std::isinf(e.error)) {
        saw_inf = true;
        CHECK_FALSE(e.accepted);
      }
    }
    CHECK(saw_inf);
  }
  SUBCASE("replay with the same seed reproduces every decision") {
    AnnealConfig cfg;
    cfg.n_iters = 50;
    cfg.seed = 31;
    const AnnealLog a = run_annealing(s0, u, {}, objective, cfg);
    const AnnealLog b = run_annealing(s0, u, {}, objective, cfg);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].accepted == b[i].accepted);
      CHECK(a[i].signature == b[i].signature);
    }
  }
}

TEST_CASE("run_annealing on data and log serialization") {
  const Dataset d = grid(0.02, 3);
  const SubsetSignature s0 = default_initial_subset(d);
  CHECK(valid_for(s0, d));
  AnnealConfig cfg;
  cfg.n_iters = 15;
  cfg.seed = 5;
  const AnnealLog log = run_annealing(d, s0, cfg, fast_cfg());
  CHECK(log.size() == 16);
  for (const auto& e : log) CHECK(valid_for(e.signature, d));

  std::stringstream a, b;
  write_log(a, log);
  write_log(b, run_annealing(d, s0, cfg, fast_cfg()));
  CHECK(a.str() == b.str());

  const AnnealLog back = read_log(a);
  REQUIRE(back.size() == log.size());
  for (std::size_t i = 0; i < log.size(); ++i) {
    CHECK(back[i].signature == log[i].signature);
    CHECK(back[i].error == log[i].error);
    CHECK(back[i].temperature == log[i].temperature);
    CHECK(back[i].accepted == log[i].accepted);
  }

  AnnealLog with_inf = {{0, 1.0, s0, kInf, false}};
  std::stringstream c;
  write_log(c, with_inf);
  CHECK(c.str().find("\"error\":null") != std::string::npos);
  CHECK(std::isinf(read_log(c).front().error));

  std::stringstream broken("{\"iter\":0}\n");
  CHECK_THROWS_AS(read_log(broken), RowError);
  std::stringstream empty;
  CHECK_THROWS_AS(read_log(empty), EmptyInputError);

  auto invalid = universe_of(d);
  CHECK_THROWS_AS(run_annealing(d, invalid, cfg, fast_cfg()), PreconditionError);
}
