#include <cmath>
#include <functional>
#include <random>

#include "ala/error.hpp"
#include "ala/gbt.hpp"
#include "doctest.h"

using namespace ala;
using namespace ala::gbt;

namespace {

double mse(const TreeEnsemble& m, const Matrix& x, std::span<const double> y, std::size_t n_trees) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double r = m.predict_prefix(x.row(i), n_trees) - y[i];
    s += r * r;
  }
  return s / static_cast<double>(x.rows());
}

double mean_mse(std::span<const double> y) {
  double m = 0.0;
  for (double v : y) m += v;
  m /= static_cast<double>(y.size());
  double s = 0.0;
  for (double v : y) s += (v - m) * (v - m);
  return s / static_cast<double>(y.size());
}

struct Fixture {
  Matrix x;
  std::vector<double> y;
};

Fixture random_fixture(std::uint64_t seed, std::size_t n, std::size_t d,
                       const std::function<double(std::span<const double>)>& f) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  Fixture fx;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(d);
    for (auto& v : row) v = std::round(u(rng) * 4.0) / 4.0;  // some ties
    fx.x.push_row(row);
    fx.y.push_back(f(row));
  }
  return fx;
}

// Walks a tree with the rows that reach each node and checks the structure.
void check_tree(const Tree& t, const Matrix& x, const std::vector<double>& residual,
                const TrainConfig& cfg) {
  std::function<void(int, std::vector<std::size_t>)> walk = [&](int id,
                                                                std::vector<std::size_t> rows) {
    const Node& nd = t.nodes[id];
    CHECK(nd.n_samples == rows.size());
    if (nd.is_leaf()) {
      CHECK(rows.size() >= static_cast<std::size_t>(cfg.min_samples_leaf));
      double m = 0.0;
      for (auto i : rows) m += residual[i];
      m /= static_cast<double>(rows.size());
      CHECK(nd.value == doctest::Approx(m).epsilon(1e-12));
      return;
    }
    std::vector<std::size_t> l, r;
    for (auto i : rows) (x(i, nd.feature) < nd.threshold ? l : r).push_back(i);
    CHECK(l.size() + r.size() == rows.size());
    CHECK_FALSE(l.empty());
    CHECK_FALSE(r.empty());
    walk(nd.left, l);
    walk(nd.right, r);
  };
  std::vector<std::size_t> all(x.rows());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  walk(0, all);
  CHECK(t.depth() <= cfg.max_depth);
}

}  // namespace

TEST_CASE("constant targets predict the constant") {
  Matrix x;
  std::vector<double> y;
  for (int i = 0; i < 10; ++i) {
    x.push_row(std::vector<double>{static_cast<double>(i), static_cast<double>(i * i)});
    y.push_back(7.0);
  }
  const TreeEnsemble m = train(x, y, TrainConfig{});
  CHECK(m.base_value == 7.0);
  for (double a : {-100.0, 0.0, 3.5, 1e6}) CHECK(predict(m, std::vector<double>{a, a}) == doctest::Approx(7.0).epsilon(1e-9));
  CHECK(predict(m, x.row(4)) == doctest::Approx(7.0));
}

TEST_CASE("step function is learned") {
  Matrix x;
  std::vector<double> y;
  for (int i = 0; i < 50; ++i) {
    const double v = -10.0 + 20.0 * i / 49.0;
    x.push_row(std::vector<double>{v});
    y.push_back(v < 0.0 ? 0.0 : 10.0);
  }
  TrainConfig cfg;
  cfg.n_trees = 100;
  cfg.learning_rate = 0.3;
  const TreeEnsemble m = train(x, y, cfg);
  for (std::size_t i = 0; i < x.rows(); ++i) CHECK(std::abs(predict(m, x.row(i)) - y[i]) < 0.1);
  CHECK(std::abs(predict(m, std::vector<double>{-5.0})) < 0.1);
}

TEST_CASE("identity on 1..20 at depth 4") {
  Matrix x;
  std::vector<double> y;
  for (int i = 1; i <= 20; ++i) {
    x.push_row(std::vector<double>{static_cast<double>(i)});
    y.push_back(i);
  }
  TrainConfig cfg;
  cfg.max_depth = 4;
  const TreeEnsemble m = train(x, y, cfg);
  CHECK(std::sqrt(mse(m, x, y, m.trees.size())) < 0.5);
}

TEST_CASE("empty ensemble predicts its base value") {
  TreeEnsemble m;
  m.base_value = 3.25;
  m.n_features = 2;
  CHECK(predict(m, std::vector<double>{1.0, 2.0}) == 3.25);
  CHECK_THROWS_AS(predict(m, std::vector<double>{1.0}), PreconditionError);
}

TEST_CASE("training MSE is non-increasing in tree count and beats the mean") {
  const std::vector<std::function<double(std::span<const double>)>> fns = {
      [](auto r) { return r[0] * r[0] - 2.0 * r[1]; },
      [](auto r) { return std::sin(r[0]) + (r[2] > 0.5 ? 3.0 : -1.0); },
      [](auto r) { return std::floor(r[1]); },
  };
  for (std::size_t k = 0; k < fns.size(); ++k) {
    const Fixture fx = random_fixture(100 + k, 80, 3, fns[k]);
    TrainConfig cfg;
    cfg.n_trees = 60;
    const TreeEnsemble m = train(fx.x, fx.y, cfg);
    double prev = mse(m, fx.x, fx.y, 0);
    for (std::size_t t = 1; t <= m.trees.size(); ++t) {
      const double cur = mse(m, fx.x, fx.y, t);
      CHECK(cur <= prev * (1.0 + 1e-12));
      prev = cur;
    }
    CHECK(prev < mean_mse(fx.y));
  }
}

TEST_CASE("trees respect depth, leaf size and split validity") {
  const Fixture fx = random_fixture(5, 64, 4, [](auto r) { return r[0] + 2.0 * r[3] * r[1]; });
  TrainConfig cfg;
  cfg.n_trees = 5;
  cfg.max_depth = 3;
  cfg.min_samples_leaf = 4;
  const TreeEnsemble m = train(fx.x, fx.y, cfg);
  std::vector<double> pred(fx.y.size(), m.base_value);
  for (const auto& t : m.trees) {
    std::vector<double> residual(fx.y.size());
    for (std::size_t i = 0; i < residual.size(); ++i) residual[i] = fx.y[i] - pred[i];
    check_tree(t, fx.x, residual, cfg);
    for (std::size_t i = 0; i < pred.size(); ++i) pred[i] += cfg.learning_rate * t.eval(fx.x.row(i));
  }
}

TEST_CASE("equal gains break ties on the lowest feature") {
  // Two identical columns: the split must land on feature 0.
  Matrix x;
  std::vector<double> y;
  for (int i = 0; i < 8; ++i) {
    x.push_row(std::vector<double>{static_cast<double>(i), static_cast<double>(i)});
    y.push_back(i < 4 ? 0.0 : 1.0);
  }
  TrainConfig cfg;
  cfg.n_trees = 1;
  cfg.max_depth = 1;
  const TreeEnsemble m = train(x, y, cfg);
  REQUIRE(m.trees[0].nodes.size() == 3);
  CHECK(m.trees[0].nodes[0].feature == 0);
  CHECK(m.trees[0].nodes[0].threshold == 3.5);
}

TEST_CASE("determinism and subsampling") {
  const Fixture fx = random_fixture(9, 50, 2, [](auto r) { return r[0] - r[1]; });
  TrainConfig cfg;
  cfg.n_trees = 20;
  CHECK(save(train(fx.x, fx.y, cfg)) == save(train(fx.x, fx.y, cfg)));
  cfg.subsample = 0.5;
  cfg.seed = 3;
  const auto a = save(train(fx.x, fx.y, cfg));
  CHECK(a == save(train(fx.x, fx.y, cfg)));
  cfg.seed = 4;
  CHECK(a != save(train(fx.x, fx.y, cfg)));
}

TEST_CASE("save/load round trip predicts bit-identically") {
  const Fixture fx = random_fixture(12, 70, 3, [](auto r) { return std::exp(r[0] / 3.0) * r[2]; });
  TrainConfig cfg;
  cfg.n_trees = 40;
  const TreeEnsemble m = train(fx.x, fx.y, cfg);
  const TreeEnsemble back = load(save(m));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> row = {u(rng), u(rng), u(rng)};
    CHECK(predict(m, row) == predict(back, row));
  }
  CHECK(save(back) == save(m));
}

TEST_CASE("load rejects truncated and foreign payloads") {
  const Fixture fx = random_fixture(2, 10, 1, [](auto r) { return r[0]; });
  const std::string payload = save(train(fx.x, fx.y, TrainConfig{}));
  CHECK_THROWS_AS(load(payload.substr(0, payload.size() / 2)), InputError);
  auto j = nlohmann::json::parse(payload);
  j["version"] = 99;
  CHECK_THROWS_AS(load(j.dump()), VersionError);
  j["version"] = kModelVersion;
  j["trees"][0]["nodes"][0]["left"] = 0;
  if (j["trees"][0]["nodes"][0].contains("feature")) CHECK_THROWS_AS(load(j.dump()), InputError);
}

TEST_CASE("train validates its inputs") {
  Matrix x;
  x.push_row(std::vector<double>{1.0});
  std::vector<double> one = {1.0};
  CHECK_THROWS_AS(train(x, one, TrainConfig{}), PreconditionError);
  x.push_row(std::vector<double>{2.0});
  std::vector<double> three = {1.0, 2.0, 3.0};
  CHECK_THROWS_AS(train(x, three, TrainConfig{}), PreconditionError);
  std::vector<double> bad = {1.0, std::nan("")};
  CHECK_THROWS_AS(train(x, bad, TrainConfig{}), PreconditionError);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  std::vector<double> ok = {1.0, 2.0};
  CHECK_THROWS_AS(train(x, ok, cfg), PreconditionError);
  CHECK_THROWS_AS(x.push_row(std::vector<double>{1.0, 2.0}), PreconditionError);
}
