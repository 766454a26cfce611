#include "ala/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ala/error.hpp"

namespace ala::gbt {
namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, std::span<const double> residual, const TrainConfig& cfg)
      : x_(x), r_(residual), cfg_(cfg) {}

  Tree build(std::vector<std::size_t> rows) {
    Tree t;
    grow(t, std::move(rows), 0);
    return t;
  }

 private:
  int grow(Tree& t, std::vector<std::size_t> rows, int depth) {
    const int id = static_cast<int>(t.nodes.size());
    t.nodes.push_back({});
    double sum = 0.0;
    for (auto i : rows) sum += r_[i];
    const double n = static_cast<double>(rows.size());
    t.nodes[id].value = sum / n;
    t.nodes[id].n_samples = rows.size();

    if (depth >= cfg_.max_depth ||
        rows.size() < 2 * static_cast<std::size_t>(cfg_.min_samples_leaf))
      return id;
    const Split s = best_split(rows, sum);
    if (s.feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (auto i : rows) (x_(i, s.feature) < s.threshold ? left : right).push_back(i);
    t.nodes[id].feature = s.feature;
    t.nodes[id].threshold = s.threshold;
    const int l = grow(t, std::move(left), depth + 1);
    const int r = grow(t, std::move(right), depth + 1);
    t.nodes[id].left = l;
    t.nodes[id].right = r;
    return id;
  }

  // Scans features in index order and thresholds in ascending order, keeping
  // only strictly better gains, so ties resolve to the lowest feature and
  // lowest threshold.
  Split best_split(const std::vector<std::size_t>& rows, double total) const {
    const double n = static_cast<double>(rows.size());
    double node_sse = 0.0;
    const double mean = total / n;
    for (auto i : rows) node_sse += (r_[i] - mean) * (r_[i] - mean);
    const double min_gain = 1e-12 * node_sse;
    const auto min_leaf = static_cast<std::size_t>(cfg_.min_samples_leaf);

    Split best;
    std::vector<std::size_t> order(rows);
    for (std::size_t f = 0; f < x_.cols(); ++f) {
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return x_(a, f) < x_(b, f); });
      double left_sum = 0.0;
      for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        left_sum += r_[order[k]];
        const double v = x_(order[k], f);
        const double next = x_(order[k + 1], f);
        if (v == next) continue;
        const std::size_t n_left = k + 1;
        const std::size_t n_right = order.size() - n_left;
        if (n_left < min_leaf || n_right < min_leaf) continue;
        const double right_sum = total - left_sum;
        const double gain = left_sum * left_sum / static_cast<double>(n_left) +
                            right_sum * right_sum / static_cast<double>(n_right) -
                            total * total / n;
        if (gain > min_gain && gain > best.gain) {
          best.feature = static_cast<int>(f);
          best.threshold = v + (next - v) / 2.0;
          best.gain = gain;
        }
      }
    }
    return best;
  }

  const Matrix& x_;
  std::span<const double> r_;
  const TrainConfig& cfg_;
};

void check_finite(std::span<const double> v, const char* what) {
  for (double e : v)
    if (!std::isfinite(e)) throw PreconditionError(std::string("non-finite value in ") + what);
}

}  // namespace

void TrainConfig::validate() const {
  if (n_trees < 1) throw PreconditionError("n_trees must be >= 1");
  if (max_depth < 1) throw PreconditionError("max_depth must be >= 1");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0))
    throw PreconditionError("learning_rate must lie in (0, 1]");
  if (min_samples_leaf < 1) throw PreconditionError("min_samples_leaf must be >= 1");
  if (!(subsample > 0.0 && subsample <= 1.0))
    throw PreconditionError("subsample must lie in (0, 1]");
}

void Matrix::push_row(std::span<const double> row) {
  if (rows_ == 0 && cols_ == 0) cols_ = row.size();
  if (row.size() != cols_) throw PreconditionError("matrix row width mismatch");
  data_.insert(data_.end(), row.begin(), row.end());
  ++rows_;
}

double Tree::eval(std::span<const double> x) const {
  int id = 0;
  while (!nodes[id].is_leaf())
    id = x[nodes[id].feature] < nodes[id].threshold ? nodes[id].left : nodes[id].right;
  return nodes[id].value;
}

int Tree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, d[i]);
    if (!nodes[i].is_leaf()) d[nodes[i].left] = d[nodes[i].right] = d[i] + 1;
  }
  return deepest;
}

double TreeEnsemble::predict_prefix(std::span<const double> x, std::size_t n) const {
  if (x.size() != n_features)
    throw PreconditionError("feature row has width " + std::to_string(x.size()) +
                            ", model expects " + std::to_string(n_features));
  double out = base_value;
  n = std::min(n, trees.size());
  for (std::size_t k = 0; k < n; ++k) out += config.learning_rate * trees[k].eval(x);
  return out;
}

double predict(const TreeEnsemble& m, std::span<const double> x) {
  return m.predict_prefix(x, m.trees.size());
}

TreeEnsemble train(const Matrix& x, std::span<const double> y, const TrainConfig& cfg) {
  cfg.validate();
  if (x.rows() != y.size())
    throw PreconditionError("train: " + std::to_string(x.rows()) + " rows but " +
                            std::to_string(y.size()) + " targets");
  if (x.rows() < 2) throw PreconditionError("train: need at least 2 rows");
  if (x.cols() < 1) throw PreconditionError("train: need at least 1 feature");
  for (std::size_t i = 0; i < x.rows(); ++i) check_finite(x.row(i), "features");
  check_finite(y, "targets");

  const std::size_t n = x.rows();
  TreeEnsemble m;
  m.config = cfg;
  m.n_features = x.cols();
  m.base_value = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);

  std::vector<double> pred(n, m.base_value);
  std::vector<double> residual(n);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  const auto n_sub = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(cfg.subsample * static_cast<double>(n))), 2, n);

  for (int t = 0; t < cfg.n_trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - pred[i];
    std::vector<std::size_t> rows = all;
    if (cfg.subsample < 1.0) {
      std::shuffle(rows.begin(), rows.end(), rng);
      rows.resize(n_sub);
      std::sort(rows.begin(), rows.end());
    }
    TreeBuilder builder(x, residual, cfg);
    Tree tree = builder.build(std::move(rows));
    for (std::size_t i = 0; i < n; ++i) pred[i] += cfg.learning_rate * tree.eval(x.row(i));
    m.trees.push_back(std::move(tree));
  }
  return m;
}

nlohmann::json config_to_json(const TrainConfig& cfg) {
  return {{"n_trees", cfg.n_trees},
          {"max_depth", cfg.max_depth},
          {"learning_rate", cfg.learning_rate},
          {"min_samples_leaf", cfg.min_samples_leaf},
          {"subsample", cfg.subsample},
          {"seed", cfg.seed}};
}

TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.n_trees = j.at("n_trees").get<int>();
  c.max_depth = j.at("max_depth").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.min_samples_leaf = j.at("min_samples_leaf").get<int>();
  c.subsample = j.at("subsample").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

nlohmann::json to_json(const TreeEnsemble& m) {
  auto trees = nlohmann::json::array();
  for (const auto& t : m.trees) {
    auto nodes = nlohmann::json::array();
    for (const auto& nd : t.nodes) {
      if (nd.is_leaf()) {
        nodes.push_back({{"value", nd.value}, {"n", nd.n_samples}});
      } else {
        nodes.push_back({{"feature", nd.feature},
                         {"threshold", nd.threshold},
                         {"left", nd.left},
                         {"right", nd.right},
                         {"value", nd.value},
                         {"n", nd.n_samples}});
      }
    }
    trees.push_back({{"nodes", std::move(nodes)}});
  }
  return {{"version", kModelVersion},
          {"base_value", m.base_value},
          {"n_features", m.n_features},
          {"config", config_to_json(m.config)},
          {"trees", std::move(trees)}};
}

TreeEnsemble from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("version")) throw InputError("model payload has no version");
  if (j.at("version") != kModelVersion)
    throw VersionError("unsupported model version " + j.at("version").dump());
  TreeEnsemble m;
  try {
    m.base_value = j.at("base_value").get<double>();
    m.n_features = j.at("n_features").get<std::size_t>();
    m.config = config_from_json(j.at("config"));
    for (const auto& jt : j.at("trees")) {
      Tree t;
      for (const auto& jn : jt.at("nodes")) {
        Node nd;
        nd.value = jn.at("value").get<double>();
        nd.n_samples = jn.value("n", std::size_t{0});
        if (jn.contains("feature")) {
          nd.feature = jn.at("feature").get<int>();
          nd.threshold = jn.at("threshold").get<double>();
          nd.left = jn.at("left").get<int>();
          nd.right = jn.at("right").get<int>();
        }
        t.nodes.push_back(nd);
      }
      const auto size = static_cast<int>(t.nodes.size());
      if (size == 0) throw InputError("tree with no nodes");
      for (int i = 0; i < size; ++i) {
        const auto& nd = t.nodes[i];
        if (nd.is_leaf()) continue;
        if (nd.left <= i || nd.right <= i || nd.left >= size || nd.right >= size ||
            nd.feature >= static_cast<int>(m.n_features))
          throw InputError("tree node " + std::to_string(i) + " has invalid links");
      }
      m.trees.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed model payload: ") + e.what());
  }
  return m;
}

std::string save(const TreeEnsemble& m) { return to_json(m).dump(); }

TreeEnsemble load(const std::string& payload) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(payload);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("cannot parse model payload: ") + e.what());
  }
  return from_json(j);
}

}  // namespace ala::gbt
