#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace ala::gbt {

struct TrainConfig {
  int n_trees = 200;
  int max_depth = 4;
  double learning_rate = 0.1;
  int min_samples_leaf = 2;
  double subsample = 1.0;
  std::uint64_t seed = 0;

  // Throws PreconditionError on out-of-range fields.
  void validate() const;
};

// Dense row-major feature matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

  void push_row(std::span<const double> row);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Internal nodes route x[feature] < threshold to left, else right.
struct Node {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf output (unscaled)
  std::size_t n_samples = 0;

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<Node> nodes;  // nodes[0] is the root

  double eval(std::span<const double> x) const;
  int depth() const;
};

struct TreeEnsemble {
  double base_value = 0.0;
  std::vector<Tree> trees;
  TrainConfig config;
  std::size_t n_features = 0;

  // Prediction using only the first n trees.
  double predict_prefix(std::span<const double> x, std::size_t n) const;
};

// Stagewise squared-error boosting with exact greedy splits.
TreeEnsemble train(const Matrix& x, std::span<const double> y, const TrainConfig& cfg);

double predict(const TreeEnsemble& m, std::span<const double> x);

inline constexpr int kModelVersion = 1;

nlohmann::json to_json(const TreeEnsemble& m);
TreeEnsemble from_json(const nlohmann::json& j);
std::string save(const TreeEnsemble& m);
TreeEnsemble load(const std::string& payload);

nlohmann::json config_to_json(const TrainConfig& cfg);
TrainConfig config_from_json(const nlohmann::json& j);

}  // namespace ala::gbt
