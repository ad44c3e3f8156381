#pragma once

#include <cstddef>
#include <span>
#include <stop_token>
#include <string>
#include <vector>

#include "spotune/common.hpp"
#include "spotune/data.hpp"

namespace spotune {

// Targets are passed as doubles: class codes 0..K-1 for classification.

// (sum_j |a_j - b_j|^p)^(1/p)
double minkowski_distance(std::span<const double> a, std::span<const double> b, double p);

// Majority class (classification) or mean target (regression) of the k
// Minkowski-nearest training rows. Equidistant neighbours and tied votes go
// to the smallest training-row index. Throws ConfigError if k > rows.
std::vector<double> knn_predict(const DenseMatrix& train_x, std::span<const double> train_y, TaskType type,
                                const DenseMatrix& queries, int k, double p, std::stop_token stop = {});

struct CartParams {
  int minsplit = 20;
  int minbucket = 7;
  double cp = 0.01;
  int maxdepth = 30;
};

struct CartNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;  // rows with x <= threshold go left
  int left = -1;
  int right = -1;
  std::size_t n = 0;
  int depth = 0;  // root is depth 0
  double risk = 0.0;  // Gini * n or sum of squared errors
  double prediction = 0.0;
  double improvement = 0.0;  // risk reduction of this node's split

  bool is_leaf() const { return feature < 0; }
};

class CartTree {
 public:
  TaskType type = TaskType::Classification;
  std::vector<CartNode> nodes;  // nodes[0] is the root
  double root_risk = 0.0;

  std::size_t split_count() const;
  int depth() const;
  double predict(std::span<const double> row) const;
  std::vector<double> predict(const DenseMatrix& x) const;
  // Indented if/else rules; feature_names may be empty.
  std::string to_rules(const std::vector<std::string>& feature_names = {}) const;
};

// Greedy binary splitting. A node is split only if it holds at least minsplit
// rows, both children keep at least minbucket rows, the children stay within
// maxdepth, and the risk reduction exceeds cp times the root risk.
CartTree cart_fit(const DenseMatrix& x, std::span<const double> y, TaskType type, const CartParams& params,
                  std::stop_token stop = {});

inline std::vector<double> cart_predict(const CartTree& tree, const DenseMatrix& x) { return tree.predict(x); }

}  // namespace spotune
