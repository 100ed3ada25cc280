#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace aop3d::bo {

struct ForestOptions {
  std::size_t trees = 32;
  // Features tried per split; 0 means ceil(5/6 * d).
  std::size_t max_features = 0;
  std::size_t min_samples_split = 2;
  std::uint64_t seed = 0;
};

constexpr double kForestVarianceFloor = 1e-6;

// Bootstrap regression forest. Each tree grows to full depth: a node becomes
// a leaf when its targets are all equal, its inputs are all identical, or it
// has fewer than min_samples_split samples. Splits minimize the summed squared
// error; ties go to the lower feature index, then the lower threshold.
class RandomForest {
 public:
  explicit RandomForest(ForestOptions opts = {}) : opts_(opts) {}

  void fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

  // Mean of the per-tree predictions; variance across trees plus
  // kForestVarianceFloor.
  std::pair<double, double> posterior(const Eigen::VectorXd& x) const;
  std::vector<double> tree_predictions(const Eigen::VectorXd& x) const;

  // Training-row indices drawn for each tree.
  const std::vector<std::vector<std::size_t>>& bootstraps() const { return bootstraps_; }
  const ForestOptions& options() const { return opts_; }

 private:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::size_t left = 0, right = 0;
    double value = 0.0;
  };
  using Tree = std::vector<Node>;

  std::size_t build(Tree& tree, std::vector<std::size_t>& rows, std::size_t features_per_split, std::uint64_t& draw,
                    std::uint64_t tree_seed);
  static double predict(const Tree& tree, const Eigen::VectorXd& x);

  ForestOptions opts_;
  Eigen::MatrixXd X_;
  Eigen::VectorXd y_;
  std::vector<Tree> trees_;
  std::vector<std::vector<std::size_t>> bootstraps_;
};

}  // namespace aop3d::bo
