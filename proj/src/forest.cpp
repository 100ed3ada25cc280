#include "aop3d/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "aop3d/error.hpp"
#include "aop3d/rng.hpp"

namespace aop3d::bo {

void RandomForest::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() < 1 || y.size() != X.rows()) throw NumericError("forest fit needs at least one sample");
  X_ = X;
  y_ = y;
  trees_.clear();
  bootstraps_.clear();
  const auto n = static_cast<std::size_t>(X.rows());
  const auto d = static_cast<std::size_t>(X.cols());
  std::size_t per_split = opts_.max_features == 0 ? static_cast<std::size_t>(std::ceil(5.0 * d / 6.0)) : opts_.max_features;
  per_split = std::clamp<std::size_t>(per_split, 1, std::max<std::size_t>(d, 1));
  for (std::size_t t = 0; t < opts_.trees; ++t) {
    SplitMix64 rng = SplitMix64::stream(opts_.seed, t, 0);
    std::vector<std::size_t> rows(n);
    for (auto& r : rows) r = rng.below(n);
    std::sort(rows.begin(), rows.end());
    bootstraps_.push_back(rows);
    Tree tree;
    std::uint64_t draw = 0;
    build(tree, rows, per_split, draw, SplitMix64::mix(opts_.seed ^ (t + 1) * SplitMix64::kGamma));
    trees_.push_back(std::move(tree));
  }
}

std::size_t RandomForest::build(Tree& tree, std::vector<std::size_t>& rows, std::size_t per_split,
                                std::uint64_t& draw, std::uint64_t tree_seed) {
  const std::size_t id = tree.size();
  tree.emplace_back();
  double sum = 0.0;
  for (auto r : rows) sum += y_[r];
  tree[id].value = sum / static_cast<double>(rows.size());

  const bool same_y = std::all_of(rows.begin(), rows.end(), [&](std::size_t r) { return y_[r] == y_[rows[0]]; });
  const bool same_x = std::all_of(rows.begin(), rows.end(), [&](std::size_t r) { return X_.row(r) == X_.row(rows[0]); });
  if (rows.size() < opts_.min_samples_split || same_y || same_x) return id;

  const auto d = static_cast<std::size_t>(X_.cols());
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  SplitMix64 rng = SplitMix64::stream(tree_seed, draw++);
  for (std::size_t i = 0; i < per_split && i + 1 < d; ++i) std::swap(order[i], order[i + rng.below(d - i)]);
  std::vector<std::size_t> subset(order.begin(), order.begin() + std::min(per_split, d));
  std::vector<std::size_t> rest(order.begin() + std::min(per_split, d), order.end());
  std::sort(subset.begin(), subset.end());
  std::sort(rest.begin(), rest.end());

  int best_feature = -1;
  double best_threshold = 0.0, best_sse = INFINITY;
  std::vector<std::size_t> sorted = rows;
  auto search = [&](const std::vector<std::size_t>& features) {
    for (auto f : features) {
      std::stable_sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) { return X_(a, f) < X_(b, f); });
      const std::size_t m = sorted.size();
      std::vector<double> prefix(m + 1, 0.0), prefix2(m + 1, 0.0);
      for (std::size_t i = 0; i < m; ++i) {
        prefix[i + 1] = prefix[i] + y_[sorted[i]];
        prefix2[i + 1] = prefix2[i] + y_[sorted[i]] * y_[sorted[i]];
      }
      for (std::size_t i = 1; i < m; ++i) {
        const double lo = X_(sorted[i - 1], f), hi = X_(sorted[i], f);
        if (!(lo < hi)) continue;
        const double nl = static_cast<double>(i), nr = static_cast<double>(m - i);
        const double sl = prefix[i], sr = prefix[m] - prefix[i];
        const double sse = (prefix2[i] - sl * sl / nl) + (prefix2[m] - prefix2[i] - sr * sr / nr);
        if (sse < best_sse) {
          best_sse = sse;
          best_feature = static_cast<int>(f);
          best_threshold = 0.5 * (lo + hi);
        }
      }
    }
  };
  search(subset);
  if (best_feature < 0) search(rest);
  if (best_feature < 0) return id;

  std::vector<std::size_t> left, right;
  for (auto r : rows) (X_(r, best_feature) <= best_threshold ? left : right).push_back(r);
  tree[id].feature = best_feature;
  tree[id].threshold = best_threshold;
  const std::size_t l = build(tree, left, per_split, draw, tree_seed);
  const std::size_t r = build(tree, right, per_split, draw, tree_seed);
  tree[id].left = l;
  tree[id].right = r;
  return id;
}

double RandomForest::predict(const Tree& tree, const Eigen::VectorXd& x) {
  std::size_t node = 0;
  while (tree[node].feature >= 0) node = x[tree[node].feature] <= tree[node].threshold ? tree[node].left : tree[node].right;
  return tree[node].value;
}

std::vector<double> RandomForest::tree_predictions(const Eigen::VectorXd& x) const {
  std::vector<double> out;
  out.reserve(trees_.size());
  for (const auto& t : trees_) out.push_back(predict(t, x));
  return out;
}

std::pair<double, double> RandomForest::posterior(const Eigen::VectorXd& x) const {
  if (trees_.empty()) throw NumericError("forest is not fitted");
  const auto preds = tree_predictions(x);
  const double n = static_cast<double>(preds.size());
  const double mean = std::accumulate(preds.begin(), preds.end(), 0.0) / n;
  double var = 0.0;
  for (double p : preds) var += (p - mean) * (p - mean);
  return {mean, var / n + kForestVarianceFloor};
}

}  // namespace aop3d::bo
