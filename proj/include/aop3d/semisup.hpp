#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace aop3d::semisup {

struct ReducedFeatures {
  Eigen::MatrixXd x;                 // n x d projected rows
  double retained = 0;               // explained-variance fraction of the kept components
  std::vector<std::size_t> columns;  // input columns kept (non-constant)
  Eigen::VectorXd mean, scale;       // z-normalization of the kept columns
  Eigen::MatrixXd basis;             // kept-columns x d
  Eigen::VectorXd eigenvalues;       // all of them, descending
};

// Z-normalizes (sample standard deviation), drops constant columns, and keeps
// the smallest number of principal components whose eigenvalue mass reaches
// variance_kept. Each basis vector's largest-magnitude entry is positive.
ReducedFeatures pca_reduce(const Eigen::MatrixXd& features, double variance_kept = 0.95);

struct SeedLabels {
  std::map<std::size_t, int> seeds;  // row index -> class in [0, classes)
  int classes = 0;
};

struct SpreadOptions {
  double alpha = 0.99;
  std::optional<double> gamma;  // default 1 / (2 * median pairwise distance^2)
  std::size_t max_iter = 1000;
  double tol = 1e-9;
};

struct SpreadResult {
  std::vector<int> labels;
  std::vector<double> confidence;  // max(F_i) / sum(F_i)
  std::vector<bool> unreachable;   // no affinity to any other point and not seeded
  Eigen::MatrixXd f;
  double gamma = 0;
  std::size_t iterations = 0;
  std::vector<double> changes;  // max |dF| per iteration
};

double default_gamma(const Eigen::MatrixXd& x);

// Label spreading on a dense RBF graph; memory is O(n^2) in the point count.
// Ties in argmax go to the lowest class; unreachable points get the most
// frequent seed class.
SpreadResult label_spread(const Eigen::MatrixXd& x, const SeedLabels& seeds, const SpreadOptions& opts = {});

// Seeds JSON: {"labels":{"<image>/<id>":classId}}. Class ids may be any
// integers; they are mapped to 0..C-1 in ascending order.
struct SeedFile {
  std::map<std::string, int> labels;
};
SeedFile read_seeds(std::istream& in);
// Resolves keys against `keys`; unknown keys raise a DatasetError. `class_ids`
// receives the original id of each dense class index.
SeedLabels resolve_seeds(const SeedFile& file, const std::vector<std::string>& keys, std::vector<int>& class_ids);

// CSV: image,id,label,confidence,seeded,unreachable
void write_pseudo_labels(const std::vector<std::string>& keys, const SpreadResult& r, const SeedLabels& seeds,
                         const std::vector<int>& class_ids, std::ostream& out);

}  // namespace aop3d::semisup
