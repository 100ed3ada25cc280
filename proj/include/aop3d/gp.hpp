#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace aop3d::bo {

enum class Kernel { Matern52, SquaredExponential };

struct GpHyper {
  Kernel kernel = Kernel::Matern52;
  double length_scale = 0.5;
  double amplitude = 1.0;
  double jitter = 1e-10;  // initial diagonal jitter, escalated x10 up to kMaxJitter
};

constexpr double kMaxJitter = 1e-4;

// Isotropic stationary kernel evaluated at Euclidean distance r.
double kernel_value(const GpHyper& h, double r);

// Exact zero-mean GP regression for fixed hyperparameters. Rows of X are
// training inputs.
class GaussianProcess {
 public:
  explicit GaussianProcess(GpHyper hyper = {}) : hyper_(hyper) {}

  // Throws NumericError if the covariance stays indefinite at kMaxJitter.
  void fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

  // Posterior mean and variance (variance clamped at 0).
  std::pair<double, double> posterior(const Eigen::VectorXd& x) const;

  double log_marginal_likelihood() const { return lml_; }
  double jitter() const { return jitter_; }
  const GpHyper& hyper() const { return hyper_; }
  std::size_t size() const { return static_cast<std::size_t>(X_.rows()); }

 private:
  GpHyper hyper_;
  Eigen::MatrixXd X_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;
  double jitter_ = 0.0;
  double lml_ = 0.0;
};

inline constexpr double kLengthScaleGrid[] = {0.05, 0.1, 0.2, 0.35, 0.5, 0.75, 1.0, 1.5, 2.0};

// Output shift and scale applied before fitting (scale 1 for constant data).
struct Standardization {
  double mean = 0.0;
  double scale = 1.0;
  static Standardization of(const Eigen::VectorXd& y);
};

// Surrogate used by the optimizer: inputs already in the unit cube, outputs
// standardized before fitting, length scale picked from kLengthScaleGrid by
// log marginal likelihood (first best on ties). With ARD enabled, one
// coordinate sweep over the same grid then refines each dimension's scale.
// Predictions are returned in the original output units.
class GpSurrogate {
 public:
  explicit GpSurrogate(bool ard = true) : ard_(ard) {}
  // norm defaults to the statistics of y.
  void fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Kernel kernel = Kernel::Matern52,
           std::optional<Standardization> norm = std::nullopt);
  std::pair<double, double> posterior(const Eigen::VectorXd& x) const;
  const Eigen::VectorXd& length_scales() const { return ell_; }

 private:
  bool ard_;
  GaussianProcess gp_;
  Eigen::VectorXd ell_;
  double mean_ = 0.0;
  double scale_ = 1.0;
};

}  // namespace aop3d::bo
