#include "aop3d/gp.hpp"

#include <cmath>
#include <numbers>

#include "aop3d/error.hpp"

namespace aop3d::bo {

double kernel_value(const GpHyper& h, double r) {
  const double s = r / h.length_scale;
  switch (h.kernel) {
    case Kernel::SquaredExponential: return h.amplitude * std::exp(-0.5 * s * s);
    case Kernel::Matern52: {
      const double t = std::sqrt(5.0) * s;
      return h.amplitude * (1.0 + t + t * t / 3.0) * std::exp(-t);
    }
  }
  return 0.0;
}

void GaussianProcess::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  const Eigen::Index n = X.rows();
  if (n < 1 || y.size() != n) throw NumericError("GP fit needs at least one point and matching targets");
  X_ = X;
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) K(i, j) = K(j, i) = kernel_value(hyper_, (X.row(i) - X.row(j)).norm());
  for (double jitter = hyper_.jitter;; jitter *= 10.0) {
    Eigen::MatrixXd Kj = K;
    Kj.diagonal().array() += jitter;
    llt_.compute(Kj);
    if (llt_.info() == Eigen::Success) {
      jitter_ = jitter;
      break;
    }
    if (jitter >= kMaxJitter) throw NumericError("GP covariance not positive definite even with jitter 1e-4");
  }
  alpha_ = llt_.solve(y);
  const Eigen::MatrixXd L = llt_.matrixL();
  lml_ = -0.5 * y.dot(alpha_) - L.diagonal().array().log().sum() - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

std::pair<double, double> GaussianProcess::posterior(const Eigen::VectorXd& x) const {
  const Eigen::Index n = X_.rows();
  Eigen::VectorXd k(n);
  for (Eigen::Index i = 0; i < n; ++i) k[i] = kernel_value(hyper_, (X_.row(i).transpose() - x).norm());
  const double mean = k.dot(alpha_);
  const Eigen::VectorXd v = llt_.matrixL().solve(k);
  const double var = kernel_value(hyper_, 0.0) - v.squaredNorm();
  return {mean, std::max(0.0, var)};
}

namespace {

bool try_fit(GaussianProcess& gp, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  try {
    gp.fit(X, y);
    return true;
  } catch (const NumericError&) {
    return false;
  }
}

}  // namespace

Standardization Standardization::of(const Eigen::VectorXd& y) {
  Standardization s;
  if (y.size() == 0) return s;
  s.mean = y.mean();
  if (y.size() > 1) {
    const double var = (y.array() - s.mean).square().sum() / static_cast<double>(y.size());
    if (var > 1e-24) s.scale = std::sqrt(var);
  }
  return s;
}

void GpSurrogate::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Kernel kernel,
                      std::optional<Standardization> norm) {
  const Standardization s = norm ? *norm : Standardization::of(y);
  mean_ = s.mean;
  scale_ = s.scale;
  const Eigen::VectorXd ys = (y.array() - mean_) / scale_;
  auto fit_scaled = [&](const Eigen::VectorXd& ell, GaussianProcess& out) {
    out = GaussianProcess({kernel, 1.0, 1.0, 1e-10});
    return try_fit(out, X * ell.cwiseInverse().asDiagonal(), ys);
  };
  bool have = false;
  const Eigen::Index d = X.cols();
  GaussianProcess candidate;
  for (double ell : kLengthScaleGrid) {
    const Eigen::VectorXd v = Eigen::VectorXd::Constant(d, ell);
    if (!fit_scaled(v, candidate)) continue;
    if (!have || candidate.log_marginal_likelihood() > gp_.log_marginal_likelihood()) {
      gp_ = candidate;
      ell_ = v;
      have = true;
    }
  }
  if (!have) throw NumericError("GP surrogate could not be fitted for any length scale");
  if (!ard_ || d < 2) return;
  for (Eigen::Index j = 0; j < d; ++j) {
    for (double ell : kLengthScaleGrid) {
      if (ell == ell_[j]) continue;
      Eigen::VectorXd v = ell_;
      v[j] = ell;
      if (fit_scaled(v, candidate) && candidate.log_marginal_likelihood() > gp_.log_marginal_likelihood()) {
        gp_ = candidate;
        ell_ = v;
      }
    }
  }
}

std::pair<double, double> GpSurrogate::posterior(const Eigen::VectorXd& x) const {
  const auto [m, v] = gp_.posterior(x.cwiseQuotient(ell_));
  return {mean_ + scale_ * m, scale_ * scale_ * v};
}

}  // namespace aop3d::bo
