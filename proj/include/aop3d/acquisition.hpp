#pragma once

namespace aop3d::bo {

constexpr double kDefaultXi = 0.01;

// Expected improvement of a maximization candidate over the incumbent `best`.
double expected_improvement(double mean, double variance, double best, double xi = kDefaultXi);

double normal_cdf(double z);
double normal_pdf(double z);

}  // namespace aop3d::bo
