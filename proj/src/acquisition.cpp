#include "aop3d/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "aop3d/error.hpp"

namespace aop3d::bo {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

double expected_improvement(double mean, double variance, double best, double xi) {
  if (variance < 0.0) throw ParameterError("expected_improvement needs variance >= 0");
  const double gain = mean - best - xi;
  const double sigma = std::sqrt(variance);
  if (sigma == 0.0) return std::max(0.0, gain);
  const double z = gain / sigma;
  return std::max(0.0, gain * normal_cdf(z) + sigma * normal_pdf(z));
}

}  // namespace aop3d::bo
