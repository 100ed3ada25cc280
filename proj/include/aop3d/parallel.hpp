#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace aop3d {

// Worker count: AOP3D_THREADS if set to a positive integer, otherwise the
// hardware concurrency (at least 1).
std::size_t thread_count();

// Runs fn(i) for i in [0, n) on up to thread_count() threads. The first
// exception thrown (lowest index) is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// Neumaier compensated sum in index order.
double compensated_sum(std::span<const double> values);

}  // namespace aop3d
