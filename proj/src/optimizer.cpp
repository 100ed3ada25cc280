#include "aop3d/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <Eigen/Core>

#include "aop3d/forest.hpp"
#include "aop3d/gp.hpp"

namespace aop3d::bo {

namespace {

constexpr std::uint64_t kLhsStream = 0x4c4853;
constexpr std::uint64_t kForestStream = 0x464f52;

Eigen::VectorXd to_vector(const std::vector<double>& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()); }

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows, std::size_t cols) {
  Eigen::MatrixXd m(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = rows[i][j];
  return m;
}

std::optional<std::size_t> best_index(const std::vector<Trial>& trials) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < trials.size(); ++i)
    if (trials[i].objective && (!best || *trials[i].objective > *trials[*best].objective)) best = i;
  return best;
}

Config zero_config(const SearchSpace& space, std::size_t partition) {
  Config c(space.size(), 0.0);
  for (auto i : space.numeric_dims()) c[i] = std::clamp(0.0, space.dims()[i].lo, space.dims()[i].hi);
  space.assign_partition(partition, c);
  return c;
}

// GP proposal: best EI over all partitions, each scored on its own fitted GP.
Config propose_gp(const SearchSpace& space, const std::vector<Trial>& trials, const OptimizeOptions& opts,
                  std::size_t iteration) {
  const auto numeric = space.numeric_dims();
  const std::size_t d = numeric.size();
  const double incumbent = *trials[*best_index(trials)].objective;
  // Every partition scores the same objective, so the prior mean and
  // amplitude are pooled over all successful trials.
  std::vector<double> all;
  for (const auto& t : trials)
    if (t.objective) all.push_back(*t.objective);
  const Eigen::VectorXd pooled = to_vector(all);
  const Standardization norm = Standardization::of(pooled);
  std::optional<Config> best_config;
  double best_ei = -1.0;
  for (std::size_t p = 0; p < space.partition_count(); ++p) {
    // Identical configs carry identical objectives; keep the first copy so
    // the covariance stays well conditioned.
    std::map<std::vector<double>, double> points;
    for (const auto& t : trials)
      if (t.objective && space.partition_of(t.config) == p) points.try_emplace(space.to_unit(t.config), *t.objective);
    if (points.empty() || d == 0) continue;
    std::vector<std::vector<double>> xs;
    Eigen::VectorXd ys(points.size());
    for (const auto& [x, y] : points) {
      ys[xs.size()] = y;
      xs.push_back(x);
    }
    GpSurrogate gp;
    gp.fit(to_matrix(xs, d), ys, Kernel::Matern52, norm);
    SplitMix64 rng = SplitMix64::stream(opts.seed, iteration, p + 1);
    for (std::size_t k = 0; k < opts.candidates; ++k) {
      std::vector<double> u(d);
      for (auto& v : u) v = rng.uniform();
      Config c(space.size(), 0.0);
      space.assign_partition(p, c);
      space.from_unit(u, c);
      const auto [mean, var] = gp.posterior(to_vector(space.to_unit(c)));
      const double ei = expected_improvement(mean, var, incumbent, opts.xi);
      if (ei > best_ei) {
        best_ei = ei;
        best_config = c;
      }
    }
  }
  if (!best_config) {
    SplitMix64 rng = SplitMix64::stream(opts.seed, iteration);
    return space.sample(rng);
  }
  return *best_config;
}

Config propose_forest(const SearchSpace& space, const std::vector<Trial>& trials, const OptimizeOptions& opts,
                      std::size_t iteration) {
  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  for (const auto& t : trials)
    if (t.objective) {
      xs.push_back(space.encode(t.config));
      ys.push_back(*t.objective);
    }
  if (xs.size() < 2) {
    SplitMix64 rng = SplitMix64::stream(opts.seed, iteration);
    return space.sample(rng);
  }
  const std::size_t d = xs[0].size();
  ForestOptions fo;
  fo.trees = opts.forest_trees;
  fo.seed = SplitMix64::stream(opts.seed, iteration, kForestStream).next();
  RandomForest forest(fo);
  forest.fit(to_matrix(xs, d), to_vector(ys));
  const double incumbent = *std::max_element(ys.begin(), ys.end());

  std::vector<Config> candidates;
  const auto total = space.discrete_size();
  SplitMix64 rng = SplitMix64::stream(opts.seed, iteration, 1);
  if (total > 0 && total <= opts.candidates) {
    // Enumerable space: only configs not tried yet, unless all of them were.
    std::set<Config> seen;
    for (const auto& t : trials) seen.insert(t.config);
    for (std::uint64_t i = 0; i < total; ++i) {
      auto c = space.discrete_config(i);
      if (!seen.count(c)) candidates.push_back(std::move(c));
    }
    if (candidates.empty())
      for (std::uint64_t i = 0; i < total; ++i) candidates.push_back(space.discrete_config(i));
    // Random order so EI ties do not always fall on the same config.
    for (std::size_t k = candidates.size(); k > 1; --k) std::swap(candidates[k - 1], candidates[rng.below(k)]);
  } else {
    for (std::size_t k = 0; k < opts.candidates; ++k) candidates.push_back(space.sample(rng));
  }
  std::size_t best = 0;
  double best_ei = -1.0;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const auto [mean, var] = forest.posterior(to_vector(space.encode(candidates[k])));
    const double ei = expected_improvement(mean, var, incumbent, opts.xi);
    if (ei > best_ei) {
      best_ei = ei;
      best = k;
    }
  }
  return candidates[best];
}

}  // namespace

std::string to_string(Strategy s) { return s == Strategy::Bayes ? "bayes" : "random"; }

Strategy strategy_from_string(const std::string& s) {
  if (s == "bayes") return Strategy::Bayes;
  if (s == "random") return Strategy::Random;
  throw ParameterError("strategy must be 'bayes' or 'random', got '" + s + "'");
}

const Trial& Trace::best_trial() const {
  if (!best) throw NumericError("trace has no successful trial");
  return trials.at(*best);
}

std::vector<Config> initial_design(const SearchSpace& space, std::size_t lhs_points, std::uint64_t seed) {
  const std::size_t parts = space.partition_count();
  const auto numeric = space.numeric_dims();
  std::vector<Config> out;
  for (std::size_t p = 0; p < parts; ++p) out.push_back(zero_config(space, p));
  if (numeric.empty()) return out;
  std::vector<std::vector<Config>> lhs(parts);
  for (std::size_t p = 0; p < parts; ++p) {
    SplitMix64 rng = SplitMix64::stream(seed, kLhsStream, p);
    std::vector<std::vector<double>> units(lhs_points, std::vector<double>(numeric.size()));
    for (std::size_t j = 0; j < numeric.size(); ++j) {
      std::vector<std::size_t> perm(lhs_points);
      for (std::size_t i = 0; i < lhs_points; ++i) perm[i] = i;
      for (std::size_t i = lhs_points; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
      for (std::size_t i = 0; i < lhs_points; ++i)
        units[i][j] = (static_cast<double>(perm[i]) + rng.uniform()) / static_cast<double>(lhs_points);
    }
    for (const auto& u : units) {
      Config c(space.size(), 0.0);
      space.assign_partition(p, c);
      space.from_unit(u, c);
      lhs[p].push_back(c);
    }
  }
  for (std::size_t i = 0; i < lhs_points; ++i)
    for (std::size_t p = 0; p < parts; ++p) out.push_back(lhs[p][i]);
  return out;
}

Trace optimize(const SearchSpace& space, const Objective& objective, const OptimizeOptions& opts,
               const std::vector<Trial>& resume) {
  space.validate();
  if (opts.budget < 1) throw ParameterError("budget must be at least 1");
  if (resume.size() > opts.budget) throw ParameterError("resumed trace is longer than the budget");
  const bool use_gp = opts.surrogate == SurrogateKind::Gp ||
                      (opts.surrogate == SurrogateKind::Auto && space.has_continuous());

  Trace trace;
  trace.seed = opts.seed;
  trace.strategy = opts.strategy;
  for (std::size_t i = 0; i < resume.size(); ++i) {
    if (resume[i].iteration != i) throw ParameterError("resumed trace iterations must be 0, 1, 2, ...");
    space.check(resume[i].config);
    trace.trials.push_back(resume[i]);
  }

  std::vector<Config> design;
  if (opts.strategy == Strategy::Bayes && use_gp) design = initial_design(space, opts.lhs_points, opts.seed);

  for (std::size_t t = trace.trials.size(); t < opts.budget; ++t) {
    Config config;
    if (opts.strategy == Strategy::Random) {
      SplitMix64 rng = SplitMix64::stream(opts.seed, t);
      config = space.sample(rng);
    } else if (use_gp) {
      if (t < design.size()) {
        config = design[t];
      } else if (best_index(trace.trials)) {
        config = propose_gp(space, trace.trials, opts, t);
      } else {
        SplitMix64 rng = SplitMix64::stream(opts.seed, t);
        config = space.sample(rng);
      }
    } else if (t < opts.forest_init) {
      SplitMix64 rng = SplitMix64::stream(opts.seed, t);
      config = space.sample(rng);
    } else {
      config = propose_forest(space, trace.trials, opts, t);
    }

    Trial trial;
    trial.iteration = t;
    trial.config = config;
    try {
      const double y = objective(config);
      if (std::isfinite(y)) {
        trial.objective = y;
      } else {
        trial.error = "objective returned a non-finite value";
      }
    } catch (const TrialFailed& e) {
      trial.error = e.what();
    }
    trace.trials.push_back(trial);
    if (opts.on_trial) opts.on_trial(trial);
  }
  trace.best = best_index(trace.trials);
  return trace;
}

}  // namespace aop3d::bo
