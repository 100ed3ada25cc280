#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "aop3d/acquisition.hpp"
#include "aop3d/error.hpp"
#include "aop3d/search_space.hpp"

namespace aop3d::bo {

enum class Strategy { Bayes, Random };
enum class SurrogateKind { Auto, Gp, Forest };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

struct Trial {
  std::size_t iteration = 0;
  Config config;
  std::optional<double> objective;  // empty for failed trials
  std::string error;
};

struct Trace {
  std::vector<Trial> trials;
  std::optional<std::size_t> best;  // index into trials
  std::uint64_t seed = 0;
  Strategy strategy = Strategy::Bayes;

  const Trial& best_trial() const;
};

// Thrown by an objective to mark the current trial as failed. Any other
// exception aborts the optimization.
class TrialFailed : public Error {
 public:
  using Error::Error;
};

using Objective = std::function<double(const Config&)>;

struct OptimizeOptions {
  std::size_t budget = 120;
  Strategy strategy = Strategy::Bayes;
  std::uint64_t seed = 0;
  // Auto picks the GP when the space has a continuous dimension, else the
  // random forest.
  SurrogateKind surrogate = SurrogateKind::Auto;
  double xi = kDefaultXi;
  std::size_t candidates = 2048;
  std::size_t lhs_points = 7;   // per categorical partition, GP mode
  std::size_t forest_init = 5;  // random configs before the forest takes over
  std::size_t forest_trees = 32;
  std::function<void(const Trial&)> on_trial;
};

// Runs exactly opts.budget evaluations (minus any trials already present in
// `resume`, which are kept as-is). Each iteration draws its randomness from
// its own stream so a resumed run matches an uninterrupted one.
Trace optimize(const SearchSpace& space, const Objective& objective, const OptimizeOptions& opts,
               const std::vector<Trial>& resume = {});

// Initial design for GP mode: the zero vector of every partition, then the
// Latin-hypercube points interleaved across partitions.
std::vector<Config> initial_design(const SearchSpace& space, std::size_t lhs_points, std::uint64_t seed);

// JSON-lines trace: one object per trial,
// {"iteration":i,"config":{...},"objective":x|null,"error":"..."}.
nlohmann::ordered_json trial_to_json(const SearchSpace& space, const Trial& t);
Trial trial_from_json(const SearchSpace& space, const nlohmann::json& j);
void write_trace(const SearchSpace& space, const std::vector<Trial>& trials, std::ostream& out);
void append_trial(const SearchSpace& space, const Trial& t, const std::string& path);
std::vector<Trial> read_trace(const SearchSpace& space, const std::string& path);

}  // namespace aop3d::bo
