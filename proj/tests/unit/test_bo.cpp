#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "aop3d/acquisition.hpp"
#include "aop3d/forest.hpp"
#include "aop3d/gp.hpp"
#include "aop3d/optimizer.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace aop3d;
using namespace aop3d::bo;

TEST_CASE("GP interpolates and matches the closed-form one-point case") {
  GpHyper h;
  h.kernel = Kernel::SquaredExponential;
  h.length_scale = 1.0;
  GaussianProcess gp(h);
  Eigen::MatrixXd X(1, 1);
  X << 0.0;
  Eigen::VectorXd y(1);
  y << 2.0;
  gp.fit(X, y);
  Eigen::VectorXd q(1);
  q << 1.0;
  const auto [m, v] = gp.posterior(q);
  CHECK(m == doctest::Approx(2.0 * std::exp(-0.5)).epsilon(1e-9));
  CHECK(v == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-9));

  SplitMix64 rng(2);
  Eigen::MatrixXd X5(5, 2);
  Eigen::VectorXd y5(5);
  for (int i = 0; i < 5; ++i) {
    X5(i, 0) = rng.uniform();
    X5(i, 1) = rng.uniform();
    y5(i) = rng.normal();
  }
  GaussianProcess g5;
  g5.fit(X5, y5);
  for (int i = 0; i < 5; ++i) {
    const auto [mi, vi] = g5.posterior(X5.row(i).transpose());
    CHECK(mi == doctest::Approx(y5(i)).epsilon(1e-6));
    CHECK(vi <= 1e-9);
  }
}

TEST_CASE("GP posterior agrees with the dense oracle") {
  SplitMix64 rng(8);
  for (Kernel k : {Kernel::Matern52, Kernel::SquaredExponential}) {
    const int n = 30, d = 3;
    Eigen::MatrixXd X(n, d);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) X(i, j) = rng.uniform();
      y(i) = std::sin(3 * X(i, 0)) + X(i, 1) * X(i, 2);
    }
    GpHyper h{k, 0.35, 1.3, 1e-10};
    GaussianProcess gp(h);
    gp.fit(X, y);
    for (int t = 0; t < 20; ++t) {
      Eigen::VectorXd q(d);
      for (int j = 0; j < d; ++j) q(j) = rng.uniform();
      const auto [m, v] = gp.posterior(q);
      const auto [om, ov] = oracle::gp_posterior(h, X, y, q, gp.jitter());
      CHECK(std::abs(m - om) < 1e-8);
      CHECK(std::abs(v - std::max(0.0, ov)) < 1e-8);
    }
  }
}

TEST_CASE("duplicate inputs are tolerated by the surrogate") {
  Eigen::MatrixXd X(3, 1);
  X << 0.2, 0.2, 0.8;
  Eigen::VectorXd y(3);
  y << 1.0, 1.0, 0.0;
  GpSurrogate s;
  s.fit(X, y);
  Eigen::VectorXd q(1);
  q << 0.2;
  CHECK(s.posterior(q).first == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("expected improvement") {
  CHECK(expected_improvement(0.5, 0.0, 0.5, 0.0) == 0.0);
  CHECK(expected_improvement(0.8, 0.0, 0.5, 0.0) == doctest::Approx(0.3));
  CHECK(expected_improvement(0.0, 1.0, 0.0, 0.0) == doctest::Approx(1.0 / std::sqrt(2 * std::numbers::pi)));
  CHECK(expected_improvement(-5.0, 0.01, 0.0) >= 0.0);
  CHECK_THROWS(expected_improvement(0.0, -1.0, 0.0));
}

TEST_CASE("forest basics") {
  Eigen::MatrixXd X(4, 2);
  X << 0, 0, 0, 1, 1, 0, 1, 1;
  Eigen::VectorXd y = Eigen::VectorXd::Constant(4, 0.7);
  RandomForest f({8, 0, 2, 3});
  f.fit(X, y);
  const auto [m, v] = f.posterior(Eigen::Vector2d(0.3, 0.9));
  CHECK(m == doctest::Approx(0.7));
  CHECK(v == doctest::Approx(kForestVarianceFloor));

  Eigen::MatrixXd X1(1, 2);
  X1 << 0.5, 0.5;
  Eigen::VectorXd y1(1);
  y1 << 4.0;
  RandomForest one({1, 0, 2, 9});
  one.fit(X1, y1);
  CHECK(one.posterior(X1.row(0).transpose()).first == 4.0);
}

TEST_CASE("forest matches a brute-force reference on three points") {
  const double xs[3] = {0.0, 0.5, 1.0};
  const double ys[3] = {1.0, 3.0, 2.0};
  Eigen::MatrixXd X(3, 1);
  Eigen::VectorXd y(3);
  for (int i = 0; i < 3; ++i) {
    X(i, 0) = xs[i];
    y(i) = ys[i];
  }
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    RandomForest f({16, 0, 2, seed});
    f.fit(X, y);
    REQUIRE(f.bootstraps().size() == 16);
    for (double q : {0.0, 0.2, 0.25, 0.5, 0.75, 0.9, 1.0}) {
      // A fully grown tree on distinct 1-D inputs returns the target of the
      // nearest bootstrapped input; midpoint ties fall to the lower side.
      std::vector<double> preds;
      for (const auto& b : f.bootstraps()) {
        double best_d = INFINITY, pred = 0;
        for (int i = 0; i < 3; ++i) {
          if (std::find(b.begin(), b.end(), std::size_t(i)) == b.end()) continue;
          const double dist = std::abs(q - xs[i]);
          if (dist < best_d) {
            best_d = dist;
            pred = ys[i];
          }
        }
        preds.push_back(pred);
      }
      double mean = 0, var = 0;
      for (double p : preds) mean += p;
      mean /= double(preds.size());
      for (double p : preds) var += (p - mean) * (p - mean);
      var = var / double(preds.size()) + kForestVarianceFloor;
      Eigen::VectorXd qv(1);
      qv << q;
      const auto [m, v] = f.posterior(qv);
      CHECK(m == doctest::Approx(mean).epsilon(1e-12));
      CHECK(v == doctest::Approx(var).epsilon(1e-12));
    }
  }
}

namespace {

SearchSpace line_space() {
  SearchSpace s;
  s.add_continuous("theta", 0.0, 1.0);
  return s;
}

double parabola(const Config& c) { return -(c[0] - 0.3) * (c[0] - 0.3); }

}  // namespace

TEST_CASE("bayes finds the parabola peak") {
  OptimizeOptions o;
  o.budget = 30;
  o.seed = 1;
  const auto t = optimize(line_space(), parabola, o);
  CHECK(t.trials.size() == 30);
  CHECK(std::abs(t.best_trial().config[0] - 0.3) < 0.05);
  for (std::size_t i = 0; i < t.trials.size(); ++i) {
    CHECK(t.trials[i].iteration == i);
    CHECK(*t.trials[i].objective == parabola(t.trials[i].config));
  }

  o.budget = 1;
  const auto one = optimize(line_space(), parabola, o);
  REQUIRE(one.trials.size() == 1);
  CHECK(one.trials[0].config == initial_design(line_space(), o.lhs_points, o.seed).front());
}

TEST_CASE("random strategy and resume are deterministic") {
  OptimizeOptions o;
  o.budget = 12;
  o.seed = 5;
  o.strategy = Strategy::Random;
  const auto a = optimize(line_space(), parabola, o);
  const auto b = optimize(line_space(), parabola, o);
  for (std::size_t i = 0; i < 12; ++i) CHECK(a.trials[i].config == b.trials[i].config);

  SearchSpace mixed;
  mixed.add_categorical("m", {"a", "b"}).add_continuous("x", 0, 1).add_integer("k", -3, 3);
  const Objective f = [](const Config& c) { return c[0] - (c[1] - 0.6) * (c[1] - 0.6) - 0.01 * c[2] * c[2]; };
  OptimizeOptions g;
  g.budget = 24;
  g.seed = 7;
  const auto full = optimize(mixed, f, g);
  std::vector<Trial> head(full.trials.begin(), full.trials.begin() + 17);
  const auto resumed = optimize(mixed, f, g, head);
  REQUIRE(resumed.trials.size() == 24);
  for (std::size_t i = 0; i < 24; ++i) CHECK(resumed.trials[i].config == full.trials[i].config);
  for (const auto& t : full.trials) CHECK(t.config[2] == std::round(t.config[2]));
}

TEST_CASE("failed trials are recorded and skipped") {
  int calls = 0;
  const Objective f = [&](const Config& c) {
    if (++calls % 3 == 0) throw TrialFailed("boom");
    return c[0];
  };
  OptimizeOptions o;
  o.budget = 15;
  const auto t = optimize(line_space(), f, o);
  CHECK(t.trials.size() == 15);
  int failed = 0;
  for (const auto& tr : t.trials) failed += !tr.objective.has_value();
  CHECK(failed == 5);
  CHECK(t.best_trial().objective.has_value());
  const Objective nan = [](const Config&) { return std::nan(""); };
  o.budget = 3;
  const auto n = optimize(line_space(), nan, o);
  CHECK_FALSE(n.best.has_value());
}

TEST_CASE("forest optimizer over a discrete space") {
  SearchSpace s;
  s.add_categorical("a", {"p", "q", "r"}).add_categorical("b", {"u", "v"}).add_integer("c", 0, 3);
  CHECK(s.discrete_size() == 24);
  const Objective f = [](const Config& c) { return (c[0] == 2 && c[1] == 1 && c[2] == 1) ? 1.0 : 0.1 * c[2]; };
  OptimizeOptions o;
  o.budget = 24;
  o.seed = 3;
  const auto t = optimize(s, f, o);
  CHECK(*t.best_trial().objective == 1.0);
}

TEST_CASE("trace JSON lines round trip and torn tails") {
  SearchSpace s;
  s.add_categorical("m", {"a", "b"}).add_continuous("x", 0, 1);
  std::vector<Trial> trials{{0, {1, 0.25}, 0.5, ""}, {1, {0, 0.75}, std::nullopt, "bad"}};
  const auto dir = fixture::temp_dir("trace");
  const auto path = (dir / "trace.jsonl").string();
  for (const auto& t : trials) append_trial(s, t, path);
  {
    std::ofstream out(path, std::ios::app);
    out << R"({"iteration":2,"config":{"m":"a")";
  }
  const auto back = read_trace(s, path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].config == trials[0].config);
  CHECK(*back[0].objective == 0.5);
  CHECK_FALSE(back[1].objective.has_value());
  CHECK(back[1].error == "bad");
  std::ostringstream os;
  write_trace(s, trials, os);
  CHECK(os.str().find(R"("config":{"m":"b","x":0.25})") != std::string::npos);
}
