#include <cstdlib>

#include "aop3d/design.hpp"
#include "doctest.h"

using namespace aop3d;
using namespace aop3d::design;

namespace {

DesignSpaceSpec mock_spec(std::uint64_t seed) {
  return spec_from_json(nlohmann::ordered_json::parse(R"({
    "dims": {"head": ["slice", "volume"], "pretraining": ["full", "semi", "none"],
             "preprocessing": ["mask", "distance"]},
    "command": ")" MOCK_TRAINER R"( {config}", "budget": 15, "seed": )" + std::to_string(seed) + "}"));
}

}  // namespace

TEST_CASE("spec parsing and validation") {
  const auto s = mock_spec(1);
  REQUIRE(s.dims.size() == 3);
  CHECK(s.dims[0].first == "head");
  CHECK(s.dims[2].second == std::vector<std::string>{"mask", "distance"});
  CHECK(design_space(s).discrete_size() == 12);
  auto bad = s;
  bad.command = "train.sh";
  CHECK_THROWS_AS(validate(bad), ParameterError);
  bad = s;
  bad.dims[1].second.clear();
  CHECK_THROWS_AS(validate(bad), ParameterError);
}

TEST_CASE("objective parsing") {
  CHECK(parse_objective("log line\n{\"objective\": 0.25}\n\n") == 0.25);
  CHECK_THROWS(parse_objective("0.25\n"));
  CHECK_THROWS(parse_objective(""));
  const auto r = run_command("echo out; echo err 1>&2; exit 4");
  CHECK(r.exit_code == 4);
  CHECK(r.out == "out\n");
  CHECK(r.err == "err\n");
}

TEST_CASE("mock trainer optimum is found and runs are repeatable") {
  const auto space = design_space(mock_spec(0));
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    const auto t = optimize_design(mock_spec(seed));
    REQUIRE(t.trials.size() == 15);
    const auto& best = t.best_trial();
    CHECK(*best.objective == 1.0);
    const auto cfg = space.config_to_json(best.config);
    CHECK(cfg["head"] == "volume");
    CHECK(cfg["preprocessing"] == "mask");
  }
  const auto a = optimize_design(mock_spec(4)), b = optimize_design(mock_spec(4));
  for (std::size_t i = 0; i < a.trials.size(); ++i) CHECK(a.trials[i].config == b.trials[i].config);
}

TEST_CASE("every trial failing") {
  setenv("MOCK_FAIL", "1", 1);
  auto s = mock_spec(0);
  s.budget = 4;
  const auto t = optimize_design(s);
  unsetenv("MOCK_FAIL");
  CHECK(t.trials.size() == 4);
  CHECK_FALSE(t.best.has_value());
  for (const auto& tr : t.trials) {
    CHECK_FALSE(tr.objective.has_value());
    CHECK(tr.error.find("forced failure") != std::string::npos);
  }
}
