#include "aop3d/metrics.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace aop3d;
using namespace aop3d::metrics;
using fixture::fill_box;

namespace {

LabelVolume three_cubes() {
  LabelVolume v(Shape{12, 12, 12});
  fill_box(v, 0, 0, 0, 3, 3, 3, 1);
  fill_box(v, 5, 5, 5, 8, 8, 8, 2);
  fill_box(v, 9, 0, 9, 12, 3, 12, 3);
  return v;
}

}  // namespace

TEST_CASE("identity") {
  const auto gt = three_cubes();
  const auto m = match_instances(gt, gt, 0.5);
  CHECK(m.tp.size() == 3);
  for (const auto& [g, ps] : m.groups) CHECK(ps.size() == 1);
  for (const auto& [g, u] : m.union_iou) CHECK(u == 1.0);
  const auto r = compute_ipq(m);
  CHECK(r.sq == 1.0);
  CHECK(r.rq == 1.0);
  CHECK(r.iq == 1.0);
  CHECK(r.ipq == 1.0);
  CHECK(r.pq == 1.0);
}

TEST_CASE("splitting is only penalized by IQ") {
  LabelVolume gt(Shape{4, 4, 6});
  fill_box(gt, 0, 0, 0, 4, 4, 6, 1);
  auto two = gt;
  fill_box(two, 0, 0, 3, 4, 4, 6, 2);
  auto r = evaluate(two, gt);
  CHECK(r.sq == 1.0);
  CHECK(r.rq == 1.0);
  CHECK(r.iq == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.ipq == doctest::Approx(0.5).epsilon(1e-12));
  auto three = gt;
  fill_box(three, 0, 0, 2, 4, 4, 4, 2);
  fill_box(three, 0, 0, 4, 4, 4, 6, 3);
  r = evaluate(three, gt);
  CHECK(r.iq == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  r = evaluate(three, gt, {0.5, {}, IqMode::PerAnnotation});
  CHECK(r.iq == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("hallucination, omission, shift") {
  LabelVolume gt(Shape{10, 10, 10});
  fill_box(gt, 0, 0, 0, 4, 4, 4, 1);
  auto pred = gt;
  fill_box(pred, 6, 6, 6, 9, 9, 9, 2);
  auto r = evaluate(pred, gt);
  CHECK(r.rq == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(r.counts.fp == 1);

  auto gt2 = pred;
  r = evaluate(gt, gt2);
  CHECK(r.rq == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(r.counts.fn == 1);

  LabelVolume shifted(Shape{10, 10, 10});
  fill_box(shifted, 0, 0, 1, 4, 4, 5, 1);
  r = evaluate(shifted, gt);
  CHECK(r.sq == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(r.counts.tp == 1);
}

TEST_CASE("degenerate inputs") {
  LabelVolume empty(Shape{3, 3, 3});
  auto r = evaluate(empty, empty);
  CHECK(r.ipq == 1.0);
  LabelVolume one(Shape{3, 3, 3});
  one(1, 1, 1) = 1;
  r = evaluate(one, empty);
  CHECK(r.rq == 0.0);
  CHECK(r.ipq == 0.0);
  r = evaluate(empty, one);
  CHECK(r.sq == 0.0);
  CHECK(r.ipq == 0.0);
  CHECK_THROWS_AS(match_instances(one, one, 1.0), ParameterError);
  CHECK_THROWS_AS(compute_pq(one, one, 0.3), ParameterError);
  CHECK_THROWS_AS(evaluate(one, LabelVolume(Shape{3, 3, 4})), DimensionError);
  CHECK_THROWS_AS(evaluate(one, one, {0.5, {1.5, 1, 1}}), ParameterError);
}

TEST_CASE("ties go to the lower annotation id") {
  LabelVolume gt(Shape{1, 1, 4});
  gt(0, 0, 0) = gt(0, 0, 1) = 2;
  gt(0, 0, 2) = gt(0, 0, 3) = 1;
  LabelVolume pred(Shape{1, 1, 4}, {1, 1, 1}, 7u);
  const auto m = match_instances(pred, gt, 0.3);
  CHECK(m.groups.at(1) == std::vector<std::uint32_t>{7});
  CHECK(m.groups.at(2).empty());
}

TEST_CASE("matches the brute-force oracle on random volumes") {
  SplitMix64 rng(11);
  for (int t = 0; t < 10; ++t) {
    const Shape s{rng.range(3, 10), rng.range(3, 10), rng.range(3, 10)};
    const auto gt = fixture::random_blobs(rng, s, 5, 3);
    const auto pred = fixture::random_blobs(rng, s, 6, 3);
    const double tau = rng.uniform(0.0, 0.9);
    const auto m = match_instances(pred, gt, tau);
    const auto o = oracle::match(pred, gt, tau);
    CHECK(m.tp == o.tp);
    CHECK(m.fp == o.fp);
    CHECK(m.fn == o.fn);
  }
}

TEST_CASE("report JSON keys") {
  const auto gt = three_cubes();
  const auto j = to_json(evaluate(gt, gt));
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  CHECK(keys == std::vector<std::string>{"sq", "rq", "iq", "ipq", "pq", "counts", "iq_mode", "k"});
}
