#include <set>

#include "aop3d/postproc.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace aop3d;
using namespace aop3d::postproc;
using fixture::fill_box;

namespace {

std::size_t foreground(const LabelVolume& v) {
  std::size_t n = 0;
  for (auto x : v.data()) n += x != 0;
  return n;
}

std::size_t count_ids(const LabelVolume& v) { return instance_ids(v).size(); }

}  // namespace

TEST_CASE("morphology on a cube") {
  LabelVolume v(Shape{10, 10, 10});
  fill_box(v, 3, 3, 3, 7, 7, 7, 1);
  CHECK(apply_morphology(v, 0, 0) == v);
  CHECK(foreground(apply_morphology(v, 1, 0)) == 160);
  CHECK(apply_morphology(v, 0, 1) == v);
  CHECK(foreground(apply_morphology(v, -1, 0)) == 8);
  CHECK_THROWS_AS(apply_morphology(v, 11, 0), ParameterError);
  CHECK_THROWS_AS(apply_morphology(v, 0, -6), ParameterError);
}

TEST_CASE("morphology matches the brute-force oracle") {
  SplitMix64 rng(5);
  for (int t = 0; t < 6; ++t) {
    const Shape s{rng.range(4, 14), rng.range(4, 14), rng.range(4, 14)};
    const auto v = fixture::random_blobs(rng, s, 6, 4);
    const int ed = static_cast<int>(rng.range(-4, 4));
    const int co = static_cast<int>(rng.range(-3, 3));
    CAPTURE(ed);
    CAPTURE(co);
    CHECK(apply_morphology(v, ed, co) == oracle::morphology(v, ed, co));
  }
}

TEST_CASE("grown voxels go to the nearest instance, ties to the lower id") {
  LabelVolume v(Shape{1, 1, 5});
  v(0, 0, 0) = 2;
  v(0, 0, 4) = 1;
  const auto d = apply_morphology(v, 2, 0);
  CHECK(d(0, 0, 1) == 2);
  CHECK(d(0, 0, 2) == 1);
  CHECK(d(0, 0, 3) == 1);
}

TEST_CASE("watershed splits a dumbbell on its bridge") {
  LabelVolume v(Shape{9, 9, 17});
  fill_box(v, 2, 2, 2, 7, 7, 7, 1);
  fill_box(v, 4, 4, 7, 5, 5, 10, 1);
  fill_box(v, 2, 2, 10, 7, 7, 15, 1);
  const auto out = split_instances(v, 0.1, 0.5);
  CHECK(count_ids(out) == 2);
  CHECK(out(4, 4, 4) != out(4, 4, 12));
  CHECK(out(4, 4, 4) != 0);
  std::set<std::uint32_t> left, right;
  for (std::int64_t z = 2; z < 7; ++z)
    for (std::int64_t y = 2; y < 7; ++y) {
      for (std::int64_t x = 2; x < 7; ++x) left.insert(out(z, y, x));
      for (std::int64_t x = 10; x < 15; ++x) right.insert(out(z, y, x));
    }
  CHECK(left.size() == 1);
  CHECK(right.size() == 1);
  CHECK(foreground(out) == foreground(v));
}

TEST_CASE("watershed leaves a convex cube alone") {
  LabelVolume v(Shape{9, 9, 9});
  fill_box(v, 1, 1, 1, 8, 8, 8, 3);
  const auto out = split_instances(v, 0.0, 0.9);
  CHECK(count_ids(out) == 1);
  CHECK(foreground(out) == 343);
  CHECK(split_instances(v, 0, 0) == v);
}

TEST_CASE("merging a bisected cube") {
  LabelVolume v(Shape{8, 8, 8});
  fill_box(v, 1, 1, 1, 4, 7, 7, 1);
  fill_box(v, 4, 1, 1, 7, 7, 7, 2);
  const auto edges = adjacency_edges(v, 1, 1, 1);
  REQUIRE(edges.size() == 1);
  CHECK(edges[0].contact_faces == 36);
  CHECK(edges[0].f_s == doctest::Approx(1.0));
  CHECK(edges[0].f_c == doctest::Approx(1.0));
  CHECK(edges[0].f_r == doctest::Approx(36.0 / 144.0));
  const auto merged = merge_instances(v, 1, 1, 1);
  CHECK(count_ids(merged) == 1);
  CHECK(foreground(merged) == foreground(v));
  CHECK(merge_instances(v, 0, 0, 0) == v);
}

TEST_CASE("merging across a one-voxel gap, not across five") {
  LabelVolume v(Shape{8, 8, 11});
  fill_box(v, 1, 1, 1, 7, 7, 5, 1);
  fill_box(v, 1, 1, 6, 7, 7, 10, 2);
  auto e = adjacency_edges(v, 1, 1, 1);
  REQUIRE(e.size() == 1);
  CHECK(e[0].contact_faces == 36);
  CHECK(count_ids(merge_instances(v, 1, 1, 1)) == 1);

  LabelVolume far(Shape{5, 5, 13});
  fill_box(far, 1, 1, 1, 4, 4, 4, 1);
  fill_box(far, 1, 1, 9, 4, 4, 12, 2);
  CHECK(adjacency_edges(far, 1, 1, 1).empty());
  CHECK(merge_instances(far, 1, 1, 1) == far);
}

TEST_CASE("merge score is monotone in every weight") {
  LabelVolume v(Shape{8, 8, 8});
  fill_box(v, 1, 1, 1, 4, 7, 7, 1);
  fill_box(v, 4, 2, 2, 7, 5, 5, 2);
  const auto base = adjacency_edges(v, 0.2, 0.2, 0.2).at(0).score;
  CHECK(adjacency_edges(v, 0.3, 0.2, 0.2).at(0).score >= base);
  CHECK(adjacency_edges(v, 0.2, 0.3, 0.2).at(0).score >= base);
  CHECK(adjacency_edges(v, 0.2, 0.2, 0.3).at(0).score >= base);
  for (const auto& e : adjacency_edges(v, 1, 1, 1)) {
    CHECK(e.a < e.b);
    for (double f : {e.f_c, e.f_s, e.f_r}) {
      CHECK(f >= 0.0);
      CHECK(f <= 1.0);
    }
  }
}

TEST_CASE("pipeline") {
  SplitMix64 rng(9);
  auto v = fixture::random_blobs(rng, {16, 16, 16}, 6, 4);
  v = relabel_consecutive(v);
  CHECK(apply_postprocessing(v, {}) == v);
  PostprocParams p;
  p.theta_ed = 1;
  p.theta_mc = p.theta_ms = p.theta_mr = 0.4;
  p.theta_ssigma = 0.2;
  p.theta_st = 0.7;
  const auto out = apply_postprocessing(v, p);
  const auto ids = instance_ids(out);
  for (std::size_t i = 0; i < ids.size(); ++i) CHECK(ids[i] == i + 1);
  p.theta_mc = 2;
  CHECK_THROWS_AS(apply_postprocessing(v, p), ParameterError);
  CHECK(exposed_faces(v, 999) == 0);
}

TEST_CASE("params JSON round trip") {
  PostprocParams p{-2, 1, 0.1, 0.2, 0.3, 0.4, 0.5};
  CHECK(params_from_json(to_json(p)) == p);
  CHECK(to_json(p).dump() ==
        R"({"theta_ed":-2,"theta_co":1,"theta_mc":0.1,"theta_ms":0.2,"theta_mr":0.3,"theta_ssigma":0.4,"theta_st":0.5})");
}
