#include <cmath>
#include <numbers>
#include <sstream>

#include "aop3d/instances.hpp"
#include "aop3d/synthgen.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace aop3d;
using namespace aop3d::instances;
using fixture::fill_box;

namespace {

IntensityVolume ramp(Shape s) {
  IntensityVolume v(s);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>((i * 37 % 101) / 100.0);
  return v;
}

}  // namespace

TEST_CASE("boxes, margins and clipping") {
  LabelVolume l(Shape{12, 12, 12});
  fill_box(l, 4, 4, 4, 8, 8, 8, 1);
  fill_box(l, 0, 0, 10, 2, 2, 12, 2);
  const auto crops = extract_instances(l, ramp(l.shape()), 2, "img");
  REQUIRE(crops.size() == 2);
  CHECK(crops[0].id == 1);
  CHECK(crops[0].box == Box{{2, 2, 2}, {10, 10, 10}});
  CHECK_FALSE(crops[0].clipped);
  CHECK(crops[1].id == 2);
  CHECK(crops[1].box == Box{{0, 0, 8}, {4, 4, 12}});
  CHECK(crops[1].clipped);
  CHECK(crops[1].image_id == "img");
  CHECK_THROWS_AS(extract_instances(l, IntensityVolume(Shape{3, 3, 3})), DimensionError);
}

TEST_CASE("crops reinsert to the original labels") {
  synth::SynthConfig c;
  c.shape = {32, 32, 32};
  c.count = 6;
  c.radius_min = 3;
  c.radius_max = 6;
  c.seed = 4;
  const auto b = synth::generate_benchmark(c);
  const auto crops = extract_instances(b.labels, b.image);
  CHECK(crops.size() == 6);
  LabelVolume back(b.labels.shape());
  for (const auto& cr : crops) {
    const auto s = cr.box.shape();
    for (std::int64_t z = 0; z < s.z; ++z)
      for (std::int64_t y = 0; y < s.y; ++y)
        for (std::int64_t x = 0; x < s.x; ++x) {
          if (cr.mask(z, y, x)) back(z + cr.box.lo[0], y + cr.box.lo[1], x + cr.box.lo[2]) = cr.id;
          CHECK(cr.intensity(z, y, x) == b.image(z + cr.box.lo[0], y + cr.box.lo[1], x + cr.box.lo[2]));
        }
  }
  CHECK(back == b.labels);
}

TEST_CASE("distance preprocessing") {
  LabelVolume l(Shape{5, 5, 5});
  l(2, 2, 2) = 1;
  IntensityVolume img(l.shape(), {1, 1, 1}, 1.0f);
  auto crop = extract_instances(l, img, 2).at(0);
  auto out = preprocess_crop(crop, Preprocess::Distance, 1.0);
  CHECK(out(2, 2, 2) == 1.0f);
  CHECK(out(2, 2, 3) == doctest::Approx(std::exp(-1.0)).epsilon(1e-6));
  for (auto& v : crop.intensity.data()) v = 0.5f;
  out = preprocess_crop(crop, Preprocess::Distance, 2.0);
  CHECK(out(1, 2, 2) == doctest::Approx(0.5 * std::exp(-0.5)).epsilon(1e-6));
  CHECK(preprocess_crop(crop, Preprocess::Distance, 2.0) == out);
  const auto m = preprocess_crop(crop, Preprocess::Mask);
  CHECK(m(2, 2, 2) == 1.0f);
  CHECK(m(0, 0, 0) == 0.0f);
  CHECK_THROWS_AS(preprocess_crop(crop, Preprocess::Distance, 0.0), ParameterError);
  CHECK_THROWS_AS(preprocess_from_string("blur"), ParameterError);

  SplitMix64 rng(3);
  const auto blobs = fixture::random_blobs(rng, {14, 14, 14}, 3, 3);
  const auto crops = extract_instances(blobs, ramp(blobs.shape()), 3);
  for (const auto& cr : crops) {
    const auto got = preprocess_crop(cr, Preprocess::Distance, 1.5);
    const auto d = oracle::distance_to_mask(cr.mask);
    for (std::size_t i = 0; i < got.size(); ++i)
      CHECK(std::abs(got[i] - cr.intensity[i] * std::exp(-d[i] / 1.5)) < 1e-6);
  }
}

TEST_CASE("geometric features") {
  LabelVolume l(Shape{10, 10, 10});
  fill_box(l, 3, 3, 3, 7, 7, 7, 1);
  const auto img = ramp(l.shape());
  const auto f = geometric_features(extract_instances(l, img).at(0));
  CHECK(f.volume == 64);
  CHECK(f.surface == 96);
  CHECK(f.sphericity == doctest::Approx(std::cbrt(std::numbers::pi) * std::pow(384.0, 2.0 / 3.0) / 96.0));
  CHECK(f.sphericity == doctest::Approx(0.806).epsilon(1e-3));
  CHECK(std::abs(f.axes[0] - f.axes[2]) < 1e-9);
  CHECK(std::abs(f.axes[0] - f.axes[1]) < 1e-9);
  CHECK(f.centroid == std::array<double, 3>{4.5, 4.5, 4.5});
  CHECK(f.values().size() == feature_columns().size());

  LabelVolume rod(Shape{3, 3, 12});
  fill_box(rod, 1, 1, 2, 2, 2, 10, 1);
  const auto r = geometric_features(extract_instances(rod, ramp(rod.shape())).at(0));
  CHECK(r.extent == std::array<double, 3>{1, 1, 8});
  CHECK(r.elongation > 5.0);
  CHECK(r.axes[0] >= r.axes[1]);
  CHECK(r.axes[1] >= r.axes[2]);

  // Translating an instance changes only its centroid.
  LabelVolume moved(Shape{10, 10, 10});
  fill_box(moved, 1, 2, 0, 5, 6, 4, 1);
  IntensityVolume img2(moved.shape());
  for (std::int64_t z = 0; z < 4; ++z)
    for (std::int64_t y = 0; y < 4; ++y)
      for (std::int64_t x = 0; x < 4; ++x) img2(z + 1, y + 2, x) = img(z + 3, y + 3, x + 3);
  const auto g = geometric_features(extract_instances(moved, img2).at(0));
  auto a = f.values(), b = g.values();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (feature_columns()[i].starts_with("centroid")) continue;
    CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
  }
  CHECK(g.centroid == std::array<double, 3>{2.5, 3.5, 1.5});
}

TEST_CASE("crop storage and feature CSV") {
  SplitMix64 rng(6);
  const auto l = relabel_consecutive(fixture::random_blobs(rng, {12, 12, 12}, 3, 3));
  const auto crops = extract_instances(l, ramp(l.shape()), 2, "vol");
  const auto dir = fixture::temp_dir("crops");
  for (const auto& c : crops) {
    const auto f = geometric_features(c);
    save_crop(c, dir, &f);
  }
  const auto back = load_crops(dir);
  REQUIRE(back.size() == crops.size());
  for (std::size_t i = 0; i < crops.size(); ++i) {
    CHECK(back[i].id == crops[i].id);
    CHECK(back[i].box == crops[i].box);
    CHECK(back[i].mask == crops[i].mask);
    CHECK(back[i].intensity == crops[i].intensity);
  }
  std::stringstream csv;
  write_features_csv(crops, csv);
  const auto table = read_features_csv(csv);
  REQUIRE(table.rows.size() == crops.size());
  CHECK(table.keys[0] == "vol/" + std::to_string(crops[0].id));
  const auto v0 = geometric_features(crops[0]).values();
  for (std::size_t j = 0; j < v0.size(); ++j) CHECK(table.rows[0][j] == v0[j]);
}
