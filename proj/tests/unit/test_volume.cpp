#include <cstring>
#include <map>

#include "aop3d/volume.hpp"
#include "aop3d/volume_io.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace aop3d;

TEST_CASE("shape validation") {
  CHECK_THROWS_AS(LabelVolume(Shape{0, 2, 2}), DimensionError);
  CHECK_THROWS_AS(LabelVolume(Shape{2, 2, 2}, {1, 1, 1}, std::vector<std::uint32_t>(7)), DimensionError);
  LabelVolume v(Shape{2, 3, 4});
  CHECK(v.size() == 24);
  CHECK(v.shape().index(1, 2, 3) == 23);
  CHECK(v.get_or(-1, 0, 0, 9u) == 9u);
}

TEST_CASE("relabel_consecutive keeps the voxel partition") {
  SplitMix64 rng(3);
  auto v = fixture::random_labels(rng, {6, 7, 8}, 50, 0.4);
  for (auto& x : v.data())
    if (x) x = x * 7 + 100;
  std::uint32_t n = 0;
  const auto r = relabel_consecutive(v, &n);
  std::map<std::uint32_t, std::uint32_t> fwd, back;
  for (std::size_t i = 0; i < v.size(); ++i) {
    CHECK((v[i] == 0) == (r[i] == 0));
    if (!v[i]) continue;
    auto [a, fa] = fwd.try_emplace(v[i], r[i]);
    auto [b, fb] = back.try_emplace(r[i], v[i]);
    CHECK(a->second == r[i]);
    CHECK(b->second == v[i]);
  }
  CHECK(n == fwd.size());
  CHECK(max_label(r) == n);
}

TEST_CASE("connected components by connectivity") {
  LabelVolume v(Shape{1, 3, 3});
  v(0, 0, 0) = 1;
  v(0, 1, 1) = 1;
  std::uint32_t n = 0;
  connected_components(v, Connectivity::Six, &n);
  CHECK(n == 2);
  connected_components(v, Connectivity::Eighteen, &n);
  CHECK(n == 1);
  LabelVolume w(Shape{1, 1, 3});
  w(0, 0, 0) = 5;
  w(0, 0, 1) = 6;
  label_components(w, Connectivity::TwentySix, &n);
  CHECK(n == 2);
}

TEST_CASE("i3d round trip and dtype selection") {
  LabelVolume small(Shape{2, 2, 2}, {0.5, 1, 2});
  small[3] = 255;
  auto bytes = encode_volume(small);
  CHECK(bytes.substr(0, 8) == std::string("I3DVOL\0\1", 8));
  CHECK(bytes.find("\"u8\"") != std::string::npos);
  CHECK(std::get<LabelVolume>(decode_volume(bytes)) == small);
  small[3] = 256;
  CHECK(encode_volume(small).find("\"u16\"") != std::string::npos);
  small[3] = 70000;
  CHECK(encode_volume(small).find("\"u32\"") != std::string::npos);
  CHECK(std::get<LabelVolume>(decode_volume(encode_volume(small))) == small);

  IntensityVolume im(Shape{1, 2, 3});
  im[4] = 0.25f;
  CHECK(std::get<IntensityVolume>(decode_volume(encode_volume(im))) == im);

  const auto dir = fixture::temp_dir("volume-io");
  write_volume(small, dir / "a.i3d");
  CHECK(read_labels(dir / "a.i3d") == small);
  CHECK_THROWS_AS(read_intensity(dir / "a.i3d"), FormatError);
  CHECK(read_header(dir / "a.i3d").dtype == DType::U32);
}

TEST_CASE("i3d decode errors") {
  LabelVolume v(Shape{2, 2, 2});
  const auto good = encode_volume(v);
  auto bad_magic = good;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_volume(bad_magic), FormatError);
  CHECK_THROWS_AS(decode_volume(good.substr(0, good.size() - 1)), TruncationError);
  CHECK_THROWS_AS(decode_volume(good + "x"), FormatError);
  CHECK_THROWS_AS(decode_volume(good.substr(0, 10)), TruncationError);

  IntensityVolume im(Shape{1, 1, 1});
  auto enc = encode_volume(im);
  const float big = 2.0f;
  std::memcpy(enc.data() + enc.size() - 4, &big, 4);
  CHECK_THROWS_AS(decode_volume(enc), FormatError);
}
