#include "fixtures.hpp"

#include <algorithm>

namespace fixture {

void fill_box(LabelVolume& v, std::int64_t z0, std::int64_t y0, std::int64_t x0, std::int64_t z1, std::int64_t y1,
              std::int64_t x1, std::uint32_t id) {
  for (auto z = z0; z < z1; ++z)
    for (auto y = y0; y < y1; ++y)
      for (auto x = x0; x < x1; ++x) v(z, y, x) = id;
}

LabelVolume random_blobs(aop3d::SplitMix64& rng, Shape shape, int count, int max_radius) {
  LabelVolume v(shape);
  for (int i = 0; i < count; ++i) {
    const auto r = rng.range(1, max_radius);
    const auto cz = rng.range(0, shape.z - 1), cy = rng.range(0, shape.y - 1), cx = rng.range(0, shape.x - 1);
    const bool ball = rng.bernoulli(0.5);
    for (auto z = std::max<std::int64_t>(0, cz - r); z <= std::min(shape.z - 1, cz + r); ++z)
      for (auto y = std::max<std::int64_t>(0, cy - r); y <= std::min(shape.y - 1, cy + r); ++y)
        for (auto x = std::max<std::int64_t>(0, cx - r); x <= std::min(shape.x - 1, cx + r); ++x)
          if (!ball || (z - cz) * (z - cz) + (y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r)
            v(z, y, x) = static_cast<std::uint32_t>(i + 1);
  }
  return v;
}

LabelVolume random_labels(aop3d::SplitMix64& rng, Shape shape, std::uint32_t max_id, double density) {
  LabelVolume v(shape);
  for (std::size_t i = 0; i < v.size(); ++i)
    if (rng.bernoulli(density)) v[i] = static_cast<std::uint32_t>(rng.range(1, max_id));
  return v;
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("aop3d-test-" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace fixture
