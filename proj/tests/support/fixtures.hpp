#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "aop3d/rng.hpp"
#include "aop3d/volume.hpp"

namespace fixture {

using aop3d::LabelVolume;
using aop3d::Shape;

// Fills the half-open box [lo, hi) with `id`.
void fill_box(LabelVolume& v, std::int64_t z0, std::int64_t y0, std::int64_t x0, std::int64_t z1, std::int64_t y1,
              std::int64_t x1, std::uint32_t id);

// Random axis-aligned boxes and balls, possibly overlapping (later ones win).
LabelVolume random_blobs(aop3d::SplitMix64& rng, Shape shape, int count, int max_radius);

// Random label noise of the given density with ids in 1..max_id.
LabelVolume random_labels(aop3d::SplitMix64& rng, Shape shape, std::uint32_t max_id, double density);

// Fresh empty directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& name);

}  // namespace fixture
