#pragma once

#include <filesystem>
#include <string_view>

#include "aop3d/volume.hpp"

namespace aop3d {

// Baseline TIFF 6.0 grayscale import: uncompressed, strip-organized, 8- or
// 16-bit, one sample per pixel, either byte order. Each page becomes one z
// slice; values are divided by the dtype maximum.
IntensityVolume import_tiff(const std::filesystem::path& path);
IntensityVolume decode_tiff(std::string_view bytes, const std::string& origin = "<memory>");

}  // namespace aop3d
