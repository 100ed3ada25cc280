#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace aop3d {

// 8-bit grayscale PNG of a row-major width x height image, returned as bytes.
std::string encode_png_gray8(std::span<const std::uint8_t> pixels, std::uint32_t width, std::uint32_t height);

}  // namespace aop3d
