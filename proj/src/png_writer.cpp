#include "aop3d/png_writer.hpp"

#include <png.h>

#include "aop3d/error.hpp"

namespace aop3d {

std::string encode_png_gray8(std::span<const std::uint8_t> pixels, std::uint32_t width, std::uint32_t height) {
  if (width == 0 || height == 0 || pixels.size() != static_cast<std::size_t>(width) * height)
    throw DimensionError("PNG pixel buffer does not match its size");
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = width;
  image.height = height;
  image.format = PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), 0, nullptr))
    throw IoError(std::string("PNG encoding failed: ") + image.message);
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), 0, nullptr))
    throw IoError(std::string("PNG encoding failed: ") + image.message);
  out.resize(size);
  return out;
}

}  // namespace aop3d
