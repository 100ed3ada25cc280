#pragma once

#include <filesystem>
#include <string>
#include <variant>

#include "aop3d/volume.hpp"

namespace aop3d {

// `.i3d` container: 8-byte magic "I3DVOL\0\1", u32 little-endian header
// length L, L bytes of UTF-8 JSON
//   {"dtype":"u8|u16|u32|f32","shape":[z,y,x],"spacing":[sz,sy,sx],"kind":"intensity|label"}
// then the raw little-endian C-order payload (z slowest).
enum class DType { U8, U16, U32, F32 };
enum class VolumeKind { Intensity, Label };

struct VolumeHeader {
  DType dtype = DType::U8;
  Shape shape{};
  Spacing spacing{1.0, 1.0, 1.0};
  VolumeKind kind = VolumeKind::Label;
};

std::string dtype_name(DType d);
std::size_t dtype_size(DType d);

using AnyVolume = std::variant<IntensityVolume, LabelVolume>;

AnyVolume read_volume(const std::filesystem::path& path);
LabelVolume read_labels(const std::filesystem::path& path);
IntensityVolume read_intensity(const std::filesystem::path& path);
VolumeHeader read_header(const std::filesystem::path& path);

// Labels use the smallest unsigned dtype that holds the maximum id.
void write_volume(const LabelVolume& v, const std::filesystem::path& path);
// Intensities are stored as f32.
void write_volume(const IntensityVolume& v, const std::filesystem::path& path);

// In-memory variants used by the file functions and by tests.
std::string encode_volume(const LabelVolume& v);
std::string encode_volume(const IntensityVolume& v);
AnyVolume decode_volume(std::string_view bytes, const std::string& origin = "<memory>");

}  // namespace aop3d
