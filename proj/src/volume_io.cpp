#include "aop3d/volume_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace aop3d {

namespace {

constexpr char kMagic[8] = {'I', '3', 'D', 'V', 'O', 'L', '\x00', '\x01'};

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(const char* p) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

DType parse_dtype(const std::string& s, const std::string& origin) {
  if (s == "u8") return DType::U8;
  if (s == "u16") return DType::U16;
  if (s == "u32") return DType::U32;
  if (s == "f32") return DType::F32;
  throw FormatError(origin + ": unknown dtype '" + s + "'");
}

std::string encode_header(const VolumeHeader& h) {
  nlohmann::ordered_json j;
  j["dtype"] = dtype_name(h.dtype);
  j["shape"] = {h.shape.z, h.shape.y, h.shape.x};
  j["spacing"] = {h.spacing[0], h.spacing[1], h.spacing[2]};
  j["kind"] = h.kind == VolumeKind::Label ? "label" : "intensity";
  std::string body = j.dump();
  std::string out(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(body.size()));
  out += body;
  return out;
}

VolumeHeader decode_header(std::string_view bytes, std::size_t& payload_offset, const std::string& origin) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError(origin + ": not an .i3d file (bad magic)");
  }
  if (bytes.size() < 12) throw TruncationError(origin + ": file ends inside the header length");
  const auto len = get_le<std::uint32_t>(bytes.data() + 8);
  if (bytes.size() < 12 + static_cast<std::size_t>(len)) {
    throw TruncationError(origin + ": header claims " + std::to_string(len) + " bytes, file too short");
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.substr(12, len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(origin + ": malformed header JSON: " + e.what());
  }
  VolumeHeader h;
  try {
    h.dtype = parse_dtype(j.at("dtype").get<std::string>(), origin);
    const auto shape = j.at("shape").get<std::vector<std::int64_t>>();
    if (shape.size() != 3) throw FormatError(origin + ": shape must have 3 entries");
    h.shape = {shape[0], shape[1], shape[2]};
    if (j.contains("spacing")) {
      const auto sp = j.at("spacing").get<std::vector<double>>();
      if (sp.size() != 3) throw FormatError(origin + ": spacing must have 3 entries");
      h.spacing = {sp[0], sp[1], sp[2]};
    }
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "label") {
      h.kind = VolumeKind::Label;
    } else if (kind == "intensity") {
      h.kind = VolumeKind::Intensity;
    } else {
      throw FormatError(origin + ": unknown kind '" + kind + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(origin + ": invalid header: " + e.what());
  }
  if (!h.shape.valid()) throw FormatError(origin + ": shape must be >= 1 on every axis, got " + to_string(h.shape));
  payload_offset = 12 + len;
  return h;
}

template <typename Raw>
std::vector<Raw> read_payload(std::string_view bytes, std::size_t offset, std::size_t n) {
  std::vector<Raw> out(n);
  const char* p = bytes.data() + offset;
  for (std::size_t i = 0; i < n; ++i) out[i] = get_le<Raw>(p + i * sizeof(Raw));
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw IoError(path.string() + ": write failed");
}

}  // namespace

std::string dtype_name(DType d) {
  switch (d) {
    case DType::U8: return "u8";
    case DType::U16: return "u16";
    case DType::U32: return "u32";
    case DType::F32: return "f32";
  }
  return "?";
}

std::size_t dtype_size(DType d) {
  switch (d) {
    case DType::U8: return 1;
    case DType::U16: return 2;
    case DType::U32: return 4;
    case DType::F32: return 4;
  }
  return 0;
}

std::string encode_volume(const LabelVolume& v) {
  VolumeHeader h;
  h.kind = VolumeKind::Label;
  h.shape = v.shape();
  h.spacing = v.spacing();
  const auto m = max_label(v);
  h.dtype = m <= 0xFF ? DType::U8 : (m <= 0xFFFF ? DType::U16 : DType::U32);
  std::string out = encode_header(h);
  out.reserve(out.size() + v.size() * dtype_size(h.dtype));
  for (auto id : v.data()) {
    switch (h.dtype) {
      case DType::U8: out.push_back(static_cast<char>(id)); break;
      case DType::U16: put_le<std::uint16_t>(out, static_cast<std::uint16_t>(id)); break;
      default: put_le<std::uint32_t>(out, id); break;
    }
  }
  return out;
}

std::string encode_volume(const IntensityVolume& v) {
  VolumeHeader h;
  h.kind = VolumeKind::Intensity;
  h.dtype = DType::F32;
  h.shape = v.shape();
  h.spacing = v.spacing();
  std::string out = encode_header(h);
  out.reserve(out.size() + v.size() * 4);
  for (float f : v.data()) put_le<float>(out, f);
  return out;
}

AnyVolume decode_volume(std::string_view bytes, const std::string& origin) {
  std::size_t offset = 0;
  const VolumeHeader h = decode_header(bytes, offset, origin);
  const std::size_t n = h.shape.size();
  const std::size_t need = n * dtype_size(h.dtype);
  if (bytes.size() - offset < need) {
    throw TruncationError(origin + ": payload has " + std::to_string(bytes.size() - offset) + " bytes, expected " +
                          std::to_string(need));
  }
  if (bytes.size() - offset > need) {
    throw FormatError(origin + ": " + std::to_string(bytes.size() - offset - need) + " trailing bytes after payload");
  }
  if (h.kind == VolumeKind::Label) {
    std::vector<std::uint32_t> ids(n);
    switch (h.dtype) {
      case DType::U8: {
        auto raw = read_payload<std::uint8_t>(bytes, offset, n);
        std::copy(raw.begin(), raw.end(), ids.begin());
        break;
      }
      case DType::U16: {
        auto raw = read_payload<std::uint16_t>(bytes, offset, n);
        std::copy(raw.begin(), raw.end(), ids.begin());
        break;
      }
      case DType::U32: ids = read_payload<std::uint32_t>(bytes, offset, n); break;
      case DType::F32: throw FormatError(origin + ": label volumes cannot use dtype f32");
    }
    return LabelVolume(h.shape, h.spacing, std::move(ids));
  }
  std::vector<float> values(n);
  switch (h.dtype) {
    case DType::U8: {
      auto raw = read_payload<std::uint8_t>(bytes, offset, n);
      for (std::size_t i = 0; i < n; ++i) values[i] = static_cast<float>(raw[i] / 255.0);
      break;
    }
    case DType::U16: {
      auto raw = read_payload<std::uint16_t>(bytes, offset, n);
      for (std::size_t i = 0; i < n; ++i) values[i] = static_cast<float>(raw[i] / 65535.0);
      break;
    }
    case DType::U32: {
      auto raw = read_payload<std::uint32_t>(bytes, offset, n);
      for (std::size_t i = 0; i < n; ++i) values[i] = static_cast<float>(raw[i] / 4294967295.0);
      break;
    }
    case DType::F32: {
      values = read_payload<float>(bytes, offset, n);
      for (float f : values) {
        if (!(f >= 0.0f && f <= 1.0f)) throw FormatError(origin + ": f32 intensity outside [0,1]");
      }
      break;
    }
  }
  return IntensityVolume(h.shape, h.spacing, std::move(values));
}

AnyVolume read_volume(const std::filesystem::path& path) { return decode_volume(read_file(path), path.string()); }

VolumeHeader read_header(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  std::size_t offset = 0;
  return decode_header(bytes, offset, path.string());
}

LabelVolume read_labels(const std::filesystem::path& path) {
  auto v = read_volume(path);
  if (auto* l = std::get_if<LabelVolume>(&v)) return std::move(*l);
  throw FormatError(path.string() + ": expected a label volume, found intensity");
}

IntensityVolume read_intensity(const std::filesystem::path& path) {
  auto v = read_volume(path);
  if (auto* i = std::get_if<IntensityVolume>(&v)) return std::move(*i);
  throw FormatError(path.string() + ": expected an intensity volume, found labels");
}

void write_volume(const LabelVolume& v, const std::filesystem::path& path) { write_file(path, encode_volume(v)); }

void write_volume(const IntensityVolume& v, const std::filesystem::path& path) { write_file(path, encode_volume(v)); }

}  // namespace aop3d
