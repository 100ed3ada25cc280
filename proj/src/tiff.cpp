#include "aop3d/tiff.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <vector>
#include <set>
#include <sstream>

namespace aop3d {

namespace {

enum Tag : std::uint16_t {
  kImageWidth = 256,
  kImageLength = 257,
  kBitsPerSample = 258,
  kCompression = 259,
  kPhotometric = 262,
  kStripOffsets = 273,
  kSamplesPerPixel = 277,
  kRowsPerStrip = 278,
  kStripByteCounts = 279,
  kPlanarConfig = 284,
  kTileWidth = 322,
  kTileLength = 323,
  kTileOffsets = 324,
  kSampleFormat = 339,
};

class Reader {
 public:
  Reader(std::string_view bytes, std::string origin) : bytes_(bytes), origin_(std::move(origin)) {}

  void set_big_endian(bool be) { big_ = be; }

  std::uint64_t uint(std::size_t offset, int width) const {
    if (offset + width > bytes_.size()) {
      throw TruncationError(origin_ + ": read past end of file at offset " + std::to_string(offset));
    }
    std::uint64_t v = 0;
    const auto* p = reinterpret_cast<const unsigned char*>(bytes_.data() + offset);
    for (int i = 0; i < width; ++i) {
      const int shift = big_ ? 8 * (width - 1 - i) : 8 * i;
      v |= static_cast<std::uint64_t>(p[i]) << shift;
    }
    return v;
  }
  std::uint16_t u16(std::size_t o) const { return static_cast<std::uint16_t>(uint(o, 2)); }
  std::uint32_t u32(std::size_t o) const { return static_cast<std::uint32_t>(uint(o, 4)); }

  std::size_t size() const { return bytes_.size(); }
  const std::string& origin() const { return origin_; }

 private:
  std::string_view bytes_;
  std::string origin_;
  bool big_ = false;
};

int type_width(std::uint16_t type) {
  switch (type) {
    case 1: case 2: case 6: case 7: return 1;  // BYTE ASCII SBYTE UNDEFINED
    case 3: case 8: return 2;                  // SHORT SSHORT
    case 4: case 9: case 11: return 4;         // LONG SLONG FLOAT
    case 5: case 10: case 12: return 8;        // RATIONAL SRATIONAL DOUBLE
    default: return 0;
  }
}

using Ifd = std::map<std::uint16_t, std::vector<std::uint64_t>>;

Ifd read_ifd(const Reader& r, std::size_t offset, std::size_t& next) {
  Ifd ifd;
  const std::uint16_t n = r.u16(offset);
  for (std::uint16_t e = 0; e < n; ++e) {
    const std::size_t entry = offset + 2 + 12 * static_cast<std::size_t>(e);
    const std::uint16_t tag = r.u16(entry);
    const std::uint16_t type = r.u16(entry + 2);
    const std::uint32_t count = r.u32(entry + 4);
    const int w = type_width(type);
    if (w == 0) continue;
    // Only integer-valued tags matter for decoding pixel data.
    if (type != 1 && type != 3 && type != 4) {
      ifd[tag] = {};
      continue;
    }
    const std::size_t total = static_cast<std::size_t>(count) * w;
    const std::size_t data = total <= 4 ? entry + 8 : r.u32(entry + 8);
    std::vector<std::uint64_t> values(count);
    for (std::uint32_t k = 0; k < count; ++k) values[k] = r.uint(data + k * w, w);
    ifd[tag] = std::move(values);
  }
  next = r.u32(offset + 2 + 12 * static_cast<std::size_t>(n));
  return ifd;
}

std::uint64_t scalar(const Ifd& ifd, std::uint16_t tag, const std::string& origin, std::optional<std::uint64_t> dflt = {}) {
  auto it = ifd.find(tag);
  if (it == ifd.end() || it->second.empty()) {
    if (dflt) return *dflt;
    throw FormatError(origin + ": missing required TIFF tag " + std::to_string(tag));
  }
  return it->second.front();
}

}  // namespace

IntensityVolume decode_tiff(std::string_view bytes, const std::string& origin) {
  Reader r(bytes, origin);
  if (bytes.size() < 8) throw TruncationError(origin + ": too short for a TIFF header");
  if (bytes.substr(0, 2) == "II") {
    r.set_big_endian(false);
  } else if (bytes.substr(0, 2) == "MM") {
    r.set_big_endian(true);
  } else {
    throw FormatError(origin + ": not a TIFF file (bad byte-order mark)");
  }
  const std::uint16_t version = r.u16(2);
  if (version == 43) throw UnsupportedFeatureError(origin + ": BigTIFF is not supported");
  if (version != 42) throw FormatError(origin + ": bad TIFF version " + std::to_string(version));

  std::int64_t width = -1, height = -1;
  int bits = 0;
  std::vector<float> values;
  std::int64_t pages = 0;
  std::set<std::size_t> visited;
  std::size_t offset = r.u32(4);
  while (offset != 0) {
    if (!visited.insert(offset).second) throw FormatError(origin + ": IFD chain loops");
    std::size_t next = 0;
    const Ifd ifd = read_ifd(r, offset, next);
    offset = next;

    if (ifd.count(kTileWidth) || ifd.count(kTileLength) || ifd.count(kTileOffsets)) {
      throw UnsupportedFeatureError(origin + ": tiled TIFF layout is not supported");
    }
    const auto compression = scalar(ifd, kCompression, origin, 1);
    if (compression != 1) {
      throw UnsupportedFeatureError(origin + ": TIFF compression " + std::to_string(compression) +
                                    " is not supported (only uncompressed)");
    }
    if (scalar(ifd, kSamplesPerPixel, origin, 1) != 1) {
      throw UnsupportedFeatureError(origin + ": only single-sample grayscale TIFF is supported");
    }
    const auto photometric = scalar(ifd, kPhotometric, origin, 1);
    if (photometric > 1) {
      throw UnsupportedFeatureError(origin + ": photometric interpretation " + std::to_string(photometric) +
                                    " is not grayscale");
    }
    if (scalar(ifd, kSampleFormat, origin, 1) != 1) {
      throw UnsupportedFeatureError(origin + ": only unsigned integer samples are supported");
    }
    (void)scalar(ifd, kPlanarConfig, origin, 1);
    const auto w = static_cast<std::int64_t>(scalar(ifd, kImageWidth, origin));
    const auto h = static_cast<std::int64_t>(scalar(ifd, kImageLength, origin));
    const int b = static_cast<int>(scalar(ifd, kBitsPerSample, origin, 1));
    if (b != 8 && b != 16) {
      throw UnsupportedFeatureError(origin + ": " + std::to_string(b) + "-bit samples are not supported");
    }
    if (pages == 0) {
      width = w;
      height = h;
      bits = b;
      if (w < 1 || h < 1) throw FormatError(origin + ": empty TIFF page");
    } else if (w != width || h != height || b != bits) {
      throw FormatError(origin + ": page " + std::to_string(pages) + " is " + std::to_string(w) + "x" +
                        std::to_string(h) + "/" + std::to_string(b) + "-bit, first page is " +
                        std::to_string(width) + "x" + std::to_string(height) + "/" + std::to_string(bits) +
                        "-bit");
    }
    auto offsets_it = ifd.find(kStripOffsets);
    if (offsets_it == ifd.end() || offsets_it->second.empty()) throw FormatError(origin + ": missing StripOffsets");
    const auto& strip_offsets = offsets_it->second;
    const auto rows_per_strip = std::min<std::uint64_t>(scalar(ifd, kRowsPerStrip, origin, UINT32_MAX),
                                                        static_cast<std::uint64_t>(h));
    const int bytes_per_sample = b / 8;
    const double maxv = b == 8 ? 255.0 : 65535.0;
    const std::size_t row_bytes = static_cast<std::size_t>(w) * bytes_per_sample;
    const std::size_t base = values.size();
    values.resize(base + static_cast<std::size_t>(w * h));
    for (std::int64_t y = 0; y < h; ++y) {
      const std::size_t strip = static_cast<std::size_t>(y) / rows_per_strip;
      if (strip >= strip_offsets.size()) throw FormatError(origin + ": too few strips for image height");
      const std::size_t row_in_strip = static_cast<std::size_t>(y) % rows_per_strip;
      const std::size_t row_start = strip_offsets[strip] + row_in_strip * row_bytes;
      if (row_start + row_bytes > r.size()) throw TruncationError(origin + ": strip data runs past end of file");
      for (std::int64_t x = 0; x < w; ++x) {
        double v = static_cast<double>(r.uint(row_start + x * bytes_per_sample, bytes_per_sample)) / maxv;
        if (photometric == 0) v = 1.0 - v;
        values[base + static_cast<std::size_t>(y * w + x)] = static_cast<float>(v);
      }
    }
    ++pages;
  }
  if (pages == 0) throw FormatError(origin + ": TIFF has no pages");
  return IntensityVolume({pages, height, width}, {1.0, 1.0, 1.0}, std::move(values));
}

IntensityVolume import_tiff(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  return decode_tiff(bytes, path.string());
}

}  // namespace aop3d
