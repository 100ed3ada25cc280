#include <tiffio.h>

#include <cstring>
#include <fstream>

#include "aop3d/tiff.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace aop3d;

namespace {

// Writes pages with libtiff as an independent reference encoder.
void write_tiff(const std::filesystem::path& p, int bits, int pages, int h, int w, const char* mode = "w",
                uint16_t photometric = PHOTOMETRIC_MINISBLACK, uint16_t compression = COMPRESSION_NONE) {
  TIFF* t = TIFFOpen(p.c_str(), mode);
  REQUIRE(t);
  for (int pg = 0; pg < pages; ++pg) {
    TIFFSetField(t, TIFFTAG_IMAGEWIDTH, w);
    TIFFSetField(t, TIFFTAG_IMAGELENGTH, h);
    TIFFSetField(t, TIFFTAG_BITSPERSAMPLE, bits);
    TIFFSetField(t, TIFFTAG_SAMPLESPERPIXEL, 1);
    TIFFSetField(t, TIFFTAG_PHOTOMETRIC, photometric);
    TIFFSetField(t, TIFFTAG_COMPRESSION, compression);
    TIFFSetField(t, TIFFTAG_ROWSPERSTRIP, 2);
    TIFFSetField(t, TIFFTAG_PLANARCONFIG, PLANARCONFIG_CONTIG);
    TIFFSetField(t, TIFFTAG_SUBFILETYPE, FILETYPE_PAGE);
    std::vector<uint8_t> row(static_cast<std::size_t>(w) * bits / 8);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const unsigned v = static_cast<unsigned>(pg * 100 + y * 10 + x);
        if (bits == 8) {
          row[x] = static_cast<uint8_t>(v);
        } else {
          const uint16_t v16 = static_cast<uint16_t>(v * 200);
          std::memcpy(row.data() + 2 * x, &v16, 2);
        }
      }
      REQUIRE(TIFFWriteScanline(t, row.data(), y, 0) == 1);
    }
    TIFFWriteDirectory(t);
  }
  TIFFClose(t);
}

}  // namespace

TEST_CASE("multi-page 8-bit grayscale") {
  const auto dir = fixture::temp_dir("tiff8");
  write_tiff(dir / "a.tif", 8, 3, 5, 4);
  const auto v = import_tiff(dir / "a.tif");
  CHECK(v.shape() == Shape{3, 5, 4});
  CHECK(v(2, 4, 3) == doctest::Approx((200 + 40 + 3) / 255.0));
  CHECK(v(0, 0, 0) == 0.0f);
}

TEST_CASE("16-bit pages, both byte orders") {
  const auto dir = fixture::temp_dir("tiff16");
  write_tiff(dir / "le.tif", 16, 2, 3, 3, "wl");
  write_tiff(dir / "be.tif", 16, 2, 3, 3, "wb");
  const auto a = import_tiff(dir / "le.tif");
  const auto b = import_tiff(dir / "be.tif");
  CHECK(a == b);
  CHECK(a(1, 2, 2) == doctest::Approx((100 + 20 + 2) * 200 / 65535.0));
}

TEST_CASE("WhiteIsZero is inverted") {
  const auto dir = fixture::temp_dir("tiffwiz");
  write_tiff(dir / "w.tif", 8, 1, 2, 2, "w", PHOTOMETRIC_MINISWHITE);
  const auto v = import_tiff(dir / "w.tif");
  CHECK(v(0, 0, 0) == 1.0f);
  CHECK(v(0, 1, 1) == doctest::Approx(1.0 - 11 / 255.0));
}

TEST_CASE("unsupported and malformed files") {
  const auto dir = fixture::temp_dir("tiffbad");
  write_tiff(dir / "lzw.tif", 8, 1, 4, 4, "w", PHOTOMETRIC_MINISBLACK, COMPRESSION_LZW);
  CHECK_THROWS_AS(import_tiff(dir / "lzw.tif"), UnsupportedFeatureError);
  write_tiff(dir / "big.tif", 8, 1, 4, 4, "w8");
  CHECK_THROWS_AS(import_tiff(dir / "big.tif"), UnsupportedFeatureError);
  CHECK_THROWS_AS(decode_tiff("II*\0", "x"), FormatError);
  CHECK_THROWS_AS(decode_tiff("JUNKJUNKJUNK", "x"), FormatError);
  // Pages of different sizes cannot form a volume.
  write_tiff(dir / "mixed.tif", 8, 1, 4, 4);
  write_tiff(dir / "mixed.tif", 8, 1, 3, 4, "a");
  CHECK_THROWS_AS(import_tiff(dir / "mixed.tif"), FormatError);
  CHECK_THROWS_AS(import_tiff(dir / "missing.tif"), IoError);
}
