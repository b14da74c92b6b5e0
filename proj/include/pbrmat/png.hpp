#pragma once

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pbrmat/errors.hpp"

namespace pbrmat {

namespace detail {

inline void png_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline void png_chunk(std::ofstream& out, const char type[4],
                      const std::vector<std::uint8_t>& payload) {
  std::vector<std::uint8_t> buf;
  png_be32(buf, static_cast<std::uint32_t>(payload.size()));
  buf.insert(buf.end(), type, type + 4);
  buf.insert(buf.end(), payload.begin(), payload.end());
  std::uint32_t crc = static_cast<std::uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), buf.data() + 4,
            static_cast<uInt>(buf.size() - 4)));
  png_be32(buf, crc);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
}

}  // namespace detail

// Writes an 8-bit RGB PNG (color type 2, no interlace). `rgb` is row-major,
// top row first, 3 bytes per pixel.
inline void write_png_rgb8(const std::string& path,
                           const std::vector<std::uint8_t>& rgb, int width,
                           int height) {
  if (width <= 0 || height <= 0)
    throw std::invalid_argument("write_png_rgb8: dimensions must be positive");
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3)
    throw std::invalid_argument("write_png_rgb8: pixel buffer size mismatch");

  std::vector<std::uint8_t> raw;
  raw.reserve(static_cast<std::size_t>(height) * (1 + 3 * width));
  for (int y = 0; y < height; ++y) {
    raw.push_back(0);  // filter: none
    const std::uint8_t* row = rgb.data() + static_cast<std::size_t>(y) * width * 3;
    raw.insert(raw.end(), row, row + 3 * width);
  }
  uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> zdata(zlen);
  if (compress2(zdata.data(), &zlen, raw.data(), static_cast<uLong>(raw.size()),
                Z_BEST_SPEED) != Z_OK) {
    throw IoError("write_png_rgb8: deflate failed for " + path);
  }
  zdata.resize(zlen);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);

  static const std::uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  out.write(reinterpret_cast<const char*>(sig), 8);

  std::vector<std::uint8_t> ihdr;
  detail::png_be32(ihdr, static_cast<std::uint32_t>(width));
  detail::png_be32(ihdr, static_cast<std::uint32_t>(height));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(2);  // color type: truecolor
  ihdr.push_back(0);  // compression
  ihdr.push_back(0);  // filter method
  ihdr.push_back(0);  // no interlace
  detail::png_chunk(out, "IHDR", ihdr);
  detail::png_chunk(out, "IDAT", zdata);
  detail::png_chunk(out, "IEND", {});
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace pbrmat
