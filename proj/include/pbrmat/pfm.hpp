#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "pbrmat/errors.hpp"
#include "pbrmat/image.hpp"

namespace pbrmat {

static_assert(std::endian::native == std::endian::little,
              "PFM payloads are written as raw host floats");
static_assert(sizeof(float) == 4);

// Writes `img` as a binary PFM ("PF" for 3 channels, "Pf" for 1). Scale is
// always -1.0 (little-endian) and rows are stored bottom-to-top, so a
// write/read round trip is bit-exact.
inline void write_pfm(const std::string& path, const Image& img) {
  if (img.channels() != 1 && img.channels() != 3) {
    throw std::invalid_argument("write_pfm: image must have 1 or 3 channels, got " +
                                std::to_string(img.channels()));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  char header[64];
  std::snprintf(header, sizeof(header), "%s\n%d %d\n-1.0\n",
                img.channels() == 3 ? "PF" : "Pf", img.width(), img.height());
  out << header;
  const int row_floats = img.width() * img.channels();
  for (int y = img.height() - 1; y >= 0; --y) {
    const float* row = img.data().data() + static_cast<std::size_t>(y) * row_floats;
    out.write(reinterpret_cast<const char*>(row), row_floats * 4);
  }
  if (!out) throw IoError("write failed: " + path);
}

namespace detail {

// Reads one whitespace-delimited token, skipping leading whitespace.
inline std::string pfm_token(std::istream& in) {
  std::string tok;
  in >> tok;
  return tok;
}

}  // namespace detail

inline Image read_pfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);

  std::string magic = detail::pfm_token(in);
  int channels = 0;
  if (magic == "PF") {
    channels = 3;
  } else if (magic == "Pf") {
    channels = 1;
  } else {
    throw PfmError(PfmError::Kind::kBadHeader,
                   "bad magic '" + magic + "' in " + path);
  }

  std::string ws = detail::pfm_token(in);
  std::string hs = detail::pfm_token(in);
  int w = 0, h = 0;
  try {
    std::size_t used = 0;
    w = std::stoi(ws, &used);
    if (used != ws.size()) throw std::invalid_argument(ws);
    h = std::stoi(hs, &used);
    if (used != hs.size()) throw std::invalid_argument(hs);
  } catch (const std::exception&) {
    throw PfmError(PfmError::Kind::kBadDims,
                   "unparseable dimensions '" + ws + " " + hs + "' in " + path);
  }
  if (w <= 0 || h <= 0) {
    throw PfmError(PfmError::Kind::kBadDims,
                   "non-positive dimensions in " + path);
  }

  std::string ss = detail::pfm_token(in);
  double scale = 0.0;
  try {
    std::size_t used = 0;
    scale = std::stod(ss, &used);
    if (used != ss.size()) throw std::invalid_argument(ss);
  } catch (const std::exception&) {
    throw PfmError(PfmError::Kind::kBadScale,
                   "unparseable scale '" + ss + "' in " + path);
  }
  if (scale == 0.0) {
    throw PfmError(PfmError::Kind::kBadScale, "zero scale in " + path);
  }
  if (scale > 0.0) {
    throw PfmError(PfmError::Kind::kBigEndian,
                   "big-endian payload (positive scale) in " + path);
  }
  in.get();  // single whitespace byte terminating the header

  Image img(w, h, channels);
  const int row_floats = w * channels;
  for (int y = h - 1; y >= 0; --y) {
    float* row = img.data().data() + static_cast<std::size_t>(y) * row_floats;
    in.read(reinterpret_cast<char*>(row), row_floats * 4);
    if (in.gcount() != row_floats * 4) {
      throw PfmError(PfmError::Kind::kTruncated,
                     "payload ends early in " + path);
    }
  }
  if (scale != -1.0) {
    const float mag = static_cast<float>(-scale);
    for (float& v : img.data()) v *= mag;
  }
  return img;
}

}  // namespace pbrmat
