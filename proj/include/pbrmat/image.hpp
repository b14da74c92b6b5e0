#pragma once

#include <cstddef>
#include <cstring>
#include <stdexcept>
#include <vector>

namespace pbrmat {

// Row-major float image, top row first, channel index fastest.
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, float fill = 0.0f) {
    if (width <= 0 || height <= 0 || channels <= 0)
      throw std::invalid_argument("Image: dimensions must be positive");
    w_ = width;
    h_ = height;
    c_ = channels;
    data_.assign(static_cast<std::size_t>(w_) * h_ * c_, fill);
  }

  int width() const { return w_; }
  int height() const { return h_; }
  int channels() const { return c_; }
  bool empty() const { return data_.empty(); }
  std::size_t pixel_count() const { return static_cast<std::size_t>(w_) * h_; }

  float& at(int x, int y, int ch) { return data_[index(x, y, ch)]; }
  float at(int x, int y, int ch) const { return data_[index(x, y, ch)]; }

  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

  bool same_shape(const Image& o) const {
    return w_ == o.w_ && h_ == o.h_ && c_ == o.c_;
  }

 private:
  std::size_t index(int x, int y, int ch) const {
    return (static_cast<std::size_t>(y) * w_ + x) * c_ + ch;
  }

  int w_ = 0, h_ = 0, c_ = 0;
  std::vector<float> data_;
};

// Byte-level equality; distinguishes +0/-0 and compares NaN payloads, which
// float operator== would not.
inline bool bits_equal(const Image& a, const Image& b) {
  if (!a.same_shape(b)) return false;
  if (a.empty()) return true;
  return std::memcmp(a.data().data(), b.data().data(),
                     a.data().size() * sizeof(float)) == 0;
}

}  // namespace pbrmat
