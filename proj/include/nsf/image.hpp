#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "nsf/errors.hpp"

namespace nsf {

// Row-major, channel-interleaved raster. Pixel (x, y) channel c lives at
// data[(y * width + x) * channels + c].
template <class T>
struct ImageT {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<T> data;

  ImageT() = default;
  ImageT(int w, int h, int c, T fill = T{})
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  T& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
  const T& at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }

  bool same_shape(const ImageT& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
  template <class U>
  bool same_extent(const ImageT<U>& o) const {
    return width == o.width && height == o.height;
  }

  template <class U>
  ImageT<U> cast() const {
    ImageT<U> out(width, height, channels);
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

using Image = ImageT<float>;
using Mask = ImageT<std::uint8_t>;

template <class A, class B>
void require_same_extent(const A& a, const B& b, const char* what) {
  if (a.width != b.width || a.height != b.height) {
    throw ShapeError(std::string(what) + ": image extents differ");
  }
}

}  // namespace nsf
