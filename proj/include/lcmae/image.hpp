#pragma once

#include <string>
#include <vector>

#include "lcmae/common.hpp"

namespace lcmae {

// Dense multi-channel image, plane-major float storage: value(c, r, col) at
// d[(c*height + r)*width + col]. Values are expected in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> d;

  Image() = default;
  Image(int h, int w, int c)
      : height(h), width(w), channels(c),
        d(static_cast<size_t>(h) * w * c, 0.0f) {
    if (h <= 0 || w <= 0 || c <= 0) throw ShapeError("Image: bad dimensions");
  }

  float& at(int c, int r, int col) {
    return d[(static_cast<size_t>(c) * height + r) * width + col];
  }
  float at(int c, int r, int col) const {
    return d[(static_cast<size_t>(c) * height + r) * width + col];
  }
  const float* plane(int c) const {
    return d.data() + static_cast<size_t>(c) * height * width;
  }
  float* plane(int c) {
    return d.data() + static_cast<size_t>(c) * height * width;
  }

  bool all_finite() const {
    for (float v : d)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

using CameraImage = Image;

// 16-bit binary PGM (single plane) and PPM (3 planes), values mapped from
// [0, 1]. Readers also accept 8-bit files.
void write_pgm(const std::string& path, const Image& img, int channel);
void write_ppm(const std::string& path, const Image& img);
Image read_pgm(const std::string& path);
Image read_ppm(const std::string& path);

}  // namespace lcmae
