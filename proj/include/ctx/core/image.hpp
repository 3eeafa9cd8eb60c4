#pragma once

#include <cstddef>
#include <vector>

namespace ctx {

// Planar float raster, values nominally in [0,1]. channels is 1 (gray)
// or 3 (RGB); plane c starts at data[c * width * height].
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, int c, float fill = 0.0f)
      : width(w), height(h), channels(c),
        data(static_cast<size_t>(w) * h * c, fill) {}

  float& at(int c, int y, int x) {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  float at(int c, int y, int x) const {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }

  size_t plane_size() const { return static_cast<size_t>(width) * height; }
  bool empty() const { return data.empty(); }
};

using GrayImage = Image; // channels == 1
using RgbImage = Image;  // channels == 3

// CHW double tensor, the layout handed to the network input.
struct Tensor3 {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Tensor3() = default;
  Tensor3(int c, int h, int w)
      : channels(c), height(h), width(w),
        data(static_cast<size_t>(c) * h * w, 0.0) {}

  double& at(int c, int y, int x) {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  double at(int c, int y, int x) const {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
};

} // namespace ctx
