#pragma once

#include <string>
#include <vector>

#include "mathrec/error.hpp"

namespace mathrec::data {

// Grayscale image, row-major, values in [0, 1]. Ink is high-value on a
// low-value background.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(int h, int w) : height(h), width(w), pixels(static_cast<size_t>(h) * w, 0.0f) {}

  float& at(int r, int c) { return pixels[static_cast<size_t>(r) * width + c]; }
  float at(int r, int c) const { return pixels[static_cast<size_t>(r) * width + c]; }
  bool in_bounds(int r, int c) const { return r >= 0 && r < height && c >= 0 && c < width; }
};

/// Binary PGM (P5, maxval 255).
void write_pgm(const Image& image, const std::string& path);
Image read_pgm(const std::string& path);

}  // namespace mathrec::data
