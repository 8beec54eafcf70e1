#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace datk {

// 8-bit RGB image, interleaved row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> data;  // width*height*3

  Image() = default;
  Image(int w, int h) : width(w), height(h), data(static_cast<size_t>(w) * h * 3, 0) {}

  uint8_t& at(int x, int y, int c) {
    return data[(static_cast<size_t>(y) * width + x) * 3 + static_cast<size_t>(c)];
  }
  uint8_t at(int x, int y, int c) const {
    return data[(static_cast<size_t>(y) * width + x) * 3 + static_cast<size_t>(c)];
  }
  bool same_size(const Image& o) const { return width == o.width && height == o.height; }
};

// Raw depth raster; units are whatever produced it (converted to meters by
// HazeParams.depth_scale / depth_offset).
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<float> values;

  DepthMap() = default;
  DepthMap(int w, int h) : width(w), height(h), values(static_cast<size_t>(w) * h, 0.0f) {}

  float& at(int x, int y) { return values[static_cast<size_t>(y) * width + x]; }
  float at(int x, int y) const { return values[static_cast<size_t>(y) * width + x]; }
};

Image read_png_rgb8(const std::string& path);
void write_png_rgb8(const std::string& path, const Image& img);

// "DMAP" + u32 width + u32 height + little-endian f32 raster, row-major.
DepthMap read_dmap(const std::string& path);
void write_dmap(const std::string& path, const DepthMap& d);

}  // namespace datk
