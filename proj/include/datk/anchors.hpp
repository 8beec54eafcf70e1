#pragma once

#include <array>
#include <vector>

#include "datk/bbox.hpp"

namespace datk {

// Anchor boxes laid over the response map, in search-crop pixel
// coordinates. k anchors per cell; cls maps carry 2k channels and reg
// maps 4k, anchor-major (channels 2a, 2a+1 are background/foreground of
// anchor a).
struct AnchorGrid {
  int response = 0;       // response map side length
  int k = 0;              // anchors per cell
  double stride = 8.0;
  std::vector<BBox> anchors;  // response*response*k, row-major cells, anchor-minor

  // Anchor for (cell row i, cell col j, anchor a).
  const BBox& at(int i, int j, int a) const {
    return anchors[(static_cast<size_t>(i) * response + j) * static_cast<size_t>(k) + a];
  }

  static AnchorGrid make(int response, double stride, int search_size, double side,
                         const std::vector<double>& ratios);
};

// RPN box parameterization: dx,dy offsets scaled by anchor size, dw,dh
// exponential.
std::array<double, 4> encode_box(const BBox& box, const BBox& anchor);
BBox decode_box(const std::array<double, 4>& d, const BBox& anchor);

}  // namespace datk
