#include "datk/anchors.hpp"

#include <cmath>

#include "datk/errors.hpp"

namespace datk {

AnchorGrid AnchorGrid::make(int response, double stride, int search_size, double side,
                            const std::vector<double>& ratios) {
  if (response < 1 || ratios.empty()) throw ConfigError("anchor grid: bad parameters");
  AnchorGrid grid;
  grid.response = response;
  grid.k = static_cast<int>(ratios.size());
  grid.stride = stride;
  grid.anchors.reserve(static_cast<size_t>(response) * response * ratios.size());

  // Center the grid on the search crop.
  const double offset = (search_size - (response - 1) * stride) / 2.0;
  for (int i = 0; i < response; ++i) {
    for (int j = 0; j < response; ++j) {
      const double cy = offset + i * stride;
      const double cx = offset + j * stride;
      for (double r : ratios) {
        // Constant area: w/h = 1/r, w*h = side^2.
        const double w = side / std::sqrt(r);
        const double h = side * std::sqrt(r);
        grid.anchors.push_back(BBox::from_center(cx, cy, w, h));
      }
    }
  }
  return grid;
}

std::array<double, 4> encode_box(const BBox& box, const BBox& anchor) {
  return {(box.cx() - anchor.cx()) / anchor.w, (box.cy() - anchor.cy()) / anchor.h,
          std::log(box.w / anchor.w), std::log(box.h / anchor.h)};
}

BBox decode_box(const std::array<double, 4>& d, const BBox& anchor) {
  return BBox::from_center(anchor.cx() + d[0] * anchor.w, anchor.cy() + d[1] * anchor.h,
                           anchor.w * std::exp(d[2]), anchor.h * std::exp(d[3]));
}

}  // namespace datk
