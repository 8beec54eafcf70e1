#pragma once

// Serial reference implementations, kept deliberately naive and separate
// from the OpenMP kernels. Tests use them as independent oracles and the
// benchmark compares the two paths.

#include <cstdint>
#include <vector>

#include "datk/bbox.hpp"

namespace datk::ref {

// Direct 6-loop convolution, zero padding.
std::vector<double> conv2d(const std::vector<double>& x, int n, int c, int h, int w,
                           const std::vector<double>& k, int f, int kh, int kw, int stride,
                           int pad);

// Per-channel sliding-window correlation.
std::vector<double> depthwise_xcorr(const std::vector<double>& s, int n, int c, int hs, int ws,
                                    const std::vector<double>& t, int ht, int wt);

// Dense bilinear sampling with the same border contract as the fast path:
// points beyond one cell outside the map read zero, border points clamp.
double bilinear_at(const std::vector<double>& plane, int h, int w, double y, double x);

// ROI Align, one center sample per bin, box in image coordinates.
std::vector<double> roi_align(const std::vector<double>& feat, int c, int h, int w,
                              const datk::BBox& box, double stride, int size);

// Intersection-over-union by unit-cell counting; exact for integer boxes.
double iou_grid_count(const datk::BBox& a, const datk::BBox& b);

// Per-pixel atmospheric scattering: I = t*E + (1-t)*A with
// t = exp(-(d*scale + offset)*beta), rounded half-up and clamped.
uint8_t haze_pixel(uint8_t e, double depth, double depth_scale, double depth_offset, double beta,
                   double airlight);

}  // namespace datk::ref
