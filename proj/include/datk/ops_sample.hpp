#pragma once

#include <array>
#include <cmath>

#include "datk/bbox.hpp"
#include "datk/tensor.hpp"

namespace datk {

namespace detail {

// Bilinear tap at (x, y) in cell-center coordinates. Points more than one
// cell outside the map contribute nothing; points on the border clamp to
// it. Up to four (index, weight) pairs are produced.
struct BilinearTap {
  std::array<int64_t, 4> idx{};
  std::array<double, 4> w{};
  int count = 0;
};

inline BilinearTap bilinear_tap(int h, int width, double y, double x) {
  BilinearTap tap;
  if (y < -1.0 || y > static_cast<double>(h) || x < -1.0 || x > static_cast<double>(width))
    return tap;
  y = std::min(std::max(y, 0.0), static_cast<double>(h - 1));
  x = std::min(std::max(x, 0.0), static_cast<double>(width - 1));
  const int y0 = static_cast<int>(y);
  const int x0 = static_cast<int>(x);
  const int y1 = std::min(y0 + 1, h - 1);
  const int x1 = std::min(x0 + 1, width - 1);
  const double ly = y - y0, lx = x - x0;
  const double hy = 1.0 - ly, hx = 1.0 - lx;
  const std::array<std::pair<int64_t, double>, 4> parts = {{
      {int64_t(y0) * width + x0, hy * hx},
      {int64_t(y0) * width + x1, hy * lx},
      {int64_t(y1) * width + x0, ly * hx},
      {int64_t(y1) * width + x1, ly * lx},
  }};
  for (const auto& [i, wgt] : parts) {
    if (wgt == 0.0) continue;
    tap.idx[static_cast<size_t>(tap.count)] = i;
    tap.w[static_cast<size_t>(tap.count)] = wgt;
    ++tap.count;
  }
  return tap;
}

}  // namespace detail

// Sample P points (x, y), given in feature-map coordinates, from every
// channel of every batch item: x[N,C,H,W] -> [N,C,P].
template <class T>
TensorT<T> bilinear_sample(const TensorT<T>& x, const std::vector<std::array<double, 2>>& points) {
  if (x.rank() != 4) throw DimensionError("bilinear_sample: expected 4-d input");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int np = static_cast<int>(points.size());
  auto taps = std::make_shared<std::vector<detail::BilinearTap>>();
  taps->reserve(points.size());
  for (const auto& pt : points) taps->push_back(detail::bilinear_tap(h, w, pt[1], pt[0]));

  std::vector<T> y(static_cast<size_t>(int64_t(n) * c * np));
  const int64_t plane = int64_t(h) * w;
  for (int64_t nc = 0; nc < int64_t(n) * c; ++nc) {
    const T* xp = x.data().data() + nc * plane;
    T* yp = y.data() + nc * np;
    for (int p = 0; p < np; ++p) {
      const auto& tap = (*taps)[static_cast<size_t>(p)];
      T acc = 0;
      for (int i = 0; i < tap.count; ++i)
        acc += static_cast<T>(tap.w[static_cast<size_t>(i)]) *
               xp[tap.idx[static_cast<size_t>(i)]];
      yp[p] = acc;
    }
  }
  return detail::make_op_node<T>({n, c, np}, std::move(y), {x.node()},
                                 [taps, n, c, np, plane](NodeT<T>& nd) {
                                   auto& p = *nd.parents[0];
                                   p.ensure_grad();
                                   for (int64_t nc = 0; nc < int64_t(n) * c; ++nc) {
                                     T* gxp = p.grad.data() + nc * plane;
                                     const T* gyp = nd.grad.data() + nc * np;
                                     for (int pt = 0; pt < np; ++pt) {
                                       const auto& tap = (*taps)[static_cast<size_t>(pt)];
                                       for (int i = 0; i < tap.count; ++i)
                                         gxp[tap.idx[static_cast<size_t>(i)]] +=
                                             gyp[pt] * static_cast<T>(tap.w[static_cast<size_t>(i)]);
                                     }
                                   }
                                 });
}

// ROI Align with one bilinear sample per bin (the bin center). The box is
// given in image coordinates; feature coordinates are image / stride.
// Output is [C, size, size] for batch item `sample`.
template <class T>
TensorT<T> roi_align(const TensorT<T>& feat, int sample, const BBox& box, double stride,
                     int size = 5) {
  if (feat.rank() != 4) throw DimensionError("roi_align: expected 4-d feature map");
  if (sample < 0 || sample >= feat.dim(0))
    throw DimensionError("roi_align: sample index out of range");
  if (!box.valid()) throw ContractError("roi_align: degenerate box");
  if (stride <= 0) throw ConfigError("roi_align: stride must be positive");
  const int c = feat.dim(1), h = feat.dim(2), w = feat.dim(3);
  const double fx = box.x / stride, fy = box.y / stride;
  const double fw = box.w / stride, fh = box.h / stride;
  const double bin_w = fw / size, bin_h = fh / size;

  auto taps = std::make_shared<std::vector<detail::BilinearTap>>();
  taps->reserve(static_cast<size_t>(size) * size);
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j)
      taps->push_back(detail::bilinear_tap(h, w, fy + (i + 0.5) * bin_h, fx + (j + 0.5) * bin_w));

  const int64_t plane = int64_t(h) * w;
  const int64_t bins = int64_t(size) * size;
  std::vector<T> y(static_cast<size_t>(c * bins));
  for (int ch = 0; ch < c; ++ch) {
    const T* xp = feat.data().data() + (int64_t(sample) * c + ch) * plane;
    for (int64_t b = 0; b < bins; ++b) {
      const auto& tap = (*taps)[static_cast<size_t>(b)];
      T acc = 0;
      for (int i = 0; i < tap.count; ++i)
        acc += static_cast<T>(tap.w[static_cast<size_t>(i)]) * xp[tap.idx[static_cast<size_t>(i)]];
      y[static_cast<size_t>(ch * bins + b)] = acc;
    }
  }
  return detail::make_op_node<T>({c, size, size}, std::move(y), {feat.node()},
                                 [taps, sample, c, plane, bins](NodeT<T>& nd) {
                                   auto& p = *nd.parents[0];
                                   p.ensure_grad();
                                   for (int ch = 0; ch < c; ++ch) {
                                     T* gxp = p.grad.data() + (int64_t(sample) * c + ch) * plane;
                                     for (int64_t b = 0; b < bins; ++b) {
                                       const auto& tap = (*taps)[static_cast<size_t>(b)];
                                       const T g = nd.grad[static_cast<size_t>(ch * bins + b)];
                                       for (int i = 0; i < tap.count; ++i)
                                         gxp[tap.idx[static_cast<size_t>(i)]] +=
                                             g * static_cast<T>(tap.w[static_cast<size_t>(i)]);
                                     }
                                   }
                                 });
}

}  // namespace datk
