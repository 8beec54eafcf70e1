#include "ref/ref_ops.hpp"

#include <algorithm>
#include <cmath>

namespace datk::ref {

std::vector<double> conv2d(const std::vector<double>& x, int n, int c, int h, int w,
                           const std::vector<double>& k, int f, int kh, int kw, int stride,
                           int pad) {
  const int ho = (h + 2 * pad - kh) / stride + 1;
  const int wo = (w + 2 * pad - kw) / stride + 1;
  std::vector<double> y(static_cast<size_t>(n) * f * ho * wo, 0.0);
  for (int in = 0; in < n; ++in)
    for (int of = 0; of < f; ++of)
      for (int oh = 0; oh < ho; ++oh)
        for (int ow = 0; ow < wo; ++ow) {
          double acc = 0.0;
          for (int ic = 0; ic < c; ++ic)
            for (int p = 0; p < kh; ++p)
              for (int q = 0; q < kw; ++q) {
                const int ih = oh * stride - pad + p;
                const int iw = ow * stride - pad + q;
                if (ih < 0 || ih >= h || iw < 0 || iw >= w) continue;
                acc += x[((static_cast<size_t>(in) * c + ic) * h + ih) * w + iw] *
                       k[((static_cast<size_t>(of) * c + ic) * kh + p) * kw + q];
              }
          y[((static_cast<size_t>(in) * f + of) * ho + oh) * wo + ow] = acc;
        }
  return y;
}

std::vector<double> depthwise_xcorr(const std::vector<double>& s, int n, int c, int hs, int ws,
                                    const std::vector<double>& t, int ht, int wt) {
  const int ho = hs - ht + 1;
  const int wo = ws - wt + 1;
  std::vector<double> y(static_cast<size_t>(n) * c * ho * wo, 0.0);
  for (int in = 0; in < n; ++in)
    for (int ic = 0; ic < c; ++ic)
      for (int oh = 0; oh < ho; ++oh)
        for (int ow = 0; ow < wo; ++ow) {
          double acc = 0.0;
          for (int p = 0; p < ht; ++p)
            for (int q = 0; q < wt; ++q)
              acc += s[((static_cast<size_t>(in) * c + ic) * hs + oh + p) * ws + ow + q] *
                     t[((static_cast<size_t>(in) * c + ic) * ht + p) * wt + q];
          y[((static_cast<size_t>(in) * c + ic) * ho + oh) * wo + ow] = acc;
        }
  return y;
}

double bilinear_at(const std::vector<double>& plane, int h, int w, double y, double x) {
  if (y < -1.0 || y > static_cast<double>(h) || x < -1.0 || x > static_cast<double>(w)) return 0.0;
  y = std::min(std::max(y, 0.0), static_cast<double>(h - 1));
  x = std::min(std::max(x, 0.0), static_cast<double>(w - 1));
  const int y0 = static_cast<int>(y), x0 = static_cast<int>(x);
  const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  const double ly = y - y0, lx = x - x0;
  return (1.0 - ly) * (1.0 - lx) * plane[static_cast<size_t>(y0) * w + x0] +
         (1.0 - ly) * lx * plane[static_cast<size_t>(y0) * w + x1] +
         ly * (1.0 - lx) * plane[static_cast<size_t>(y1) * w + x0] +
         ly * lx * plane[static_cast<size_t>(y1) * w + x1];
}

std::vector<double> roi_align(const std::vector<double>& feat, int c, int h, int w,
                              const datk::BBox& box, double stride, int size) {
  std::vector<double> out(static_cast<size_t>(c) * size * size, 0.0);
  const double fx = box.x / stride, fy = box.y / stride;
  const double bw = box.w / stride / size, bh = box.h / stride / size;
  for (int ch = 0; ch < c; ++ch) {
    std::vector<double> plane(feat.begin() + static_cast<long>(ch) * h * w,
                              feat.begin() + static_cast<long>(ch + 1) * h * w);
    for (int i = 0; i < size; ++i)
      for (int j = 0; j < size; ++j)
        out[(static_cast<size_t>(ch) * size + i) * size + j] =
            bilinear_at(plane, h, w, fy + (i + 0.5) * bh, fx + (j + 0.5) * bw);
  }
  return out;
}

double iou_grid_count(const datk::BBox& a, const datk::BBox& b) {
  const long ax0 = std::lround(a.x), ay0 = std::lround(a.y);
  const long ax1 = std::lround(a.x + a.w), ay1 = std::lround(a.y + a.h);
  const long bx0 = std::lround(b.x), by0 = std::lround(b.y);
  const long bx1 = std::lround(b.x + b.w), by1 = std::lround(b.y + b.h);
  const long lo_x = std::min(ax0, bx0), hi_x = std::max(ax1, bx1);
  const long lo_y = std::min(ay0, by0), hi_y = std::max(ay1, by1);
  long inter = 0, uni = 0;
  for (long y = lo_y; y < hi_y; ++y)
    for (long x = lo_x; x < hi_x; ++x) {
      const bool in_a = x >= ax0 && x < ax1 && y >= ay0 && y < ay1;
      const bool in_b = x >= bx0 && x < bx1 && y >= by0 && y < by1;
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

uint8_t haze_pixel(uint8_t e, double depth, double depth_scale, double depth_offset, double beta,
                   double airlight) {
  const double t = std::exp(-(depth * depth_scale + depth_offset) * beta);
  const double v = t * static_cast<double>(e) + (1.0 - t) * airlight;
  const double r = std::floor(v + 0.5);
  return static_cast<uint8_t>(std::min(255.0, std::max(0.0, r)));
}

}  // namespace datk::ref
