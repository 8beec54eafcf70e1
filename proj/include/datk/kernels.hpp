#pragma once

// Dense compute kernels behind the autodiff ops. Every output element is
// produced by exactly one thread with a fixed-order accumulation, so
// results are bit-identical for any OMP_NUM_THREADS. Inner loops run over
// independent per-output accumulators (not cross-lane reductions), which
// lets them vectorize under strict IEEE rules.

#include <algorithm>
#include <cstdint>
#include <vector>

namespace datk::kernels {

// Parallelism cutoff: tensors smaller than this are cheaper serial.
inline constexpr int64_t kOmpMinWork = 1 << 13;

struct Conv2dDims {
  int n, c, h, w;  // input
  int f, kh, kw;   // kernel
  int stride, pad;
  int ho, wo;      // output
};

template <class T>
void conv2d_forward(const T* x, const T* k, T* y, const Conv2dDims& d) {
  const int64_t work = int64_t(d.n) * d.f * d.ho * d.wo * d.c * d.kh * d.kw;
#pragma omp parallel for collapse(2) schedule(static) if (work > kOmpMinWork)
  for (int n = 0; n < d.n; ++n) {
    for (int f = 0; f < d.f; ++f) {
      T* yp = y + (int64_t(n) * d.f + f) * d.ho * d.wo;
      std::fill(yp, yp + int64_t(d.ho) * d.wo, T(0));
      for (int c = 0; c < d.c; ++c) {
        const T* xp = x + (int64_t(n) * d.c + c) * d.h * d.w;
        const T* kc = k + ((int64_t(f) * d.c + c) * d.kh) * d.kw;
        for (int oh = 0; oh < d.ho; ++oh) {
          T* yrow = yp + int64_t(oh) * d.wo;
          for (int p = 0; p < d.kh; ++p) {
            const int ih = oh * d.stride - d.pad + p;
            if (ih < 0 || ih >= d.h) continue;
            const T* xrow = xp + int64_t(ih) * d.w;
            for (int q = 0; q < d.kw; ++q) {
              const T kv = kc[int64_t(p) * d.kw + q];
              const int off = q - d.pad;
              // Valid ow range so that iw = ow*stride + off is in bounds.
              int lo = 0, hi = d.wo;
              if (d.stride == 1) {
                lo = std::max(0, -off);
                hi = std::min(d.wo, d.w - off);
                const T* xs = xrow + off;
                for (int ow = lo; ow < hi; ++ow) yrow[ow] += kv * xs[ow];
              } else {
                for (int ow = 0; ow < d.wo; ++ow) {
                  const int iw = ow * d.stride + off;
                  if (iw >= 0 && iw < d.w) yrow[ow] += kv * xrow[iw];
                }
              }
            }
          }
        }
      }
    }
  }
}

// dL/dx as a row accumulation: for each input row, add every kernel tap's
// contribution from the matching output row.
template <class T>
void conv2d_backward_input(const T* gy, const T* k, T* gx, const Conv2dDims& d) {
  const int64_t work = int64_t(d.n) * d.c * d.h * d.w * d.f;
#pragma omp parallel for collapse(2) schedule(static) if (work > kOmpMinWork)
  for (int n = 0; n < d.n; ++n) {
    for (int c = 0; c < d.c; ++c) {
      T* gxp = gx + (int64_t(n) * d.c + c) * d.h * d.w;
      for (int f = 0; f < d.f; ++f) {
        const T* gyp = gy + (int64_t(n) * d.f + f) * d.ho * d.wo;
        const T* kc = k + ((int64_t(f) * d.c + c) * d.kh) * d.kw;
        for (int oh = 0; oh < d.ho; ++oh) {
          const T* gyrow = gyp + int64_t(oh) * d.wo;
          for (int p = 0; p < d.kh; ++p) {
            const int ih = oh * d.stride - d.pad + p;
            if (ih < 0 || ih >= d.h) continue;
            T* gxrow = gxp + int64_t(ih) * d.w;
            for (int q = 0; q < d.kw; ++q) {
              const T kv = kc[int64_t(p) * d.kw + q];
              const int off = q - d.pad;
              if (d.stride == 1) {
                const int lo = std::max(0, -off);
                const int hi = std::min(d.wo, d.w - off);
                T* gxs = gxrow + off;
                for (int ow = lo; ow < hi; ++ow) gxs[ow] += kv * gyrow[ow];
              } else {
                for (int ow = 0; ow < d.wo; ++ow) {
                  const int iw = ow * d.stride + off;
                  if (iw >= 0 && iw < d.w) gxrow[iw] += kv * gyrow[ow];
                }
              }
            }
          }
        }
      }
    }
  }
}

namespace detail {

// Fixed-order dot product with four independent partial accumulators;
// deterministic and considerably faster than a single serial chain.
template <class T>
T dot4(const T* a, const T* b, int n) {
  T s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return ((s0 + s1) + (s2 + s3));
}

// Strided-b variant for stride > 1 access patterns.
template <class T>
T dot_strided(const T* a, const T* b, int n, int bstride) {
  T s = 0;
  for (int i = 0; i < n; ++i) s += a[i] * b[int64_t(i) * bstride];
  return s;
}

}  // namespace detail

template <class T>
void conv2d_backward_kernel(const T* gy, const T* x, T* gk, const Conv2dDims& d) {
  const int64_t work = int64_t(d.f) * d.c * d.kh * d.kw * d.n * d.ho * d.wo;
#pragma omp parallel for collapse(2) schedule(static) if (work > kOmpMinWork)
  for (int f = 0; f < d.f; ++f) {
    for (int c = 0; c < d.c; ++c) {
      for (int p = 0; p < d.kh; ++p) {
        for (int q = 0; q < d.kw; ++q) {
          T acc = 0;
          for (int n = 0; n < d.n; ++n) {
            const T* gyp = gy + (int64_t(n) * d.f + f) * d.ho * d.wo;
            const T* xp = x + (int64_t(n) * d.c + c) * d.h * d.w;
            for (int oh = 0; oh < d.ho; ++oh) {
              const int ih = oh * d.stride - d.pad + p;
              if (ih < 0 || ih >= d.h) continue;
              const T* gyrow = gyp + int64_t(oh) * d.wo;
              const T* xrow = xp + int64_t(ih) * d.w;
              const int off = q - d.pad;
              if (d.stride == 1) {
                const int lo = std::max(0, -off);
                const int hi = std::min(d.wo, d.w - off);
                if (hi > lo) acc += detail::dot4(gyrow + lo, xrow + off + lo, hi - lo);
              } else {
                for (int ow = 0; ow < d.wo; ++ow) {
                  const int iw = ow * d.stride + off;
                  if (iw >= 0 && iw < d.w) acc += gyrow[ow] * xrow[iw];
                }
              }
            }
          }
          gk[((int64_t(f) * d.c + c) * d.kh + p) * d.kw + q] += acc;
        }
      }
    }
  }
}

struct XcorrDims {
  int n, c;
  int hs, ws;  // search
  int ht, wt;  // template
  int ho, wo;  // ho = hs-ht+1
};

// Per-channel valid cross-correlation: search with template as kernel.
template <class T>
void xcorr_forward(const T* s, const T* t, T* y, const XcorrDims& d) {
  const int64_t work = int64_t(d.n) * d.c * d.ho * d.wo * d.ht * d.wt;
#pragma omp parallel for collapse(2) schedule(static) if (work > kOmpMinWork)
  for (int n = 0; n < d.n; ++n) {
    for (int c = 0; c < d.c; ++c) {
      const T* sp = s + (int64_t(n) * d.c + c) * d.hs * d.ws;
      const T* tp = t + (int64_t(n) * d.c + c) * d.ht * d.wt;
      T* yp = y + (int64_t(n) * d.c + c) * d.ho * d.wo;
      std::fill(yp, yp + int64_t(d.ho) * d.wo, T(0));
      for (int oh = 0; oh < d.ho; ++oh) {
        T* yrow = yp + int64_t(oh) * d.wo;
        for (int p = 0; p < d.ht; ++p) {
          const T* srow = sp + int64_t(oh + p) * d.ws;
          const T* trow = tp + int64_t(p) * d.wt;
          for (int q = 0; q < d.wt; ++q) {
            const T tv = trow[q];
            const T* ss = srow + q;
            for (int ow = 0; ow < d.wo; ++ow) yrow[ow] += tv * ss[ow];
          }
        }
      }
    }
  }
}

template <class T>
void xcorr_backward_search(const T* gy, const T* t, T* gs, const XcorrDims& d) {
  const int64_t work = int64_t(d.n) * d.c * d.hs * d.ws;
#pragma omp parallel for collapse(2) schedule(static) if (work > kOmpMinWork)
  for (int n = 0; n < d.n; ++n) {
    for (int c = 0; c < d.c; ++c) {
      const T* gyp = gy + (int64_t(n) * d.c + c) * d.ho * d.wo;
      const T* tp = t + (int64_t(n) * d.c + c) * d.ht * d.wt;
      T* gsp = gs + (int64_t(n) * d.c + c) * d.hs * d.ws;
      for (int oh = 0; oh < d.ho; ++oh) {
        const T* gyrow = gyp + int64_t(oh) * d.wo;
        for (int p = 0; p < d.ht; ++p) {
          T* gsrow = gsp + int64_t(oh + p) * d.ws;
          const T* trow = tp + int64_t(p) * d.wt;
          for (int q = 0; q < d.wt; ++q) {
            const T tv = trow[q];
            T* gss = gsrow + q;
            for (int ow = 0; ow < d.wo; ++ow) gss[ow] += tv * gyrow[ow];
          }
        }
      }
    }
  }
}

template <class T>
void xcorr_backward_template(const T* gy, const T* s, T* gt, const XcorrDims& d) {
  const int64_t work = int64_t(d.n) * d.c * d.ht * d.wt * d.ho * d.wo;
#pragma omp parallel for collapse(2) schedule(static) if (work > kOmpMinWork)
  for (int n = 0; n < d.n; ++n) {
    for (int c = 0; c < d.c; ++c) {
      const T* gyp = gy + (int64_t(n) * d.c + c) * d.ho * d.wo;
      const T* sp = s + (int64_t(n) * d.c + c) * d.hs * d.ws;
      T* gtp = gt + (int64_t(n) * d.c + c) * d.ht * d.wt;
      for (int p = 0; p < d.ht; ++p) {
        for (int q = 0; q < d.wt; ++q) {
          T acc = 0;
          for (int oh = 0; oh < d.ho; ++oh)
            acc += detail::dot4(gyp + int64_t(oh) * d.wo, sp + int64_t(oh + p) * d.ws + q, d.wo);
          gtp[int64_t(p) * d.wt + q] += acc;
        }
      }
    }
  }
}

// xcorr backward wrt search must not race: writes go to overlapping rows
// only within one (n, c) plane, and each plane is owned by one thread.

// y[N,O] = x[N,I] * w[O,I]^T + b[O]
template <class T>
void linear_forward(const T* x, const T* w, const T* b, T* y, int n, int in, int out) {
  const int64_t work = int64_t(n) * in * out;
#pragma omp parallel for collapse(2) schedule(static) if (work > kOmpMinWork)
  for (int r = 0; r < n; ++r) {
    for (int o = 0; o < out; ++o) {
      const T acc = detail::dot4(x + int64_t(r) * in, w + int64_t(o) * in, in);
      y[int64_t(r) * out + o] = (b ? b[o] : T(0)) + acc;
    }
  }
}

template <class T>
void linear_backward_input(const T* gy, const T* w, T* gx, int n, int in, int out) {
  const int64_t work = int64_t(n) * in * out;
#pragma omp parallel for schedule(static) if (work > kOmpMinWork)
  for (int r = 0; r < n; ++r) {
    T* gxrow = gx + int64_t(r) * in;
    for (int o = 0; o < out; ++o) {
      const T g = gy[int64_t(r) * out + o];
      const T* wrow = w + int64_t(o) * in;
      for (int i = 0; i < in; ++i) gxrow[i] += g * wrow[i];
    }
  }
}

template <class T>
void linear_backward_weight(const T* gy, const T* x, T* gw, int n, int in, int out) {
  const int64_t work = int64_t(n) * in * out;
#pragma omp parallel for schedule(static) if (work > kOmpMinWork)
  for (int o = 0; o < out; ++o) {
    T* gwrow = gw + int64_t(o) * in;
    for (int r = 0; r < n; ++r) {
      const T g = gy[int64_t(r) * out + o];
      const T* xrow = x + int64_t(r) * in;
      for (int i = 0; i < in; ++i) gwrow[i] += g * xrow[i];
    }
  }
}

struct Pool2dDims {
  int n, c, h, w;
  int k, stride;
  int ho, wo;
};

template <class T>
void maxpool2d_forward(const T* x, T* y, int32_t* argmax, const Pool2dDims& d) {
  const int64_t planes = int64_t(d.n) * d.c;
#pragma omp parallel for schedule(static) if (planes * d.ho * d.wo * d.k * d.k > kOmpMinWork)
  for (int64_t nc = 0; nc < planes; ++nc) {
    const T* xp = x + nc * d.h * d.w;
    T* yp = y + nc * d.ho * d.wo;
    int32_t* ap = argmax + nc * d.ho * d.wo;
    for (int oh = 0; oh < d.ho; ++oh) {
      for (int ow = 0; ow < d.wo; ++ow) {
        int best = oh * d.stride * d.w + ow * d.stride;
        T bv = xp[best];
        for (int p = 0; p < d.k; ++p) {
          for (int q = 0; q < d.k; ++q) {
            const int idx = (oh * d.stride + p) * d.w + (ow * d.stride + q);
            if (xp[idx] > bv) {
              bv = xp[idx];
              best = idx;
            }
          }
        }
        yp[int64_t(oh) * d.wo + ow] = bv;
        ap[int64_t(oh) * d.wo + ow] = best;
      }
    }
  }
}

// Scatter within one (n,c) plane only; planes are independent, so the
// parallel loop stays race-free.
template <class T>
void maxpool2d_backward(const T* gy, const int32_t* argmax, T* gx, const Pool2dDims& d) {
  const int64_t planes = int64_t(d.n) * d.c;
#pragma omp parallel for schedule(static) if (planes * d.ho * d.wo > kOmpMinWork)
  for (int64_t nc = 0; nc < planes; ++nc) {
    const T* gyp = gy + nc * d.ho * d.wo;
    const int32_t* ap = argmax + nc * d.ho * d.wo;
    T* gxp = gx + nc * d.h * d.w;
    for (int64_t i = 0; i < int64_t(d.ho) * d.wo; ++i) gxp[ap[i]] += gyp[i];
  }
}

}  // namespace datk::kernels
