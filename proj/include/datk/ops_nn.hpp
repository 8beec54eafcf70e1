#pragma once

#include <cstdint>

#include "datk/kernels.hpp"
#include "datk/tensor.hpp"

namespace datk {

// y[N,F,H',W'] with H' = (H + 2*pad - kh)/stride + 1. Output extents must
// divide exactly; silent truncation hides configuration bugs.
template <class T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& k, int stride, int pad) {
  if (x.rank() != 4 || k.rank() != 4)
    throw DimensionError("conv2d: expected 4-d input and kernel, got " + shape_str(x.shape()) +
                         " and " + shape_str(k.shape()));
  if (x.dim(1) != k.dim(1))
    throw DimensionError("conv2d: input channels " + std::to_string(x.dim(1)) +
                         " != kernel channels " + std::to_string(k.dim(1)));
  if (stride < 1) throw ConfigError("conv2d: stride must be >= 1");
  if (pad < 0) throw ConfigError("conv2d: padding must be >= 0");
  kernels::Conv2dDims d{x.dim(0), x.dim(1), x.dim(2), x.dim(3),
                        k.dim(0), k.dim(2), k.dim(3), stride, pad, 0, 0};
  if (d.kh > d.h + 2 * pad || d.kw > d.w + 2 * pad)
    throw DimensionError("conv2d: kernel larger than padded input");
  const int hn = d.h + 2 * pad - d.kh;
  const int wn = d.w + 2 * pad - d.kw;
  if (hn % stride || wn % stride)
    throw ConfigError("conv2d: output size not exact for input " + shape_str(x.shape()) +
                      ", kernel " + shape_str(k.shape()) + ", stride " + std::to_string(stride) +
                      ", pad " + std::to_string(pad));
  d.ho = hn / stride + 1;
  d.wo = wn / stride + 1;

  std::vector<T> y(static_cast<size_t>(int64_t(d.n) * d.f * d.ho * d.wo));
  kernels::conv2d_forward(x.data().data(), k.data().data(), y.data(), d);
  return detail::make_op_node<T>({d.n, d.f, d.ho, d.wo}, std::move(y), {x.node(), k.node()},
                                 [d](NodeT<T>& n) {
                                   auto& px = *n.parents[0];
                                   auto& pk = *n.parents[1];
                                   if (px.requires_grad) {
                                     px.ensure_grad();
                                     kernels::conv2d_backward_input(n.grad.data(), pk.value.data(),
                                                                    px.grad.data(), d);
                                   }
                                   if (pk.requires_grad) {
                                     pk.ensure_grad();
                                     kernels::conv2d_backward_kernel(n.grad.data(), px.value.data(),
                                                                     pk.grad.data(), d);
                                   }
                                 });
}

// Per-channel valid cross-correlation of search features against template
// features used as kernels.
template <class T>
TensorT<T> depthwise_xcorr(const TensorT<T>& search, const TensorT<T>& templ) {
  if (search.rank() != 4 || templ.rank() != 4)
    throw DimensionError("depthwise_xcorr: expected 4-d tensors");
  if (search.dim(0) != templ.dim(0) || search.dim(1) != templ.dim(1))
    throw DimensionError("depthwise_xcorr: batch/channel mismatch " + shape_str(search.shape()) +
                         " vs " + shape_str(templ.shape()));
  if (templ.dim(2) > search.dim(2) || templ.dim(3) > search.dim(3))
    throw DimensionError("depthwise_xcorr: template " + shape_str(templ.shape()) +
                         " larger than search " + shape_str(search.shape()));
  kernels::XcorrDims d{search.dim(0), search.dim(1), search.dim(2), search.dim(3),
                       templ.dim(2),  templ.dim(3),  0,             0};
  d.ho = d.hs - d.ht + 1;
  d.wo = d.ws - d.wt + 1;
  std::vector<T> y(static_cast<size_t>(int64_t(d.n) * d.c * d.ho * d.wo));
  kernels::xcorr_forward(search.data().data(), templ.data().data(), y.data(), d);
  return detail::make_op_node<T>({d.n, d.c, d.ho, d.wo}, std::move(y),
                                 {search.node(), templ.node()}, [d](NodeT<T>& n) {
                                   auto& ps = *n.parents[0];
                                   auto& pt = *n.parents[1];
                                   if (ps.requires_grad) {
                                     ps.ensure_grad();
                                     kernels::xcorr_backward_search(n.grad.data(), pt.value.data(),
                                                                    ps.grad.data(), d);
                                   }
                                   if (pt.requires_grad) {
                                     pt.ensure_grad();
                                     kernels::xcorr_backward_template(n.grad.data(), ps.value.data(),
                                                                      pt.grad.data(), d);
                                   }
                                 });
}

template <class T>
TensorT<T> linear(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b) {
  if (x.rank() != 2 || w.rank() != 2 || b.rank() != 1)
    throw DimensionError("linear: expected x[N,I], w[O,I], b[O]");
  if (x.dim(1) != w.dim(1) || w.dim(0) != b.dim(0))
    throw DimensionError("linear: shape mismatch x" + shape_str(x.shape()) + " w" +
                         shape_str(w.shape()) + " b" + shape_str(b.shape()));
  const int n = x.dim(0), in = x.dim(1), out = w.dim(0);
  std::vector<T> y(static_cast<size_t>(int64_t(n) * out));
  kernels::linear_forward(x.data().data(), w.data().data(), b.data().data(), y.data(), n, in, out);
  return detail::make_op_node<T>({n, out}, std::move(y), {x.node(), w.node(), b.node()},
                                 [n, in, out](NodeT<T>& nd) {
                                   auto& px = *nd.parents[0];
                                   auto& pw = *nd.parents[1];
                                   auto& pb = *nd.parents[2];
                                   if (px.requires_grad) {
                                     px.ensure_grad();
                                     kernels::linear_backward_input(nd.grad.data(), pw.value.data(),
                                                                    px.grad.data(), n, in, out);
                                   }
                                   if (pw.requires_grad) {
                                     pw.ensure_grad();
                                     kernels::linear_backward_weight(nd.grad.data(), px.value.data(),
                                                                     pw.grad.data(), n, in, out);
                                   }
                                   if (pb.requires_grad) {
                                     pb.ensure_grad();
                                     for (int o = 0; o < out; ++o) {
                                       T acc = 0;
                                       for (int r = 0; r < n; ++r)
                                         acc += nd.grad[static_cast<size_t>(int64_t(r) * out + o)];
                                       pb.grad[static_cast<size_t>(o)] += acc;
                                     }
                                   }
                                 });
}

template <class T>
TensorT<T> bias_add(const TensorT<T>& x, const TensorT<T>& b) {
  if (x.rank() != 4 || b.rank() != 1 || b.dim(0) != x.dim(1))
    throw DimensionError("bias_add: expected x[N,C,H,W], b[C]");
  const int64_t plane = int64_t(x.dim(2)) * x.dim(3);
  const int nb = x.dim(0), c = x.dim(1);
  std::vector<T> y(x.data().size());
  for (int n = 0; n < nb; ++n)
    for (int ch = 0; ch < c; ++ch) {
      const T bv = b.data()[static_cast<size_t>(ch)];
      const int64_t base = (int64_t(n) * c + ch) * plane;
      for (int64_t i = 0; i < plane; ++i)
        y[static_cast<size_t>(base + i)] = x.data()[static_cast<size_t>(base + i)] + bv;
    }
  return detail::make_op_node<T>(x.shape(), std::move(y), {x.node(), b.node()},
                                 [nb, c, plane](NodeT<T>& nd) {
                                   auto& px = *nd.parents[0];
                                   auto& pb = *nd.parents[1];
                                   if (px.requires_grad) {
                                     px.ensure_grad();
                                     for (size_t i = 0; i < nd.grad.size(); ++i)
                                       px.grad[i] += nd.grad[i];
                                   }
                                   if (pb.requires_grad) {
                                     pb.ensure_grad();
                                     for (int ch = 0; ch < c; ++ch) {
                                       T acc = 0;
                                       for (int n = 0; n < nb; ++n) {
                                         const int64_t base = (int64_t(n) * c + ch) * plane;
                                         for (int64_t i = 0; i < plane; ++i)
                                           acc += nd.grad[static_cast<size_t>(base + i)];
                                       }
                                       pb.grad[static_cast<size_t>(ch)] += acc;
                                     }
                                   }
                                 });
}

template <class T>
TensorT<T> maxpool2d(const TensorT<T>& x, int k, int stride) {
  if (x.rank() != 4) throw DimensionError("maxpool2d: expected 4-d input");
  if (k < 1 || stride < 1) throw ConfigError("maxpool2d: kernel and stride must be >= 1");
  kernels::Pool2dDims d{x.dim(0), x.dim(1), x.dim(2), x.dim(3), k, stride, 0, 0};
  const int hn = d.h - k, wn = d.w - k;
  if (hn < 0 || wn < 0) throw DimensionError("maxpool2d: window larger than input");
  if (hn % stride || wn % stride)
    throw ConfigError("maxpool2d: output size not exact for input " + shape_str(x.shape()));
  d.ho = hn / stride + 1;
  d.wo = wn / stride + 1;
  std::vector<T> y(static_cast<size_t>(int64_t(d.n) * d.c * d.ho * d.wo));
  auto argmax = std::make_shared<std::vector<int32_t>>(y.size());
  kernels::maxpool2d_forward(x.data().data(), y.data(), argmax->data(), d);
  return detail::make_op_node<T>({d.n, d.c, d.ho, d.wo}, std::move(y), {x.node()},
                                 [d, argmax](NodeT<T>& n) {
                                   auto& p = *n.parents[0];
                                   p.ensure_grad();
                                   kernels::maxpool2d_backward(n.grad.data(), argmax->data(),
                                                               p.grad.data(), d);
                                 });
}

}  // namespace datk
