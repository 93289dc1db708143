#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>

#include "strokebench/error.hpp"
#include "strokebench/parallel.hpp"
#include "strokebench/tensor.hpp"

namespace strokebench {

template <class T>
struct Conv3dGrads {
    Tensor<T> input;  // empty when not requested
    Tensor<T> weight;
    Tensor<T> bias;
};

namespace detail {

struct ConvGeometry {
    std::size_t n, c, t, h, w;     // input
    std::size_t f, kt, kh, kw;     // weight
    std::size_t to, ho, wo;        // output
    std::size_t stride, pad;

    std::size_t in_plane() const { return t * h * w; }
    std::size_t out_plane() const { return to * ho * wo; }
    std::size_t kernel_volume() const { return kt * kh * kw; }
};

template <class T>
ConvGeometry conv_geometry(const Tensor<T>& input, const Tensor<T>& weight, std::size_t stride, std::size_t pad) {
    if (input.rank() != 5) throw ShapeError("conv3d input must be (N,C,T,H,W), got " + to_string(input.shape()));
    if (weight.rank() != 5) throw ShapeError("conv3d weight must be (F,C,kt,kh,kw), got " + to_string(weight.shape()));
    if (stride == 0) throw ShapeError("conv3d stride must be >= 1");
    const auto& is = input.shape();
    const auto& ws = weight.shape();
    if (is[1] != ws[1])
        throw ShapeError("conv3d channel mismatch: input " + to_string(is) + " vs weight " + to_string(ws));
    auto out_extent = [&](std::size_t x, std::size_t k, const char* axis) {
        if (x + 2 * pad < k)
            throw ShapeError(std::string("conv3d kernel exceeds padded input on axis ") + axis + ": input " +
                             to_string(is) + ", weight " + to_string(ws));
        return (x + 2 * pad - k) / stride + 1;
    };
    ConvGeometry g{is[0], is[1], is[2], is[3], is[4], ws[0], ws[2], ws[3], ws[4], 0, 0, 0, stride, pad};
    g.to = out_extent(g.t, g.kt, "T");
    g.ho = out_extent(g.h, g.kh, "H");
    g.wo = out_extent(g.w, g.kw, "W");
    return g;
}

/// Output index range [lo, hi) along one axis for which o*stride + k - pad
/// lands inside [0, extent).
inline void valid_range(std::size_t extent, std::size_t out_extent, std::size_t k, std::size_t stride, std::size_t pad,
                        std::size_t& lo, std::size_t& hi) {
    const auto s = static_cast<std::int64_t>(stride);
    const auto shift = static_cast<std::int64_t>(k) - static_cast<std::int64_t>(pad);
    // smallest o with o*s + shift >= 0
    std::int64_t first = shift >= 0 ? 0 : (-shift + s - 1) / s;
    // largest o with o*s + shift <= extent-1
    const std::int64_t top = static_cast<std::int64_t>(extent) - 1 - shift;
    std::int64_t last = top < 0 ? -1 : top / s;
    last = std::min<std::int64_t>(last, static_cast<std::int64_t>(out_extent) - 1);
    if (last < first) {
        lo = hi = 0;
        return;
    }
    lo = static_cast<std::size_t>(first);
    hi = static_cast<std::size_t>(last + 1);
}

}  // namespace detail

/// 3D convolution with zero padding and the same stride/padding on every
/// axis. For every output element the products are accumulated in
/// (c, kt, kh, kw) order starting from zero and the bias is added last.
template <class T>
Tensor<T> conv3d_forward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, std::size_t stride,
                         std::size_t pad) {
    const auto g = detail::conv_geometry(input, weight, stride, pad);
    if (bias.rank() != 1 || bias.extent(0) != g.f)
        throw ShapeError("conv3d bias must be (" + std::to_string(g.f) + "), got " + to_string(bias.shape()));

    Tensor<T> out({g.n, g.f, g.to, g.ho, g.wo});
    const T* in = input.data();
    const T* wt = weight.data();
    T* dst = out.data();

    parallel_for(g.n * g.f, [&](std::size_t job) {
        const std::size_t n = job / g.f;
        const std::size_t f = job % g.f;
        T* plane = dst + job * g.out_plane();
        for (std::size_t c = 0; c < g.c; ++c) {
            const T* src = in + (n * g.c + c) * g.in_plane();
            const T* wk = wt + (f * g.c + c) * g.kernel_volume();
            for (std::size_t a = 0; a < g.kt; ++a) {
                std::size_t t_lo, t_hi;
                detail::valid_range(g.t, g.to, a, g.stride, g.pad, t_lo, t_hi);
                for (std::size_t b = 0; b < g.kh; ++b) {
                    std::size_t h_lo, h_hi;
                    detail::valid_range(g.h, g.ho, b, g.stride, g.pad, h_lo, h_hi);
                    for (std::size_t d = 0; d < g.kw; ++d) {
                        std::size_t w_lo, w_hi;
                        detail::valid_range(g.w, g.wo, d, g.stride, g.pad, w_lo, w_hi);
                        const T wv = wk[(a * g.kh + b) * g.kw + d];
                        for (std::size_t ot = t_lo; ot < t_hi; ++ot) {
                            const std::size_t it = ot * g.stride + a - g.pad;
                            for (std::size_t oh = h_lo; oh < h_hi; ++oh) {
                                const std::size_t ih = oh * g.stride + b - g.pad;
                                T* orow = plane + (ot * g.ho + oh) * g.wo;
                                const T* irow = src + (it * g.h + ih) * g.w;
                                if (g.stride == 1) {
                                    for (std::size_t ow = w_lo; ow < w_hi; ++ow) orow[ow] += wv * irow[ow + d - g.pad];
                                } else {
                                    for (std::size_t ow = w_lo; ow < w_hi; ++ow) orow[ow] += wv * irow[ow * g.stride + d - g.pad];
                                }
                            }
                        }
                    }
                }
            }
        }
        const T bv = bias[f];
        for (std::size_t i = 0; i < g.out_plane(); ++i) plane[i] += bv;
    });
    return out;
}

/// Exact adjoint of conv3d_forward. The input gradient is skipped when
/// `need_input_grad` is false (first layer of a network).
template <class T>
Conv3dGrads<T> conv3d_backward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& grad_out,
                               std::size_t stride, std::size_t pad, bool need_input_grad = true) {
    const auto g = detail::conv_geometry(input, weight, stride, pad);
    const Shape expected{g.n, g.f, g.to, g.ho, g.wo};
    if (grad_out.shape() != expected)
        throw ShapeError("conv3d grad_out must be " + to_string(expected) + ", got " + to_string(grad_out.shape()));

    Conv3dGrads<T> grads;
    grads.weight = Tensor<T>(weight.shape());
    grads.bias = Tensor<T>({g.f});
    const T* in = input.data();
    const T* go = grad_out.data();
    const T* wt = weight.data();

    // Weight and bias gradients: one job per filter, reductions in fixed order.
    parallel_for(g.f, [&](std::size_t f) {
        T bsum = 0;
        for (std::size_t n = 0; n < g.n; ++n) {
            const T* gplane = go + (n * g.f + f) * g.out_plane();
            for (std::size_t i = 0; i < g.out_plane(); ++i) bsum += gplane[i];
        }
        grads.bias[f] = bsum;

        T* gw = grads.weight.data() + f * g.c * g.kernel_volume();
        for (std::size_t c = 0; c < g.c; ++c) {
            for (std::size_t a = 0; a < g.kt; ++a) {
                std::size_t t_lo, t_hi;
                detail::valid_range(g.t, g.to, a, g.stride, g.pad, t_lo, t_hi);
                for (std::size_t b = 0; b < g.kh; ++b) {
                    std::size_t h_lo, h_hi;
                    detail::valid_range(g.h, g.ho, b, g.stride, g.pad, h_lo, h_hi);
                    for (std::size_t d = 0; d < g.kw; ++d) {
                        std::size_t w_lo, w_hi;
                        detail::valid_range(g.w, g.wo, d, g.stride, g.pad, w_lo, w_hi);
                        T acc = 0;
                        for (std::size_t n = 0; n < g.n; ++n) {
                            const T* src = in + (n * g.c + c) * g.in_plane();
                            const T* gplane = go + (n * g.f + f) * g.out_plane();
                            for (std::size_t ot = t_lo; ot < t_hi; ++ot) {
                                const std::size_t it = ot * g.stride + a - g.pad;
                                for (std::size_t oh = h_lo; oh < h_hi; ++oh) {
                                    const std::size_t ih = oh * g.stride + b - g.pad;
                                    const T* grow = gplane + (ot * g.ho + oh) * g.wo;
                                    const T* irow = src + (it * g.h + ih) * g.w;
                                    T row = 0;
                                    for (std::size_t ow = w_lo; ow < w_hi; ++ow) row += grow[ow] * irow[ow * g.stride + d - g.pad];
                                    acc += row;
                                }
                            }
                        }
                        gw[(c * g.kt + a) * g.kh * g.kw + b * g.kw + d] = acc;
                    }
                }
            }
        }
    });

    if (!need_input_grad) return grads;

    grads.input = Tensor<T>(input.shape());
    T* gi = grads.input.data();
    // Input gradient: one job per (sample, channel) plane, scattering from
    // every filter in fixed order.
    parallel_for(g.n * g.c, [&](std::size_t job) {
        const std::size_t n = job / g.c;
        const std::size_t c = job % g.c;
        T* dst = gi + job * g.in_plane();
        for (std::size_t f = 0; f < g.f; ++f) {
            const T* gplane = go + (n * g.f + f) * g.out_plane();
            const T* wk = wt + (f * g.c + c) * g.kernel_volume();
            for (std::size_t a = 0; a < g.kt; ++a) {
                std::size_t t_lo, t_hi;
                detail::valid_range(g.t, g.to, a, g.stride, g.pad, t_lo, t_hi);
                for (std::size_t b = 0; b < g.kh; ++b) {
                    std::size_t h_lo, h_hi;
                    detail::valid_range(g.h, g.ho, b, g.stride, g.pad, h_lo, h_hi);
                    for (std::size_t d = 0; d < g.kw; ++d) {
                        std::size_t w_lo, w_hi;
                        detail::valid_range(g.w, g.wo, d, g.stride, g.pad, w_lo, w_hi);
                        const T wv = wk[(a * g.kh + b) * g.kw + d];
                        for (std::size_t ot = t_lo; ot < t_hi; ++ot) {
                            const std::size_t it = ot * g.stride + a - g.pad;
                            for (std::size_t oh = h_lo; oh < h_hi; ++oh) {
                                const std::size_t ih = oh * g.stride + b - g.pad;
                                const T* grow = gplane + (ot * g.ho + oh) * g.wo;
                                T* irow = dst + (it * g.h + ih) * g.w;
                                if (g.stride == 1) {
                                    for (std::size_t ow = w_lo; ow < w_hi; ++ow) irow[ow + d - g.pad] += wv * grow[ow];
                                } else {
                                    for (std::size_t ow = w_lo; ow < w_hi; ++ow) irow[ow * g.stride + d - g.pad] += wv * grow[ow];
                                }
                            }
                        }
                    }
                }
            }
        }
    });
    return grads;
}

}  // namespace strokebench
