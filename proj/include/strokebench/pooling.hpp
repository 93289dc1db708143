#pragma once

#include <cstddef>
#include <vector>

#include "strokebench/error.hpp"
#include "strokebench/layer_spec.hpp"
#include "strokebench/parallel.hpp"
#include "strokebench/tensor.hpp"

namespace strokebench {

/// Flat input offsets of the winners, one per pooled output element.
using ArgIndices = std::vector<std::size_t>;

template <class T>
struct PoolResult {
    Tensor<T> output;
    ArgIndices winners;
};

/// Non-overlapping 3D max pooling (stride = window). Extents that are not a
/// multiple of the window are floored; the trailing remainder never wins.
/// Ties go to the lowest flat input index.
template <class T>
PoolResult<T> maxpool3d_forward(const Tensor<T>& input, Extent3 window) {
    if (input.rank() != 5) throw ShapeError("maxpool3d input must be (N,C,T,H,W), got " + to_string(input.shape()));
    if (window.t == 0 || window.h == 0 || window.w == 0) throw ShapeError("maxpool3d window extents must be >= 1");
    const auto& s = input.shape();
    if (s[2] < window.t || s[3] < window.h || s[4] < window.w)
        throw ShapeError("maxpool3d window larger than input " + to_string(s));
    const std::size_t to = s[2] / window.t, ho = s[3] / window.h, wo = s[4] / window.w;
    const std::size_t planes = s[0] * s[1];
    const std::size_t in_plane = s[2] * s[3] * s[4];
    const std::size_t out_plane = to * ho * wo;

    PoolResult<T> r{Tensor<T>({s[0], s[1], to, ho, wo}), ArgIndices(planes * out_plane)};
    parallel_for(planes, [&](std::size_t p) {
        const T* src = input.data() + p * in_plane;
        T* dst = r.output.data() + p * out_plane;
        std::size_t* win = r.winners.data() + p * out_plane;
        for (std::size_t ot = 0; ot < to; ++ot)
            for (std::size_t oh = 0; oh < ho; ++oh)
                for (std::size_t ow = 0; ow < wo; ++ow) {
                    std::size_t best = ((ot * window.t) * s[3] + oh * window.h) * s[4] + ow * window.w;
                    T best_value = src[best];
                    for (std::size_t a = 0; a < window.t; ++a)
                        for (std::size_t b = 0; b < window.h; ++b)
                            for (std::size_t d = 0; d < window.w; ++d) {
                                const std::size_t i =
                                    ((ot * window.t + a) * s[3] + oh * window.h + b) * s[4] + ow * window.w + d;
                                if (src[i] > best_value) {
                                    best_value = src[i];
                                    best = i;
                                }
                            }
                    const std::size_t o = (ot * ho + oh) * wo + ow;
                    dst[o] = best_value;
                    win[o] = p * in_plane + best;
                }
    });
    return r;
}

/// Routes every grad_out element to its recorded winner; zeros elsewhere.
template <class T>
Tensor<T> maxpool3d_backward(const Tensor<T>& grad_out, const ArgIndices& winners, const Shape& input_shape) {
    if (grad_out.size() != winners.size())
        throw ShapeError("maxpool3d grad_out has " + std::to_string(grad_out.size()) + " elements, expected " +
                         std::to_string(winners.size()));
    Tensor<T> grad_in(input_shape);
    for (std::size_t i = 0; i < winners.size(); ++i) {
        if (winners[i] >= grad_in.size()) throw ShapeError("maxpool3d winner index out of range");
        grad_in[winners[i]] += grad_out[i];
    }
    return grad_in;
}

}  // namespace strokebench
