#pragma once

#include <cstddef>

#include "strokebench/conv3d.hpp"
#include "strokebench/dense.hpp"
#include "strokebench/error.hpp"
#include "strokebench/layer_spec.hpp"
#include "strokebench/pooling.hpp"
#include "strokebench/tensor.hpp"

namespace strokebench {

/// Everything a layer's backward pass needs from its forward pass.
template <class T>
struct LayerCache {
    Tensor<T> input;
    ArgIndices winners;
};

template <class T>
struct LayerGrads {
    Tensor<T> input;
    Tensor<T> weight;
    Tensor<T> bias;
};

/// Batched forward of one layer. `weight`/`bias` are ignored for layers
/// without parameters. Inputs carry the batch axis first.
template <class T>
Tensor<T> layer_forward(const LayerSpec& spec, const Tensor<T>* weight, const Tensor<T>* bias, const Tensor<T>& input,
                        LayerCache<T>* cache) {
    if (cache) cache->input = input;
    switch (spec.kind) {
        case LayerKind::conv3d: return conv3d_forward(input, *weight, *bias, spec.stride, spec.pad);
        case LayerKind::maxpool3d: {
            auto r = maxpool3d_forward(input, spec.window);
            if (cache) cache->winners = std::move(r.winners);
            return std::move(r.output);
        }
        case LayerKind::relu: return relu_forward(input);
        case LayerKind::flatten: {
            if (input.rank() < 2) throw ShapeError("flatten expects a batch axis, got " + to_string(input.shape()));
            const std::size_t n = input.extent(0);
            return input.reshaped({n, input.size() / n});
        }
        case LayerKind::linear: return linear_forward(input, *weight, *bias);
    }
    throw ShapeError("unknown layer kind");
}

template <class T>
LayerGrads<T> layer_backward(const LayerSpec& spec, const Tensor<T>* weight, const LayerCache<T>& cache,
                             const Tensor<T>& grad_out, bool need_input_grad = true) {
    switch (spec.kind) {
        case LayerKind::conv3d: {
            auto g = conv3d_backward(cache.input, *weight, grad_out, spec.stride, spec.pad, need_input_grad);
            return {std::move(g.input), std::move(g.weight), std::move(g.bias)};
        }
        case LayerKind::maxpool3d:
            return {maxpool3d_backward(grad_out, cache.winners, cache.input.shape()), {}, {}};
        case LayerKind::relu: return {relu_backward(cache.input, grad_out), {}, {}};
        case LayerKind::flatten: return {grad_out.reshaped(cache.input.shape()), {}, {}};
        case LayerKind::linear: {
            auto g = linear_backward(cache.input, *weight, grad_out, need_input_grad);
            return {std::move(g.input), std::move(g.weight), std::move(g.bias)};
        }
    }
    throw ShapeError("unknown layer kind");
}

}  // namespace strokebench
