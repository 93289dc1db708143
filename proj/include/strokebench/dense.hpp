#pragma once

#include <cstddef>

#include "strokebench/error.hpp"
#include "strokebench/parallel.hpp"
#include "strokebench/tensor.hpp"

namespace strokebench {

template <class T>
struct LinearGrads {
    Tensor<T> input;
    Tensor<T> weight;
    Tensor<T> bias;
};

namespace detail {

template <class T>
void check_linear(const Tensor<T>& input, const Tensor<T>& weight) {
    if (input.rank() != 2) throw ShapeError("linear input must be (N,In), got " + to_string(input.shape()));
    if (weight.rank() != 2) throw ShapeError("linear weight must be (Out,In), got " + to_string(weight.shape()));
    if (input.extent(1) != weight.extent(1))
        throw ShapeError("linear inner extent mismatch: input " + to_string(input.shape()) + " vs weight " +
                         to_string(weight.shape()));
}

}  // namespace detail

/// output[n,o] = sum_i input[n,i] * weight[o,i] + bias[o]
template <class T>
Tensor<T> linear_forward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
    detail::check_linear(input, weight);
    const std::size_t n_rows = input.extent(0), in = input.extent(1), out = weight.extent(0);
    if (bias.rank() != 1 || bias.extent(0) != out)
        throw ShapeError("linear bias must be (" + std::to_string(out) + "), got " + to_string(bias.shape()));
    Tensor<T> y({n_rows, out});
    parallel_for(n_rows * out, [&](std::size_t job) {
        const std::size_t n = job / out, o = job % out;
        const T* x = input.data() + n * in;
        const T* w = weight.data() + o * in;
        T acc = 0;
        for (std::size_t i = 0; i < in; ++i) acc += x[i] * w[i];
        y[job] = acc + bias[o];
    });
    return y;
}

template <class T>
LinearGrads<T> linear_backward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& grad_out,
                               bool need_input_grad = true) {
    detail::check_linear(input, weight);
    const std::size_t n_rows = input.extent(0), in = input.extent(1), out = weight.extent(0);
    if (grad_out.shape() != Shape{n_rows, out})
        throw ShapeError("linear grad_out must be " + to_string(Shape{n_rows, out}) + ", got " +
                         to_string(grad_out.shape()));
    LinearGrads<T> g{Tensor<T>(), Tensor<T>(weight.shape()), Tensor<T>({out})};
    parallel_for(out, [&](std::size_t o) {
        T* gw = g.weight.data() + o * in;
        T bsum = 0;
        for (std::size_t n = 0; n < n_rows; ++n) {
            const T go = grad_out[n * out + o];
            bsum += go;
            const T* x = input.data() + n * in;
            for (std::size_t i = 0; i < in; ++i) gw[i] += go * x[i];
        }
        g.bias[o] = bsum;
    });
    if (need_input_grad) {
        g.input = Tensor<T>(input.shape());
        parallel_for(n_rows, [&](std::size_t n) {
            T* gx = g.input.data() + n * in;
            for (std::size_t o = 0; o < out; ++o) {
                const T go = grad_out[n * out + o];
                const T* w = weight.data() + o * in;
                for (std::size_t i = 0; i < in; ++i) gx[i] += go * w[i];
            }
        });
    }
    return g;
}

template <class T>
Tensor<T> relu_forward(const Tensor<T>& input) {
    Tensor<T> y = input;
    for (auto& v : y) v = v > T(0) ? v : T(0);
    return y;
}

/// Gradient passes where the forward input was strictly positive.
template <class T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& grad_out) {
    if (input.shape() != grad_out.shape())
        throw ShapeError("relu grad_out shape " + to_string(grad_out.shape()) + " does not match input " +
                         to_string(input.shape()));
    Tensor<T> g(input.shape());
    for (std::size_t i = 0; i < g.size(); ++i) {
#ifdef STROKEBENCH_CORRUPT_RELU_BACKWARD  // negative control for the gradcheck tests
        g[i] = input[i] >= T(0) ? grad_out[i] * T(1.01) : T(0);
#else
        g[i] = input[i] > T(0) ? grad_out[i] : T(0);
#endif
    }
    return g;
}

}  // namespace strokebench
