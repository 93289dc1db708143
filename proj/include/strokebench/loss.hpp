#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <type_traits>

#include "strokebench/error.hpp"
#include "strokebench/tensor.hpp"

namespace strokebench {

template <class T>
struct LossResult {
    std::common_type_t<T, double> loss = 0;  // summed over the batch
    Tensor<T> grad;     // d loss / d logits
};

/// Row-wise softmax with max subtraction.
template <class T>
Tensor<T> softmax(const Tensor<T>& logits) {
    if (logits.rank() != 2) throw ShapeError("softmax expects (N,K) logits, got " + to_string(logits.shape()));
    const std::size_t n_rows = logits.extent(0), k = logits.extent(1);
    Tensor<T> p(logits.shape());
    for (std::size_t n = 0; n < n_rows; ++n) {
        const T* row = logits.data() + n * k;
        T* out = p.data() + n * k;
        const T m = *std::max_element(row, row + k);
        T sum = 0;
        for (std::size_t j = 0; j < k; ++j) sum += out[j] = std::exp(row[j] - m);
        for (std::size_t j = 0; j < k; ++j) out[j] /= sum;
    }
    return p;
}

/// Cross-entropy of the softmax, -log(exp(y_c) / sum_i exp(y_i)) per row,
/// summed over rows. Gradient row n is softmax(row n) - onehot(class n).
template <class T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const std::size_t> classes) {
    if (logits.rank() != 2) throw ShapeError("loss expects (N,K) logits, got " + to_string(logits.shape()));
    const std::size_t n_rows = logits.extent(0), k = logits.extent(1);
    if (k < 2) throw ShapeError("loss needs at least two classes");
    if (classes.size() != n_rows)
        throw ShapeError("loss got " + std::to_string(classes.size()) + " labels for " + std::to_string(n_rows) + " rows");

    LossResult<T> r{0.0, Tensor<T>(logits.shape())};
    for (std::size_t n = 0; n < n_rows; ++n) {
        const std::size_t c = classes[n];
        if (c >= k) throw ShapeError("class " + std::to_string(c) + " out of range for " + std::to_string(k) + " classes");
        const T* row = logits.data() + n * k;
        T* g = r.grad.data() + n * k;
        const T m = *std::max_element(row, row + k);
        T sum = 0;
        for (std::size_t j = 0; j < k; ++j) sum += g[j] = std::exp(row[j] - m);
        const T log_sum = std::log(sum);
        r.loss += static_cast<decltype(r.loss)>(m + log_sum - row[c]);
        for (std::size_t j = 0; j < k; ++j) g[j] /= sum;
        g[c] -= T(1);
    }
    return r;
}

}  // namespace strokebench
