#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "strokebench/layers.hpp"
#include "strokebench/loss.hpp"
#include "strokebench/rng.hpp"

namespace strokebench {

/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-12)
inline double gradient_relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-12});
}

namespace detail {

inline Tensor<double> random_tensor(const Shape& shape, SplitMix64& rng, double lo = -1, double hi = 1) {
    Tensor<double> t(shape);
    for (auto& v : t) v = rng.uniform(lo, hi);
    return t;
}

/// Random per-sample input shape suited to the layer under test.
inline Shape gradcheck_input_shape(const LayerSpec& spec, SplitMix64& rng) {
    auto pick = [&](std::size_t lo, std::size_t extra) { return lo + static_cast<std::size_t>(rng.below(extra + 1)); };
    switch (spec.kind) {
        case LayerKind::conv3d: {
            auto axis = [&](std::size_t k) { return pick(k > 2 * spec.pad ? k - 2 * spec.pad : 1, 3); };
            return {2, spec.in_channels, axis(spec.kernel.t), axis(spec.kernel.h), axis(spec.kernel.w)};
        }
        case LayerKind::maxpool3d:
            return {1, 2, spec.window.t * pick(1, 1) + rng.below(2), spec.window.h * pick(1, 1) + rng.below(2),
                    spec.window.w * pick(1, 1) + rng.below(2)};
        case LayerKind::relu: return {2, pick(1, 3), pick(2, 3)};
        case LayerKind::flatten: return {2, pick(1, 2), pick(1, 2), pick(1, 2)};
        case LayerKind::linear: return {3, spec.in_features};
    }
    return {};
}

/// Input values keeping the check away from non-differentiable points:
/// relu inputs stay outside |x| < 1e-3, maxpool inputs are pairwise
/// separated by at least 1e-3.
inline Tensor<double> gradcheck_input(const LayerSpec& spec, const Shape& shape, SplitMix64& rng) {
    Tensor<double> x(shape);
    if (spec.kind == LayerKind::maxpool3d) {
        std::vector<std::size_t> order(x.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        shuffle(std::span<std::size_t>(order), rng);
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] = -1.0 + 2.0 * (static_cast<double>(order[i]) + rng.uniform(0.25, 0.75)) / static_cast<double>(x.size());
        return x;
    }
    for (auto& v : x) {
        do {
            v = rng.uniform(-1, 1);
        } while (spec.kind == LayerKind::relu && std::abs(v) < 1e-3);
    }
    return x;
}

}  // namespace detail

/// Compares the analytic gradients of one layer (input and parameters)
/// against central differences on `trials` random double-precision
/// instances. The scalar objective is sum(r * layer(x)) for a random r.
/// Returns the maximum relative error over all checked coordinates.
inline double gradcheck(const LayerSpec& spec, std::size_t trials, double eps, std::uint64_t seed = 1) {
    spec.validate();
    SplitMix64 rng(seed);
    double worst = 0;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        Tensor<double> x = detail::gradcheck_input(spec, detail::gradcheck_input_shape(spec, rng), rng);
        std::optional<Tensor<double>> weight, bias;
        if (spec.has_parameters()) {
            weight = detail::random_tensor(spec.weight_shape(), rng);
            bias = detail::random_tensor(spec.bias_shape(), rng);
        }
        const Tensor<double>* wp = weight ? &*weight : nullptr;
        const Tensor<double>* bp = bias ? &*bias : nullptr;

        LayerCache<double> cache;
        const Tensor<double> y = layer_forward(spec, wp, bp, x, &cache);
        const Tensor<double> r = detail::random_tensor(y.shape(), rng);
        const LayerGrads<double> analytic = layer_backward(spec, wp, cache, r);

        // Differences are evaluated in extended precision so the oracle's own
        // roundoff stays far below the tolerance.
        using Wide = long double;
        Tensor<Wide> wx = x.cast<Wide>();
        std::optional<Tensor<Wide>> ww, wb;
        if (weight) {
            ww = weight->cast<Wide>();
            wb = bias->cast<Wide>();
        }
        auto directional = [&](Tensor<Wide>& target, std::size_t i) {
            const Wide saved = target[i];
            target[i] = saved + eps;
            const Tensor<Wide> up = layer_forward<Wide>(spec, ww ? &*ww : nullptr, wb ? &*wb : nullptr, wx, nullptr);
            target[i] = saved - eps;
            const Tensor<Wide> down = layer_forward<Wide>(spec, ww ? &*ww : nullptr, wb ? &*wb : nullptr, wx, nullptr);
            target[i] = saved;
            Wide acc = 0;
            for (std::size_t j = 0; j < up.size(); ++j) acc += static_cast<Wide>(r[j]) * (up[j] - down[j]);
            return static_cast<double>(acc / (2 * static_cast<Wide>(eps)));
        };
        auto check_all = [&](Tensor<Wide>& target, const Tensor<double>& grad) {
            for (std::size_t i = 0; i < target.size(); ++i)
                worst = std::max(worst, gradient_relative_error(grad[i], directional(target, i)));
        };

        check_all(wx, analytic.input);
        if (weight) {
            check_all(*ww, analytic.weight);
            check_all(*wb, analytic.bias);
        }
    }
    return worst;
}

/// Same check for the summed softmax cross-entropy, differencing each row's
/// own loss term (in extended precision).
inline double gradcheck_softmax_cross_entropy(std::size_t trials, double eps, std::uint64_t seed = 1) {
    SplitMix64 rng(seed);
    double worst = 0;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        const std::size_t n_rows = 1 + rng.below(4);
        const std::size_t k = 2 + rng.below(5);
        Tensor<double> logits = detail::random_tensor({n_rows, k}, rng, -2, 2);
        std::vector<std::size_t> classes(n_rows);
        for (auto& c : classes) c = rng.below(k);
        const auto analytic = softmax_cross_entropy(logits, std::span<const std::size_t>(classes));
        for (std::size_t n = 0; n < n_rows; ++n) {
            Tensor<long double> row({1, k});
            std::copy_n(logits.data() + n * k, k, row.data());
            const std::size_t cls[1] = {classes[n]};
            for (std::size_t j = 0; j < k; ++j) {
                const long double saved = row[j];
                row[j] = saved + eps;
                const long double up = softmax_cross_entropy(row, std::span<const std::size_t>(cls)).loss;
                row[j] = saved - eps;
                const long double down = softmax_cross_entropy(row, std::span<const std::size_t>(cls)).loss;
                row[j] = saved;
                const auto numeric = static_cast<double>((up - down) / (2 * static_cast<long double>(eps)));
                worst = std::max(worst, gradient_relative_error(analytic.grad[n * k + j], numeric));
            }
        }
    }
    return worst;
}

struct GradcheckLine {
    std::string name;
    double max_rel_error = 0;
    double tolerance = 0;
    bool passed() const { return max_rel_error < tolerance; }
};

/// Runs the check for every layer kind and the loss.
inline std::vector<GradcheckLine> run_gradcheck_suite(std::size_t trials = 20, double eps = 1e-5, std::uint64_t seed = 1) {
    const std::vector<std::pair<std::string, LayerSpec>> layers = {
        {"conv3d", LayerSpec::conv3d(2, 3, {3, 3, 3}, 1, 1)},
        {"conv3d_strided", LayerSpec::conv3d(2, 2, {2, 3, 2}, 2, 1)},
        {"maxpool3d", LayerSpec::maxpool3d({2, 2, 2})},
        {"relu", LayerSpec::relu()},
        {"flatten", LayerSpec::flatten()},
        {"linear", LayerSpec::linear(10, 5)},
    };
    std::vector<GradcheckLine> lines;
    for (const auto& [name, spec] : layers) lines.push_back({name, gradcheck(spec, trials, eps, seed), 1e-6});
    lines.push_back({"softmax_cross_entropy", gradcheck_softmax_cross_entropy(trials, eps, seed), 1e-8});
    return lines;
}

}  // namespace strokebench
