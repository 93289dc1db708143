#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "strokebench/error.hpp"
#include "strokebench/tensor.hpp"

namespace strokebench {

struct SgdHyperparams {
    double learning_rate = 1e-4;
    double momentum = 0.5;
    double weight_decay = 0.005;

    void validate() const {
        if (!(learning_rate > 0)) throw Error("learning rate must be > 0");
        if (!(momentum >= 0 && momentum < 1)) throw Error("momentum must be in [0, 1)");
        if (!(weight_decay >= 0)) throw Error("weight decay must be >= 0");
    }
};

/// SGD with Nesterov momentum and L2 weight decay. Per parameter, with
/// gradient g0:
///   g = g0 + weight_decay * theta
///   v = momentum * v + g
///   theta -= learning_rate * (g + momentum * v)
template <class T>
class NesterovSgd {
public:
    NesterovSgd(SgdHyperparams hp, std::span<const Tensor<T>> params) : hp_(hp) {
        hp_.validate();
        velocity_.reserve(params.size());
        for (const auto& p : params) velocity_.emplace_back(p.shape());
    }

    const SgdHyperparams& hyperparams() const noexcept { return hp_; }
    const std::vector<Tensor<T>>& velocity() const noexcept { return velocity_; }

    void step(std::span<Tensor<T>> params, std::span<const Tensor<T>> grads) {
        if (params.size() != velocity_.size() || grads.size() != velocity_.size())
            throw ShapeError("optimizer expects " + std::to_string(velocity_.size()) + " parameters");
        const T lr = static_cast<T>(hp_.learning_rate);
        const T mu = static_cast<T>(hp_.momentum);
        const T wd = static_cast<T>(hp_.weight_decay);
        for (std::size_t k = 0; k < params.size(); ++k) {
            auto& theta = params[k];
            const auto& g0 = grads[k];
            auto& v = velocity_[k];
            if (theta.shape() != v.shape() || g0.shape() != v.shape())
                throw ShapeError("optimizer shape mismatch at parameter " + std::to_string(k));
            for (std::size_t i = 0; i < theta.size(); ++i) {
                const T g = g0[i] + wd * theta[i];
                v[i] = mu * v[i] + g;
                theta[i] -= lr * (g + mu * v[i]);
            }
        }
    }

private:
    SgdHyperparams hp_;
    std::vector<Tensor<T>> velocity_;
};

}  // namespace strokebench
