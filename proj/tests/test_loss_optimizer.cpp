#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "strokebench/loss.hpp"
#include "strokebench/optimizer.hpp"
#include "support.hpp"

using namespace strokebench;

TEST(SoftmaxCrossEntropy, EqualLogitsGiveLn2) {
    Tensor<double> logits({1, 2}, {0, 0});
    const std::vector<std::size_t> y{0};
    const auto r = softmax_cross_entropy(logits, y);
    EXPECT_NEAR(r.loss, std::log(2.0), 1e-12);
    EXPECT_NEAR(r.grad[0], -0.5, 1e-15);
    EXPECT_NEAR(r.grad[1], 0.5, 1e-15);
}

TEST(SoftmaxCrossEntropy, StableForLargeLogits) {
    Tensor<double> logits({1, 2}, {1000, 0});
    const std::vector<std::size_t> right{0}, wrong{1};
    EXPECT_NEAR(softmax_cross_entropy(logits, right).loss, 0.0, 1e-12);
    const auto r = softmax_cross_entropy(logits, wrong);
    EXPECT_TRUE(std::isfinite(r.loss));
    EXPECT_NEAR(r.loss, 1000.0, 1e-9);
}

TEST(SoftmaxCrossEntropy, BatchLossIsSumOfRowLosses) {
    SplitMix64 rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng.below(6), k = 2 + rng.below(5);
        const auto logits = testing_support::random_tensor<double>({n, k}, rng, -5, 5);
        std::vector<std::size_t> y(n);
        for (auto& c : y) c = rng.below(k);
        double sum = 0;
        for (std::size_t i = 0; i < n; ++i) {
            Tensor<double> row({1, k});
            for (std::size_t j = 0; j < k; ++j) row[j] = logits.at({i, j});
            const std::vector<std::size_t> yi{y[i]};
            sum += softmax_cross_entropy(row, yi).loss;
        }
        EXPECT_NEAR(softmax_cross_entropy(logits, y).loss, sum, 1e-9);
    }
}

TEST(SoftmaxCrossEntropy, GradientIsSoftmaxMinusOneHot) {
    Tensor<double> logits({2, 3}, {1, 2, 3, -1, 0, 1});
    const std::vector<std::size_t> y{2, 0};
    const auto r = softmax_cross_entropy(logits, y);
    const auto p = softmax(logits);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            EXPECT_NEAR(r.grad.at({i, j}), p.at({i, j}) - (j == y[i] ? 1.0 : 0.0), 1e-15);
}

TEST(SoftmaxCrossEntropy, RejectsBadTargets) {
    Tensor<double> logits({2, 2}, {0, 0, 0, 0});
    const std::vector<std::size_t> out_of_range{0, 2}, short_list{0};
    EXPECT_THROW(softmax_cross_entropy(logits, out_of_range), Error);
    EXPECT_THROW(softmax_cross_entropy(logits, short_list), Error);
    Tensor<double> one_class({1, 1}, {0});
    const std::vector<std::size_t> zero{0};
    EXPECT_THROW(softmax_cross_entropy(one_class, zero), Error);
}

TEST(Softmax, RowsSumToOne) {
    SplitMix64 rng(2);
    const auto logits = testing_support::random_tensor<double>({5, 4}, rng, -30, 30);
    const auto p = softmax(logits);
    for (std::size_t i = 0; i < 5; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < 4; ++j) s += p.at({i, j});
        EXPECT_NEAR(s, 1.0, 1e-14);
    }
}

TEST(NesterovSgd, TwoStepHandTrace) {
    std::vector<Tensor<double>> params{Tensor<double>({1}, {1.0})};
    const std::vector<Tensor<double>> grads{Tensor<double>({1}, {1.0})};
    NesterovSgd<double> opt({0.1, 0.5, 0.0}, params);
    opt.step(params, grads);
    EXPECT_NEAR(params[0][0], 0.85, 1e-12);
    opt.step(params, grads);
    EXPECT_NEAR(params[0][0], 0.675, 1e-12);
}

TEST(NesterovSgd, WithoutMomentumOrDecayIsPlainSgd) {
    SplitMix64 rng(6);
    auto theta = testing_support::random_tensor<double>({17}, rng);
    std::vector<Tensor<double>> params{theta};
    NesterovSgd<double> opt({0.03, 0.0, 0.0}, params);
    for (int step = 0; step < 5; ++step) {
        const std::vector<Tensor<double>> grads{testing_support::random_tensor<double>({17}, rng)};
        opt.step(params, grads);
        for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= 0.03 * grads[0][i];
        EXPECT_TRUE(params[0] == theta);
    }
}

TEST(NesterovSgd, WeightDecayActsOnZeroGradient) {
    std::vector<Tensor<double>> params{Tensor<double>({1}, {2.0})};
    const std::vector<Tensor<double>> grads{Tensor<double>({1}, {0.0})};
    NesterovSgd<double> opt({0.1, 0.5, 0.5}, params);
    opt.step(params, grads);
    // g = 1, v = 1, theta = 2 - 0.1 * (1 + 0.5)
    EXPECT_NEAR(params[0][0], 1.85, 1e-15);
}

TEST(NesterovSgd, DefaultsAndValidation) {
    const SgdHyperparams hp;
    EXPECT_EQ(hp.learning_rate, 1e-4);
    EXPECT_EQ(hp.momentum, 0.5);
    EXPECT_EQ(hp.weight_decay, 0.005);
    EXPECT_THROW((SgdHyperparams{0.0, 0.5, 0.0}.validate()), Error);
    EXPECT_THROW((SgdHyperparams{0.1, 1.0, 0.0}.validate()), Error);
    std::vector<Tensor<double>> params{Tensor<double>({2})};
    NesterovSgd<double> opt(hp, params);
    const std::vector<Tensor<double>> wrong{Tensor<double>({3})};
    EXPECT_THROW(opt.step(params, wrong), ShapeError);
}
