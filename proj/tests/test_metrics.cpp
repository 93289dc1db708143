#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "strokebench/metrics.hpp"
#include "strokebench/rng.hpp"

using namespace strokebench;

namespace {

Segment seg(std::int64_t b, std::int64_t e) { return {b, e, "Stroke", std::nullopt}; }
Segment pred(std::int64_t b, std::int64_t e, double s) { return {b, e, "Stroke", s}; }

DetectionSet random_instance(SplitMix64& rng) {
    DetectionSet ds;
    const std::size_t videos = 1 + rng.below(2);
    std::size_t gt_left = 1 + rng.below(5), pred_left = rng.below(9);
    for (std::size_t v = 0; v < videos; ++v) {
        auto& d = ds["v" + std::to_string(v)];
        const std::size_t g = v + 1 == videos ? gt_left : rng.below(gt_left + 1);
        gt_left -= g;
        const std::size_t p = v + 1 == videos ? pred_left : rng.below(pred_left + 1);
        pred_left -= p;
        for (std::size_t i = 0; i < g; ++i) {
            const auto b = std::int64_t(rng.below(400));
            d.ground_truth.push_back(seg(b, b + 20 + std::int64_t(rng.below(150))));
        }
        for (std::size_t i = 0; i < p; ++i) {
            const auto b = std::int64_t(rng.below(400));
            // coarse scores so ties occur
            d.predictions.push_back(pred(b, b + 20 + std::int64_t(rng.below(150)), double(rng.below(5)) / 4));
        }
    }
    return ds;
}

}  // namespace

TEST(Accuracy, Examples) {
    EXPECT_EQ(accuracy({"a", "b"}, {"a", "b"}), 1.0);
    EXPECT_EQ(accuracy({"a", "b"}, {"b", "a"}), 0.0);
    EXPECT_EQ(accuracy({"a", "b", "c", "d", "e"}, {"a", "b", "c", "x", "y"}), 0.6);
    EXPECT_THROW(accuracy({"a"}, {"a", "b"}), Error);
    EXPECT_THROW(accuracy({}, {}), Error);
}

TEST(Confusion, CountsTruthByPrediction) {
    const auto cm = confusion({"A", "A", "B"}, {"A", "A", "B"}, {"A", "B"});
    EXPECT_EQ(cm.counts, (std::vector<std::vector<std::size_t>>{{2, 0}, {0, 1}}));
    const auto swapped = confusion({"B", "B", "B"}, {"A", "A", "A"}, {"A", "B"});
    EXPECT_EQ(swapped.counts[0][1], 3u);
    EXPECT_THROW(confusion({"C"}, {"A"}, {"A", "B"}), Error);
}

TEST(Confusion, TotalsAndRowSums) {
    SplitMix64 rng(1);
    const std::vector<std::string> labels{"a", "b", "c", "d"};
    std::vector<std::string> p, t;
    for (int i = 0; i < 200; ++i) {
        p.push_back(labels[rng.below(4)]);
        t.push_back(labels[rng.below(4)]);
    }
    const auto cm = confusion(p, t, labels);
    EXPECT_EQ(cm.total(), 200u);
    for (std::size_t i = 0; i < 4; ++i) {
        std::size_t row = 0;
        for (auto c : cm.counts[i]) row += c;
        EXPECT_EQ(row, std::size_t(std::count(t.begin(), t.end(), labels[i])));
    }
}

TEST(Aggregate, SumsCellsSharingASuperLabel) {
    const auto tax = load_taxonomy("label,type,hand_side\nF Hit,Offensive,Forehand\nB Hit,Offensive,Backhand\n");
    ConfusionMatrix cm{{"F Hit", "B Hit"}, {{3, 1}, {0, 2}}};
    const auto type = aggregate(cm, tax, Level::type);
    EXPECT_EQ(type.labels, (std::vector<std::string>{"Offensive"}));
    EXPECT_EQ(type.counts, (std::vector<std::vector<std::size_t>>{{6}}));
    EXPECT_EQ(aggregate(cm, tax, Level::global), cm);
    const auto hand = aggregate(cm, tax, Level::hand);
    EXPECT_EQ(hand.counts, cm.counts);
    ConfusionMatrix unknown{{"Z"}, {{1}}};
    EXPECT_THROW(aggregate(unknown, tax, Level::type), Error);
}

TEST(Aggregate, TwentyLabelMatrixShrinksToTaxonomyLevels) {
    const auto tax = load_taxonomy(kDefaultTaxonomyCsv);
    SplitMix64 rng(2);
    std::vector<std::string> p, t;
    for (int i = 0; i < 300; ++i) {
        p.push_back(tax.labels()[rng.below(20)]);
        t.push_back(tax.labels()[rng.below(20)]);
    }
    const auto cm = confusion(p, t, tax.labels());
    EXPECT_EQ(aggregate(cm, tax, Level::type).labels.size(), 3u);
    EXPECT_EQ(aggregate(cm, tax, Level::hand).labels.size(), 2u);
    EXPECT_EQ(aggregate(cm, tax, Level::type_hand).labels.size(), 6u);
    for (Level l : kAllLevels) EXPECT_EQ(aggregate(cm, tax, l).total(), 300u);
}

TEST(Aggregate, DiagonalAccuracyEqualsMappedListAccuracy) {
    const auto tax = load_taxonomy(kDefaultTaxonomyCsv);
    SplitMix64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::string> p, t;
        for (std::size_t i = 0, n = 1 + rng.below(60); i < n; ++i) {
            p.push_back(tax.labels()[rng.below(20)]);
            t.push_back(rng.below(3) ? p.back() : tax.labels()[rng.below(20)]);
        }
        const auto cm = confusion(p, t, tax.labels());
        for (Level l : kAllLevels) {
            std::vector<std::string> mp, mt;
            for (std::size_t i = 0; i < p.size(); ++i) {
                mp.push_back(superclass_of(tax, p[i], l));
                mt.push_back(superclass_of(tax, t[i], l));
            }
            EXPECT_EQ(aggregate(cm, tax, l).accuracy(), accuracy(mp, mt));
        }
    }
}

TEST(Aggregate, CsvHasHeaderRowAndColumn) {
    ConfusionMatrix cm{{"x", "y"}, {{1, 2}, {3, 4}}};
    EXPECT_EQ(confusion_csv(cm), "truth\\pred,x,y\nx,1,2\ny,3,4\n");
}

TEST(Tiou, Examples) {
    EXPECT_NEAR(tiou(seg(0, 100), seg(50, 150)), 1.0 / 3.0, 1e-15);
    EXPECT_EQ(tiou(seg(10, 20), seg(10, 20)), 1.0);
    EXPECT_EQ(tiou(seg(0, 10), seg(10, 20)), 0.0);
    EXPECT_EQ(tiou(seg(0, 10), seg(30, 50)), tiou(seg(30, 50), seg(0, 10)));
}

TEST(AveragePrecision, PerfectDetectorScoresOne) {
    DetectionSet ds;
    ds["a"] = {{pred(0, 10, 0.9), pred(20, 30, 0.8)}, {seg(0, 10), seg(20, 30)}};
    ds["b"] = {{pred(5, 15, 0.3)}, {seg(5, 15)}};
    EXPECT_EQ(average_precision(ds), 1.0);
}

TEST(AveragePrecision, NoPredictionsScoreZeroAndNoTruthIsRejected) {
    DetectionSet ds;
    ds["a"] = {{}, {seg(0, 10)}};
    EXPECT_EQ(average_precision(ds), 0.0);
    DetectionSet empty;
    empty["a"] = {{pred(0, 10, 0.5)}, {}};
    EXPECT_THROW(average_precision(empty), Error);
}

TEST(AveragePrecision, DuplicateAndMissAgainstOracle) {
    DetectionSet ds;
    ds["a"] = {{pred(0, 100, 0.9), pred(5, 100, 0.8), pred(300, 400, 0.7)}, {seg(0, 100), seg(200, 300)}};
    // ranks: TP, FP (duplicate), FP (miss) -> recall 0.5 at precision 1
    EXPECT_NEAR(average_precision(ds), 0.5, 1e-15);
    EXPECT_NEAR(average_precision(ds), oracle::average_precision(ds, 0.5), 1e-12);
}

TEST(AveragePrecision, MatchesBruteForceOracleOnRandomInstances) {
    SplitMix64 rng(4);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto ds = random_instance(rng);
        for (double thr : {0.3, 0.5, 0.7})
            ASSERT_NEAR(average_precision(ds, thr), oracle::average_precision(ds, thr), 1e-12) << "trial " << trial;
    }
}

TEST(AveragePrecision, DependsOnlyOnRanking) {
    SplitMix64 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        auto ds = random_instance(rng);
        const double before = average_precision(ds);
        for (auto& [v, d] : ds)
            for (auto& p : d.predictions) p.score = 0.1 + 0.8 * std::pow(*p.score, 3);
        EXPECT_EQ(average_precision(ds), before);
        EXPECT_GE(before, 0.0);
        EXPECT_LE(before, 1.0);
    }
}

TEST(MeanAveragePrecision, AveragesClassesWithTruth) {
    DetectionSet perfect, half, absent, unpredicted;
    perfect["a"] = {{pred(0, 10, 1)}, {seg(0, 10)}};
    half["a"] = {{pred(0, 10, 1)}, {seg(0, 10), seg(50, 60)}};
    absent["a"] = {{pred(0, 10, 1)}, {}};
    unpredicted["a"] = {{}, {seg(0, 10)}};
    EXPECT_EQ(mean_average_precision({{"x", perfect}}), 1.0);
    EXPECT_EQ(mean_average_precision({{"x", perfect}, {"y", half}}), 0.75);
    EXPECT_EQ(mean_average_precision({{"x", perfect}, {"z", absent}}), 1.0);
    EXPECT_EQ(mean_average_precision({{"x", perfect}, {"w", unpredicted}}), 0.5);
    EXPECT_THROW(mean_average_precision({{"z", absent}}), Error);
}

TEST(GlobalIou, HandCases) {
    DetectionSet one;
    one["a"] = {{pred(0, 100, 1)}, {seg(50, 150)}};
    EXPECT_NEAR(global_iou(one), 1.0 / 3.0, 1e-12);
    DetectionSet abutting;
    abutting["a"] = {{pred(0, 75, 1), pred(75, 150, 1)}, {seg(0, 150)}};
    EXPECT_EQ(global_iou(abutting), 1.0);
    DetectionSet two;
    two["a"] = {{pred(0, 100, 1)}, {seg(50, 150)}};
    two["b"] = {{pred(0, 100, 1)}, {}};
    EXPECT_NEAR(global_iou(two), 0.2, 1e-12);
    DetectionSet nothing;
    nothing["a"] = {{}, {}};
    EXPECT_THROW(global_iou(nothing), Error);
}

TEST(GlobalIou, MatchesFrameByFrameOracle) {
    SplitMix64 rng(6);
    for (int trial = 0; trial < 300; ++trial) {
        const auto ds = random_instance(rng);
        EXPECT_NEAR(global_iou(ds), oracle::global_iou(ds), 1e-12);
    }
}

TEST(GlobalIou, SplittingADetectionChangesMapButNotGlobalIou) {
    // exact halves of a 150-frame hit have tIoU 0.5: sub-threshold at 0.6
    DetectionSet whole, split;
    whole["a"] = {{pred(0, 150, 0.9), pred(300, 450, 0.8)}, {seg(0, 150), seg(300, 450)}};
    split["a"] = {{pred(0, 75, 0.9), pred(75, 150, 0.85), pred(300, 450, 0.8)}, {seg(0, 150), seg(300, 450)}};
    EXPECT_EQ(tiou(seg(0, 75), seg(0, 150)), 0.5);
    EXPECT_EQ(tiou(seg(75, 150), seg(0, 150)), 0.5);
    EXPECT_EQ(global_iou(whole), global_iou(split));
    EXPECT_EQ(mean_average_precision({{"Stroke", whole}}, 0.6), 1.0);
    // two misses rank above the remaining hit: recall 0.5 at precision 1/3
    EXPECT_NEAR(mean_average_precision({{"Stroke", split}}, 0.6), 1.0 / 6.0, 1e-15);
    // at 0.5 the first half still hits and the second is a duplicate
    EXPECT_LT(mean_average_precision({{"Stroke", split}}, 0.5), mean_average_precision({{"Stroke", whole}}, 0.5));
}
