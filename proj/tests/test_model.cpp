#include <gtest/gtest.h>

#include <cmath>

#include "strokebench/loss.hpp"
#include "strokebench/model.hpp"
#include "strokebench/parallel.hpp"
#include "strokebench/synth.hpp"
#include "strokebench/training.hpp"
#include "support.hpp"

using namespace strokebench;
using testing_support::random_tensor;
using testing_support::TempDir;

namespace {

std::vector<LayerSpec> tiny_layers(std::size_t classes) {
    ArchitectureConfig cfg;
    cfg.filters = {2, 3};
    cfg.hidden = {5};
    return make_architecture({3, 4, 8, 8}, cfg, classes);
}

double loss_of(const Model<double>& m, const Tensor<double>& x, const std::vector<std::size_t>& y) {
    return softmax_cross_entropy(forward(m, x), y).loss;
}

}  // namespace

TEST(BuildModel, SameSeedSameParameters) {
    const auto a = build_model<float>(2, tiny_layers(2), {3, 4, 8, 8}, 7);
    const auto b = build_model<float>(2, tiny_layers(2), {3, 4, 8, 8}, 7);
    const auto c = build_model<float>(2, tiny_layers(2), {3, 4, 8, 8}, 8);
    EXPECT_EQ(a.params, b.params);
    EXPECT_NE(a.params, c.params);
    EXPECT_EQ(a.param_names.front(), "conv3d0.weight");
    EXPECT_EQ(a.n_classes(), 2u);
}

TEST(BuildModel, ParametersWithinInitBounds) {
    const auto m = build_model<double>(2, tiny_layers(2), {3, 4, 8, 8}, 1);
    std::size_t p = 0;
    for (const auto& spec : m.layers) {
        if (!spec.has_parameters()) continue;
        const double fan_in = double(spec.fan_in());
        for (double v : m.params[p++]) EXPECT_LE(std::abs(v), std::sqrt(6.0 / fan_in));
        for (double v : m.params[p++]) EXPECT_LE(std::abs(v), 1.0 / std::sqrt(fan_in));
    }
}

TEST(BuildModel, RejectsInconsistentArchitectures) {
    EXPECT_THROW(build_model<float>(3, tiny_layers(2), {3, 4, 8, 8}, 0), Error);
    EXPECT_THROW(build_model<float>(2, tiny_layers(2), {3, 4, 6, 6}, 0), Error);
    auto no_head = tiny_layers(2);
    no_head.push_back(LayerSpec::relu());
    EXPECT_THROW(build_model<float>(2, no_head, {3, 4, 8, 8}, 0), Error);
}

TEST(BuildModel, DefaultArchitectureWithTwoOutputs) {
    const Shape input{3, 98, 120, 120};
    const auto m = build_model<float>(2, make_architecture(input, ArchitectureConfig{}, 2), input, 0);
    EXPECT_EQ(m.n_classes(), 2u);
    // conv 3->30, 30->60, 60->80, linear 216000->500, 500->2
    const std::size_t expected = (30 * 3 * 27 + 30) + (60 * 30 * 27 + 60) + (80 * 60 * 27 + 80) + (500 * 216000 + 500) +
                                 (2 * 500 + 2);
    EXPECT_EQ(m.parameter_count(), expected);
}

TEST(Model, BackwardMatchesFiniteDifferencesEndToEnd) {
    const auto m = build_model<double>(3, tiny_layers(3), {3, 4, 8, 8}, 5);
    SplitMix64 rng(9);
    const auto x = random_tensor<double>({2, 3, 4, 8, 8}, rng, 0, 1);
    const std::vector<std::size_t> y{0, 2};
    const auto trace = forward_trace(m, x);
    const auto grads = backward(m, trace, softmax_cross_entropy(trace.logits, y).grad);
    ASSERT_EQ(grads.size(), m.params.size());
    const double eps = 1e-6;
    for (std::size_t p = 0; p < m.params.size(); ++p)
        for (int probe = 0; probe < 6; ++probe) {
            const std::size_t i = rng.below(m.params[p].size());
            auto plus = m, minus = m;
            plus.params[p][i] += eps;
            minus.params[p][i] -= eps;
            const double numeric = (loss_of(plus, x, y) - loss_of(minus, x, y)) / (2 * eps);
            EXPECT_NEAR(grads[p][i], numeric, 1e-6 * std::max(1.0, std::abs(numeric))) << m.param_names[p] << "[" << i << "]";
        }
}

TEST(Model, ClassifyAgreesWithBatchedForward) {
    const auto m = build_model<float>(2, tiny_layers(2), {3, 4, 8, 8}, 3);
    SplitMix64 rng(4);
    const auto x = random_tensor<float>({3, 3, 4, 8, 8}, rng, 0, 1);
    const auto batch = classify_logits(forward(m, x));
    for (std::size_t n = 0; n < 3; ++n) {
        Tensor<float> one({3, 4, 8, 8});
        std::copy(x.data() + n * one.size(), x.data() + (n + 1) * one.size(), one.data());
        const auto c = classify(m, one);
        EXPECT_EQ(c.class_index, batch[n].class_index);
        EXPECT_NEAR(c.probabilities[0] + c.probabilities[1], 1.0, 1e-6);
    }
    EXPECT_THROW(classify(m, Tensor<float>({3, 4, 8, 7})), ShapeError);
}

TEST(Checkpoint, RandomModelsRoundTripExactly) {
    SplitMix64 rng(12);
    for (int trial = 0; trial < 10; ++trial) {
        ArchitectureConfig cfg;
        cfg.filters = {1 + std::size_t(rng.below(3))};
        cfg.hidden = {1 + std::size_t(rng.below(6))};
        const Shape input{3, 2 + std::size_t(rng.below(3)) * 2, 4, 6};
        const std::size_t classes = 2 + rng.below(4);
        auto m = build_model<float>(classes, make_architecture(input, cfg, classes), input, rng.next());
        for (auto& p : m.params)
            for (auto& v : p) v = static_cast<float>(rng.uniform(-1e3, 1e3));
        const auto bytes = encode_checkpoint(m);
        const auto back = decode_checkpoint(bytes);
        EXPECT_EQ(back.input_shape, m.input_shape);
        EXPECT_EQ(back.layers, m.layers);
        EXPECT_EQ(back.param_names, m.param_names);
        EXPECT_EQ(back.params, m.params);
        EXPECT_EQ(encode_checkpoint(back), bytes);
    }
}

TEST(Checkpoint, SaveLoadThroughFiles) {
    TempDir dir("ckpt");
    const auto m = build_model<float>(2, tiny_layers(2), {3, 4, 8, 8}, 1);
    save_checkpoint(m, dir / "sub" / "m.stkb");
    EXPECT_EQ(load_checkpoint(dir / "sub" / "m.stkb").params, m.params);
    EXPECT_THROW(load_checkpoint(dir / "none.stkb"), IoError);
}

TEST(Checkpoint, CorruptionIsDetected) {
    const auto bytes = encode_checkpoint(build_model<float>(2, tiny_layers(2), {3, 4, 8, 8}, 1));
    EXPECT_THROW(decode_checkpoint("STKB2\n" + bytes.substr(6)), ParseError);
    EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), ParseError);
    EXPECT_THROW(decode_checkpoint(bytes + "x"), ParseError);
    auto renamed = bytes;
    renamed.replace(renamed.find("conv3d0.weight"), 6, "convXd");
    EXPECT_THROW(decode_checkpoint(renamed), ParseError);
    auto relayered = bytes;
    relayered.replace(relayered.find("out=2"), 5, "out=3");
    EXPECT_THROW(decode_checkpoint(relayered), Error);
}

TEST(Training, SelectBestEpochTakesEarliestMaximum) {
    const std::vector<double> acc{0.4, 0.7, 0.7, 0.5};
    EXPECT_EQ(select_best_epoch(acc), 1u);
}

TEST(Training, IndexCsvRoundTrip) {
    DatasetIndex idx{Split::train, {{"a", {0, 150, "Stroke", std::nullopt}, 1}, {"b", {10, 210, "Non-stroke", std::nullopt}, 0}}};
    const auto back = parse_index_csv(write_index_csv(idx), Split::train, detection_class_of);
    ASSERT_EQ(back.items.size(), 2u);
    EXPECT_EQ(back.items[1].segment, idx.items[1].segment);
    EXPECT_EQ(back.items[0].class_index, 1u);
    EXPECT_THROW(parse_index_csv("video_id,begin,end,label\na,0,10,Jump\n", Split::train, detection_class_of), Error);
    EXPECT_THROW(parse_index_csv("id,b,e,l\n", Split::train, detection_class_of), ParseError);
    EXPECT_THROW(parse_index_csv("video_id,begin,end,label\na,10,10,Stroke\n", Split::train, detection_class_of), ParseError);
}

class SmallCorpus : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = new TempDir("corpus");
        SynthConfig cfg;
        cfg.samples = 4;
        cfg.frame_size = 8;
        cfg.strokes_per_video = 4;
        cfg.seed = 3;
        write_synthetic_corpus(dir_->path(), cfg);
    }
    static void TearDownTestSuite() { delete dir_; }

    static DatasetIndex index(Split split) {
        DatasetIndex idx{split, {}};
        for (const auto& e : std::filesystem::directory_iterator(dir_->path() / "annotations" / std::string(to_string(split)))) {
            const auto a = parse_annotations(read_file(e.path()));
            for (const auto& s : a.segments) idx.items.push_back({a.video_id, {s.begin, s.end, "Stroke", {}}, 1});
            for (const auto& n : infer_negative_segments(a)) idx.items.push_back({a.video_id, n, 0});
        }
        std::sort(idx.items.begin(), idx.items.end(), [](const Sample& a, const Sample& b) {
            return std::tie(a.video_id, a.segment.begin) < std::tie(b.video_id, b.segment.begin);
        });
        return idx;
    }

    static TrainResult run(std::size_t threads, bool prefetch, bool cache) {
        const auto saved = thread_count();
        set_thread_count(threads);
        const auto lib = open_video_library(dir_->path() / "videos");
        TrainConfig cfg;
        cfg.epochs = 3;
        cfg.batch_size = 4;
        cfg.seed = 5;
        cfg.optimizer.learning_rate = 3e-3;
        cfg.cuboid = {4, 8};
        cfg.prefetch = prefetch;
        cfg.cache_cuboids = cache;
        auto model = build_model<float>(2, tiny_layers(2), {3, 4, 8, 8}, 2);
        auto r = train(model, index(Split::train), index(Split::validation), lib, cfg);
        set_thread_count(saved);
        return r;
    }

    static TempDir* dir_;
};

TempDir* SmallCorpus::dir_ = nullptr;

TEST_F(SmallCorpus, TrainingIsReproducibleAcrossExecutionModes) {
    const auto a = run(1, false, false);
    const auto b = run(3, true, true);
    ASSERT_EQ(a.history.size(), 3u);
    EXPECT_EQ(encode_checkpoint(a.best_model), encode_checkpoint(b.best_model));
    EXPECT_EQ(write_history_csv(a.history), write_history_csv(b.history));
    std::vector<double> val;
    for (const auto& h : a.history) val.push_back(h.val_acc);
    EXPECT_EQ(a.best_epoch, select_best_epoch(val) + 1);
}

TEST_F(SmallCorpus, UnusableSamplesAreSkipped) {
    auto idx = index(Split::train);
    idx.items.push_back({"missing_video", {0, 10, "Stroke", {}}, 1});
    const auto lib = open_video_library(dir_->path() / "videos");
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.cuboid = {4, 8};
    const auto r = train(build_model<float>(2, tiny_layers(2), {3, 4, 8, 8}, 2), idx, index(Split::validation), lib, cfg);
    EXPECT_EQ(r.skipped_samples, 1u);
}

TEST_F(SmallCorpus, DetectEmitsScoredStrokeWindows) {
    const auto lib = open_video_library(dir_->path() / "videos");
    const auto* src = lib.find("test_00");
    ASSERT_NE(src, nullptr);
    const auto m = build_model<float>(2, tiny_layers(2), {3, 4, 8, 8}, 2);
    DetectConfig dc;
    dc.cuboid = {4, 8};
    const auto found = detect(m, *src, dc);
    EXPECT_LE(found.size(), generate_window_proposals(src->frame_count()).size());
    for (const auto& s : found) {
        EXPECT_EQ(s.label, "Stroke");
        ASSERT_TRUE(s.score);
        EXPECT_GE(*s.score, 0.5);
        EXPECT_EQ(s.length(), 150);
        EXPECT_EQ(s.begin % 150, 0);
    }
    const auto twenty = build_model<float>(20, tiny_layers(20), {3, 4, 8, 8}, 2);
    EXPECT_THROW(detect(twenty, *src, dc), Error);
}

TEST(Detect, VideoShorterThanCuboidYieldsNothing) {
    InMemoryVideo v("short", 8, 8, 120, std::vector<RgbFrame>(3, testing_support::solid_frame(8, 8, 0)));
    DetectConfig dc;
    dc.cuboid = {4, 8};
    dc.proposal_length = 2;
    EXPECT_TRUE(detect(build_model<float>(2, tiny_layers(2), {3, 4, 8, 8}, 2), v, dc).empty());
}

TEST(Detect, SixHundredFramesGiveAtMostFourDetections) {
    InMemoryVideo v("v", 8, 8, 120, std::vector<RgbFrame>(600, testing_support::solid_frame(8, 8, 90)));
    auto m = build_model<float>(2, tiny_layers(2), {3, 4, 8, 8}, 2);
    // force every window to Stroke through the output bias
    m.params.back()[kStrokeClass] = 100;
    DetectConfig dc;
    dc.cuboid = {4, 8};
    const auto found = detect(m, v, dc);
    EXPECT_EQ(found.size(), 4u);
}
