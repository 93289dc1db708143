#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <future>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "strokebench/annotations.hpp"
#include "strokebench/error.hpp"
#include "strokebench/frames.hpp"
#include "strokebench/model.hpp"
#include "strokebench/optimizer.hpp"
#include "strokebench/rng.hpp"

namespace strokebench {

enum class Split { train, validation, test };

inline std::string_view to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::validation: return "validation";
        case Split::test: return "test";
    }
    return "?";
}

struct Sample {
    std::string video_id;
    Segment segment;
    std::size_t class_index = 0;
};

struct DatasetIndex {
    Split split = Split::train;
    std::vector<Sample> items;
};

/// Index CSV: header `video_id,begin,end,label`, one sample per row.
inline std::string write_index_csv(const DatasetIndex& idx) {
    std::string out = "video_id,begin,end,label\n";
    for (const auto& s : idx.items)
        out += s.video_id + "," + std::to_string(s.segment.begin) + "," + std::to_string(s.segment.end) + "," +
               s.segment.label + "\n";
    return out;
}

/// Reads an index CSV; `class_of` maps labels to class indices and throws
/// for unknown labels.
inline DatasetIndex parse_index_csv(std::string_view bytes, Split split,
                                    const std::function<std::size_t(std::string_view)>& class_of) {
    DatasetIndex idx{split, {}};
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool header = false;
    while (pos < bytes.size()) {
        auto nl = bytes.find('\n', pos);
        if (nl == std::string_view::npos) nl = bytes.size();
        auto line = bytes.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        if (!header) {
            if (line != "video_id,begin,end,label") throw ParseError("index line 1: header must be video_id,begin,end,label");
            header = true;
            continue;
        }
        const auto c1 = line.find(',');
        const auto c2 = c1 == std::string_view::npos ? c1 : line.find(',', c1 + 1);
        const auto c3 = c2 == std::string_view::npos ? c2 : line.find(',', c2 + 1);
        if (c3 == std::string_view::npos) throw ParseError("index line " + std::to_string(line_no) + ": expected 4 columns");
        auto integer = [&](std::string_view s) {
            std::int64_t v = 0;
            const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
                throw ParseError("index line " + std::to_string(line_no) + ": invalid frame '" + std::string(s) + "'");
            return v;
        };
        Sample s;
        s.video_id = std::string(line.substr(0, c1));
        s.segment.begin = integer(line.substr(c1 + 1, c2 - c1 - 1));
        s.segment.end = integer(line.substr(c2 + 1, c3 - c2 - 1));
        s.segment.label = std::string(line.substr(c3 + 1));
        if (s.segment.begin < 0 || s.segment.begin >= s.segment.end)
            throw ParseError("index line " + std::to_string(line_no) + ": begin must be smaller than end");
        s.class_index = class_of(s.segment.label);
        idx.items.push_back(std::move(s));
    }
    if (!header) throw ParseError("index is empty");
    return idx;
}

/// Video sources by id.
class VideoLibrary {
public:
    void add(std::unique_ptr<VideoSource> src) {
        const std::string id = src->id();
        videos_[id] = std::move(src);
    }
    const VideoSource* find(std::string_view id) const {
        const auto it = videos_.find(id);
        return it == videos_.end() ? nullptr : it->second.get();
    }
    std::size_t size() const { return videos_.size(); }

private:
    std::map<std::string, std::unique_ptr<VideoSource>, std::less<>> videos_;
};

/// Opens every `<id>.rgbv` file and every PPM frame directory in `dir`.
inline VideoLibrary open_video_library(const std::filesystem::path& dir, double fps = 120.0) {
    if (!std::filesystem::is_directory(dir)) throw IoError("video directory " + dir.string() + " does not exist");
    std::vector<std::filesystem::path> entries;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_directory() || e.path().extension() == ".rgbv") entries.push_back(e.path());
    std::sort(entries.begin(), entries.end());
    VideoLibrary lib;
    for (const auto& p : entries) lib.add(open_video(p, fps));
    return lib;
}

struct CuboidSpec {
    std::size_t length = 98;
    std::size_t size = 120;

    Shape input_shape() const { return {3, length, size, size}; }
};

struct TrainConfig {
    std::size_t epochs = 500;
    std::size_t batch_size = 10;
    std::uint64_t seed = 0;
    SgdHyperparams optimizer{};
    CuboidSpec cuboid{};
    /// Keep extracted cuboids in memory across epochs.
    bool cache_cuboids = false;
    /// Extract the next batch while the current step runs.
    bool prefetch = true;

    void validate() const {
        if (epochs < 1) throw Error("epochs must be >= 1");
        if (batch_size < 1) throw Error("batch size must be >= 1");
        optimizer.validate();
    }
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0;  // summed over all training samples
    double train_acc = 0;
    double val_acc = 0;
};

struct TrainResult {
    Model<float> best_model;
    std::size_t best_epoch = 0;
    std::vector<EpochRecord> history;
    std::size_t skipped_samples = 0;
};

/// History CSV: `epoch,train_loss,train_acc,val_acc`.
inline std::string write_history_csv(const std::vector<EpochRecord>& history) {
    std::string out = "epoch,train_loss,train_acc,val_acc\n";
    for (const auto& r : history)
        out += std::to_string(r.epoch) + "," + detail::format_real(r.train_loss) + "," + detail::format_real(r.train_acc) +
               "," + detail::format_real(r.val_acc) + "\n";
    return out;
}

/// 0-based position of the highest value; the earliest wins ties.
inline std::size_t select_best_epoch(std::span<const double> val_acc) {
    if (val_acc.empty()) throw Error("no epochs to select from");
    return argmax(val_acc);
}

/// Produces model inputs for samples, caching when asked to.
class CuboidLoader {
public:
    CuboidLoader(const VideoLibrary& library, CuboidSpec spec, bool cache) : library_(library), spec_(spec), cache_(cache) {}

    /// Cuboid from the segment start (right-clamped), or nullopt when the
    /// video is missing or too short.
    std::optional<Tensor<float>> load(const Sample& s, std::string* why = nullptr) const {
        const auto key = s.video_id + "#" + std::to_string(s.segment.begin);
        if (cache_) {
            std::lock_guard lock(mutex_);
            if (const auto it = memo_.find(key); it != memo_.end()) return it->second;
        }
        const VideoSource* src = library_.find(s.video_id);
        if (!src) {
            if (why) *why = "video '" + s.video_id + "' not found";
            return std::nullopt;
        }
        const auto start = cuboid_start(src->frame_count(), s.segment.begin, spec_.length);
        if (!start) {
            if (why) *why = "video '" + s.video_id + "' is shorter than the cuboid length";
            return std::nullopt;
        }
        std::optional<Tensor<float>> out;
        try {
            out = extract_cuboid(*src, *start, spec_.length, spec_.size).values;
        } catch (const Error& e) {
            if (why) *why = e.what();
            return std::nullopt;
        }
        if (cache_) {
            std::lock_guard lock(mutex_);
            memo_.emplace(key, *out);
        }
        return out;
    }

    const CuboidSpec& spec() const { return spec_; }

private:
    const VideoLibrary& library_;
    CuboidSpec spec_;
    bool cache_;
    mutable std::mutex mutex_;
    mutable std::map<std::string, Tensor<float>> memo_;
};

namespace detail {

struct Batch {
    Tensor<float> inputs;
    std::vector<std::size_t> classes;
};

inline Tensor<float> stack(const std::vector<Tensor<float>>& items) {
    Shape shape{items.size()};
    shape.insert(shape.end(), items.front().shape().begin(), items.front().shape().end());
    Tensor<float> out(shape);
    const std::size_t each = items.front().size();
    for (std::size_t i = 0; i < items.size(); ++i) std::copy(items[i].begin(), items[i].end(), out.data() + i * each);
    return out;
}

inline Batch make_batch(const std::vector<Sample>& samples, std::span<const std::size_t> order,
                        const CuboidLoader& loader) {
    std::vector<Tensor<float>> cuboids;
    Batch b;
    for (std::size_t i : order) {
        auto c = loader.load(samples[i]);
        if (!c) throw Error("sample became unextractable");
        cuboids.push_back(std::move(*c));
        b.classes.push_back(samples[i].class_index);
    }
    b.inputs = stack(cuboids);
    return b;
}

}  // namespace detail

/// Fraction of extractable samples whose argmax prediction equals the
/// class index.
inline double evaluate_accuracy(const Model<float>& model, const std::vector<Sample>& samples, const CuboidLoader& loader,
                                std::size_t batch_size) {
    std::size_t correct = 0, seen = 0;
    std::vector<Tensor<float>> cuboids;
    std::vector<std::size_t> classes;
    auto flush = [&] {
        if (cuboids.empty()) return;
        const auto out = classify_logits(forward(model, detail::stack(cuboids)));
        for (std::size_t j = 0; j < out.size(); ++j) correct += out[j].class_index == classes[j];
        seen += out.size();
        cuboids.clear();
        classes.clear();
    };
    for (const auto& s : samples) {
        auto c = loader.load(s);
        if (!c) continue;
        cuboids.push_back(std::move(*c));
        classes.push_back(s.class_index);
        if (cuboids.size() == batch_size) flush();
    }
    flush();
    return seen ? static_cast<double>(correct) / static_cast<double>(seen) : 0.0;
}

/// Mini-batch training with the summed cross-entropy and Nesterov SGD.
/// After each epoch the validation accuracy is measured and the snapshot
/// with the highest value (earliest on ties) is kept. Each epoch's sample
/// order comes from the stream derived from (seed, epoch).
inline TrainResult train(Model<float> model, const DatasetIndex& train_idx, const DatasetIndex& val_idx,
                         const VideoLibrary& library, const TrainConfig& cfg, std::ostream* log = nullptr) {
    cfg.validate();
    if (train_idx.items.empty()) throw Error("training index is empty");
    if (val_idx.items.empty()) throw Error("validation index is empty");
    if (model.input_shape != cfg.cuboid.input_shape())
        throw ShapeError("model input " + to_string(model.input_shape) + " does not match cuboid " +
                         to_string(cfg.cuboid.input_shape()));
    for (const auto* idx : {&train_idx, &val_idx})
        for (const auto& s : idx->items)
            if (s.class_index >= model.n_classes())
                throw Error("class index " + std::to_string(s.class_index) + " out of range for " +
                            std::to_string(model.n_classes()) + " classes");

    CuboidLoader loader(library, cfg.cuboid, cfg.cache_cuboids);
    TrainResult result;

    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < train_idx.items.size(); ++i) {
        std::string why;
        if (loader.load(train_idx.items[i], &why)) {
            usable.push_back(i);
        } else {
            ++result.skipped_samples;
            std::cerr << "warning: skipping " << train_idx.items[i].video_id << "@" << train_idx.items[i].segment.begin
                      << ": " << why << "\n";
        }
    }
    if (usable.empty()) throw Error("no usable training samples");

    NesterovSgd<float> opt(cfg.optimizer, std::span<const Tensor<float>>(model.params));
    double best_val = -1;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<std::size_t> order = usable;
        auto rng = derive_stream(cfg.seed, epoch);
        shuffle(std::span<std::size_t>(order), rng);

        double loss_sum = 0;
        std::size_t correct = 0;
        const std::size_t n_batches = (order.size() + cfg.batch_size - 1) / cfg.batch_size;
        auto chunk = [&](std::size_t b) {
            const std::size_t at = b * cfg.batch_size;
            return std::span<const std::size_t>(order.data() + at, std::min(cfg.batch_size, order.size() - at));
        };
        std::future<detail::Batch> pending;
        if (cfg.prefetch)
            pending = std::async(std::launch::async, [&, c = chunk(0)] { return detail::make_batch(train_idx.items, c, loader); });
        for (std::size_t b = 0; b < n_batches; ++b) {
            detail::Batch batch = cfg.prefetch ? pending.get() : detail::make_batch(train_idx.items, chunk(b), loader);
            if (cfg.prefetch && b + 1 < n_batches)
                pending = std::async(std::launch::async,
                                     [&, c = chunk(b + 1)] { return detail::make_batch(train_idx.items, c, loader); });

            const auto trace = forward_trace(model, batch.inputs);
            const auto loss = softmax_cross_entropy(trace.logits, std::span<const std::size_t>(batch.classes));
            const auto decisions = classify_logits(trace.logits);
            for (std::size_t j = 0; j < decisions.size(); ++j) correct += decisions[j].class_index == batch.classes[j];
            loss_sum += loss.loss;
            const auto grads = backward(model, trace, loss.grad);
            opt.step(std::span<Tensor<float>>(model.params), std::span<const Tensor<float>>(grads));
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum;
        rec.train_acc = static_cast<double>(correct) / static_cast<double>(order.size());
        rec.val_acc = evaluate_accuracy(model, val_idx.items, loader, cfg.batch_size);
        result.history.push_back(rec);
        if (rec.val_acc > best_val) {
            best_val = rec.val_acc;
            result.best_model = model;
            result.best_epoch = epoch;
        }
        if (log)
            *log << "epoch " << epoch << " loss " << rec.train_loss << " train_acc " << rec.train_acc << " val_acc "
                 << rec.val_acc << "\n";
    }
    return result;
}

/// Class index of "Stroke" in detection models; "Non-stroke" is 0.
inline constexpr std::size_t kStrokeClass = 1;

inline std::size_t detection_class_of(std::string_view label) {
    if (label == kStrokeLabel) return kStrokeClass;
    if (label == kNonStrokeLabel) return 0;
    throw Error("detection label must be Stroke or Non-stroke, got '" + std::string(label) + "'");
}

struct DetectConfig {
    std::int64_t proposal_length = 150;
    std::int64_t proposal_stride = 150;
    CuboidSpec cuboid{};
    std::size_t batch_size = 10;
};

/// Classifies every window proposal of the video and keeps those whose
/// argmax is Stroke, scored with the Stroke probability. Adjacent positive
/// windows stay separate detections.
inline std::vector<Segment> detect(const Model<float>& model, const VideoSource& src, const DetectConfig& cfg) {
    require_classes(model, 2);
    if (model.input_shape != cfg.cuboid.input_shape())
        throw ShapeError("model input " + to_string(model.input_shape) + " does not match cuboid " +
                         to_string(cfg.cuboid.input_shape()));
    std::vector<Segment> detections;
    if (src.frame_count() < static_cast<std::int64_t>(cfg.cuboid.length)) {
        std::cerr << "warning: video '" << src.id() << "' has " << src.frame_count()
                  << " frames, fewer than the cuboid length; no detections\n";
        return detections;
    }
    const auto proposals = generate_window_proposals(src.frame_count(), cfg.proposal_length, cfg.proposal_stride);
    for (std::size_t at = 0; at < proposals.size(); at += cfg.batch_size) {
        const std::size_t n = std::min(cfg.batch_size, proposals.size() - at);
        std::vector<Tensor<float>> cuboids;
        for (std::size_t i = 0; i < n; ++i) {
            const auto start = cuboid_start(src.frame_count(), proposals[at + i].begin, cfg.cuboid.length);
            cuboids.push_back(extract_cuboid(src, *start, cfg.cuboid.length, cfg.cuboid.size).values);
        }
        const auto out = classify_logits(forward(model, detail::stack(cuboids)));
        for (std::size_t i = 0; i < n; ++i) {
            if (out[i].class_index != kStrokeClass) continue;
            Segment s = proposals[at + i];
            s.label = std::string(kStrokeLabel);
            s.score = out[i].probabilities[kStrokeClass];
            detections.push_back(std::move(s));
        }
    }
    return detections;
}

}  // namespace strokebench
