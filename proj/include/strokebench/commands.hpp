#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "strokebench/annotations.hpp"
#include "strokebench/config.hpp"
#include "strokebench/gradcheck.hpp"
#include "strokebench/io.hpp"
#include "strokebench/metrics.hpp"
#include "strokebench/model.hpp"
#include "strokebench/parallel.hpp"
#include "strokebench/synth.hpp"
#include "strokebench/taxonomy.hpp"
#include "strokebench/training.hpp"

namespace strokebench {

/// Every `*.xml` in `dir`, parsed, in file-name order.
inline std::vector<VideoAnnotation> load_annotation_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw IoError("annotation directory " + dir.string() + " does not exist");
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".xml") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoError("no annotation files in " + dir.string());
    std::vector<VideoAnnotation> out;
    for (const auto& f : files) {
        try {
            out.push_back(parse_annotations(read_file(f)));
        } catch (const ParseError& e) {
            throw ParseError(f.string() + ": " + e.what());
        }
    }
    return out;
}

/// Index rows for one split: strokes (as "Stroke" for detection, with the
/// inferred negatives added) or fine labels for classification.
inline DatasetIndex build_index(const std::vector<VideoAnnotation>& anns, Split split, const RunConfig& c,
                                const Taxonomy* tax) {
    DatasetIndex idx{split, {}};
    for (const auto& a : anns) {
        std::vector<Sample> rows;
        for (const auto& s : a.segments) {
            Segment seg{s.begin, s.end, s.label, std::nullopt};
            if (c.task == Task::detection) {
                seg.label = std::string(kStrokeLabel);
                rows.push_back({a.video_id, seg, kStrokeClass});
            } else {
                rows.push_back({a.video_id, seg, tax->index_of(s.label)});
            }
        }
        if (c.task == Task::detection)
            for (auto& n : infer_negative_segments(a, c.block)) rows.push_back({a.video_id, std::move(n), 0});
        std::stable_sort(rows.begin(), rows.end(),
                         [](const Sample& x, const Sample& y) { return x.segment.begin < y.segment.begin; });
        idx.items.insert(idx.items.end(), rows.begin(), rows.end());
    }
    return idx;
}

inline std::function<std::size_t(std::string_view)> class_mapper(const RunConfig& c, const Taxonomy* tax) {
    if (c.task == Task::detection) return [](std::string_view l) { return detection_class_of(l); };
    return [tax](std::string_view l) { return tax->index_of(l); };
}

inline std::size_t task_classes(const RunConfig& c, const Taxonomy* tax) {
    return c.task == Task::detection ? 2 : tax->size();
}

namespace detail {

inline std::optional<Taxonomy> taxonomy_for(const RunConfig& c) {
    if (c.task == Task::detection) return std::nullopt;
    return load_taxonomy(read_file(c.taxonomy_path()));
}

inline const Taxonomy* ptr(const std::optional<Taxonomy>& t) { return t ? &*t : nullptr; }

inline void apply_determinism(const RunConfig& c) {
    if (c.deterministic) set_thread_count(1);
}

template <class Fn>
int guarded(std::ostream& err, std::string_view command, Fn&& fn) {
    try {
        return fn();
    } catch (const std::exception& e) {
        err << command << ": error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace detail

/// Writes `<out>/train.csv` and `<out>/validation.csv`.
inline int cmd_prepare(const RunConfig& c, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    return detail::guarded(err, "prepare", [&] {
        const auto tax = detail::taxonomy_for(c);
        for (Split split : {Split::train, Split::validation}) {
            const auto anns = load_annotation_dir(c.annotations_dir() / std::string(to_string(split)));
            const auto idx = build_index(anns, split, c, detail::ptr(tax));
            write_file(c.out / (std::string(to_string(split)) + ".csv"), write_index_csv(idx));
            std::size_t positives = 0;
            for (const auto& s : idx.items) positives += s.segment.label != kNonStrokeLabel;
            out << to_string(split) << ": " << anns.size() << " videos, " << idx.items.size() << " samples";
            if (c.task == Task::detection)
                out << " (" << positives << " Stroke, " << idx.items.size() - positives << " Non-stroke)";
            out << "\n";
        }
        return 0;
    });
}

/// Writes a synthetic corpus into the data root.
inline int cmd_synth(const RunConfig& c, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    return detail::guarded(err, "synth", [&] {
        SynthConfig s;
        s.classes = c.classes;
        s.samples = c.samples;
        s.frame_size = c.frame_size;
        s.strokes_per_video = c.strokes_per_video;
        s.seed = c.seed;
        s.fps = c.fps;
        const std::string taxonomy_csv = c.taxonomy.empty() ? std::string(kDefaultTaxonomyCsv) : read_file(c.taxonomy);
        const auto summary = write_synthetic_corpus(c.data, s, taxonomy_csv);
        out << "wrote " << summary.videos << " videos to " << c.data.string() << "\n";
        for (Split split : {Split::train, Split::validation, Split::test})
            out << to_string(split) << ": " << summary.segments[static_cast<int>(split)] << " strokes\n";
        return 0;
    });
}

/// Trains on `<out>/train.csv`, selecting on `<out>/validation.csv`; writes
/// the checkpoint and `<out>/history.csv`.
inline int cmd_train(const RunConfig& c, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    return detail::guarded(err, "train", [&] {
        detail::apply_determinism(c);
        const auto tax = detail::taxonomy_for(c);
        const auto class_of = class_mapper(c, detail::ptr(tax));
        const auto train_idx = parse_index_csv(read_file(c.out / "train.csv"), Split::train, class_of);
        const auto val_idx = parse_index_csv(read_file(c.out / "validation.csv"), Split::validation, class_of);
        const auto library = open_video_library(c.videos_dir(), c.fps);

        TrainConfig tc;
        tc.epochs = c.epochs;
        tc.batch_size = c.batch;
        tc.seed = c.seed;
        tc.optimizer = c.optimizer;
        tc.cuboid = {c.cuboid_len, c.cuboid_size};
        tc.cache_cuboids = c.cache;
        tc.prefetch = !c.deterministic;

        const std::size_t n_classes = task_classes(c, detail::ptr(tax));
        const auto layers = make_architecture(tc.cuboid.input_shape(), c.arch, n_classes);
        auto model = build_model<float>(n_classes, layers, tc.cuboid.input_shape(), c.seed);
        const auto result = train(std::move(model), train_idx, val_idx, library, tc, &err);

        save_checkpoint(result.best_model, c.checkpoint_path());
        write_file(c.out / "history.csv", write_history_csv(result.history));
        const auto& best = result.history[result.best_epoch - 1];
        out << "best epoch " << result.best_epoch << ": train_acc " << best.train_acc << " val_acc " << best.val_acc << "\n";
        out << "checkpoint " << c.checkpoint_path().string() << "\n";
        return 0;
    });
}

/// Writes `<predictions>/<id>.xml` for every video of the test split.
inline int cmd_infer(const RunConfig& c, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    return detail::guarded(err, "infer", [&] {
        detail::apply_determinism(c);
        const auto tax = detail::taxonomy_for(c);
        const auto model = load_checkpoint(c.checkpoint_path());
        require_classes(model, task_classes(c, detail::ptr(tax)));
        const CuboidSpec cuboid{model.input_shape[1], model.input_shape[2]};
        if (model.input_shape[2] != model.input_shape[3]) throw ShapeError("checkpoint input is not square");

        const auto anns = load_annotation_dir(c.annotations_dir() / "test");
        const auto library = open_video_library(c.videos_dir(), c.fps);
        std::size_t written = 0, segments = 0;
        for (const auto& a : anns) {
            const VideoSource* src = library.find(a.video_id);
            if (!src) throw IoError("video '" + a.video_id + "' not found in " + c.videos_dir().string());
            std::vector<Segment> predicted;
            if (c.task == Task::detection) {
                DetectConfig dc;
                dc.proposal_length = c.proposal_len;
                dc.proposal_stride = c.proposal_stride;
                dc.cuboid = cuboid;
                dc.batch_size = c.batch;
                predicted = detect(model, *src, dc);
            } else {
                for (const auto& s : a.segments) {
                    const auto start = cuboid_start(src->frame_count(), s.begin, cuboid.length);
                    if (!start) throw Error("video '" + a.video_id + "' is shorter than the cuboid length");
                    const auto decision = classify(model, extract_cuboid(*src, *start, cuboid.length, cuboid.size).values);
                    predicted.push_back({s.begin, s.end, tax->labels()[decision.class_index],
                                         decision.probabilities[decision.class_index]});
                }
            }
            segments += predicted.size();
            write_file(c.predictions_dir() / (a.video_id + ".xml"),
                       write_predictions(a.video_id, predicted, src->frame_count(), src->fps()));
            ++written;
        }
        out << "wrote " << written << " prediction files (" << segments << " segments) to " << c.predictions_dir().string()
            << "\n";
        return 0;
    });
}

/// Scores `<predictions>` against the test annotations.
inline int cmd_eval(const RunConfig& c, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    return detail::guarded(err, "eval", [&] {
        const auto tax = detail::taxonomy_for(c);
        const auto truth = load_annotation_dir(c.annotations_dir() / "test");
        const auto predicted = load_annotation_dir(c.predictions_dir());
        std::map<std::string, const VideoAnnotation*> truth_by_id, pred_by_id;
        for (const auto& a : truth) truth_by_id[a.video_id] = &a;
        for (const auto& p : predicted) {
            if (!truth_by_id.count(p.video_id)) throw Error("predictions for unknown video '" + p.video_id + "'");
            if (!pred_by_id.emplace(p.video_id, &p).second)
                throw Error("duplicate predictions for video '" + p.video_id + "'");
        }

        if (c.task == Task::detection) {
            DetectionSet ds;
            for (const auto& a : truth) {
                auto& v = ds[a.video_id];
                v.ground_truth = a.segments;
                const auto it = pred_by_id.find(a.video_id);
                if (it == pred_by_id.end()) {
                    err << "warning: no predictions for video '" << a.video_id << "'\n";
                    continue;
                }
                for (const auto& p : it->second->segments) {
                    if (!p.score) throw Error("prediction in '" + a.video_id + "' has no score");
                    v.predictions.push_back(p);
                }
            }
            const double map = mean_average_precision({{std::string(kStrokeLabel), ds}}, c.map_tiou);
            out << "mAP@" << detail::format_real(c.map_tiou) << ": " << std::fixed << std::setprecision(4) << map << "\n";
            out << "global IoU: " << global_iou(ds) << "\n";
            out.unsetf(std::ios::floatfield);
            return 0;
        }

        std::vector<std::string> pred_labels, truth_labels;
        for (const auto& a : truth) {
            const auto it = pred_by_id.find(a.video_id);
            if (it == pred_by_id.end()) throw Error("no predictions for video '" + a.video_id + "'");
            std::map<std::pair<std::int64_t, std::int64_t>, std::string> by_span;
            for (const auto& p : it->second->segments) by_span[{p.begin, p.end}] = p.label;
            for (const auto& s : a.segments) {
                const auto hit = by_span.find({s.begin, s.end});
                if (hit == by_span.end())
                    throw Error("no prediction for segment [" + std::to_string(s.begin) + ", " + std::to_string(s.end) +
                                ") of '" + a.video_id + "'");
                pred_labels.push_back(hit->second);
                truth_labels.push_back(s.label);
            }
        }
        if (truth_labels.empty()) throw Error("test annotations hold no segments");
        const auto cm = confusion(pred_labels, truth_labels, tax->labels());
        for (Level level : kAllLevels) {
            const auto agg = aggregate(cm, *tax, level);
            write_file(c.out / ("confusion_" + std::string(level_key(level)) + ".csv"), confusion_csv(agg));
            out << level_title(level) << ": " << std::fixed << std::setprecision(4) << agg.accuracy() << "\n";
        }
        out.unsetf(std::ios::floatfield);
        return 0;
    });
}

/// Finite-difference check of every layer kind and the loss.
inline int cmd_gradcheck(const RunConfig& c, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    return detail::guarded(err, "gradcheck", [&] {
        bool ok = true;
        for (const auto& line : run_gradcheck_suite(20, 1e-5, c.seed + 1)) {
            out << std::left << std::setw(22) << line.name << " max_rel_error " << std::scientific << std::setprecision(3)
                << line.max_rel_error << " tol " << line.tolerance << (line.passed() ? "  ok" : "  FAIL") << "\n";
            ok = ok && line.passed();
        }
        out.unsetf(std::ios::floatfield);
        if (!ok) err << "gradcheck: tolerance exceeded\n";
        return ok ? 0 : 1;
    });
}

}  // namespace strokebench
