#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "strokebench/error.hpp"
#include "strokebench/io.hpp"
#include "strokebench/layer_spec.hpp"
#include "strokebench/optimizer.hpp"

namespace strokebench {

enum class Task { detection, classification };

inline std::string_view to_string(Task t) { return t == Task::detection ? "detection" : "classification"; }

/// Settings for every command. Keys in config files and flag names are the
/// same (`lr=0.01` in a file, `--lr 0.01` on the command line).
struct RunConfig {
    std::filesystem::path data = "data";
    std::filesystem::path annotations;  // empty: <data>/annotations
    std::filesystem::path videos;       // empty: <data>/videos
    std::filesystem::path taxonomy;     // empty: <data>/taxonomy.csv
    std::filesystem::path checkpoint;   // empty: <out>/model.stkb
    std::filesystem::path predictions;  // empty: <out>/predictions
    std::filesystem::path out = "out";

    Task task = Task::detection;
    std::uint64_t seed = 0;
    bool deterministic = false;

    std::size_t epochs = 500;
    std::size_t batch = 10;
    SgdHyperparams optimizer{};
    bool cache = false;

    ArchitectureConfig arch{};
    std::size_t cuboid_len = 98;
    std::size_t cuboid_size = 120;
    std::int64_t proposal_len = 150;
    std::int64_t proposal_stride = 150;
    std::int64_t block = 200;
    double fps = 120.0;
    double map_tiou = 0.5;

    // synthetic corpus
    std::size_t classes = 2;
    std::size_t samples = 20;
    std::size_t frame_size = 32;
    std::size_t strokes_per_video = 5;

    std::filesystem::path annotations_dir() const { return annotations.empty() ? data / "annotations" : annotations; }
    std::filesystem::path videos_dir() const { return videos.empty() ? data / "videos" : videos; }
    std::filesystem::path taxonomy_path() const { return taxonomy.empty() ? data / "taxonomy.csv" : taxonomy; }
    std::filesystem::path checkpoint_path() const { return checkpoint.empty() ? out / "model.stkb" : checkpoint; }
    std::filesystem::path predictions_dir() const { return predictions.empty() ? out / "predictions" : predictions; }
};

struct ConfigKey {
    std::string_view name;
    std::string_view help;
    bool is_flag = false;
};

inline constexpr ConfigKey kConfigKeys[] = {
    {"data", "data root holding videos/, annotations/ and taxonomy.csv"},
    {"annotations", "annotation root with train/, validation/, test/ subdirectories"},
    {"videos", "directory of .rgbv files and PPM frame directories"},
    {"taxonomy", "label,type,hand_side CSV"},
    {"checkpoint", "model checkpoint path"},
    {"predictions", "directory of prediction XML files"},
    {"out", "output directory"},
    {"task", "detection or classification"},
    {"seed", "random seed"},
    {"deterministic", "single worker thread and no batch prefetch", true},
    {"epochs", "training epochs"},
    {"batch", "minibatch size"},
    {"lr", "learning rate"},
    {"momentum", "Nesterov momentum"},
    {"weight-decay", "L2 weight decay"},
    {"cache", "keep training cuboids in memory", true},
    {"filters", "comma-separated conv filter counts"},
    {"hidden", "comma-separated hidden layer widths"},
    {"kernel", "cubic conv kernel size"},
    {"pool", "cubic pooling window"},
    {"cuboid-len", "frames per cuboid"},
    {"cuboid-size", "cuboid side in pixels"},
    {"proposal-len", "window proposal length"},
    {"proposal-stride", "window proposal stride"},
    {"block", "negative block length"},
    {"fps", "frame rate for frame directories"},
    {"map-tiou", "tIoU threshold for average precision"},
    {"classes", "synthetic corpus: number of stroke classes"},
    {"samples", "synthetic corpus: training strokes per class"},
    {"frame-size", "synthetic corpus: frame side in pixels"},
    {"strokes-per-video", "synthetic corpus: strokes per video"},
};

namespace detail {

template <class T>
T parse_number(std::string_view key, std::string_view text) {
    T v{};
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end) throw ParseError("invalid value '" + std::string(text) + "' for " + std::string(key));
    return v;
}

inline bool parse_bool(std::string_view key, std::string_view text) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    throw ParseError("invalid boolean '" + std::string(text) + "' for " + std::string(key));
}

inline std::vector<std::size_t> parse_size_list(std::string_view key, std::string_view text) {
    std::vector<std::size_t> out;
    if (text.empty()) return out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = text.find(',', start);
        out.push_back(parse_number<std::size_t>(key, text.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline std::size_t parse_positive(std::string_view key, std::string_view text) {
    const auto v = parse_number<std::size_t>(key, text);
    if (v == 0) throw ParseError(std::string(key) + " must be positive");
    return v;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

}  // namespace detail

/// Applies one key=value setting. Unknown keys are rejected.
inline void apply_setting(RunConfig& c, std::string_view key, std::string_view value) {
    using detail::parse_number;
    using detail::parse_positive;
    if (key == "data") c.data = value;
    else if (key == "annotations") c.annotations = value;
    else if (key == "videos") c.videos = value;
    else if (key == "taxonomy") c.taxonomy = value;
    else if (key == "checkpoint") c.checkpoint = value;
    else if (key == "predictions") c.predictions = value;
    else if (key == "out") c.out = value;
    else if (key == "task") {
        if (value == "detection") c.task = Task::detection;
        else if (value == "classification") c.task = Task::classification;
        else throw ParseError("task must be detection or classification, got '" + std::string(value) + "'");
    } else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "deterministic") c.deterministic = detail::parse_bool(key, value);
    else if (key == "epochs") c.epochs = parse_positive(key, value);
    else if (key == "batch") c.batch = parse_positive(key, value);
    else if (key == "lr") c.optimizer.learning_rate = parse_number<double>(key, value);
    else if (key == "momentum") c.optimizer.momentum = parse_number<double>(key, value);
    else if (key == "weight-decay") c.optimizer.weight_decay = parse_number<double>(key, value);
    else if (key == "cache") c.cache = detail::parse_bool(key, value);
    else if (key == "filters") c.arch.filters = detail::parse_size_list(key, value);
    else if (key == "hidden") c.arch.hidden = detail::parse_size_list(key, value);
    else if (key == "kernel") c.arch.kernel = parse_positive(key, value);
    else if (key == "pool") c.arch.pool = parse_positive(key, value);
    else if (key == "cuboid-len") c.cuboid_len = parse_positive(key, value);
    else if (key == "cuboid-size") c.cuboid_size = parse_positive(key, value);
    else if (key == "proposal-len") c.proposal_len = static_cast<std::int64_t>(parse_positive(key, value));
    else if (key == "proposal-stride") c.proposal_stride = static_cast<std::int64_t>(parse_positive(key, value));
    else if (key == "block") c.block = static_cast<std::int64_t>(parse_positive(key, value));
    else if (key == "fps") c.fps = parse_number<double>(key, value);
    else if (key == "map-tiou") c.map_tiou = parse_number<double>(key, value);
    else if (key == "classes") c.classes = parse_positive(key, value);
    else if (key == "samples") c.samples = parse_positive(key, value);
    else if (key == "frame-size") c.frame_size = parse_positive(key, value);
    else if (key == "strokes-per-video") c.strokes_per_video = parse_positive(key, value);
    else throw ParseError("unknown setting '" + std::string(key) + "'");
}

/// `key = value` lines; blank lines and `#` comments are skipped.
inline void apply_config_text(RunConfig& c, std::string_view text) {
    std::size_t line_no = 0, pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        auto line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ParseError("config line " + std::to_string(line_no) + ": expected key=value");
        try {
            apply_setting(c, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
        } catch (const ParseError& e) {
            throw ParseError("config line " + std::to_string(line_no) + ": " + e.what());
        }
    }
}

inline void load_config_file(RunConfig& c, const std::filesystem::path& path) { apply_config_text(c, read_file(path)); }

}  // namespace strokebench
