#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "strokebench/annotations.hpp"
#include "strokebench/frames.hpp"
#include "strokebench/io.hpp"
#include "strokebench/rng.hpp"
#include "strokebench/taxonomy.hpp"
#include "strokebench/training.hpp"

namespace strokebench {

/// Layout of a synthetic video: `lead` background frames, then per stroke
/// `stroke_length` frames of motion followed by `gap` background frames.
struct SynthConfig {
    std::size_t classes = 2;
    std::size_t samples = 20;  // training strokes per class; held-out splits get half
    std::size_t frame_size = 32;
    std::size_t strokes_per_video = 5;
    std::uint64_t seed = 0;
    std::int64_t lead = 150;
    std::int64_t stroke_length = 150;
    std::int64_t gap = 300;
    double fps = 120.0;

    void validate(const Taxonomy& tax) const {
        if (classes < 1 || classes > tax.size())
            throw Error("synthetic classes must be in [1, " + std::to_string(tax.size()) + "]");
        if (samples < 1 || strokes_per_video < 1) throw Error("samples and strokes per video must be >= 1");
        if (frame_size < 8) throw Error("synthetic frame size must be >= 8");
        if (lead < 0 || stroke_length < 1 || gap < 0) throw Error("invalid synthetic video layout");
    }
};

/// Taxonomy labels used for `classes` synthetic classes, evenly spaced.
inline std::vector<std::string> synth_labels(const Taxonomy& tax, std::size_t classes) {
    std::vector<std::string> out;
    for (std::size_t k = 0; k < classes; ++k) out.push_back(tax.labels()[k * tax.size() / classes]);
    return out;
}

inline std::size_t synth_stroke_count(const SynthConfig& cfg, Split split) {
    const std::size_t per_class = split == Split::train ? cfg.samples : std::max<std::size_t>(1, cfg.samples / 2);
    return per_class * cfg.classes;
}

struct SynthVideo {
    std::string id;
    std::int64_t frame_count = 0;
    std::vector<Segment> strokes;
    std::vector<std::size_t> classes;
};

/// Video ids, stroke placement and class assignment for one split.
inline std::vector<SynthVideo> plan_split(const SynthConfig& cfg, const Taxonomy& tax, Split split) {
    const auto labels = synth_labels(tax, cfg.classes);
    const std::size_t n = synth_stroke_count(cfg, split);
    std::vector<std::size_t> classes(n);
    for (std::size_t i = 0; i < n; ++i) classes[i] = i % cfg.classes;
    auto rng = derive_stream(cfg.seed, 1000 + static_cast<std::uint64_t>(split));
    shuffle(std::span<std::size_t>(classes), rng);

    std::vector<SynthVideo> videos;
    for (std::size_t at = 0; at < n; at += cfg.strokes_per_video) {
        SynthVideo v;
        char id[32];
        std::snprintf(id, sizeof id, "%s_%02zu", std::string(to_string(split)).c_str(), videos.size());
        v.id = id;
        std::int64_t t = cfg.lead;
        for (std::size_t i = at; i < std::min(n, at + cfg.strokes_per_video); ++i) {
            v.strokes.push_back({t, t + cfg.stroke_length, labels[classes[i]], std::nullopt});
            v.classes.push_back(classes[i]);
            t += cfg.stroke_length + cfg.gap;
        }
        v.frame_count = t;
        videos.push_back(std::move(v));
    }
    return videos;
}

namespace detail {

inline std::uint8_t clamp_byte(int v) { return static_cast<std::uint8_t>(std::clamp(v, 0, 255)); }

inline void draw_block(RgbFrame& f, double cx, double cy, std::size_t side, const std::uint8_t (&rgb)[3]) {
    const auto w = static_cast<std::int64_t>(f.width), h = static_cast<std::int64_t>(f.height);
    const auto x0 = static_cast<std::int64_t>(std::floor(cx)), y0 = static_cast<std::int64_t>(std::floor(cy));
    for (std::size_t dy = 0; dy < side; ++dy)
        for (std::size_t dx = 0; dx < side; ++dx) {
            const auto x = ((x0 + static_cast<std::int64_t>(dx)) % w + w) % w;
            const auto y = ((y0 + static_cast<std::int64_t>(dy)) % h + h) % h;
            for (std::size_t c = 0; c < 3; ++c) f.pixels[(static_cast<std::size_t>(y) * f.width + static_cast<std::size_t>(x)) * 3 + c] = rgb[c];
        }
}

}  // namespace detail

/// Renders one video: a static noisy background with a fixed red distractor
/// block, and during each stroke of class k a block moving at angle
/// a = 2*pi*k/classes, wrapping at the borders, coloured by hue a and
/// brighter than the background in every channel.
/// Per-frame noise is small.
inline void render_synth_video(const SynthVideo& v, const SynthConfig& cfg, std::uint64_t stream,
                               const std::filesystem::path& path) {
    auto rng = derive_stream(cfg.seed, stream);
    const std::size_t s = cfg.frame_size;
    const std::size_t side = std::max<std::size_t>(2, s / 6);
    const double speed = std::max(1.0, static_cast<double>(s) / 32.0);

    RgbFrame background{s, s, std::vector<std::uint8_t>(s * s * 3)};
    for (auto& p : background.pixels) p = static_cast<std::uint8_t>(50 + rng.below(31));
    const std::uint8_t distractor[3] = {200, 60, 60};
    detail::draw_block(background, rng.uniform(0, static_cast<double>(s)), rng.uniform(0, static_cast<double>(s)), side,
                       distractor);

    struct Motion {
        double x, y, dx, dy;
        std::uint8_t rgb[3];
    };
    std::vector<Motion> motions;
    for (std::size_t i = 0; i < v.strokes.size(); ++i) {
        const double angle = 2 * std::numbers::pi * static_cast<double>(v.classes[i]) / static_cast<double>(cfg.classes);
        // the block starts near the centre, like a player in a fixed camera view
        const double centre = static_cast<double>(s) / 2 - static_cast<double>(side) / 2, jitter = static_cast<double>(s) / 8;
        Motion m{centre + rng.uniform(-jitter, jitter), centre + rng.uniform(-jitter, jitter), speed * std::cos(angle),
                 speed * std::sin(angle), {}};
        for (int c = 0; c < 3; ++c)
            m.rgb[c] = detail::clamp_byte(static_cast<int>(std::lround(200 + 55 * std::cos(angle - 2 * std::numbers::pi * c / 3))));
        motions.push_back(m);
    }

    RgbvWriter writer(path, s, s, cfg.fps, v.frame_count);
    std::size_t active = 0;
    for (std::int64_t t = 0; t < v.frame_count; ++t) {
        RgbFrame f = background;
        for (auto& p : f.pixels) p = detail::clamp_byte(int(p) + static_cast<int>(rng.below(13)) - 6);
        while (active < v.strokes.size() && t >= v.strokes[active].end) ++active;
        if (active < v.strokes.size() && t >= v.strokes[active].begin) {
            const auto& m = motions[active];
            const double k = static_cast<double>(t - v.strokes[active].begin);
            detail::draw_block(f, m.x + m.dx * k, m.y + m.dy * k, side, m.rgb);
        }
        writer.write(f);
    }
    writer.close();
}

struct SynthSummary {
    std::size_t videos = 0;
    std::size_t segments[3] = {0, 0, 0};  // per Split
};

/// Writes `<root>/taxonomy.csv`, `<root>/videos/<id>.rgbv` and
/// `<root>/annotations/<split>/<id>.xml` for all three splits.
inline SynthSummary write_synthetic_corpus(const std::filesystem::path& root, const SynthConfig& cfg,
                                           std::string_view taxonomy_csv = kDefaultTaxonomyCsv) {
    const Taxonomy tax = load_taxonomy(taxonomy_csv);
    cfg.validate(tax);
    write_file(root / "taxonomy.csv", taxonomy_csv);
    SynthSummary summary;
    for (Split split : {Split::train, Split::validation, Split::test}) {
        const auto videos = plan_split(cfg, tax, split);
        for (std::size_t i = 0; i < videos.size(); ++i) {
            const auto& v = videos[i];
            render_synth_video(v, cfg, (static_cast<std::uint64_t>(split) << 32) | i, root / "videos" / (v.id + ".rgbv"));
            write_file(root / "annotations" / std::string(to_string(split)) / (v.id + ".xml"),
                       write_predictions(v.id, v.strokes, v.frame_count, cfg.fps));
            summary.segments[static_cast<int>(split)] += v.strokes.size();
            ++summary.videos;
        }
    }
    return summary;
}

}  // namespace strokebench
