#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "strokebench/annotations.hpp"
#include "strokebench/error.hpp"
#include "strokebench/taxonomy.hpp"

namespace strokebench {

inline double accuracy(const std::vector<std::string>& pred, const std::vector<std::string>& truth) {
    if (pred.size() != truth.size())
        throw Error("accuracy: " + std::to_string(pred.size()) + " predictions for " + std::to_string(truth.size()) +
                    " labels");
    if (pred.empty()) throw Error("accuracy: no samples");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

/// Rows are ground truth, columns predictions.
struct ConfusionMatrix {
    std::vector<std::string> labels;
    std::vector<std::vector<std::size_t>> counts;

    std::size_t total() const {
        std::size_t n = 0;
        for (const auto& row : counts)
            for (auto c : row) n += c;
        return n;
    }
    std::size_t diagonal() const {
        std::size_t n = 0;
        for (std::size_t i = 0; i < counts.size(); ++i) n += counts[i][i];
        return n;
    }
    double accuracy() const {
        const auto t = total();
        return t ? static_cast<double>(diagonal()) / static_cast<double>(t) : 0.0;
    }

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

inline ConfusionMatrix confusion(const std::vector<std::string>& pred, const std::vector<std::string>& truth,
                                 const std::vector<std::string>& labels) {
    if (pred.size() != truth.size()) throw Error("confusion: prediction and truth lengths differ");
    std::map<std::string_view, std::size_t> index;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (!index.emplace(labels[i], i).second) throw Error("confusion: duplicate label '" + labels[i] + "'");
    auto find = [&](const std::string& l) {
        const auto it = index.find(l);
        if (it == index.end()) throw Error("confusion: unknown label '" + l + "'");
        return it->second;
    };
    ConfusionMatrix cm{labels, std::vector<std::vector<std::size_t>>(labels.size(), std::vector<std::size_t>(labels.size()))};
    for (std::size_t i = 0; i < pred.size(); ++i) ++cm.counts[find(truth[i])][find(pred[i])];
    return cm;
}

/// Sums cells whose labels share a super-label at `level`. Super-labels are
/// ordered by first appearance along cm.labels.
inline ConfusionMatrix aggregate(const ConfusionMatrix& cm, const Taxonomy& tax, Level level) {
    std::vector<std::string> supers;
    std::vector<std::size_t> map_to(cm.labels.size());
    for (std::size_t i = 0; i < cm.labels.size(); ++i) {
        const auto s = superclass_of(tax, cm.labels[i], level);
        auto it = std::find(supers.begin(), supers.end(), s);
        if (it == supers.end()) it = supers.insert(supers.end(), s);
        map_to[i] = static_cast<std::size_t>(it - supers.begin());
    }
    ConfusionMatrix out{supers, std::vector<std::vector<std::size_t>>(supers.size(), std::vector<std::size_t>(supers.size()))};
    for (std::size_t i = 0; i < cm.labels.size(); ++i)
        for (std::size_t j = 0; j < cm.labels.size(); ++j) out.counts[map_to[i]][map_to[j]] += cm.counts[i][j];
    return out;
}

/// CSV with a header row and a leading label column ("truth\\pred" corner).
inline std::string confusion_csv(const ConfusionMatrix& cm) {
    std::string out = "truth\\pred";
    for (const auto& l : cm.labels) out += "," + l;
    out += "\n";
    for (std::size_t i = 0; i < cm.labels.size(); ++i) {
        out += cm.labels[i];
        for (auto c : cm.counts[i]) out += "," + std::to_string(c);
        out += "\n";
    }
    return out;
}

/// Temporal IoU of two half-open frame intervals.
inline double tiou(const Segment& a, const Segment& b) {
    const std::int64_t inter = std::max<std::int64_t>(0, std::min(a.end, b.end) - std::max(a.begin, b.begin));
    const std::int64_t uni = (a.end - a.begin) + (b.end - b.begin) - inter;
    return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

struct VideoDetections {
    std::vector<Segment> predictions;   // scored
    std::vector<Segment> ground_truth;  // unscored
};

/// Per-video predictions and ground truth for one class.
using DetectionSet = std::map<std::string, VideoDetections>;

/// Average precision at a tIoU threshold. Predictions are visited by
/// descending score (ties: video id, begin, end); each one takes the
/// unmatched ground truth of its video with the highest tIoU (ties: earliest
/// begin) and is a true positive iff that tIoU reaches the threshold.
/// AP is the area under the precision envelope over all recall points.
inline double average_precision(const DetectionSet& ds, double threshold = 0.5) {
    struct Ranked {
        double score;
        const std::string* video;
        const Segment* seg;
    };
    std::vector<Ranked> ranked;
    std::size_t n_gt = 0;
    for (const auto& [video, d] : ds) {
        n_gt += d.ground_truth.size();
        for (const auto& p : d.predictions) {
            if (!p.score) throw Error("average_precision: prediction in '" + video + "' has no score");
            ranked.push_back({*p.score, &video, &p});
        }
    }
    if (n_gt == 0) throw Error("average_precision: no ground truth");
    std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
        return std::tie(b.score, *a.video, a.seg->begin, a.seg->end) < std::tie(a.score, *b.video, b.seg->begin, b.seg->end);
    });

    // ground truth per video sorted by begin so index order = tie order
    std::map<std::string_view, std::vector<const Segment*>> gt;
    std::map<std::string_view, std::vector<bool>> used;
    for (const auto& [video, d] : ds) {
        auto& v = gt[video];
        for (const auto& g : d.ground_truth) v.push_back(&g);
        std::stable_sort(v.begin(), v.end(), [](const Segment* a, const Segment* b) { return a->begin < b->begin; });
        used[video].assign(v.size(), false);
    }

    std::vector<double> precision, recall;
    std::size_t tp = 0, fp = 0;
    for (const auto& r : ranked) {
        const auto& candidates = gt[*r.video];
        auto& taken = used[*r.video];
        double best = -1;
        std::size_t best_j = candidates.size();
        for (std::size_t j = 0; j < candidates.size(); ++j) {
            if (taken[j]) continue;
            const double o = tiou(*r.seg, *candidates[j]);
            if (o > best) {
                best = o;
                best_j = j;
            }
        }
        if (best_j < candidates.size() && best >= threshold) {
            taken[best_j] = true;
            ++tp;
        } else {
            ++fp;
        }
        precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
        recall.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
    }
    for (std::size_t i = precision.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
    double ap = 0, prev_recall = 0;
    for (std::size_t i = 0; i < precision.size(); ++i) {
        ap += (recall[i] - prev_recall) * precision[i];
        prev_recall = recall[i];
    }
    return ap;
}

/// Unweighted mean of per-class AP over classes that have ground truth.
inline double mean_average_precision(const std::map<std::string, DetectionSet>& per_class, double threshold = 0.5) {
    double sum = 0;
    std::size_t n = 0;
    for (const auto& [cls, ds] : per_class) {
        bool has_gt = false;
        for (const auto& [video, d] : ds) has_gt = has_gt || !d.ground_truth.empty();
        if (!has_gt) continue;
        sum += average_precision(ds, threshold);
        ++n;
    }
    if (n == 0) throw Error("mean_average_precision: no class has ground truth");
    return sum / static_cast<double>(n);
}

namespace detail {

/// Sorted disjoint union of intervals.
inline std::vector<std::pair<std::int64_t, std::int64_t>> interval_union(const std::vector<Segment>& segs) {
    std::vector<std::pair<std::int64_t, std::int64_t>> v;
    for (const auto& s : segs) v.emplace_back(s.begin, s.end);
    std::sort(v.begin(), v.end());
    std::vector<std::pair<std::int64_t, std::int64_t>> out;
    for (const auto& iv : v) {
        if (!out.empty() && iv.first <= out.back().second) out.back().second = std::max(out.back().second, iv.second);
        else out.push_back(iv);
    }
    return out;
}

inline std::int64_t covered(const std::vector<std::pair<std::int64_t, std::int64_t>>& u) {
    std::int64_t n = 0;
    for (const auto& [b, e] : u) n += e - b;
    return n;
}

inline std::int64_t intersection(const std::vector<std::pair<std::int64_t, std::int64_t>>& a,
                                 const std::vector<std::pair<std::int64_t, std::int64_t>>& b) {
    std::int64_t n = 0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        n += std::max<std::int64_t>(0, std::min(a[i].second, b[j].second) - std::max(a[i].first, b[j].first));
        if (a[i].second < b[j].second) ++i;
        else ++j;
    }
    return n;
}

}  // namespace detail

/// Frame-wise IoU between the union of predicted frames and the union of
/// ground-truth frames, pooled over videos.
inline double global_iou(const DetectionSet& ds) {
    std::int64_t inter = 0, uni = 0;
    for (const auto& [video, d] : ds) {
        const auto p = detail::interval_union(d.predictions);
        const auto g = detail::interval_union(d.ground_truth);
        const auto i = detail::intersection(p, g);
        inter += i;
        uni += detail::covered(p) + detail::covered(g) - i;
    }
    if (uni == 0) throw Error("global_iou: no predicted or ground-truth frames");
    return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace strokebench
