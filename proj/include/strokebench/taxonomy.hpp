#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "strokebench/error.hpp"

namespace strokebench {

/// Taxonomy levels, finest first.
enum class Level { global, type_hand, type, hand };

inline constexpr Level kAllLevels[] = {Level::global, Level::type_hand, Level::type, Level::hand};

/// File-name friendly key: global, type_hand, type, hand.
inline std::string_view level_key(Level level) {
    switch (level) {
        case Level::global: return "global";
        case Level::type_hand: return "type_hand";
        case Level::type: return "type";
        case Level::hand: return "hand";
    }
    return "?";
}

/// Report column header.
inline std::string_view level_title(Level level) {
    switch (level) {
        case Level::global: return "Global";
        case Level::type_hand: return "Type and Hand-Sided";
        case Level::type: return "Type";
        case Level::hand: return "Hand-Side";
    }
    return "?";
}

struct TaxonomyEntry {
    std::string type;       // Defensive | Offensive | Service
    std::string hand_side;  // Forehand | Backhand
};

/// Fine stroke labels with their (type, hand side) super-labels. Label order
/// is the CSV order and defines class indices for classification.
class Taxonomy {
public:
    void add(std::string label, TaxonomyEntry entry) {
        if (entries_.count(label)) throw ParseError("duplicate label '" + label + "' in taxonomy");
        labels_.push_back(label);
        entries_.emplace(std::move(label), std::move(entry));
    }

    const std::vector<std::string>& labels() const { return labels_; }
    std::size_t size() const { return labels_.size(); }
    bool contains(std::string_view label) const { return entries_.find(label) != entries_.end(); }

    const TaxonomyEntry& entry(std::string_view label) const {
        const auto it = entries_.find(label);
        if (it == entries_.end()) throw Error("label '" + std::string(label) + "' is not in the taxonomy");
        return it->second;
    }

    std::size_t index_of(std::string_view label) const {
        const auto it = std::find(labels_.begin(), labels_.end(), label);
        if (it == labels_.end()) throw Error("label '" + std::string(label) + "' is not in the taxonomy");
        return static_cast<std::size_t>(it - labels_.begin());
    }

private:
    std::vector<std::string> labels_;
    std::map<std::string, TaxonomyEntry, std::less<>> entries_;
};

/// Reads `label,type,hand_side` CSV (header required).
inline Taxonomy load_taxonomy(std::string_view bytes) {
    Taxonomy tax;
    std::size_t line_no = 0;
    bool header_seen = false;
    std::size_t pos = 0;
    while (pos <= bytes.size()) {
        auto nl = bytes.find('\n', pos);
        if (nl == std::string_view::npos) nl = bytes.size();
        std::string_view line = bytes.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        auto fail = [&](const std::string& what) -> void {
            throw ParseError("taxonomy line " + std::to_string(line_no) + ": " + what);
        };
        std::vector<std::string_view> cols;
        std::size_t start = 0;
        for (;;) {
            const auto comma = line.find(',', start);
            cols.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (cols.size() != 3) fail("expected 3 columns, got " + std::to_string(cols.size()));
        if (!header_seen) {
            if (cols[0] != "label" || cols[1] != "type" || cols[2] != "hand_side")
                fail("header must be 'label,type,hand_side'");
            header_seen = true;
            continue;
        }
        if (cols[0].empty()) fail("empty label");
        if (cols[1] != "Defensive" && cols[1] != "Offensive" && cols[1] != "Service")
            fail("type must be Defensive, Offensive or Service, got '" + std::string(cols[1]) + "'");
        if (cols[2] != "Forehand" && cols[2] != "Backhand")
            fail("hand_side must be Forehand or Backhand, got '" + std::string(cols[2]) + "'");
        try {
            tax.add(std::string(cols[0]), {std::string(cols[1]), std::string(cols[2])});
        } catch (const ParseError& e) {
            fail(e.what());
        }
    }
    if (!header_seen) throw ParseError("taxonomy is empty");
    return tax;
}

/// The 20 table-tennis stroke labels.
inline constexpr std::string_view kDefaultTaxonomyCsv =
    "label,type,hand_side\n"
    "Serve Forehand Backspin,Service,Forehand\n"
    "Serve Forehand Loop,Service,Forehand\n"
    "Serve Forehand Sidespin,Service,Forehand\n"
    "Serve Forehand Topspin,Service,Forehand\n"
    "Serve Backhand Backspin,Service,Backhand\n"
    "Serve Backhand Loop,Service,Backhand\n"
    "Serve Backhand Sidespin,Service,Backhand\n"
    "Serve Backhand Topspin,Service,Backhand\n"
    "Offensive Forehand Hit,Offensive,Forehand\n"
    "Offensive Forehand Loop,Offensive,Forehand\n"
    "Offensive Forehand Flip,Offensive,Forehand\n"
    "Offensive Backhand Hit,Offensive,Backhand\n"
    "Offensive Backhand Loop,Offensive,Backhand\n"
    "Offensive Backhand Flip,Offensive,Backhand\n"
    "Defensive Forehand Push,Defensive,Forehand\n"
    "Defensive Forehand Block,Defensive,Forehand\n"
    "Defensive Forehand Backspin,Defensive,Forehand\n"
    "Defensive Backhand Push,Defensive,Backhand\n"
    "Defensive Backhand Block,Defensive,Backhand\n"
    "Defensive Backhand Backspin,Defensive,Backhand\n";

inline std::string superclass_of(const Taxonomy& tax, std::string_view label, Level level) {
    const auto& e = tax.entry(label);
    switch (level) {
        case Level::global: return std::string(label);
        case Level::type_hand: return e.type + " " + e.hand_side;
        case Level::type: return e.type;
        case Level::hand: return e.hand_side;
    }
    return std::string(label);
}

}  // namespace strokebench
