#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "strokebench/error.hpp"

namespace strokebench {

/// Half-open frame interval [begin, end) with a label. Predicted segments
/// carry a score in [0, 1]; ground truth does not.
struct Segment {
    std::int64_t begin = 0;
    std::int64_t end = 0;
    std::string label;
    std::optional<double> score;

    std::int64_t length() const { return end - begin; }
    friend bool operator==(const Segment&, const Segment&) = default;
};

struct VideoAnnotation {
    std::string video_id;
    std::int64_t frame_count = 0;  // 0 = unknown
    double fps = 120.0;
    std::vector<Segment> segments;  // sorted by begin
};

inline constexpr std::string_view kStrokeLabel = "Stroke";
inline constexpr std::string_view kNonStrokeLabel = "Non-stroke";

namespace detail {

class XmlReader {
public:
    explicit XmlReader(std::string_view text) : text_(text) {}

    [[noreturn]] void fail(const std::string& what) const { fail_at(line_, what); }
    [[noreturn]] static void fail_at(std::size_t line, const std::string& what) {
        throw ParseError("line " + std::to_string(line) + ": " + what);
    }

    std::size_t line() const { return line_; }
    bool at_end() const { return pos_ >= text_.size(); }
    bool starts_with(std::string_view s) const { return text_.substr(pos_).starts_with(s); }
    char peek() const { return at_end() ? '\0' : text_[pos_]; }

    void advance(std::size_t n = 1) {
        for (std::size_t i = 0; i < n && pos_ < text_.size(); ++i, ++pos_)
            if (text_[pos_] == '\n') ++line_;
    }

    void skip_ws() {
        while (!at_end() && (peek() == ' ' || peek() == '\t' || peek() == '\n' || peek() == '\r')) advance();
    }

    void skip_until(std::string_view terminator) {
        const auto found = text_.find(terminator, pos_);
        if (found == std::string_view::npos) fail("unterminated construct, expected '" + std::string(terminator) + "'");
        advance(found + terminator.size() - pos_);
    }

    /// Whitespace, XML declaration, comments and doctype.
    void skip_misc() {
        for (;;) {
            skip_ws();
            if (starts_with("<?")) skip_until("?>");
            else if (starts_with("<!--")) skip_until("-->");
            else if (starts_with("<!DOCTYPE")) skip_until(">");
            else return;
        }
    }

    void expect(char c) {
        if (peek() != c) fail(std::string("expected '") + c + "'");
        advance();
    }

    std::string_view name() {
        const std::size_t start = pos_;
        auto ok = [](char c, bool first) {
            return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_' || c == ':' ||
                   (!first && ((c >= '0' && c <= '9') || c == '-' || c == '.'));
        };
        while (!at_end() && ok(peek(), pos_ == start)) advance();
        if (pos_ == start) fail("expected a name");
        return text_.substr(start, pos_ - start);
    }

    /// Reads attributes up to '>' or '/>'. Returns true for a self-closing tag.
    bool attributes(std::map<std::string, std::string, std::less<>>& out) {
        for (;;) {
            skip_ws();
            if (starts_with("/>")) {
                advance(2);
                return true;
            }
            if (peek() == '>') {
                advance();
                return false;
            }
            if (at_end()) fail("unterminated tag");
            const std::string key(name());
            skip_ws();
            expect('=');
            skip_ws();
            const char quote = peek();
            if (quote != '"' && quote != '\'') fail("attribute '" + key + "' value must be quoted");
            advance();
            const auto close = text_.find(quote, pos_);
            if (close == std::string_view::npos) fail("unterminated value for attribute '" + key + "'");
            const std::size_t value_line = line_;
            std::string value = decode(text_.substr(pos_, close - pos_), value_line);
            advance(close + 1 - pos_);
            if (!out.emplace(key, std::move(value)).second) fail("duplicate attribute '" + key + "'");
        }
    }

private:
    static std::string decode(std::string_view raw, std::size_t line) {
        std::string out;
        out.reserve(raw.size());
        for (std::size_t i = 0; i < raw.size(); ++i) {
            if (raw[i] == '<') fail_at(line, "'<' not allowed in attribute value");
            if (raw[i] != '&') {
                out.push_back(raw[i]);
                continue;
            }
            const auto semi = raw.find(';', i);
            if (semi == std::string_view::npos) fail_at(line, "unterminated entity");
            const auto entity = raw.substr(i + 1, semi - i - 1);
            if (entity == "amp") out.push_back('&');
            else if (entity == "lt") out.push_back('<');
            else if (entity == "gt") out.push_back('>');
            else if (entity == "quot") out.push_back('"');
            else if (entity == "apos") out.push_back('\'');
            else fail_at(line, "unsupported entity '&" + std::string(entity) + ";'");
            i = semi;
        }
        return out;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
};

using AttributeMap = std::map<std::string, std::string, std::less<>>;

inline const std::string& require_attribute(const AttributeMap& attrs, std::string_view key, std::string_view element,
                                            std::size_t line) {
    const auto it = attrs.find(key);
    if (it == attrs.end())
        XmlReader::fail_at(line, "<" + std::string(element) + "> is missing attribute '" + std::string(key) + "'");
    return it->second;
}

inline std::int64_t parse_int_attribute(const std::string& text, std::string_view key, std::size_t line) {
    std::int64_t value = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (text.empty() || ec != std::errc{} || ptr != end)
        XmlReader::fail_at(line, "attribute '" + std::string(key) + "' is not a base-10 integer: '" + text + "'");
    return value;
}

inline double parse_real_attribute(const std::string& text, std::string_view key, std::size_t line) {
    double value = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (text.empty() || ec != std::errc{} || ptr != end)
        XmlReader::fail_at(line, "attribute '" + std::string(key) + "' is not a decimal number: '" + text + "'");
    return value;
}

inline std::string format_real(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

inline std::string escape_attribute(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

}  // namespace detail

/// Parses `<video name frames fps>` with `<action begin end move [score]/>`
/// children. Segments come back sorted by begin. Ground truth (no scores)
/// must not overlap; errors carry the offending line number.
inline VideoAnnotation parse_annotations(std::string_view bytes) {
    detail::XmlReader xml(bytes);
    xml.skip_misc();
    if (xml.peek() != '<') xml.fail("expected root element <video>");
    xml.advance();
    if (xml.name() != "video") xml.fail("root element must be <video>");
    const std::size_t root_line = xml.line();
    detail::AttributeMap root;
    const bool self_closing = xml.attributes(root);

    VideoAnnotation ann;
    ann.video_id = detail::require_attribute(root, "name", "video", root_line);
    if (ann.video_id.empty()) xml.fail_at(root_line, "video name must not be empty");
    ann.frame_count = detail::parse_int_attribute(detail::require_attribute(root, "frames", "video", root_line), "frames",
                                                  root_line);
    if (ann.frame_count < 0) xml.fail_at(root_line, "frames must be nonnegative");
    ann.fps = detail::parse_real_attribute(detail::require_attribute(root, "fps", "video", root_line), "fps", root_line);
    if (!(ann.fps > 0)) xml.fail_at(root_line, "fps must be positive");

    std::vector<std::pair<Segment, std::size_t>> found;
    if (!self_closing) {
        for (;;) {
            xml.skip_ws();
            if (xml.starts_with("<!--")) {
                xml.skip_until("-->");
                continue;
            }
            if (xml.at_end()) xml.fail("missing </video>");
            if (xml.starts_with("</")) {
                xml.advance(2);
                if (xml.name() != "video") xml.fail("mismatched closing tag, expected </video>");
                xml.skip_ws();
                xml.expect('>');
                break;
            }
            if (xml.peek() != '<') xml.fail("unexpected text content");
            xml.advance();
            const std::size_t line = xml.line();
            if (xml.name() != "action") xml.fail("unexpected element, only <action> is allowed inside <video>");
            detail::AttributeMap attrs;
            if (!xml.attributes(attrs)) {
                xml.skip_ws();
                if (!xml.starts_with("</")) xml.fail("<action> must be empty");
                xml.advance(2);
                if (xml.name() != "action") xml.fail("mismatched closing tag, expected </action>");
                xml.skip_ws();
                xml.expect('>');
            }
            Segment s;
            s.begin = detail::parse_int_attribute(detail::require_attribute(attrs, "begin", "action", line), "begin", line);
            s.end = detail::parse_int_attribute(detail::require_attribute(attrs, "end", "action", line), "end", line);
            s.label = detail::require_attribute(attrs, "move", "action", line);
            if (const auto it = attrs.find("score"); it != attrs.end()) {
                const double score = detail::parse_real_attribute(it->second, "score", line);
                if (!(score >= 0 && score <= 1)) xml.fail_at(line, "score must lie in [0,1]");
                s.score = score;
            }
            if (s.begin < 0) xml.fail_at(line, "begin must be nonnegative");
            if (s.begin >= s.end) xml.fail_at(line, "begin must be smaller than end");
            if (ann.frame_count > 0 && s.end > ann.frame_count)
                xml.fail_at(line, "action ends after the last frame (" + std::to_string(ann.frame_count) + ")");
            found.emplace_back(std::move(s), line);
        }
    }
    xml.skip_misc();
    if (!xml.at_end()) xml.fail("trailing content after </video>");

    std::stable_sort(found.begin(), found.end(),
                     [](const auto& a, const auto& b) { return a.first.begin < b.first.begin; });
    const bool ground_truth =
        std::none_of(found.begin(), found.end(), [](const auto& f) { return f.first.score.has_value(); });
    for (std::size_t i = 1; ground_truth && i < found.size(); ++i)
        if (found[i].first.begin < found[i - 1].first.end)
            xml.fail_at(found[i].second, "action overlaps the action on line " + std::to_string(found[i - 1].second));
    for (auto& f : found) ann.segments.push_back(std::move(f.first));
    return ann;
}

/// Serializes segments (sorted by begin) in the annotation schema, adding
/// the score attribute where present.
inline std::string write_predictions(std::string_view video_id, std::vector<Segment> segments,
                                     std::int64_t frame_count = 0, double fps = 120.0) {
    std::stable_sort(segments.begin(), segments.end(), [](const Segment& a, const Segment& b) { return a.begin < b.begin; });
    std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<video name=\"" + detail::escape_attribute(video_id) + "\" frames=\"" + std::to_string(frame_count) +
           "\" fps=\"" + detail::format_real(fps) + "\"";
    if (segments.empty()) return out + "/>\n";
    out += ">\n";
    for (const auto& s : segments) {
        out += "  <action begin=\"" + std::to_string(s.begin) + "\" end=\"" + std::to_string(s.end) + "\" move=\"" +
               detail::escape_attribute(s.label) + "\"";
        if (s.score) out += " score=\"" + detail::format_real(*s.score) + "\"";
        out += "/>\n";
    }
    return out + "</video>\n";
}

/// Non-stroke blocks between consecutive strokes: every gap strictly longer
/// than `block` yields floor(gap / block) adjacent blocks anchored at the
/// gap start. Gaps before the first and after the last stroke are unused.
inline std::vector<Segment> infer_negative_segments(const VideoAnnotation& ann, std::int64_t block = 200) {
    if (block < 1) throw Error("negative block length must be >= 1");
    std::vector<Segment> out;
    for (std::size_t i = 0; i + 1 < ann.segments.size(); ++i) {
        const std::int64_t gap_begin = ann.segments[i].end;
        const std::int64_t gap = ann.segments[i + 1].begin - gap_begin;
        if (gap <= block) continue;
        for (std::int64_t k = 0; k < gap / block; ++k)
            out.push_back({gap_begin + k * block, gap_begin + (k + 1) * block, std::string(kNonStrokeLabel), std::nullopt});
    }
    return out;
}

/// Windows [k*stride, k*stride + length) that fit entirely in the video.
inline std::vector<Segment> generate_window_proposals(std::int64_t frame_count, std::int64_t length = 150,
                                                      std::int64_t stride = 150) {
    if (length < 1 || stride < 1) throw Error("proposal length and stride must be >= 1");
    std::vector<Segment> out;
    for (std::int64_t start = 0; start + length <= frame_count; start += stride)
        out.push_back({start, start + length, "proposal", std::nullopt});
    return out;
}

}  // namespace strokebench
