#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "strokebench/error.hpp"
#include "strokebench/io.hpp"
#include "strokebench/tensor.hpp"

namespace strokebench {

/// Interleaved 8-bit RGB image, rows top to bottom.
struct RgbFrame {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;  // height * width * 3

    std::uint8_t at(std::size_t y, std::size_t x, std::size_t ch) const { return pixels[(y * width + x) * 3 + ch]; }
    friend bool operator==(const RgbFrame&, const RgbFrame&) = default;
};

/// Real-valued RGB image with the same interleaved layout.
struct RealFrame {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<float> values;

    float at(std::size_t y, std::size_t x, std::size_t ch) const { return values[(y * width + x) * 3 + ch]; }
};

/// Random-access frame provider. Reads are side-effect free and may be
/// issued from several threads.
class VideoSource {
public:
    virtual ~VideoSource() = default;

    virtual const std::string& id() const = 0;
    virtual std::size_t width() const = 0;
    virtual std::size_t height() const = 0;
    virtual double fps() const = 0;
    virtual std::int64_t frame_count() const = 0;
    virtual RgbFrame frame(std::int64_t index) const = 0;

protected:
    void check_index(std::int64_t index) const {
        if (index < 0 || index >= frame_count())
            throw Error("frame " + std::to_string(index) + " out of range for video '" + id() + "' with " +
                        std::to_string(frame_count()) + " frames");
    }
};

/// Frames held in memory (tests, synthetic data).
class InMemoryVideo final : public VideoSource {
public:
    InMemoryVideo(std::string id, std::size_t width, std::size_t height, double fps, std::vector<RgbFrame> frames)
        : id_(std::move(id)), width_(width), height_(height), fps_(fps), frames_(std::move(frames)) {
        for (const auto& f : frames_)
            if (f.width != width_ || f.height != height_ || f.pixels.size() != width_ * height_ * 3)
                throw Error("in-memory video '" + id_ + "' has frames of mixed extents");
    }

    const std::string& id() const override { return id_; }
    std::size_t width() const override { return width_; }
    std::size_t height() const override { return height_; }
    double fps() const override { return fps_; }
    std::int64_t frame_count() const override { return static_cast<std::int64_t>(frames_.size()); }
    RgbFrame frame(std::int64_t index) const override {
        check_index(index);
        return frames_[static_cast<std::size_t>(index)];
    }

private:
    std::string id_;
    std::size_t width_, height_;
    double fps_;
    std::vector<RgbFrame> frames_;
};

/// RGBV container: "RGBV1\n", "width height fps frame_count\n", then raw
/// frames of interleaved RGB bytes with no padding.
class RgbvVideo final : public VideoSource {
public:
    const std::string& id() const override { return id_; }
    std::size_t width() const override { return width_; }
    std::size_t height() const override { return height_; }
    double fps() const override { return fps_; }
    std::int64_t frame_count() const override { return frame_count_; }

    RgbFrame frame(std::int64_t index) const override {
        check_index(index);
        RgbFrame f{width_, height_, std::vector<std::uint8_t>(frame_bytes())};
        std::lock_guard lock(file_->mutex);
        file_->stream.clear();
        file_->stream.seekg(static_cast<std::streamoff>(payload_offset_ + static_cast<std::uint64_t>(index) * frame_bytes()));
        file_->stream.read(reinterpret_cast<char*>(f.pixels.data()), static_cast<std::streamsize>(f.pixels.size()));
        if (!file_->stream) throw IoError("truncated read of frame " + std::to_string(index) + " in " + path_.string());
        return f;
    }

    friend RgbvVideo open_rgbv(const std::filesystem::path& path);

private:
    struct File {
        std::mutex mutex;
        std::ifstream stream;
    };

    std::size_t frame_bytes() const { return width_ * height_ * 3; }

    std::filesystem::path path_;
    std::string id_;
    std::size_t width_ = 0, height_ = 0;
    double fps_ = 0;
    std::int64_t frame_count_ = 0;
    std::uint64_t payload_offset_ = 0;
    std::unique_ptr<File> file_;
};

inline constexpr std::string_view kRgbvMagic = "RGBV1\n";

inline std::string rgbv_header(std::size_t width, std::size_t height, double fps, std::int64_t frame_count) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, fps);
    return std::string(kRgbvMagic) + std::to_string(width) + " " + std::to_string(height) + " " + std::string(buf, ptr) +
           " " + std::to_string(frame_count) + "\n";
}

inline RgbvVideo open_rgbv(const std::filesystem::path& path) {
    RgbvVideo v;
    v.path_ = path;
    v.id_ = path.stem().string();
    v.file_ = std::make_unique<RgbvVideo::File>();
    auto& in = v.file_->stream;
    in.open(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());

    std::string magic(kRgbvMagic.size(), '\0');
    in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
    if (!in || magic != kRgbvMagic) throw ParseError(path.string() + ": bad magic, expected RGBV1");
    std::string header;
    if (!std::getline(in, header)) throw ParseError(path.string() + ": missing header line");

    std::vector<std::string_view> fields;
    std::string_view rest(header);
    while (!rest.empty()) {
        const auto sp = rest.find(' ');
        const auto field = rest.substr(0, sp);
        if (!field.empty()) fields.push_back(field);
        if (sp == std::string_view::npos) break;
        rest.remove_prefix(sp + 1);
    }
    if (fields.size() != 4) throw ParseError(path.string() + ": header must be 'width height fps frame_count'");
    auto integer = [&](std::string_view s, const char* what) {
        std::int64_t value = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
        if (ec != std::errc{} || ptr != s.data() + s.size() || value < 0)
            throw ParseError(path.string() + ": invalid " + what + " '" + std::string(s) + "'");
        return value;
    };
    const auto width = integer(fields[0], "width");
    const auto height = integer(fields[1], "height");
    {
        const auto [ptr, ec] = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), v.fps_);
        if (ec != std::errc{} || ptr != fields[2].data() + fields[2].size() || !(v.fps_ > 0))
            throw ParseError(path.string() + ": invalid fps '" + std::string(fields[2]) + "'");
    }
    v.frame_count_ = integer(fields[3], "frame_count");
    if (width == 0 || height == 0) throw ParseError(path.string() + ": zero extents");
    v.width_ = static_cast<std::size_t>(width);
    v.height_ = static_cast<std::size_t>(height);
    v.payload_offset_ = kRgbvMagic.size() + header.size() + 1;

    const auto size = std::filesystem::file_size(path);
    const auto needed = v.payload_offset_ + static_cast<std::uint64_t>(v.frame_count_) * v.frame_bytes();
    if (size < needed)
        throw ParseError(path.string() + ": truncated payload (" + std::to_string(size) + " bytes, header promises " +
                         std::to_string(needed) + ")");
    return v;
}

/// Streams frames into an RGBV file.
class RgbvWriter {
public:
    RgbvWriter(const std::filesystem::path& path, std::size_t width, std::size_t height, double fps,
               std::int64_t frame_count)
        : width_(width), height_(height), remaining_(frame_count) {
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        out_.open(path, std::ios::binary | std::ios::trunc);
        if (!out_) throw IoError("cannot write " + path.string());
        const auto header = rgbv_header(width, height, fps, frame_count);
        out_.write(header.data(), static_cast<std::streamsize>(header.size()));
    }

    void write(const RgbFrame& f) {
        if (f.width != width_ || f.height != height_) throw Error("RGBV frame extents do not match the header");
        if (remaining_-- <= 0) throw Error("more frames written than declared in the RGBV header");
        out_.write(reinterpret_cast<const char*>(f.pixels.data()), static_cast<std::streamsize>(f.pixels.size()));
    }

    void close() {
        if (remaining_ != 0) throw Error("RGBV file closed with " + std::to_string(remaining_) + " frames missing");
        out_.close();
        if (!out_) throw IoError("failed to finish RGBV file");
    }

private:
    std::ofstream out_;
    std::size_t width_, height_;
    std::int64_t remaining_;
};

namespace detail {

/// Parses a binary P6 PPM with maxval 255.
inline RgbFrame parse_ppm(std::string_view bytes, const std::string& where) {
    std::size_t pos = 0;
    auto skip_space = [&] {
        for (;;) {
            while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
            if (pos < bytes.size() && bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
                continue;
            }
            return;
        }
    };
    auto number = [&](const char* what) {
        skip_space();
        std::size_t value = 0;
        const auto [ptr, ec] = std::from_chars(bytes.data() + pos, bytes.data() + bytes.size(), value);
        if (ec != std::errc{}) throw ParseError(where + ": invalid PPM " + what);
        pos = static_cast<std::size_t>(ptr - bytes.data());
        return value;
    };
    if (!bytes.starts_with("P6")) throw ParseError(where + ": not a binary P6 PPM");
    pos = 2;
    RgbFrame f;
    f.width = number("width");
    f.height = number("height");
    const auto maxval = number("maxval");
    if (maxval != 255) throw ParseError(where + ": unsupported maxval " + std::to_string(maxval));
    if (f.width == 0 || f.height == 0) throw ParseError(where + ": zero extents");
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
        throw ParseError(where + ": missing whitespace after PPM header");
    ++pos;
    const std::size_t n = f.width * f.height * 3;
    if (bytes.size() - pos < n) throw ParseError(where + ": truncated PPM payload");
    f.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
    return f;
}

}  // namespace detail

inline std::string encode_ppm(const RgbFrame& f) {
    std::string out = "P6\n" + std::to_string(f.width) + " " + std::to_string(f.height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(f.pixels.data()), f.pixels.size());
    return out;
}

/// Directory of P6 frames named by zero-padded index (000000.ppm, ...).
class FrameDirVideo final : public VideoSource {
public:
    const std::string& id() const override { return id_; }
    std::size_t width() const override { return width_; }
    std::size_t height() const override { return height_; }
    double fps() const override { return fps_; }
    std::int64_t frame_count() const override { return static_cast<std::int64_t>(files_.size()); }

    RgbFrame frame(std::int64_t index) const override {
        check_index(index);
        const auto& file = files_[static_cast<std::size_t>(index)];
        return detail::parse_ppm(read_file(file), file.string());
    }

    friend FrameDirVideo open_frame_dir(const std::filesystem::path& dir, double fps);

private:
    std::string id_;
    std::size_t width_ = 0, height_ = 0;
    double fps_ = 120;
    std::vector<std::filesystem::path> files_;
};

inline FrameDirVideo open_frame_dir(const std::filesystem::path& dir, double fps = 120.0) {
    if (!std::filesystem::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
    if (!(fps > 0)) throw Error("fps must be positive");
    std::map<std::size_t, std::filesystem::path> by_index;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".ppm") continue;
        const auto stem = entry.path().stem().string();
        std::size_t index = 0;
        const auto [ptr, ec] = std::from_chars(stem.data(), stem.data() + stem.size(), index);
        if (stem.empty() || ec != std::errc{} || ptr != stem.data() + stem.size())
            throw ParseError(entry.path().string() + ": frame file name is not a numeric index");
        if (!by_index.emplace(index, entry.path()).second)
            throw ParseError(dir.string() + ": duplicate frame index " + std::to_string(index));
    }
    FrameDirVideo v;
    v.id_ = dir.filename().string();
    v.fps_ = fps;
    std::size_t expected = 0;
    for (auto& [index, path] : by_index) {
        if (index != expected) throw ParseError(dir.string() + ": missing frame index " + std::to_string(expected));
        ++expected;
        const auto f = detail::parse_ppm(read_file(path), path.string());
        if (v.files_.empty()) {
            v.width_ = f.width;
            v.height_ = f.height;
        } else if (f.width != v.width_ || f.height != v.height_) {
            throw ParseError(path.string() + ": mixed extents (" + std::to_string(f.width) + "x" +
                             std::to_string(f.height) + " vs " + std::to_string(v.width_) + "x" +
                             std::to_string(v.height_) + ")");
        }
        v.files_.push_back(path);
    }
    return v;
}

/// Opens `<stem>.rgbv` or a PPM frame directory.
inline std::unique_ptr<VideoSource> open_video(const std::filesystem::path& path, double fps = 120.0) {
    if (std::filesystem::is_directory(path)) return std::make_unique<FrameDirVideo>(open_frame_dir(path, fps));
    return std::make_unique<RgbvVideo>(open_rgbv(path));
}

/// Bilinear resize with half-pixel centers: the source coordinate of output
/// pixel d is (d + 0.5) * in/out - 0.5, clamped to [0, in - 1].
inline RealFrame resize_bilinear(const RgbFrame& frame, std::size_t out_height, std::size_t out_width) {
    if (frame.width == 0 || frame.height == 0 || out_height == 0 || out_width == 0)
        throw Error("resize extents must be >= 1");
    struct Tap {
        std::size_t lo, hi;
        double frac;
    };
    auto taps = [](std::size_t in, std::size_t out) {
        std::vector<Tap> t(out);
        const double scale = static_cast<double>(in) / static_cast<double>(out);
        for (std::size_t d = 0; d < out; ++d) {
            double src = (static_cast<double>(d) + 0.5) * scale - 0.5;
            src = std::clamp(src, 0.0, static_cast<double>(in - 1));
            const auto lo = static_cast<std::size_t>(std::floor(src));
            t[d] = {lo, std::min(lo + 1, in - 1), src - static_cast<double>(lo)};
        }
        return t;
    };
    const auto ty = taps(frame.height, out_height);
    const auto tx = taps(frame.width, out_width);
    RealFrame out{out_width, out_height, std::vector<float>(out_width * out_height * 3)};
    for (std::size_t y = 0; y < out_height; ++y)
        for (std::size_t x = 0; x < out_width; ++x)
            for (std::size_t ch = 0; ch < 3; ++ch) {
                const double top = frame.at(ty[y].lo, tx[x].lo, ch) * (1 - tx[x].frac) + frame.at(ty[y].lo, tx[x].hi, ch) * tx[x].frac;
                const double bottom =
                    frame.at(ty[y].hi, tx[x].lo, ch) * (1 - tx[x].frac) + frame.at(ty[y].hi, tx[x].hi, ch) * tx[x].frac;
                out.values[(y * out_width + x) * 3 + ch] = static_cast<float>(top * (1 - ty[y].frac) + bottom * ty[y].frac);
            }
    return out;
}

/// Model input block: values (3, length, size, size) in [0, 1].
struct Cuboid {
    Tensor<float> values;
    std::string video_id;
    std::int64_t start = 0;
};

/// Frames start .. start+length-1 resized to size x size, divided by 255,
/// laid out channel-major.
inline Cuboid extract_cuboid(const VideoSource& src, std::int64_t start, std::size_t length = 98, std::size_t size = 120) {
    if (length == 0 || size == 0) throw Error("cuboid length and size must be >= 1");
    if (start < 0 || start + static_cast<std::int64_t>(length) > src.frame_count())
        throw Error("cuboid [" + std::to_string(start) + ", " + std::to_string(start + static_cast<std::int64_t>(length)) +
                    ") out of range for video '" + src.id() + "' with " + std::to_string(src.frame_count()) + " frames");
    Cuboid c{Tensor<float>({3, length, size, size}), src.id(), start};
    const std::size_t plane = size * size;
    for (std::size_t t = 0; t < length; ++t) {
        const auto resized = resize_bilinear(src.frame(start + static_cast<std::int64_t>(t)), size, size);
        for (std::size_t ch = 0; ch < 3; ++ch) {
            float* dst = c.values.data() + (ch * length + t) * plane;
            for (std::size_t i = 0; i < plane; ++i) dst[i] = resized.values[i * 3 + ch] / 255.0f;
        }
    }
    return c;
}

/// Start frame of the cuboid for a segment beginning at `begin`: the
/// segment start, right-clamped so the window ends at frame_count. Empty
/// when the video is shorter than the cuboid.
inline std::optional<std::int64_t> cuboid_start(std::int64_t frame_count, std::int64_t begin, std::size_t length) {
    const auto len = static_cast<std::int64_t>(length);
    if (frame_count < len || begin < 0) return std::nullopt;
    return std::min(begin, frame_count - len);
}

}  // namespace strokebench
