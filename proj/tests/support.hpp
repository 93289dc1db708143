#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <string>
#include <system_error>
#include <unistd.h>

#include "strokebench/frames.hpp"
#include "strokebench/rng.hpp"
#include "strokebench/tensor.hpp"

namespace testing_support {

/// Directory removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "t") {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("strokebench_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

template <class T>
strokebench::Tensor<T> random_tensor(const strokebench::Shape& shape, strokebench::SplitMix64& rng, double lo = -1,
                                     double hi = 1) {
    strokebench::Tensor<T> t(shape);
    for (auto& v : t) v = static_cast<T>(rng.uniform(lo, hi));
    return t;
}

inline strokebench::RgbFrame random_frame(std::size_t w, std::size_t h, strokebench::SplitMix64& rng) {
    strokebench::RgbFrame f{w, h, std::vector<std::uint8_t>(w * h * 3)};
    for (auto& p : f.pixels) p = static_cast<std::uint8_t>(rng.below(256));
    return f;
}

inline strokebench::RgbFrame solid_frame(std::size_t w, std::size_t h, std::uint8_t value) {
    return {w, h, std::vector<std::uint8_t>(w * h * 3, value)};
}

}  // namespace testing_support
