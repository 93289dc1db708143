#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "strokebench/error.hpp"
#include "strokebench/io.hpp"
#include "strokebench/layer_spec.hpp"
#include "strokebench/layers.hpp"
#include "strokebench/loss.hpp"
#include "strokebench/rng.hpp"
#include "strokebench/tensor.hpp"

namespace strokebench {

/// Layer specs plus their parameters. Parameters are ordered by layer,
/// weight before bias, and named "<kind><layer index>.weight|bias".
template <class T>
struct Model {
    Shape input_shape;  // per sample (C, T, H, W)
    std::vector<LayerSpec> layers;
    std::vector<std::string> param_names;
    std::vector<Tensor<T>> params;

    std::size_t n_classes() const { return layers.empty() ? 0 : layers.back().out_features; }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& p : params) n += p.size();
        return n;
    }

    template <class U>
    Model<U> cast() const {
        Model<U> m{input_shape, layers, param_names, {}};
        for (const auto& p : params) m.params.push_back(p.template cast<U>());
        return m;
    }
};

namespace detail {

inline void validate_architecture(const Shape& input_shape, const std::vector<LayerSpec>& layers, std::size_t n_classes) {
    if (layers.empty()) throw ShapeError("architecture has no layers");
    const auto shapes = infer_shapes(input_shape, layers);
    if (shapes.back() != Shape{n_classes})
        throw ShapeError("architecture ends at " + to_string(shapes.back()) + ", expected (" + std::to_string(n_classes) +
                         ")");
    if (layers.back().kind != LayerKind::linear) throw ShapeError("architecture must end with a linear layer");
}

inline std::vector<std::string> parameter_names(const std::vector<LayerSpec>& layers) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (!layers[i].has_parameters()) continue;
        const std::string base = std::string(to_string(layers[i].kind)) + std::to_string(i);
        names.push_back(base + ".weight");
        names.push_back(base + ".bias");
    }
    return names;
}

}  // namespace detail

/// Builds a model with weights drawn uniformly from +-sqrt(6/fan_in) and
/// biases from +-1/sqrt(fan_in), consumed from one SplitMix64 stream in
/// declaration order.
template <class T = float>
Model<T> build_model(std::size_t n_classes, std::vector<LayerSpec> layers, Shape input_shape, std::uint64_t seed) {
    detail::validate_architecture(input_shape, layers, n_classes);
    Model<T> m{std::move(input_shape), std::move(layers), {}, {}};
    m.param_names = detail::parameter_names(m.layers);
    SplitMix64 rng(seed);
    for (const auto& spec : m.layers) {
        if (!spec.has_parameters()) continue;
        const double fan_in = static_cast<double>(spec.fan_in());
        const double weight_bound = std::sqrt(6.0 / fan_in), bias_bound = 1.0 / std::sqrt(fan_in);
        Tensor<T> w(spec.weight_shape()), b(spec.bias_shape());
        for (auto& v : w) v = static_cast<T>(rng.uniform(-weight_bound, weight_bound));
        for (auto& v : b) v = static_cast<T>(rng.uniform(-bias_bound, bias_bound));
        m.params.push_back(std::move(w));
        m.params.push_back(std::move(b));
    }
    return m;
}

template <class T>
struct ForwardTrace {
    std::vector<LayerCache<T>> caches;
    Tensor<T> logits;
};

namespace detail {

template <class T>
void check_batch(const Model<T>& m, const Tensor<T>& batch) {
    Shape expected{batch.rank() ? batch.extent(0) : 0};
    expected.insert(expected.end(), m.input_shape.begin(), m.input_shape.end());
    if (batch.rank() != m.input_shape.size() + 1 || batch.shape() != expected)
        throw ShapeError("model expects batches of " + to_string(m.input_shape) + ", got " + to_string(batch.shape()));
}

}  // namespace detail

template <class T>
ForwardTrace<T> forward_trace(const Model<T>& m, const Tensor<T>& batch) {
    detail::check_batch(m, batch);
    ForwardTrace<T> trace;
    trace.caches.resize(m.layers.size());
    Tensor<T> x = batch;
    std::size_t p = 0;
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        const auto& spec = m.layers[i];
        const Tensor<T>* w = spec.has_parameters() ? &m.params[p] : nullptr;
        const Tensor<T>* b = spec.has_parameters() ? &m.params[p + 1] : nullptr;
        if (spec.has_parameters()) p += 2;
        x = layer_forward(spec, w, b, x, &trace.caches[i]);
    }
    trace.logits = std::move(x);
    return trace;
}

/// Logits (N, n_classes) for a batch (N, C, T, H, W).
template <class T>
Tensor<T> forward(const Model<T>& m, const Tensor<T>& batch) {
    detail::check_batch(m, batch);
    Tensor<T> x = batch;
    std::size_t p = 0;
    for (const auto& spec : m.layers) {
        const Tensor<T>* w = spec.has_parameters() ? &m.params[p] : nullptr;
        const Tensor<T>* b = spec.has_parameters() ? &m.params[p + 1] : nullptr;
        if (spec.has_parameters()) p += 2;
        x = layer_forward<T>(spec, w, b, x, nullptr);
    }
    return x;
}

/// Parameter gradients (aligned with m.params) for d loss / d logits.
template <class T>
std::vector<Tensor<T>> backward(const Model<T>& m, const ForwardTrace<T>& trace, const Tensor<T>& grad_logits) {
    std::vector<Tensor<T>> grads(m.params.size());
    std::size_t p = m.params.size();
    Tensor<T> g = grad_logits;
    for (std::size_t i = m.layers.size(); i-- > 0;) {
        const auto& spec = m.layers[i];
        const Tensor<T>* w = nullptr;
        if (spec.has_parameters()) {
            p -= 2;
            w = &m.params[p];
        }
        auto lg = layer_backward(spec, w, trace.caches[i], g, i > 0);
        if (spec.has_parameters()) {
            grads[p] = std::move(lg.weight);
            grads[p + 1] = std::move(lg.bias);
        }
        g = std::move(lg.input);
    }
    return grads;
}

/// Index of the largest value; ties go to the lowest index.
template <class T>
std::size_t argmax(std::span<const T> values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

struct Classification {
    std::size_t class_index = 0;
    std::vector<double> probabilities;
};

/// Argmax of the softmax of each row of the logits.
template <class T>
std::vector<Classification> classify_logits(const Tensor<T>& logits) {
    const auto probs = softmax(logits);
    const std::size_t k = logits.extent(1);
    std::vector<Classification> out(logits.extent(0));
    for (std::size_t n = 0; n < out.size(); ++n) {
        const std::span<const T> row(probs.data() + n * k, k);
        out[n].probabilities.assign(row.begin(), row.end());
        out[n].class_index = argmax(std::span<const T>(logits.data() + n * k, k));
    }
    return out;
}

/// Class decision and probability vector for one cuboid (C, T, H, W).
template <class T>
Classification classify(const Model<T>& m, const Tensor<T>& cuboid) {
    if (cuboid.shape() != m.input_shape)
        throw ShapeError("classify expects a cuboid of " + to_string(m.input_shape) + ", got " + to_string(cuboid.shape()));
    Shape batched{1};
    batched.insert(batched.end(), cuboid.shape().begin(), cuboid.shape().end());
    return classify_logits(forward(m, cuboid.reshaped(batched))).front();
}

inline void require_classes(const Model<float>& m, std::size_t n_classes) {
    if (m.n_classes() != n_classes)
        throw Error("checkpoint has " + std::to_string(m.n_classes()) + " output classes, task needs " +
                    std::to_string(n_classes));
}

// Checkpoint: "STKB1\n", "input C T H W\n", one descriptor line per layer,
// an empty line, then per parameter: u32 name length, name bytes, u32 rank,
// u32 extents, little-endian f32 values. All integers little-endian.

inline constexpr std::string_view kCheckpointMagic = "STKB1\n";

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& out, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof bits);
    put_u32(out, bits);
}

class ByteReader {
public:
    explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

    std::string_view take(std::size_t n) {
        if (bytes_.size() - pos_ < n) throw ParseError("checkpoint truncated");
        const auto out = bytes_.substr(pos_, n);
        pos_ += n;
        return out;
    }
    std::uint32_t u32() {
        const auto b = take(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[static_cast<std::size_t>(i)]);
        return v;
    }
    float f32() {
        const std::uint32_t bits = u32();
        float f;
        std::memcpy(&f, &bits, sizeof f);
        return f;
    }
    std::string_view line() {
        const auto nl = bytes_.find('\n', pos_);
        if (nl == std::string_view::npos) throw ParseError("checkpoint truncated in descriptor");
        const auto out = bytes_.substr(pos_, nl - pos_);
        pos_ = nl + 1;
        return out;
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string encode_checkpoint(const Model<float>& m) {
    std::string out(kCheckpointMagic);
    out += "input";
    for (std::size_t e : m.input_shape) out += " " + std::to_string(e);
    out += "\n";
    for (const auto& spec : m.layers) out += spec.describe() + "\n";
    out += "\n";
    for (std::size_t i = 0; i < m.params.size(); ++i) {
        const auto& name = m.param_names[i];
        detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        detail::put_u32(out, static_cast<std::uint32_t>(m.params[i].rank()));
        for (std::size_t e : m.params[i].shape()) detail::put_u32(out, static_cast<std::uint32_t>(e));
        for (float v : m.params[i]) detail::put_f32(out, v);
    }
    return out;
}

inline Model<float> decode_checkpoint(std::string_view bytes) {
    if (!bytes.starts_with(kCheckpointMagic)) throw ParseError("checkpoint has bad magic, expected STKB1");
    detail::ByteReader in(bytes.substr(kCheckpointMagic.size()));

    Model<float> m;
    const auto input_line = in.line();
    if (!input_line.starts_with("input ")) throw ParseError("checkpoint is missing the input line");
    {
        std::string_view rest = input_line.substr(6);
        while (!rest.empty()) {
            const auto sp = rest.find(' ');
            m.input_shape.push_back(detail::parse_size(rest.substr(0, sp), "input extent"));
            if (sp == std::string_view::npos) break;
            rest.remove_prefix(sp + 1);
        }
    }
    for (auto line = in.line(); !line.empty(); line = in.line()) m.layers.push_back(LayerSpec::parse(line));
    try {
        detail::validate_architecture(m.input_shape, m.layers, m.layers.empty() ? 0 : m.layers.back().out_features);
    } catch (const ShapeError& e) {
        throw ParseError(std::string("checkpoint architecture invalid: ") + e.what());
    }
    const auto names = detail::parameter_names(m.layers);
    std::vector<Shape> shapes;
    for (const auto& spec : m.layers)
        if (spec.has_parameters()) {
            shapes.push_back(spec.weight_shape());
            shapes.push_back(spec.bias_shape());
        }
    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto name = in.take(in.u32());
        if (name != names[i])
            throw ParseError("checkpoint parameter " + std::to_string(i) + " is '" + std::string(name) + "', expected '" +
                             names[i] + "'");
        Shape shape(in.u32());
        for (auto& e : shape) e = in.u32();
        if (shape != shapes[i])
            throw ParseError("checkpoint parameter '" + names[i] + "' has shape " + to_string(shape) + ", expected " +
                             to_string(shapes[i]));
        Tensor<float> t(shape);
        for (auto& v : t) v = in.f32();
        m.params.push_back(std::move(t));
    }
    if (!in.done()) throw ParseError("checkpoint has trailing bytes");
    m.param_names = names;
    return m;
}

inline void save_checkpoint(const Model<float>& m, const std::filesystem::path& path) {
    write_file(path, encode_checkpoint(m));
}

inline Model<float> load_checkpoint(const std::filesystem::path& path) {
    try {
        return decode_checkpoint(read_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

}  // namespace strokebench
