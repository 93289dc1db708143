#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "strokebench/error.hpp"

namespace strokebench {

using Shape = std::vector<std::size_t>;

inline std::size_t element_count(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string to_string(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ')';
    return os.str();
}

/// Dense row-major N-dimensional array. The data length always equals the
/// product of the extents.
template <class T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;

    explicit Tensor(Shape shape, T fill = T{}) : shape_(std::move(shape)), data_(element_count(shape_), fill) {
        check_extents();
    }

    Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        check_extents();
        if (data_.size() != element_count(shape_))
            throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                             strokebench::to_string(shape_));
    }

    Tensor(std::initializer_list<std::size_t> shape, std::initializer_list<T> values)
        : Tensor(Shape(shape), std::vector<T>(values)) {}

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }
    T* data() noexcept { return data_.data(); }
    const T* data() const noexcept { return data_.data(); }

    T& operator[](std::size_t i) noexcept { return data_[i]; }
    const T& operator[](std::size_t i) const noexcept { return data_[i]; }

    auto begin() noexcept { return data_.begin(); }
    auto end() noexcept { return data_.end(); }
    auto begin() const noexcept { return data_.begin(); }
    auto end() const noexcept { return data_.end(); }

    /// Flat offset of a multi-index (bounds-checked).
    std::size_t offset(std::initializer_list<std::size_t> index) const {
        if (index.size() != shape_.size()) throw ShapeError("index rank does not match tensor rank");
        std::size_t flat = 0;
        std::size_t axis = 0;
        for (std::size_t i : index) {
            if (i >= shape_[axis]) throw ShapeError("index out of range on axis " + std::to_string(axis));
            flat = flat * shape_[axis] + i;
            ++axis;
        }
        return flat;
    }

    T& at(std::initializer_list<std::size_t> index) { return data_[offset(index)]; }
    const T& at(std::initializer_list<std::size_t> index) const { return data_[offset(index)]; }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

    /// Same data under a new shape with equal element count.
    Tensor reshaped(Shape shape) const& {
        Tensor out = *this;
        out.reshape(std::move(shape));
        return out;
    }
    Tensor reshaped(Shape shape) && {
        reshape(std::move(shape));
        return std::move(*this);
    }

    void reshape(Shape shape) {
        if (element_count(shape) != data_.size())
            throw ShapeError("cannot reshape " + strokebench::to_string(shape_) + " to " +
                             strokebench::to_string(shape));
        shape_ = std::move(shape);
    }

    template <class U>
    Tensor<U> cast() const {
        std::vector<U> out(data_.begin(), data_.end());
        return Tensor<U>(shape_, std::move(out));
    }

    friend bool operator==(const Tensor& a, const Tensor& b) { return a.shape_ == b.shape_ && a.data_ == b.data_; }

private:
    void check_extents() const {
        for (std::size_t e : shape_)
            if (e == 0) throw ShapeError("tensor extents must be positive, got " + strokebench::to_string(shape_));
    }

    Shape shape_;
    std::vector<T> data_;
};

}  // namespace strokebench
