#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dasmae/errors.hpp"

namespace dasmae::num {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) out += ",";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

/// Dense row-major array. A rank-0 array (empty shape) holds one scalar.
template <typename T>
class NdArray {
public:
    using value_type = T;

    NdArray() = default;

    explicit NdArray(Shape shape, T fill = T{0}) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
        check_extents();
    }

    NdArray(Shape shape, std::vector<T> values) : shape_(std::move(shape)), data_(std::move(values)) {
        check_extents();
        if (data_.size() != shape_size(shape_)) {
            throw DimensionError("NdArray: " + std::to_string(data_.size()) + " values do not fill shape " +
                                 shape_string(shape_));
        }
    }

    static NdArray scalar(T v) { return NdArray(Shape{}, std::vector<T>{v}); }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t dim(std::size_t axis) const {
        if (axis >= shape_.size()) {
            throw IndexError("NdArray::dim: axis " + std::to_string(axis) + " out of range for shape " +
                             shape_string(shape_));
        }
        return shape_[axis];
    }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }
    std::vector<T>& storage() { return data_; }
    const std::vector<T>& storage() const { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T& at(std::size_t r, std::size_t c) { return data_[r * shape_.back() + c]; }
    const T& at(std::size_t r, std::size_t c) const { return data_[r * shape_.back() + c]; }

    T item() const {
        if (data_.size() != 1) throw ContractError("NdArray::item on array of shape " + shape_string(shape_));
        return data_[0];
    }

    void reshape(Shape shape) {
        if (shape_size(shape) != data_.size()) {
            throw DimensionError("reshape: cannot view " + shape_string(shape_) + " as " + shape_string(shape));
        }
        shape_ = std::move(shape);
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const {
        for (T v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    friend bool operator==(const NdArray& a, const NdArray& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    void check_extents() const {
        for (std::size_t e : shape_) {
            if (e == 0) throw DimensionError("NdArray: zero extent in shape " + shape_string(shape_));
        }
    }

    Shape shape_;
    std::vector<T> data_ = std::vector<T>(1, T{0});
};

template <typename To, typename From>
NdArray<To> cast(const NdArray<From>& src) {
    std::vector<To> out(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) out[i] = static_cast<To>(src[i]);
    return NdArray<To>(src.shape(), std::move(out));
}

}  // namespace dasmae::num
