#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "duet/common.hpp"

namespace duet::nn {

// Dense row-major array of doubles with a dynamic shape.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(count(shape_), 0.0) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != count(shape_)) {
            throw DimensionError("tensor data size " + std::to_string(data_.size()) +
                                 " does not match shape (numel " +
                                 std::to_string(count(shape_)) + ")");
        }
    }

    static Tensor full(std::vector<std::size_t> shape, double v) {
        Tensor t(std::move(shape));
        for (double& x : t.data_) x = v;
        return t;
    }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t ndim() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at2(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double at2(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

    double& at3(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    double at3(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool all_finite() const {
        for (double v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    Tensor reshaped(std::vector<std::size_t> shape) const {
        if (count(shape) != numel()) {
            throw DimensionError("reshape changes element count");
        }
        return Tensor(std::move(shape), data_);
    }

    static std::size_t count(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return shape.empty() ? 0 : n;
    }

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

inline std::string shape_string(const Tensor& t) {
    std::string s = "(";
    for (std::size_t i = 0; i < t.ndim(); ++i) {
        if (i) s += "x";
        s += std::to_string(t.dim(i));
    }
    return s + ")";
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(what) + ": shape mismatch " + shape_string(a) +
                             " vs " + shape_string(b));
    }
}

inline Tensor elem_add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "elem_add");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] + b[i];
    return out;
}

inline Tensor elem_sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "elem_sub");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] - b[i];
    return out;
}

inline Tensor elem_abs_diff(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "elem_abs_diff");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) out[i] = std::abs(a[i] - b[i]);
    return out;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline bool bit_equal(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) return false;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        if (a[i] != b[i]) return false;
    }
    return true;
}

}  // namespace duet::nn

namespace duet {
using nn::Tensor;
}
