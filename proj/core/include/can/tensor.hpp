#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "can/errors.hpp"

namespace can {

/// 64-byte-aligned allocator for tensor storage. Keeping every buffer on the
/// same cache-line alignment makes the vectorized kernels take identical
/// code paths (same peel/remainder splits) on every run, which is what makes
/// training bitwise reproducible: with plain malloc the addresses — and thus
/// the SIMD accumulation order — vary between otherwise identical runs.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::size_t alignment = 64;
    AlignedAllocator() noexcept = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}
    T* allocate(std::size_t n) {
        return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{alignment}));
    }
    void deallocate(T* p, std::size_t) noexcept {
        ::operator delete(p, std::align_val_t{alignment});
    }
    template <class U>
    bool operator==(const AlignedAllocator<U>&) const noexcept {
        return true;
    }
    template <class U>
    bool operator!=(const AlignedAllocator<U>&) const noexcept {
        return false;
    }
};

using DoubleVec = std::vector<double, AlignedAllocator<double>>;

/// Dense 64-bit real tensor, row-major. Most operations view it as a matrix:
/// rows() is the leading dimension, cols() the product of the rest, so image
/// batches of shape (m, h, w, c) flow through the same kernels as matrices.
class Tensor {
public:
    Tensor() = default;

    Tensor(std::vector<std::size_t> shape, DoubleVec data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (count(shape_) != data_.size())
            throw ContractViolation("tensor data length does not match shape");
    }

    static Tensor zeros(std::size_t rows, std::size_t cols) {
        return Tensor({rows, cols}, DoubleVec(rows * cols, 0.0));
    }

    static Tensor full(std::size_t rows, std::size_t cols, double value) {
        return Tensor({rows, cols}, DoubleVec(rows * cols, value));
    }

    static Tensor scalar(double value) { return Tensor({1, 1}, {value}); }

    static Tensor row(DoubleVec values) {
        const std::size_t n = values.size();
        return Tensor({1, n}, std::move(values));
    }

    static Tensor column(DoubleVec values) {
        const std::size_t n = values.size();
        return Tensor({n, 1}, std::move(values));
    }

    static Tensor matrix(std::size_t rows, std::size_t cols, DoubleVec values) {
        return Tensor({rows, cols}, std::move(values));
    }

    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows) {
        const std::size_t r = rows.size();
        const std::size_t c = r == 0 ? 0 : rows.begin()->size();
        DoubleVec values;
        values.reserve(r * c);
        for (const auto& row : rows) {
            if (row.size() != c) {
                throw ContractViolation("matrix: ragged initializer rows");
            }
            values.insert(values.end(), row.begin(), row.end());
        }
        return Tensor({r, c}, std::move(values));
    }

    static Tensor identity(std::size_t n) {
        Tensor t = zeros(n, n);
        for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
        return t;
    }

    const std::vector<std::size_t>& shape() const { return shape_; }

    std::size_t size() const { return data_.size(); }

    std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }

    std::size_t cols() const {
        if (shape_.empty()) return 0;
        std::size_t c = 1;
        for (std::size_t i = 1; i < shape_.size(); ++i) c *= shape_[i];
        return c;
    }

    bool same_extent(const Tensor& other) const {
        return rows() == other.rows() && cols() == other.cols();
    }

    double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    DoubleVec& raw() { return data_; }
    const DoubleVec& raw() const { return data_; }

    /// Reinterpret with a new shape of identical element count.
    Tensor reshaped(std::vector<std::size_t> shape) const {
        if (count(shape) != data_.size())
            throw ContractViolation("reshape changes element count");
        return Tensor(std::move(shape), data_);
    }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    double item() const {
        if (data_.size() != 1) throw ContractViolation("item() on non-scalar tensor");
        return data_[0];
    }

    std::string shape_str() const {
        std::string s = "(";
        for (std::size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += ", ";
            s += std::to_string(shape_[i]);
        }
        return s + ")";
    }

private:
    static std::size_t count(const std::vector<std::size_t>& shape) {
        if (shape.empty()) return 0;
        std::size_t c = 1;
        for (std::size_t d : shape) c *= d;
        return c;
    }

    std::vector<std::size_t> shape_;
    DoubleVec data_;
};

}  // namespace can
