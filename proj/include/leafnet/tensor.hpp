#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace leafnet {

/// Thrown whenever tensor dimensions do not agree with an operation's contract.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown for out-of-domain scalar arguments (rates, bounds, labels).
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Row-major dimension list. Every dimension is positive.
class Shape {
public:
    Shape() = default;
    Shape(std::initializer_list<std::size_t> dims);
    explicit Shape(std::vector<std::size_t> dims);

    std::size_t rank() const noexcept { return dims_.size(); }
    std::size_t operator[](std::size_t axis) const { return dims_.at(axis); }
    std::size_t numel() const noexcept;
    const std::vector<std::size_t>& dims() const noexcept { return dims_; }

    /// Flat row-major offset of a full multi-index.
    std::size_t offset(std::span<const std::size_t> index) const;
    /// Inverse of offset().
    std::vector<std::size_t> unravel(std::size_t flat) const;

    std::string str() const;

    friend bool operator==(const Shape&, const Shape&) = default;

private:
    std::vector<std::size_t> dims_;
};

/// Dense row-major array. Shape is fixed at construction; data is owned.
template <typename T>
class BasicTensor {
public:
    using value_type = T;

    BasicTensor() = default;
    explicit BasicTensor(Shape shape) : shape_(std::move(shape)), data_(shape_.numel(), T{}) {}
    BasicTensor(Shape shape, T fill) : shape_(std::move(shape)), data_(shape_.numel(), fill) {}
    BasicTensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != shape_.numel()) {
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_.str());
        }
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_[axis]; }
    std::size_t rank() const noexcept { return shape_.rank(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<T> data() noexcept { return data_; }
    std::span<const T> data() const noexcept { return data_; }
    T* ptr() noexcept { return data_.data(); }
    const T* ptr() const noexcept { return data_.data(); }

    T& operator[](std::size_t flat) { return data_[flat]; }
    const T& operator[](std::size_t flat) const { return data_[flat]; }

    template <typename... I>
    T& at(I... index) {
        const std::size_t idx[] = {static_cast<std::size_t>(index)...};
        return data_[shape_.offset(idx)];
    }
    template <typename... I>
    const T& at(I... index) const {
        const std::size_t idx[] = {static_cast<std::size_t>(index)...};
        return data_[shape_.offset(idx)];
    }

    /// Same elements under a new shape with equal element count.
    BasicTensor reshaped(Shape shape) const& {
        check_reshape(shape);
        return BasicTensor(std::move(shape), data_);
    }
    BasicTensor reshaped(Shape shape) && {
        check_reshape(shape);
        return BasicTensor(std::move(shape), std::move(data_));
    }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

    template <typename U>
    BasicTensor<U> cast() const {
        return BasicTensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
    }

    friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

private:
    void check_reshape(const Shape& shape) const {
        if (shape.numel() != shape_.numel()) {
            throw ShapeError("cannot reshape " + shape_.str() + " to " + shape.str());
        }
    }

    Shape shape_;
    std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

/// Deterministic random source. Engine and all derived distributions are
/// bit-specified so a seed yields the same stream on every platform.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform01();
    /// Uniform in [lo, hi); requires lo < hi.
    double uniform(double lo, double hi);
    /// Uniform integer in [0, n); requires n > 0.
    std::size_t index(std::size_t n);
    bool bernoulli(double p) { return uniform01() < p; }
    /// Standard normal via Box-Muller.
    double normal();

    /// Child stream whose seed is a fixed function of this seed and `stream`.
    /// Does not advance this generator.
    SeededRng derive(std::uint64_t stream) const;

    template <typename V>
    void shuffle(std::vector<V>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[index(i)]);
        }
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Mixes two words into a well-distributed 64-bit seed (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept;

template <typename T>
BasicTensor<T> rng_uniform(SeededRng& rng, Shape shape, double lo, double hi) {
    if (!(lo < hi)) {
        throw ArgumentError("rng_uniform requires lo < hi, got [" + std::to_string(lo) + ", " +
                            std::to_string(hi) + ")");
    }
    BasicTensor<T> out(std::move(shape));
    for (auto& v : out.data()) v = static_cast<T>(rng.uniform(lo, hi));
    return out;
}

template <typename T>
BasicTensor<T> rng_normal(SeededRng& rng, Shape shape, double stddev) {
    BasicTensor<T> out(std::move(shape));
    for (auto& v : out.data()) v = static_cast<T>(rng.normal() * stddev);
    return out;
}

}  // namespace leafnet
