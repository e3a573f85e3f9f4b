#include "leafnet/tensor.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace leafnet {

Shape::Shape(std::initializer_list<std::size_t> dims) : Shape(std::vector<std::size_t>(dims)) {}

Shape::Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
    for (auto d : dims_) {
        if (d == 0) throw ShapeError("shape dimensions must be positive: " + str());
    }
}

std::size_t Shape::numel() const noexcept {
    if (dims_.empty()) return 0;
    std::size_t n = 1;
    for (auto d : dims_) n *= d;
    return n;
}

std::size_t Shape::offset(std::span<const std::size_t> index) const {
    if (index.size() != dims_.size()) {
        throw ShapeError("index of rank " + std::to_string(index.size()) + " into shape " + str());
    }
    std::size_t flat = 0;
    for (std::size_t a = 0; a < dims_.size(); ++a) {
        if (index[a] >= dims_[a]) throw ShapeError("index out of range for shape " + str());
        flat = flat * dims_[a] + index[a];
    }
    return flat;
}

std::vector<std::size_t> Shape::unravel(std::size_t flat) const {
    if (flat >= numel()) throw ShapeError("flat index out of range for shape " + str());
    std::vector<std::size_t> index(dims_.size());
    for (std::size_t a = dims_.size(); a-- > 0;) {
        index[a] = flat % dims_[a];
        flat /= dims_[a];
    }
    return index;
}

std::string Shape::str() const {
    std::ostringstream os;
    os << '(';
    for (std::size_t a = 0; a < dims_.size(); ++a) {
        if (a) os << ", ";
        os << dims_[a];
    }
    os << ')';
    return os.str();
}

double SeededRng::uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double SeededRng::uniform(double lo, double hi) {
    if (!(lo < hi)) throw ArgumentError("uniform requires lo < hi");
    return lo + (hi - lo) * uniform01();
}

std::size_t SeededRng::index(std::size_t n) {
    if (n == 0) throw ArgumentError("index requires n > 0");
    // Rejection sampling keeps the draw exactly uniform.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % n);
}

double SeededRng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1;
    do {
        u1 = uniform01();
    } while (u1 <= 0.0);
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

SeededRng SeededRng::derive(std::uint64_t stream) const { return SeededRng(mix_seed(seed_, stream)); }

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept {
    std::uint64_t z = a + 0x9E3779B97F4A7C15ull * (b + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace leafnet
