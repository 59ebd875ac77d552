#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace supertomo {

/// Raised when operands disagree on size or shape.
class DimensionError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/**
 * Square pixel grid stored row-major. Pixel (row, col) lives at
 * `values[row * n_side + col]`; row 0 is the top of the field of view.
 */
struct Image {
    std::size_t n_side = 0;
    std::vector<double> values;

    Image() = default;
    explicit Image(std::size_t side, double fill = 0.0)
        : n_side(side), values(side * side, fill) {}
    Image(std::size_t side, std::vector<double> v) : n_side(side), values(std::move(v)) {
        if (values.size() != n_side * n_side)
            throw DimensionError("image: " + std::to_string(values.size()) +
                                 " values for side " + std::to_string(n_side));
    }

    std::size_t size() const { return values.size(); }
    double& operator[](std::size_t j) { return values[j]; }
    double operator[](std::size_t j) const { return values[j]; }
    double& at(std::size_t row, std::size_t col) { return values[row * n_side + col]; }
    double at(std::size_t row, std::size_t col) const { return values[row * n_side + col]; }

    bool operator==(const Image&) const = default;
};

/// Measured line integrals b, one per matrix row.
struct Sinogram {
    std::vector<double> values;

    Sinogram() = default;
    explicit Sinogram(std::size_t m, double fill = 0.0) : values(m, fill) {}
    explicit Sinogram(std::vector<double> v) : values(std::move(v)) {}

    std::size_t size() const { return values.size(); }
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }

    bool operator==(const Sinogram&) const = default;
};

namespace vec {

inline void require_same_size(std::size_t a, std::size_t b, const char* what) {
    if (a != b)
        throw DimensionError(std::string(what) + ": size " + std::to_string(a) + " vs " +
                             std::to_string(b));
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    require_same_size(a.size(), b.size(), "dot");
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double distance(std::span<const double> a, std::span<const double> b) {
    require_same_size(a.size(), b.size(), "distance");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

inline double sum(std::span<const double> a) { return std::accumulate(a.begin(), a.end(), 0.0); }

inline bool all_nonnegative(std::span<const double> a) {
    return std::all_of(a.begin(), a.end(), [](double v) { return v >= 0.0; });
}

} // namespace vec

/// Componentwise max(x, 0): the Euclidean projection onto the nonnegative orthant.
inline Image project_nonneg(Image x) {
    for (auto& v : x.values) v = std::max(v, 0.0);
    return x;
}

} // namespace supertomo
