#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "image.hpp"

namespace supertomo {

/**
 * Parallel-beam acquisition geometry.
 *
 * The image square spans [-fov_radius, fov_radius]^2. A ray (theta, t) is the
 * line {p : p . (cos theta, sin theta) = t}. Angles are uniform over [0, pi)
 * and offsets are cell-centred over [-fov_radius * sqrt 2, fov_radius * sqrt 2]
 * so every ray that can touch the square is sampled.
 */
struct Geometry {
    std::size_t n_side = 0;
    std::size_t n_angles = 0;
    std::size_t n_rays = 0;
    double fov_radius = 1.0;
    std::vector<double> angles;
    std::vector<double> ray_offsets;

    static Geometry parallel(std::size_t n_side, std::size_t n_angles, std::size_t n_rays,
                             double fov_radius) {
        Geometry g;
        g.n_side = n_side;
        g.n_angles = n_angles;
        g.n_rays = n_rays;
        g.fov_radius = fov_radius;
        g.angles.resize(n_angles);
        for (std::size_t a = 0; a < n_angles; ++a)
            g.angles[a] = std::numbers::pi * static_cast<double>(a) / static_cast<double>(n_angles);
        const double half = fov_radius * std::numbers::sqrt2;
        g.ray_offsets.resize(n_rays);
        for (std::size_t r = 0; r < n_rays; ++r)
            g.ray_offsets[r] =
                -half + (static_cast<double>(r) + 0.5) * 2.0 * half / static_cast<double>(n_rays);
        return g;
    }

    std::size_t rows() const { return n_angles * n_rays; }
    std::size_t cols() const { return n_side * n_side; }
    double pixel_size() const { return 2.0 * fov_radius / static_cast<double>(n_side); }

    void validate() const {
        if (n_side == 0 || n_angles == 0 || n_rays == 0)
            throw std::invalid_argument("geometry: zero-sized dimension");
        if (!(fov_radius > 0.0)) throw std::invalid_argument("geometry: fov_radius must be positive");
        if (angles.size() != n_angles || ray_offsets.size() != n_rays)
            throw std::invalid_argument("geometry: angle/offset list length mismatch");
        for (std::size_t a = 0; a < n_angles; ++a) {
            if (angles[a] < 0.0 || angles[a] >= std::numbers::pi)
                throw std::invalid_argument("geometry: angle outside [0, pi)");
            if (a > 0 && !(angles[a] > angles[a - 1]))
                throw std::invalid_argument("geometry: angles must be strictly increasing");
        }
    }

    bool operator==(const Geometry&) const = default;
};

/// Compressed sparse row storage of the discrete Radon operator.
struct SystemMatrix {
    Geometry geometry;
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<std::size_t> row_ptr{0};
    std::vector<std::uint32_t> col_idx;
    std::vector<double> weights;

    std::size_t rows() const { return n_rows; }
    std::size_t cols() const { return n_cols; }
    std::size_t nnz() const { return weights.size(); }

    std::span<const std::uint32_t> row_cols(std::size_t i) const {
        return {col_idx.data() + row_ptr[i], row_ptr[i + 1] - row_ptr[i]};
    }
    std::span<const double> row_weights(std::size_t i) const {
        return {weights.data() + row_ptr[i], row_ptr[i + 1] - row_ptr[i]};
    }

    /// <R_i, x> for a single row.
    double row_dot(std::size_t i, std::span<const double> x) const {
        double s = 0.0;
        for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) s += weights[k] * x[col_idx[k]];
        return s;
    }

    bool operator==(const SystemMatrix&) const = default;
};

namespace detail {

struct Segment {
    std::uint32_t col;
    double length;
};

// Exact intersection lengths of one ray with the pixel grid (Siddon traversal).
inline void trace_ray(const Geometry& g, double theta, double t, std::vector<Segment>& out) {
    out.clear();
    const double c = std::cos(theta), s = std::sin(theta);
    // p(u) = t * (c, s) + u * (-s, c)
    const double px = t * c, py = t * s;
    const double dx = -s, dy = c;
    const double R = g.fov_radius;
    const double eps = 1e-15;

    double u_lo = -std::numeric_limits<double>::infinity();
    double u_hi = std::numeric_limits<double>::infinity();
    auto clip = [&](double p, double d) {
        if (std::abs(d) < eps) {
            if (p < -R || p > R) u_hi = u_lo - 1.0;
            return;
        }
        double a = (-R - p) / d, b = (R - p) / d;
        if (a > b) std::swap(a, b);
        u_lo = std::max(u_lo, a);
        u_hi = std::min(u_hi, b);
    };
    clip(px, dx);
    clip(py, dy);
    if (!(u_hi > u_lo)) return;

    const std::size_t n = g.n_side;
    const double h = g.pixel_size();
    std::vector<double> cuts{u_lo, u_hi};
    auto add_crossings = [&](double p, double d) {
        if (std::abs(d) < eps) return;
        for (std::size_t k = 1; k < n; ++k) {
            const double u = (-R + static_cast<double>(k) * h - p) / d;
            if (u > u_lo && u < u_hi) cuts.push_back(u);
        }
    };
    add_crossings(px, dx);
    add_crossings(py, dy);
    std::sort(cuts.begin(), cuts.end());

    const double tiny = 1e-12 * h;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const double len = cuts[k + 1] - cuts[k];
        if (len <= tiny) continue;
        const double um = 0.5 * (cuts[k] + cuts[k + 1]);
        const double x = px + um * dx, y = py + um * dy;
        auto col = static_cast<long>(std::floor((x + R) / h));
        auto row = static_cast<long>(std::floor((R - y) / h));
        col = std::clamp(col, 0L, static_cast<long>(n) - 1);
        row = std::clamp(row, 0L, static_cast<long>(n) - 1);
        out.push_back({static_cast<std::uint32_t>(row * static_cast<long>(n) + col), len});
    }
    std::sort(out.begin(), out.end(), [](const Segment& a, const Segment& b) { return a.col < b.col; });
    // merge pieces of the same pixel split by rounding
    std::size_t w = 0;
    for (std::size_t k = 0; k < out.size(); ++k) {
        if (w > 0 && out[w - 1].col == out[k].col)
            out[w - 1].length += out[k].length;
        else
            out[w++] = out[k];
    }
    out.resize(w);
}

} // namespace detail

/**
 * Builds R with r_ij = length of ray i inside pixel j. Rows are angle-major;
 * rays missing the image square yield empty rows.
 */
inline SystemMatrix build_system_matrix(const Geometry& geom) {
    geom.validate();
    SystemMatrix R;
    R.geometry = geom;
    R.n_rows = geom.rows();
    R.n_cols = geom.cols();
    R.row_ptr.reserve(R.n_rows + 1);
    std::vector<detail::Segment> segs;
    for (std::size_t a = 0; a < geom.n_angles; ++a) {
        for (std::size_t r = 0; r < geom.n_rays; ++r) {
            detail::trace_ray(geom, geom.angles[a], geom.ray_offsets[r], segs);
            for (const auto& sg : segs) {
                R.col_idx.push_back(sg.col);
                R.weights.push_back(sg.length);
            }
            R.row_ptr.push_back(R.weights.size());
        }
    }
    return R;
}

inline Sinogram forward(const SystemMatrix& R, std::span<const double> x) {
    vec::require_same_size(x.size(), R.cols(), "forward");
    Sinogram y(R.rows());
    for (std::size_t i = 0; i < R.rows(); ++i) y[i] = R.row_dot(i, x);
    return y;
}

inline Sinogram forward(const SystemMatrix& R, const Image& x) { return forward(R, x.values); }

/// Adjoint R^T y, returned as a flat vector of length n.
inline std::vector<double> back_vector(const SystemMatrix& R, std::span<const double> y) {
    vec::require_same_size(y.size(), R.rows(), "back");
    std::vector<double> out(R.cols(), 0.0);
    for (std::size_t i = 0; i < R.rows(); ++i) {
        const double yi = y[i];
        if (yi == 0.0) continue;
        for (std::size_t k = R.row_ptr[i]; k < R.row_ptr[i + 1]; ++k)
            out[R.col_idx[k]] += R.weights[k] * yi;
    }
    return out;
}

inline Image back(const SystemMatrix& R, const Sinogram& y) {
    return Image(R.geometry.n_side, back_vector(R, y.values));
}

inline std::vector<double> column_sums(const SystemMatrix& R) {
    std::vector<double> out(R.cols(), 0.0);
    for (std::size_t k = 0; k < R.nnz(); ++k) out[R.col_idx[k]] += R.weights[k];
    return out;
}

inline std::vector<double> row_sums(const SystemMatrix& R) {
    std::vector<double> out(R.rows(), 0.0);
    for (std::size_t i = 0; i < R.rows(); ++i)
        for (double w : R.row_weights(i)) out[i] += w;
    return out;
}

} // namespace supertomo
