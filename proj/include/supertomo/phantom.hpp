#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "image.hpp"
#include "projection.hpp"
#include "random.hpp"

namespace supertomo {

struct EllipseSpec {
    double x0, y0;    // centre in [-1, 1]^2
    double a, b;      // semi-axes along the rotated x and y directions
    double phi_deg;   // counter-clockwise rotation
    double intensity; // additive

    bool contains(double x, double y) const {
        const double phi = phi_deg * std::numbers::pi / 180.0;
        const double c = std::cos(phi), s = std::sin(phi);
        const double dx = x - x0, dy = y - y0;
        const double u = c * dx + s * dy;
        const double v = -s * dx + c * dy;
        return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
    }
};

/// Ten-ellipse Shepp-Logan table with the higher-contrast "modified" intensities.
inline const std::array<EllipseSpec, 10>& shepp_logan_ellipses() {
    static const std::array<EllipseSpec, 10> table{{
        {0.0, 0.0, 0.69, 0.92, 0.0, 1.0},
        {0.0, -0.0184, 0.6624, 0.874, 0.0, -0.8},
        {0.22, 0.0, 0.11, 0.31, -18.0, -0.2},
        {-0.22, 0.0, 0.16, 0.41, 18.0, -0.2},
        {0.0, 0.35, 0.21, 0.25, 0.0, 0.1},
        {0.0, 0.1, 0.046, 0.046, 0.0, 0.1},
        {0.0, -0.1, 0.046, 0.046, 0.0, 0.1},
        {-0.08, -0.605, 0.046, 0.023, 0.0, 0.1},
        {0.0, -0.606, 0.023, 0.023, 0.0, 0.1},
        {0.06, -0.605, 0.023, 0.046, 0.0, 0.1},
    }};
    return table;
}

/// Pixel-centre sampled phantom on [-1, 1]^2; row 0 is the top (y = +1).
inline Image shepp_logan(std::size_t n_side) {
    if (n_side == 0) throw std::invalid_argument("shepp_logan: n_side must be positive");
    Image img(n_side);
    const double h = 2.0 / static_cast<double>(n_side);
    for (std::size_t row = 0; row < n_side; ++row) {
        const double y = 1.0 - (static_cast<double>(row) + 0.5) * h;
        for (std::size_t col = 0; col < n_side; ++col) {
            const double x = -1.0 + (static_cast<double>(col) + 0.5) * h;
            double v = 0.0;
            for (const auto& e : shepp_logan_ellipses())
                if (e.contains(x, y)) v += e.intensity;
            // overlapping negative ellipses can leave -0 or tiny negatives from rounding
            img.at(row, col) = v < 1e-12 ? 0.0 : v;
        }
    }
    return img;
}

/// Poisson counts b together with the count scale c (E[b] = c * R x_true).
struct EmissionData {
    Sinogram counts;
    double scale = 1.0;

    /// Counts divided by the scale, in the units of R x_true.
    Sinogram normalized() const {
        Sinogram out = counts;
        for (auto& v : out.values) v /= scale;
        return out;
    }
};

/// Count scale c giving an expected 10 log10(|Rx|^2 / E|b/c - Rx|^2) equal to snr_db.
inline double emission_scale_for_snr(const Sinogram& clean, double snr_db) {
    double s1 = 0.0, s2 = 0.0;
    for (double v : clean.values) {
        s1 += v;
        s2 += v * v;
    }
    if (!(s2 > 0.0)) throw std::domain_error("simulate_emission: projection is identically zero");
    // E|b/c - Rx|^2 = sum(Rx)/c, so the expected SNR is monotone in c with this root.
    return std::pow(10.0, snr_db / 10.0) * s1 / s2;
}

inline double realized_snr_db(const Sinogram& clean, const EmissionData& data) {
    double sig = 0.0, noise = 0.0;
    for (std::size_t i = 0; i < clean.size(); ++i) {
        sig += clean[i] * clean[i];
        const double d = data.counts[i] / data.scale - clean[i];
        noise += d * d;
    }
    return 10.0 * std::log10(sig / noise);
}

/**
 * Draws b_i ~ Poisson(c (R x_true)_i). An all-zero x_true yields b = 0 with
 * scale 1; otherwise a zero projection makes the SNR unattainable.
 */
inline EmissionData simulate_emission(const SystemMatrix& R, const Image& x_true, double snr_db,
                                      std::uint64_t seed) {
    if (!vec::all_nonnegative(x_true.values))
        throw std::invalid_argument("simulate_emission: x_true must be nonnegative");
    const Sinogram clean = forward(R, x_true);
    EmissionData out{Sinogram(R.rows()), 1.0};
    if (std::all_of(x_true.values.begin(), x_true.values.end(), [](double v) { return v == 0.0; }))
        return out;
    out.scale = emission_scale_for_snr(clean, snr_db);
    Rng rng(seed);
    for (std::size_t i = 0; i < clean.size(); ++i)
        out.counts[i] = static_cast<double>(rng.poisson(out.scale * clean[i]));
    return out;
}

struct TransmissionCounts {
    std::vector<double> alpha; // object scan counts
    std::vector<double> beta;  // expected blank-scan counts, > 0
    std::vector<double> rho;   // dark counts

    std::size_t size() const { return alpha.size(); }
};

/// Beer-Lambert counts alpha_i ~ Poisson(beta e^{-(R x)_i} + rho).
inline TransmissionCounts simulate_transmission(const SystemMatrix& R, const Image& x_true,
                                                double blank_level, double dark_level,
                                                std::uint64_t seed) {
    if (!(blank_level > 0.0)) throw std::invalid_argument("simulate_transmission: blank_level must be > 0");
    if (!(dark_level >= 0.0)) throw std::invalid_argument("simulate_transmission: dark_level must be >= 0");
    if (!vec::all_nonnegative(x_true.values))
        throw std::invalid_argument("simulate_transmission: x_true must be nonnegative");
    const Sinogram proj = forward(R, x_true);
    const std::size_t m = R.rows();
    TransmissionCounts tc{std::vector<double>(m), std::vector<double>(m, blank_level),
                          std::vector<double>(m, dark_level)};
    Rng rng(seed);
    for (std::size_t i = 0; i < m; ++i)
        tc.alpha[i] = static_cast<double>(rng.poisson(blank_level * std::exp(-proj[i]) + dark_level));
    return tc;
}

} // namespace supertomo
