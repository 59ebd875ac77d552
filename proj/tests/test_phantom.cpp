#include <gtest/gtest.h>

#include <cmath>
#include <algorithm>
#include <numbers>
#include <numeric>

#include "supertomo/phantom.hpp"

using namespace supertomo;

namespace {

// Shepp-Logan table typed out again for the membership oracle:
// centre x, centre y, semi-axis a, semi-axis b, angle (deg), intensity.
constexpr double kTable[10][6] = {
    {0, 0, 0.69, 0.92, 0, 1},          {0, -0.0184, 0.6624, 0.874, 0, -0.8},
    {0.22, 0, 0.11, 0.31, -18, -0.2},  {-0.22, 0, 0.16, 0.41, 18, -0.2},
    {0, 0.35, 0.21, 0.25, 0, 0.1},     {0, 0.1, 0.046, 0.046, 0, 0.1},
    {0, -0.1, 0.046, 0.046, 0, 0.1},   {-0.08, -0.605, 0.046, 0.023, 0, 0.1},
    {0, -0.606, 0.023, 0.023, 0, 0.1}, {0.06, -0.605, 0.023, 0.046, 0, 0.1},
};

bool inside(int e, double x, double y) {
    const double* r = kTable[e];
    const double th = r[4] * std::numbers::pi / 180;
    const double u = (x - r[0]) * std::cos(th) + (y - r[1]) * std::sin(th);
    const double v = -(x - r[0]) * std::sin(th) + (y - r[1]) * std::cos(th);
    return u * u / (r[2] * r[2]) + v * v / (r[3] * r[3]) <= 1.0;
}

double oracle_value(double x, double y) {
    double v = 0;
    for (int e = 0; e < 10; ++e)
        if (inside(e, x, y)) v += kTable[e][5];
    return v < 1e-12 ? 0.0 : v;
}

double centre(std::size_t k, std::size_t n) { return -1.0 + (static_cast<double>(k) + 0.5) * 2.0 / static_cast<double>(n); }

} // namespace

TEST(Phantom, MatchesMembershipOracle) {
    const std::size_t n = 128;
    const auto x = shepp_logan(n);
    double max_v = 0;
    double sum_e5 = 0, sum_e5_oracle = 0;
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) {
            const double px = centre(c, n), py = -centre(r, n);
            const double want = oracle_value(px, py);
            EXPECT_NEAR(x.at(r, c), want, 1e-12);
            max_v = std::max(max_v, x.at(r, c));
            if (inside(4, px, py)) {
                sum_e5 += x.at(r, c);
                sum_e5_oracle += want;
            }
        }
    EXPECT_NEAR(max_v, 1.0, 1e-12);
    EXPECT_NEAR(sum_e5, sum_e5_oracle, 1e-9);
}

TEST(Phantom, BackgroundIsZeroAndValuesNonnegative) {
    const std::size_t n = 64;
    const auto x = shepp_logan(n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) {
            EXPECT_GE(x.at(r, c), 0.0);
            if (!inside(0, centre(c, n), -centre(r, n))) {
                EXPECT_EQ(x.at(r, c), 0.0);
            }
        }
}

TEST(Phantom, MirrorSymmetricAwayFromAsymmetricEllipses) {
    // The table is mirror symmetric except for the two tilted ellipses and the
    // two small lower ellipses, whose mirror images are not in the table.
    const std::size_t n = 128;
    const auto x = shepp_logan(n);
    std::size_t differing = 0;
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) {
            const double px = centre(c, n), py = -centre(r, n);
            bool touched = false;
            for (int e : {2, 3, 7, 9}) touched = touched || inside(e, px, py) || inside(e, -px, py);
            const double a = x.at(r, c), b = x.at(r, n - 1 - c);
            if (!touched) {
                EXPECT_NEAR(a, b, 1e-12) << "row " << r << " col " << c;
            } else if (std::abs(a - b) > 1e-12) {
                ++differing;
            }
        }
    EXPECT_GT(differing, 0u);
}

TEST(Phantom, EmissionZeroImageAndDeterminism) {
    const auto R = build_system_matrix(Geometry::parallel(16, 6, 24, 8.0));
    const auto zero = simulate_emission(R, Image(16), 18.0, 3);
    for (double v : zero.counts.values) EXPECT_EQ(v, 0.0);
    const auto x = shepp_logan(16);
    const auto a = simulate_emission(R, x, 18.0, 42);
    const auto b = simulate_emission(R, x, 18.0, 42);
    EXPECT_EQ(a.counts.values, b.counts.values);
    EXPECT_EQ(a.scale, b.scale);
    for (double v : a.counts.values) EXPECT_GE(v, 0.0);
    EXPECT_THROW(simulate_emission(R, Image(16, -1.0), 18.0, 1), std::invalid_argument);
}

TEST(Phantom, EmissionMeanMonteCarlo) {
    const auto R = build_system_matrix(Geometry::parallel(16, 6, 24, 8.0));
    const auto x = shepp_logan(16);
    const auto clean = forward(R, x);
    const int draws = 200;
    std::vector<double> mean(R.rows(), 0.0);
    double c = 0;
    for (int d = 0; d < draws; ++d) {
        const auto data = simulate_emission(R, x, 18.0, 1000 + d);
        c = data.scale;
        for (std::size_t i = 0; i < R.rows(); ++i) mean[i] += data.counts[i] / data.scale / draws;
    }
    std::size_t beyond3 = 0;
    for (std::size_t i = 0; i < R.rows(); ++i) {
        if (clean[i] == 0.0) {
            EXPECT_EQ(mean[i], 0.0);
            continue;
        }
        // Var(b/c) = Rx / c
        const double se = std::sqrt(clean[i] / c / draws);
        const double z = std::abs(mean[i] - clean[i]) / se;
        EXPECT_LT(z, 5.0);
        if (z > 3.0) ++beyond3;
    }
    EXPECT_LE(beyond3, R.rows() / 50 + 1);
}

TEST(Phantom, RealizedSnrNearRequestOnDeskGeometry) {
    const auto R = build_system_matrix(Geometry::parallel(128, 32, 182, 64.0));
    const auto x = shepp_logan(128);
    const auto clean = forward(R, x);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto data = simulate_emission(R, x, 18.0, seed);
        EXPECT_NEAR(realized_snr_db(clean, data), 18.0, 1.0);
    }
}

TEST(Phantom, TransmissionLimits) {
    const auto R = build_system_matrix(Geometry::parallel(8, 4, 12, 4.0));
    const int draws = 200;
    // no attenuation: E[alpha] = blank
    double total = 0;
    std::size_t count = 0;
    for (int d = 0; d < draws; ++d) {
        const auto tc = simulate_transmission(R, Image(8), 500.0, 0.0, d);
        for (std::size_t i = 0; i < R.rows(); ++i) {
            total += tc.alpha[i];
            ++count;
        }
        EXPECT_EQ(tc.beta[0], 500.0);
        EXPECT_EQ(tc.rho[0], 0.0);
    }
    const double se = std::sqrt(500.0 / static_cast<double>(count));
    EXPECT_NEAR(total / static_cast<double>(count), 500.0, 3 * se);

    // full attenuation: E[alpha] = rho on every ray through the object
    const auto dense_obj = Image(8, 1e4);
    const auto rs = row_sums(R);
    double t2 = 0;
    std::size_t c2 = 0;
    for (int d = 0; d < draws; ++d) {
        const auto tc = simulate_transmission(R, dense_obj, 500.0, 7.0, d);
        for (std::size_t i = 0; i < R.rows(); ++i)
            if (rs[i] > 1e-3) {
                t2 += tc.alpha[i];
                ++c2;
            }
    }
    EXPECT_NEAR(t2 / static_cast<double>(c2), 7.0, 3 * std::sqrt(7.0 / static_cast<double>(c2)));
}

TEST(Phantom, TransmissionMeanMonteCarlo) {
    const auto R = build_system_matrix(Geometry::parallel(8, 4, 12, 4.0));
    Image x = shepp_logan(8);
    for (auto& v : x.values) v *= 0.1;
    const auto proj = forward(R, x);
    const int draws = 200;
    std::vector<double> mean(R.rows(), 0.0);
    for (int d = 0; d < draws; ++d) {
        const auto tc = simulate_transmission(R, x, 300.0, 2.0, 77 + d);
        for (std::size_t i = 0; i < R.rows(); ++i) mean[i] += tc.alpha[i] / draws;
    }
    std::size_t beyond3 = 0;
    for (std::size_t i = 0; i < R.rows(); ++i) {
        const double mu = 300.0 * std::exp(-proj[i]) + 2.0;
        const double z = std::abs(mean[i] - mu) / std::sqrt(mu / draws);
        EXPECT_LT(z, 5.0);
        if (z > 3.0) ++beyond3;
    }
    EXPECT_LE(beyond3, R.rows() / 50 + 1);
    EXPECT_THROW(simulate_transmission(R, x, 0.0, 0.0, 1), std::invalid_argument);
    EXPECT_THROW(simulate_transmission(R, x, 1.0, -1.0, 1), std::invalid_argument);
}

TEST(Random, PoissonMomentsBothSamplers) {
    for (double mu : {0.3, 4.0, 9.5, 10.5, 57.0, 4000.0}) {
        Rng rng(mix_seed(9, static_cast<std::uint64_t>(mu * 10)));
        const int n = 40000;
        double s = 0, s2 = 0;
        for (int k = 0; k < n; ++k) {
            const double v = static_cast<double>(rng.poisson(mu));
            s += v;
            s2 += v * v;
        }
        const double m = s / n, var = s2 / n - m * m;
        EXPECT_NEAR(m, mu, 4 * std::sqrt(mu / n)) << mu;
        EXPECT_NEAR(var, mu, 0.05 * mu + 0.02) << mu;
    }
}

TEST(Random, ShuffleAndBelow) {
    Rng rng(3);
    std::vector<int> v(50);
    std::iota(v.begin(), v.end(), 0);
    auto w = v;
    rng.shuffle(w.begin(), w.end());
    EXPECT_NE(v, w);
    std::sort(w.begin(), w.end());
    EXPECT_EQ(v, w);
    for (int k = 0; k < 1000; ++k) EXPECT_LT(rng.below(7), 7u);
    EXPECT_NE(mix_seed(1, 0), mix_seed(1, 1));
    EXPECT_EQ(mix_seed(5, 9), mix_seed(5, 9));
}
