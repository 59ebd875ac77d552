#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "supertomo/superiorize.hpp"

using namespace supertomo;

TEST(Standard, ConstantInputUnchanged) {
    StandardSuperiorizer s(1.0, 0.95, 10);
    const Image c(8, 0.4);
    EXPECT_EQ(s.apply(c, 3), c);
}

TEST(Standard, ZeroStepsUnchanged) {
    std::mt19937_64 gen(1);
    const auto x = oracle::random_image(gen, 8, 0, 1);
    StandardSuperiorizer s(1.0, 0.95, 0);
    EXPECT_EQ(s.apply(x, 0), x);
}

TEST(Standard, NeverIncreasesTvAndCountsTrials) {
    std::mt19937_64 gen(2);
    for (int trial = 0; trial < 200; ++trial) {
        const auto x = oracle::random_image(gen, 8, 0, 1);
        StandardSuperiorizer s(1.0, 0.95, 10);
        const std::size_t k = trial % 7;
        const auto out = s.apply(x, k);
        EXPECT_LE(tv_value(out), tv_value(x));
        EXPECT_GE(s.counter(), k + 10);
        EXPECT_EQ(s.counter(), k + s.last_trials());
        for (double v : out.values) EXPECT_GE(v, 0.0);
    }
}

TEST(Standard, ReferenceLoopAgreement) {
    // Algorithm re-coded from its description: v = -t/|t|, beta = beta0 alpha^l,
    // l incremented on every trial, accept when TV(z) <= TV(x_half).
    std::mt19937_64 gen(3);
    for (int trial = 0; trial < 20; ++trial) {
        const auto x = oracle::random_image(gen, 6, 0, 1);
        const double beta0 = 2.0, alpha = 0.9;
        const std::size_t N = 5, k = 2;
        StandardSuperiorizer s(beta0, alpha, N);
        const auto got = s.apply(x, k);

        std::size_t ell = k;
        Image b = x;
        const double ref = oracle::tv(x);
        for (std::size_t n = 0; n < N; ++n) {
            const auto t = tv_subgradient(b);
            double tn = 0;
            for (double v : t) tn += v * v;
            tn = std::sqrt(tn);
            Image z = b;
            for (;;) {
                ++ell;
                const double beta = beta0 * std::pow(alpha, static_cast<double>(ell));
                for (std::size_t j = 0; j < b.size(); ++j) z[j] = b[j] - beta * t[j] / tn;
                if (oracle::tv(z) <= ref) break;
            }
            b = z;
        }
        for (auto& v : b.values) v = std::max(v, 0.0);
        for (std::size_t j = 0; j < b.size(); ++j) EXPECT_NEAR(got[j], b[j], 1e-12);
        EXPECT_EQ(s.counter(), ell);
    }
}

TEST(Standard, PersistentCounterCarriesOver) {
    std::mt19937_64 gen(4);
    const auto x = oracle::random_image(gen, 8, 0, 1);
    StandardSuperiorizer s(1.0, 0.95, 3, CounterMode::persistent);
    s.apply(x, 0);
    const auto after_first = s.counter();
    s.apply(x, 0);
    EXPECT_GE(s.counter(), after_first + 3);
    StandardSuperiorizer r(1.0, 0.95, 3);
    r.apply(x, 50);
    EXPECT_GE(r.counter(), 53u);
    EXPECT_THROW(StandardSuperiorizer(1.0, 1.0, 3), std::invalid_argument);
    EXPECT_THROW(StandardSuperiorizer(0.0, 0.5, 3), std::invalid_argument);
}

TEST(Subgradient, MatchesReferenceLoop) {
    std::mt19937_64 gen(5);
    for (int trial = 0; trial < 20; ++trial) {
        const auto x = oracle::random_image(gen, 8, 0, 1);
        const SubgradientSuperiorizer s(0.3, 4.0, 50);
        const std::size_t k = trial;
        const auto got = s.apply(x, k);
        const double gamma = 0.3 / std::pow(static_cast<double>(k) * 4.0 + 1.0, 0.35);
        Image y = x;
        for (int i = 1; i <= 50; ++i) {
            const auto t = tv_subgradient(y);
            for (std::size_t j = 0; j < y.size(); ++j) y[j] -= gamma / i * t[j];
        }
        for (std::size_t j = 0; j < y.size(); ++j) EXPECT_NEAR(got[j], std::max(y[j], 0.0), 1e-12);
    }
}

TEST(Subgradient, TrivialCases) {
    const SubgradientSuperiorizer s(1.0, 2.0, 50);
    const Image c(8, 0.3);
    EXPECT_EQ(s.apply(c, 4), c);
    std::mt19937_64 gen(6);
    const auto x = oracle::random_image(gen, 8, 0, 1);
    const auto out = s.apply_with(x, 1e-15);
    for (std::size_t j = 0; j < x.size(); ++j) EXPECT_NEAR(out[j], x[j], 1e-12);
    EXPECT_THROW(SubgradientSuperiorizer(0.0, 1.0, 5), std::invalid_argument);
}

TEST(Prox, TrivialCasesAndTvDecrease) {
    std::mt19937_64 gen(7);
    const auto x = oracle::random_image(gen, 8, -0.3, 1);
    ProxSuperiorizer tiny(1e-12);
    const auto out = tiny.apply(x, 0);
    const auto proj = project_nonneg(x);
    for (std::size_t j = 0; j < x.size(); ++j) EXPECT_NEAR(out[j], proj[j], 1e-8);

    ProxSuperiorizer p(0.3);
    const Image c(8, 0.6);
    for (double v : p.apply(c, 2).values) EXPECT_NEAR(v, 0.6, 1e-12);
    for (int trial = 0; trial < 20; ++trial) {
        const auto y = oracle::random_image(gen, 8, -0.2, 1);
        const auto z = p.apply(y, trial);
        EXPECT_LE(tv_value(z), tv_value(project_nonneg(y)) + 1e-12);
        for (double v : z.values) EXPECT_GE(v, 0.0);
    }
}

TEST(Prox, ScheduleIsSummable) {
    const ProxSuperiorizer p(0.15);
    double partial = 0, at_1e5 = 0;
    for (std::size_t k = 0; k < 1000000; ++k) {
        partial += p.gamma(k);
        if (k == 99999) at_1e5 = partial;
    }
    // harmonic-like growth with exponent 1 + eps: increments vanish
    EXPECT_GT(partial, at_1e5);
    EXPECT_LT(p.gamma(999999), 1e-6);
    EXPECT_NEAR(p.gamma(0), 0.15, 1e-15);
}

TEST(Displacement, Norm) {
    const Image a(3, 1.0);
    EXPECT_EQ(displacement_norm(a, a), 0.0);
    Image b = a;
    b[0] += 1.0;
    EXPECT_DOUBLE_EQ(displacement_norm(a, b), 1.0);
    std::mt19937_64 gen(8);
    const auto x = oracle::random_image(gen, 4, -1, 1), y = oracle::random_image(gen, 4, -1, 1);
    double s = 0;
    for (std::size_t j = 0; j < x.size(); ++j) s += (x[j] - y[j]) * (x[j] - y[j]);
    EXPECT_NEAR(displacement_norm(x, y), std::sqrt(s), 1e-14);
}

TEST(Calibration, FixedPointAndLinearRescale) {
    std::mt19937_64 gen(9);
    const auto x0 = oracle::random_image(gen, 8, 0, 1);
    const auto xh = oracle::random_image(gen, 8, 0, 1);
    const double step = displacement_norm(x0, xh);
    const auto dir = oracle::uniform_vector(gen, x0.size(), -1, 1);
    double dn = 0;
    for (double v : dir) dn += v * v;
    dn = std::sqrt(dn);
    auto linear = [&](double scale_at_one) {
        return [&, scale_at_one](double g) {
            Image out = xh;
            for (std::size_t j = 0; j < out.size(); ++j) out[j] += g * scale_at_one * step * dir[j] / dn;
            return out;
        };
    };
    EXPECT_NEAR(calibrate_gamma0_ratio(x0, xh, linear(1e-2)), 1.0, 1e-9);
    EXPECT_NEAR(calibrate_gamma0_ratio(x0, xh, linear(1e-1)), 0.1, 1e-9);
    const Image same = xh;
    EXPECT_THROW(calibrate_gamma0_ratio(xh, same, linear(1e-2)), std::domain_error);
    EXPECT_THROW(calibrate_gamma0_ratio(x0, xh, [&](double) { return xh; }), std::domain_error);
}

TEST(Calibration, ProxRatioWithinBand) {
    std::mt19937_64 gen(10);
    const auto x0 = oracle::random_image(gen, 16, 0, 1);
    Image xh = x0;
    for (auto& v : xh.values) v += 0.3;
    auto prox = [&](double g) { return tv_prox(xh, {g, 200, 1e-10}).x; };
    const double g0 = calibrate_gamma0_ratio(x0, xh, prox);
    const double ratio = displacement_norm(xh, prox(g0)) / displacement_norm(x0, xh);
    EXPECT_GE(ratio, 0.5e-2);
    EXPECT_LE(ratio, 2e-2);
    const SubgradientSuperiorizer trial(1.0, 1.0, 50);
    const double gs = calibrate_gamma0_ratio(x0, xh, [&](double g) { return trial.apply_with(xh, g); });
    const double rs = displacement_norm(xh, trial.apply_with(xh, gs)) / displacement_norm(x0, xh);
    EXPECT_GE(rs, 0.5e-2);
    EXPECT_LE(rs, 2e-2);
}
