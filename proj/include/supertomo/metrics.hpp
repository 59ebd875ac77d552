#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "image.hpp"
#include "likelihood.hpp"
#include "tv.hpp"

namespace supertomo::metrics {

inline void require_same_shape(const Image& a, const Image& b) {
    if (a.n_side != b.n_side || a.size() != b.size())
        throw DimensionError("metrics: image shapes differ");
}

/// Mean squared pixel difference.
inline double mse(const Image& x, const Image& ref) {
    require_same_shape(x, ref);
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double d = x[j] - ref[j];
        s += d * d;
    }
    return s / static_cast<double>(x.size());
}

inline double estimation_error(const Image& x, const Image& truth) {
    require_same_shape(x, truth);
    return vec::distance(x.values, truth.values);
}

inline double kl_fit(const EmissionObjective& f, const Image& x) { return emission_value(f, x); }

inline double kl_divergence(const EmissionObjective& f, const Image& x) {
    return emission_divergence(f, x.values);
}

inline double tv_of(const Image& x) { return tv_value(x); }

struct SsimParams {
    std::size_t window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    std::optional<double> dynamic_range; // default: max of the reference image
};

/**
 * Mean structural similarity over all fully contained windows, each weighted
 * by a normalised Gaussian. Local statistics come from separable filtering.
 */
inline double ssim(const Image& x, const Image& ref, const SsimParams& params = {}) {
    require_same_shape(x, ref);
    const std::size_t w = params.window;
    if (w % 2 == 0) throw std::invalid_argument("ssim: window size must be odd");
    if (!(params.k1 > 0.0 && params.k2 > 0.0)) throw std::invalid_argument("ssim: K1, K2 must be > 0");
    const std::size_t n = x.n_side;
    if (n < w) throw std::invalid_argument("ssim: image smaller than the window");
    const double L = params.dynamic_range
                         ? *params.dynamic_range
                         : *std::max_element(ref.values.begin(), ref.values.end());
    if (!(L > 0.0)) throw std::invalid_argument("ssim: dynamic range must be > 0");
    const double c1 = (params.k1 * L) * (params.k1 * L);
    const double c2 = (params.k2 * L) * (params.k2 * L);

    std::vector<double> g(w);
    const double half = static_cast<double>(w / 2);
    double gs = 0.0;
    for (std::size_t k = 0; k < w; ++k) {
        const double d = static_cast<double>(k) - half;
        g[k] = std::exp(-d * d / (2.0 * params.sigma * params.sigma));
        gs += g[k];
    }
    for (auto& v : g) v /= gs;

    const std::size_t out = n - w + 1;
    auto filter = [&](auto&& field) {
        std::vector<double> rows(n * out), res(out * out);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < out; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < w; ++k) s += g[k] * field(i, j + k);
                rows[i * out + j] = s;
            }
        for (std::size_t i = 0; i < out; ++i)
            for (std::size_t j = 0; j < out; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < w; ++k) s += g[k] * rows[(i + k) * out + j];
                res[i * out + j] = s;
            }
        return res;
    };
    const auto mx = filter([&](std::size_t i, std::size_t j) { return x.at(i, j); });
    const auto my = filter([&](std::size_t i, std::size_t j) { return ref.at(i, j); });
    const auto mxx = filter([&](std::size_t i, std::size_t j) { return x.at(i, j) * x.at(i, j); });
    const auto myy = filter([&](std::size_t i, std::size_t j) { return ref.at(i, j) * ref.at(i, j); });
    const auto mxy = filter([&](std::size_t i, std::size_t j) { return x.at(i, j) * ref.at(i, j); });

    double total = 0.0;
    for (std::size_t k = 0; k < mx.size(); ++k) {
        const double vx = mxx[k] - mx[k] * mx[k];
        const double vy = myy[k] - my[k] * my[k];
        const double cxy = mxy[k] - mx[k] * my[k];
        total += ((2.0 * mx[k] * my[k] + c1) * (2.0 * cxy + c2)) /
                 ((mx[k] * mx[k] + my[k] * my[k] + c1) * (vx + vy + c2));
    }
    return total / static_cast<double>(mx.size());
}

struct MetricSummary {
    std::string metric;
    double mean = 0.0;
    double ci99 = 0.0; // half-width of the two-sided 99% Student-t interval
    std::size_t count = 0;
};

/// Two-sided 99% Student-t confidence interval for the mean of `values`.
inline MetricSummary summarize(const std::string& name, const std::vector<double>& values) {
    if (values.size() < 2) throw std::invalid_argument("summarize: need at least two repetitions");
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    const boost::math::students_t dist(n - 1.0);
    const double t = boost::math::quantile(dist, 0.995);
    return {name, mean, t * sd / std::sqrt(n), values.size()};
}

inline std::vector<MetricSummary>
summarize(const std::vector<std::pair<std::string, std::vector<double>>>& table) {
    std::vector<MetricSummary> out;
    out.reserve(table.size());
    for (const auto& [name, values] : table) out.push_back(summarize(name, values));
    return out;
}

} // namespace supertomo::metrics
