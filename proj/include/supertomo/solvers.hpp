#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "image.hpp"
#include "likelihood.hpp"
#include "phantom.hpp"
#include "projection.hpp"
#include "random.hpp"

namespace supertomo {

/// A string sub-iteration produced a negative component; the stepsize is too large.
class NegativityError : public std::runtime_error {
  public:
    NegativityError(std::size_t string, std::size_t sub_iteration, const std::string& what)
        : std::runtime_error(what), string_index(string), sub_iteration_index(sub_iteration) {}
    std::size_t string_index;
    std::size_t sub_iteration_index;
};

/**
 * Data terms of an incremental method, each a set of matrix rows. Row-level
 * methods use one row per term; block methods group the rays of a run of views.
 */
struct DataTerms {
    std::vector<std::size_t> offsets{0};
    std::vector<std::size_t> rows;

    std::size_t size() const { return offsets.size() - 1; }
    std::span<const std::size_t> term(std::size_t t) const {
        return {rows.data() + offsets[t], offsets[t + 1] - offsets[t]};
    }

    static DataTerms singletons(std::size_t m) {
        DataTerms d;
        d.rows.resize(m);
        std::iota(d.rows.begin(), d.rows.end(), std::size_t{0});
        d.offsets.resize(m + 1);
        std::iota(d.offsets.begin(), d.offsets.end(), std::size_t{0});
        return d;
    }

    /// s subsets, each holding every ray of a contiguous run of views of near-equal length.
    static DataTerms view_subsets(const Geometry& g, std::size_t s) {
        if (s == 0 || s > g.n_angles)
            throw std::invalid_argument("view_subsets: need 1 <= s <= n_angles");
        DataTerms d;
        std::size_t view = 0;
        for (std::size_t l = 0; l < s; ++l) {
            const std::size_t count = g.n_angles / s + (l < g.n_angles % s ? 1 : 0);
            for (std::size_t v = view; v < view + count; ++v)
                for (std::size_t r = 0; r < g.n_rays; ++r) d.rows.push_back(v * g.n_rays + r);
            view += count;
            d.offsets.push_back(d.rows.size());
        }
        return d;
    }
};

/// Ordered, disjoint strings of data-term indices covering {0, ..., p-1}.
struct StringPartition {
    std::vector<std::vector<std::size_t>> strings;

    std::size_t size() const { return strings.size(); }

    void validate(std::size_t p) const {
        std::vector<char> seen(p, 0);
        std::size_t total = 0;
        for (const auto& s : strings)
            for (std::size_t t : s) {
                if (t >= p) throw std::invalid_argument("partition: index out of range");
                if (seen[t]) throw std::invalid_argument("partition: strings overlap");
                seen[t] = 1;
                ++total;
            }
        if (total != p) throw std::invalid_argument("partition: strings do not cover all terms");
    }
};

/// Shuffles {0..p-1} and cuts it into s strings whose lengths differ by at most one.
inline StringPartition make_strings(std::size_t p, std::size_t s, std::uint64_t seed) {
    if (s == 0 || s > p) throw std::invalid_argument("make_strings: need 1 <= s <= p");
    std::vector<std::size_t> order(p);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order.begin(), order.end());
    StringPartition part;
    std::size_t pos = 0;
    for (std::size_t l = 0; l < s; ++l) {
        const std::size_t len = p / s + (l < p % s ? 1 : 0);
        part.strings.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(pos),
                                  order.begin() + static_cast<std::ptrdiff_t>(pos + len));
        pos += len;
    }
    return part;
}

inline std::vector<double> uniform_weights(std::size_t s) {
    return std::vector<double>(s, 1.0 / static_cast<double>(s));
}

inline void validate_weights(std::span<const double> w, std::size_t s) {
    if (w.size() != s) throw std::invalid_argument("weights: one weight per string required");
    double total = 0.0;
    for (double v : w) {
        if (!(v >= 0.0)) throw std::invalid_argument("weights: must be nonnegative");
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("weights: must sum to 1");
}

/// Diagonal scaling coefficients p_j of D(x) = diag(x_j / p_j).
struct ScalingVector {
    std::vector<double> p;

    void validate() const {
        for (double v : p)
            if (!(v > 0.0)) throw std::invalid_argument("scaling: p_j must be positive");
    }
};

namespace detail {
inline ScalingVector positive_or_unit(std::vector<double> p) {
    // pixels that no ray meets have zero gradient; any positive p_j is equivalent there
    double top = 0.0;
    for (double v : p) top = std::max(top, v);
    const double fill = top > 0.0 ? top : 1.0;
    for (auto& v : p)
        if (!(v > 0.0)) v = fill;
    return {std::move(p)};
}
} // namespace detail

/// p_j = sum_i r_ij; with this choice SAEM-m at lambda = m is one EM step.
inline ScalingVector emission_scaling(const SystemMatrix& R) {
    return detail::positive_or_unit(column_sums(R));
}

/// p_j = sum_i r_ij (alpha_i - rho_i).
inline ScalingVector transmission_scaling(const SystemMatrix& R, const TransmissionCounts& c) {
    std::vector<double> net(R.rows());
    for (std::size_t i = 0; i < R.rows(); ++i) net[i] = std::max(c.alpha[i] - c.rho[i], 0.0);
    return detail::positive_or_unit(back_vector(R, net));
}

enum class ScheduleKind { saem, ssaem, constant };

struct StepSchedule {
    ScheduleKind kind = ScheduleKind::saem;
    double lambda0 = 1.0;
    double s = 1.0;

    double at(std::size_t k) const {
        const double kk = static_cast<double>(k);
        switch (kind) {
        case ScheduleKind::saem:
            return lambda0 / (std::pow(kk, 0.51) / s + 1.0);
        case ScheduleKind::ssaem:
            return lambda0 / std::pow(kk * s + 1.0, 0.25);
        case ScheduleKind::constant:
            break;
        }
        return lambda0;
    }
};

/// Uniform image phi with sum(R x0) = sum(b).
inline Image starting_image(const SystemMatrix& R, std::span<const double> b) {
    const double denom = vec::sum(column_sums(R));
    if (!(denom > 0.0)) throw std::invalid_argument("starting_image: system matrix is all zero");
    return Image(R.geometry.n_side, vec::sum(b) / denom);
}

enum class ScalingMode { plain, stabilized };

namespace detail {

// One string operator: y <- y - lambda D(y) grad f_t(y) for each term t in order.
template <SeparableObjective F>
void string_sweep(const F& f, const DataTerms& terms, std::span<const std::size_t> string,
                  std::span<const double> p, double lambda, ScalingMode mode, double tau,
                  std::size_t string_index, std::vector<double>& y, std::vector<double>& grad) {
    const auto& R = f.matrix();
    auto scale = [&](std::size_t j) {
        const double v = y[j];
        return (mode == ScalingMode::stabilized && !(v > tau)) ? tau / p[j] : v / p[j];
    };
    for (std::size_t pos = 0; pos < string.size(); ++pos) {
        const auto rows = terms.term(string[pos]);
        if (rows.size() == 1) {
            const std::size_t i = rows[0];
            const double proj = R.row_dot(i, y);
            // nonnegative y and a zero projection mean every touched pixel is zero
            if (mode == ScalingMode::plain && proj <= 0.0) continue;
            const double w = f.row_derivative(i, proj);
            const auto cols = R.row_cols(i);
            const auto wts = R.row_weights(i);
            for (std::size_t k = 0; k < cols.size(); ++k) {
                const std::size_t j = cols[k];
                y[j] -= lambda * scale(j) * wts[k] * w;
            }
            if (mode == ScalingMode::plain)
                for (std::size_t k = 0; k < cols.size(); ++k)
                    if (y[cols[k]] < 0.0)
                        throw NegativityError(string_index, pos,
                                              "string " + std::to_string(string_index) +
                                                  " went negative at sub-iteration " +
                                                  std::to_string(pos));
        } else {
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t i : rows) {
                const double proj = R.row_dot(i, y);
                if (mode == ScalingMode::plain && proj <= 0.0) continue;
                const double w = f.row_derivative(i, proj);
                const auto cols = R.row_cols(i);
                const auto wts = R.row_weights(i);
                for (std::size_t k = 0; k < cols.size(); ++k) grad[cols[k]] += wts[k] * w;
            }
            bool negative = false;
            for (std::size_t j = 0; j < y.size(); ++j) {
                if (grad[j] == 0.0) continue;
                y[j] -= lambda * scale(j) * grad[j];
                negative = negative || y[j] < 0.0;
            }
            if (mode == ScalingMode::plain && negative)
                throw NegativityError(string_index, pos,
                                      "string " + std::to_string(string_index) +
                                          " went negative at sub-iteration " + std::to_string(pos));
        }
    }
}

template <SeparableObjective F>
std::vector<double> string_average(const F& f, std::span<const double> x, const DataTerms& terms,
                                   const StringPartition& part, std::span<const double> weights,
                                   std::span<const double> p, double lambda, ScalingMode mode,
                                   double tau) {
    validate_weights(weights, part.size());
    std::vector<double> avg(x.size(), 0.0), y(x.size()), grad(x.size());
    for (std::size_t l = 0; l < part.size(); ++l) {
        std::copy(x.begin(), x.end(), y.begin());
        string_sweep(f, terms, part.strings[l], p, lambda, mode, tau, l, y, grad);
        const double w = weights[l];
        if (w == 0.0) continue;
        for (std::size_t j = 0; j < y.size(); ++j) avg[j] += w * y[j];
    }
    return avg;
}

} // namespace detail

/**
 * One SAEM iteration: every string runs its scaled incremental sweep from x
 * with D(y) = diag(y / p), and the results are averaged with the weights.
 * Throws NegativityError if any sub-iterate leaves the nonnegative orthant.
 */
template <SeparableObjective F>
Image saem_step(const F& f, const Image& x, const DataTerms& terms, const StringPartition& part,
                std::span<const double> weights, const ScalingVector& D, double lambda) {
    auto avg = detail::string_average(f, x.values, terms, part, weights, D.p, lambda,
                                      ScalingMode::plain, 0.0);
    return Image(x.n_side, std::move(avg));
}

/// Averaged string result of SSAEM before the componentwise correction.
template <SeparableObjective F>
std::vector<double> ssaem_average(const F& f, const Image& x, const DataTerms& terms,
                                  const StringPartition& part, std::span<const double> weights,
                                  const ScalingVector& D, double lambda, double tau) {
    return detail::string_average(f, x.values, terms, part, weights, D.p, lambda,
                                  ScalingMode::stabilized, tau);
}

/// Componentwise correction mapping the averaged SSAEM point back above zero.
inline std::vector<double> ssaem_correct(std::span<const double> x, std::span<const double> averaged,
                                         double tau) {
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double xj = x[j], tj = averaged[j];
        out[j] = (xj <= tau && tj < xj) ? xj + (xj / tau) * (tj - xj) : tj;
    }
    return out;
}

/**
 * One SSAEM iteration: strings use the floored scaling tau / p_j for
 * components at or below tau, the averaged point is corrected componentwise.
 * Throws NegativityError when lambda is too large for the corrected point to
 * stay nonnegative.
 */
template <SeparableObjective F>
Image ssaem_step(const F& f, const Image& x, const DataTerms& terms, const StringPartition& part,
                 std::span<const double> weights, const ScalingVector& D, double lambda,
                 double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("ssaem_step: tau must be > 0");
    const auto avg = ssaem_average(f, x, terms, part, weights, D, lambda, tau);
    auto next = ssaem_correct(x.values, avg, tau);
    for (std::size_t j = 0; j < next.size(); ++j)
        if (next[j] < 0.0)
            throw NegativityError(0, 0, "ssaem step left the nonnegative orthant at pixel " +
                                            std::to_string(j));
    return Image(x.n_side, std::move(next));
}

/// Classical multiplicative EM: x_j <- (x_j / p_j) sum_i r_ij b_i / (Rx)_i.
inline Image em_step(const EmissionObjective& f, const Image& x, const ScalingVector& D) {
    const auto& R = f.matrix();
    const auto& b = f.data();
    std::vector<double> ratio(R.rows());
    for (std::size_t i = 0; i < R.rows(); ++i) {
        const double proj = R.row_dot(i, x.values);
        ratio[i] = proj > 0.0 ? b[i] / proj : 0.0;
    }
    auto bp = back_vector(R, ratio);
    Image out(x.n_side);
    for (std::size_t j = 0; j < bp.size(); ++j) out[j] = x[j] / D.p[j] * bp[j];
    return out;
}

/**
 * Largest lambda in [1e-6, 1e6] (geometric bisection, 30 halvings) whose first
 * iterate is strictly positive. `first_iterate(lambda)` may throw
 * NegativityError, which counts as failure. A step that is positive at the
 * upper bracket returns the upper bracket.
 */
template <typename StepFn>
double calibrate_lambda0(StepFn&& first_iterate, double lo = 1e-6, double hi = 1e6,
                         int iterations = 30) {
    auto positive = [&](double lambda) {
        try {
            const Image x1 = first_iterate(lambda);
            return std::all_of(x1.values.begin(), x1.values.end(),
                               [](double v) { return v > 0.0 && std::isfinite(v); });
        } catch (const NegativityError&) {
            return false;
        }
    };
    if (positive(hi)) return hi;
    if (!positive(lo)) throw std::runtime_error("calibrate_lambda0: no positive stepsize in bracket");
    for (int it = 0; it < iterations; ++it) {
        const double mid = std::sqrt(lo * hi);
        (positive(mid) ? lo : hi) = mid;
    }
    return lo;
}

} // namespace supertomo
