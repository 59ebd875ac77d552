#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "image.hpp"
#include "tv.hpp"

namespace supertomo {

/// |x_next - x_half|, the size of the superiorization perturbation.
inline double displacement_norm(const Image& x_half, const Image& x_next) {
    return vec::distance(x_half.values, x_next.values);
}

/// Leaves the iterate untouched; a zero perturbation.
struct IdentitySuperiorizer {
    Image apply(const Image& x_half, std::size_t /*k*/) { return x_half; }
};

enum class CounterMode {
    reset_to_iteration, // l <- k at the start of every call
    persistent,         // l carried over from the previous call
};

/**
 * Nonascending-direction superiorization with backtracking. Each of the N
 * inner steps moves along v = -t / |t| (t the TV subgradient) with trial
 * lengths beta0 * alpha^l, l incremented on every trial, until the trial point
 * has TV no larger than the input's. Negative pixels are clamped at the end,
 * which cannot raise TV.
 */
class StandardSuperiorizer {
  public:
    double beta0 = 1.0;
    double alpha = 0.95;
    std::size_t n_steps = 10;
    CounterMode counter_mode = CounterMode::reset_to_iteration;
    std::size_t max_trials = 10000;

    StandardSuperiorizer() = default;
    StandardSuperiorizer(double b0, double a, std::size_t n, CounterMode mode = CounterMode::reset_to_iteration)
        : beta0(b0), alpha(a), n_steps(n), counter_mode(mode) {
        validate();
    }

    void validate() const {
        if (!(beta0 > 0.0)) throw std::invalid_argument("standard superiorization: beta0 must be > 0");
        if (!(alpha > 0.0 && alpha < 1.0))
            throw std::invalid_argument("standard superiorization: alpha must lie in (0, 1)");
    }

    Image apply(const Image& x_half, std::size_t k) {
        if (counter_mode == CounterMode::reset_to_iteration) ell_ = k;
        last_clamped_ = false;
        last_trials_ = 0;
        last_accepted_ = 0;
        const double r_ref = tv_value(x_half);
        Image b = x_half;
        Image z(x_half.n_side);
        for (std::size_t n = 0; n < n_steps; ++n) {
            auto t = tv_subgradient(b);
            const double tn = vec::norm(t);
            std::size_t trials = 0;
            for (;;) {
                ++ell_;
                ++trials;
                ++last_trials_;
                const double beta = trials > max_trials ? 0.0 : beta0 * std::pow(alpha, static_cast<double>(ell_));
                const double coef = tn > 0.0 ? -beta / tn : 0.0;
                for (std::size_t j = 0; j < b.size(); ++j) z[j] = b[j] + coef * t[j];
                if (beta == 0.0 || tv_value(z) <= r_ref) break;
            }
            std::swap(b.values, z.values);
            ++last_accepted_;
        }
        for (auto& v : b.values)
            if (v < 0.0) {
                v = 0.0;
                last_clamped_ = true;
            }
        return b;
    }

    std::size_t counter() const { return ell_; }
    void set_counter(std::size_t ell) { ell_ = ell; }
    bool last_clamped() const { return last_clamped_; }
    std::size_t last_trials() const { return last_trials_; }
    /// Inner steps accepted by the last apply.
    std::size_t last_accepted() const { return last_accepted_; }

  private:
    std::size_t ell_ = 0;
    bool last_clamped_ = false;
    std::size_t last_trials_ = 0;
    std::size_t last_accepted_ = 0;
};

/**
 * Projected subgradient superiorization: N steps y_i = y_{i-1} - (gamma_k / i) t(y_{i-1})
 * followed by projection onto the nonnegative orthant, with
 * gamma_k = gamma0 / (k s + 1)^0.35.
 */
class SubgradientSuperiorizer {
  public:
    double gamma0 = 1.0;
    double s = 1.0;
    std::size_t n_steps = 50;

    SubgradientSuperiorizer() = default;
    SubgradientSuperiorizer(double g0, double strings, std::size_t n) : gamma0(g0), s(strings), n_steps(n) {
        if (!(gamma0 > 0.0)) throw std::invalid_argument("subgradient superiorization: gamma0 must be > 0");
    }

    double gamma(std::size_t k) const {
        return gamma0 / std::pow(static_cast<double>(k) * s + 1.0, 0.35);
    }

    Image apply(const Image& x_half, std::size_t k) const { return apply_with(x_half, gamma(k)); }

    Image apply_with(const Image& x_half, double g) const {
        Image y = x_half;
        for (std::size_t i = 1; i <= n_steps; ++i) {
            const auto t = tv_subgradient(y);
            const double step = g / static_cast<double>(i);
            for (std::size_t j = 0; j < y.size(); ++j) y[j] -= step * t[j];
        }
        return project_nonneg(std::move(y));
    }
};

/// Superiorization by the nonnegative TV proximal map with gamma_k = gamma0 / (k+1)^(1+eps).
class ProxSuperiorizer {
  public:
    double gamma0 = 0.15;
    ProxParams inner{};

    ProxSuperiorizer() = default;
    explicit ProxSuperiorizer(double g0, ProxParams p = {}) : gamma0(g0), inner(p) {
        if (!(gamma0 > 0.0)) throw std::invalid_argument("prox superiorization: gamma0 must be > 0");
    }

    double gamma(std::size_t k) const {
        return gamma0 / std::pow(static_cast<double>(k) + 1.0,
                                 1.0 + std::numeric_limits<double>::epsilon());
    }

    Image apply(const Image& x_half, std::size_t k) {
        ProxParams p = inner;
        p.gamma = gamma(k);
        auto res = tv_prox(x_half, p);
        last_converged_ = res.converged;
        return std::move(res.x);
    }

    bool last_converged() const { return last_converged_; }

  private:
    bool last_converged_ = true;
};

/**
 * Rescales a trial gamma0 so that |x_half - x1| / |x0 - x_half| is close to
 * `target`. `perturb(gamma0)` must return x1 for a given gamma0. The first
 * update is the proportional rule gamma0 * target / ratio; for steps that are
 * not linear in gamma0 the rule is reapplied (at most `max_rounds` times)
 * until the ratio lies within a factor 2 of the target.
 */
template <typename PerturbFn>
double calibrate_gamma0_ratio(const Image& x0, const Image& x_half, PerturbFn&& perturb,
                              double trial_gamma0 = 1.0, double target = 1e-2, int max_rounds = 8) {
    const double solver_step = displacement_norm(x0, x_half);
    if (!(solver_step > 0.0)) throw std::domain_error("calibrate_gamma0_ratio: solver step is zero");
    double g = trial_gamma0;
    for (int round = 0; round <= max_rounds; ++round) {
        const Image x1 = perturb(g);
        const double sup_step = displacement_norm(x_half, x1);
        if (!(sup_step > 0.0))
            throw std::domain_error("calibrate_gamma0_ratio: superiorization step is zero");
        const double ratio = sup_step / solver_step;
        if (round > 0 && ratio >= 0.5 * target && ratio <= 2.0 * target) return g;
        if (round == 0 && std::abs(ratio - target) <= 1e-12 * target) return g;
        g *= target / ratio;
    }
    return g;
}

} // namespace supertomo
