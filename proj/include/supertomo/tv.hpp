#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "image.hpp"

namespace supertomo {

namespace detail {
inline std::size_t wrap_prev(std::size_t i, std::size_t n) { return i == 0 ? n - 1 : i - 1; }
inline std::size_t wrap_next(std::size_t i, std::size_t n) { return i + 1 == n ? 0 : i + 1; }
} // namespace detail

/// Isotropic total variation with periodic boundary:
/// sum_ij sqrt((x_ij - x_{i-1,j})^2 + (x_ij - x_{i,j-1})^2).
inline double tv_value(const Image& x) {
    const std::size_t n = x.n_side;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t ip = detail::wrap_prev(i, n);
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t jp = detail::wrap_prev(j, n);
            const double u = x.at(i, j) - x.at(ip, j);
            const double v = x.at(i, j) - x.at(i, jp);
            s += std::sqrt(u * u + v * v);
        }
    }
    return s;
}

/**
 * Explicit subgradient of tv_value. Pixel (i, j) enters the terms at (i, j),
 * (i, j+1) and (i+1, j); a term whose denominator is zero contributes nothing.
 */
inline std::vector<double> tv_subgradient(const Image& x) {
    const std::size_t n = x.n_side;
    std::vector<double> t(x.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t ip = detail::wrap_prev(i, n), in = detail::wrap_next(i, n);
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t jp = detail::wrap_prev(j, n), jn = detail::wrap_next(j, n);
            const double c = x.at(i, j);
            double acc = 0.0;

            const double d0 = std::hypot(c - x.at(i, jp), c - x.at(ip, j));
            if (d0 != 0.0) acc += (2.0 * c - x.at(i, jp) - x.at(ip, j)) / d0;

            const double right = x.at(i, jn);
            const double d1 = std::hypot(right - c, right - x.at(ip, jn));
            if (d1 != 0.0) acc += (c - right) / d1;

            const double below = x.at(in, j);
            const double d2 = std::hypot(below - c, below - x.at(in, jp));
            if (d2 != 0.0) acc += (c - below) / d2;

            t[i * n + j] = acc;
        }
    }
    return t;
}

/// Chambolle dual variables paired with the two periodic differences.
struct DualField {
    std::size_t n_side = 0;
    std::vector<double> p; // pairs with x_ij - x_{i-1,j}
    std::vector<double> q; // pairs with x_ij - x_{i,j-1}

    explicit DualField(std::size_t n = 0) : n_side(n), p(n * n, 0.0), q(n * n, 0.0) {}

    double max_norm_sq() const {
        double m = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) m = std::max(m, p[k] * p[k] + q[k] * q[k]);
        return m;
    }
};

struct ProxParams {
    double gamma = 0.1;
    int max_inner_iters = 100;
    double dual_tolerance = 1e-8;

    void validate() const {
        if (!(gamma > 0.0)) throw std::invalid_argument("tv_prox: gamma must be > 0");
        if (max_inner_iters < 1) throw std::invalid_argument("tv_prox: max_inner_iters must be >= 1");
    }
};

struct ProxResult {
    Image x;
    double objective = 0.0; // |x - b|^2 + gamma TV(x)
    int iterations = 0;
    bool converged = false;
};

namespace detail {

// (u, v) = D x with periodic backward differences.
inline void tv_grad_op(const Image& x, DualField& out) {
    const std::size_t n = x.n_side;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t ip = wrap_prev(i, n);
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t jp = wrap_prev(j, n);
            out.p[i * n + j] = x.at(i, j) - x.at(ip, j);
            out.q[i * n + j] = x.at(i, j) - x.at(i, jp);
        }
    }
}

// D^T (p, q).
inline void tv_grad_adjoint(const DualField& d, std::vector<double>& out) {
    const std::size_t n = d.n_side;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t in = wrap_next(i, n);
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t jn = wrap_next(j, n);
            out[i * n + j] = d.p[i * n + j] - d.p[in * n + j] + d.q[i * n + j] - d.q[i * n + jn];
        }
    }
}

inline void project_unit_ball(DualField& d) {
    for (std::size_t k = 0; k < d.p.size(); ++k) {
        const double r = std::hypot(d.p[k], d.q[k]);
        if (r > 1.0) {
            d.p[k] /= r;
            d.q[k] /= r;
        }
    }
}

// Primal point for fixed duals: P_+(b - gamma/2 D^T (p, q)).
inline void primal_from_dual(const Image& b, const DualField& d, double gamma,
                             std::vector<double>& scratch, Image& x) {
    tv_grad_adjoint(d, scratch);
    for (std::size_t k = 0; k < b.size(); ++k)
        x.values[k] = std::max(b.values[k] - 0.5 * gamma * scratch[k], 0.0);
}

inline double prox_objective(const Image& x, const Image& b, double gamma) {
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double d = x.values[k] - b.values[k];
        s += d * d;
    }
    return s + gamma * tv_value(x);
}

} // namespace detail

/**
 * argmin_{x >= 0} |x - b|^2 + gamma TV(x) by fast gradient projection on the
 * Chambolle dual (Beck-Teboulle FGP) with periodic differences.
 *
 * The dual gradient is gamma D x(p, q) and is Lipschitz with constant 4 gamma^2
 * (|D|^2 <= 8), giving the ascent step 1 / (4 gamma) on D x. Iteration stops
 * when the dual objective changes by less than dual_tolerance relative. The
 * returned image is the best primal iterate seen, so it is never worse than
 * project_nonneg(b).
 *
 * `observer`, when set, sees the dual field after every projection.
 */
inline ProxResult tv_prox(const Image& b, const ProxParams& params,
                          const std::function<void(const DualField&)>& observer = {}) {
    params.validate();
    const std::size_t n = b.n_side;
    const double gamma = params.gamma;
    const double step = 1.0 / (4.0 * gamma);

    DualField pq(n), rs(n), pq_old(n), grad(n);
    std::vector<double> scratch(b.size());
    Image x(n), xp(n);

    ProxResult best;
    best.x = project_nonneg(b);
    best.objective = detail::prox_objective(best.x, b, gamma);

    double t = 1.0;
    double dual_prev = std::numeric_limits<double>::quiet_NaN();
    for (int it = 1; it <= params.max_inner_iters; ++it) {
        detail::primal_from_dual(b, rs, gamma, scratch, x);
        detail::tv_grad_op(x, grad);
        pq_old = pq;
        for (std::size_t k = 0; k < pq.p.size(); ++k) {
            pq.p[k] = rs.p[k] + step * grad.p[k];
            pq.q[k] = rs.q[k] + step * grad.q[k];
        }
        detail::project_unit_ball(pq);
        if (observer) observer(pq);

        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        const double mom = (t - 1.0) / t_next;
        for (std::size_t k = 0; k < pq.p.size(); ++k) {
            rs.p[k] = pq.p[k] + mom * (pq.p[k] - pq_old.p[k]);
            rs.q[k] = pq.q[k] + mom * (pq.q[k] - pq_old.q[k]);
        }
        t = t_next;

        // dual objective ||x_p - b||^2 + gamma <(p,q), D x_p> at the projected point
        detail::primal_from_dual(b, pq, gamma, scratch, xp);
        detail::tv_grad_op(xp, grad);
        double dual = 0.0;
        for (std::size_t k = 0; k < xp.size(); ++k) {
            const double d = xp.values[k] - b.values[k];
            dual += d * d + gamma * (pq.p[k] * grad.p[k] + pq.q[k] * grad.q[k]);
        }
        const double primal = detail::prox_objective(xp, b, gamma);
        if (primal < best.objective) {
            best.objective = primal;
            best.x = xp;
        }
        best.iterations = it;
        if (std::abs(dual - dual_prev) <= params.dual_tolerance * std::max(std::abs(dual), 1e-300)) {
            best.converged = true;
            break;
        }
        dual_prev = dual;
    }
    return best;
}

} // namespace supertomo
