#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "image.hpp"
#include "phantom.hpp"
#include "projection.hpp"

namespace supertomo {

/**
 * An objective of the form f(x) = sum_i phi_i((R x)_i): every data term is a
 * scalar function of one projection. Incremental solvers only need phi_i and
 * phi_i' per row; gradients follow as R^T phi'(R x).
 */
template <typename T>
concept SeparableObjective = requires(const T& f, std::size_t i, double proj) {
    { f.matrix() } -> std::same_as<const SystemMatrix&>;
    { f.row_value(i, proj) } -> std::convertible_to<double>;
    { f.row_derivative(i, proj) } -> std::convertible_to<double>;
};

/// Poisson emission negative log-likelihood sum_i (Rx)_i - b_i ln (Rx)_i.
class EmissionObjective {
  public:
    EmissionObjective(const SystemMatrix& R, Sinogram b, double floor_eps = 1e-300)
        : R_(&R), b_(std::move(b)), floor_eps_(floor_eps) {
        vec::require_same_size(b_.size(), R.rows(), "EmissionObjective");
        if (!(floor_eps_ > 0.0)) throw std::invalid_argument("EmissionObjective: floor_eps must be > 0");
    }

    const SystemMatrix& matrix() const { return *R_; }
    const Sinogram& data() const { return b_; }
    double floor_eps() const { return floor_eps_; }

    double row_value(std::size_t i, double proj) const {
        const double b = b_[i];
        return b == 0.0 ? proj : proj - b * std::log(std::max(proj, floor_eps_));
    }
    double row_derivative(std::size_t i, double proj) const {
        return 1.0 - b_[i] / std::max(proj, floor_eps_);
    }

    /// Value of the row term at a perfect fit (Rx)_i = b_i; subtracting it gives the KL divergence.
    double row_minimum(std::size_t i) const {
        const double b = b_[i];
        return b > 0.0 ? b - b * std::log(b) : 0.0;
    }

  private:
    const SystemMatrix* R_;
    Sinogram b_;
    double floor_eps_;
};

/**
 * Transmission negative log-likelihood
 *   sum_i beta_i e^{-(Rx)_i} - alpha_i ln(beta_i e^{-(Rx)_i} + rho_i).
 * The blank factor sits inside the logarithm so the gradient is exactly
 *   sum_i r_ij beta_i e^{-(Rx)_i} (alpha_i / (beta_i e^{-(Rx)_i} + rho_i) - 1).
 */
class TransmissionObjective {
  public:
    TransmissionObjective(const SystemMatrix& R, TransmissionCounts counts)
        : R_(&R), c_(std::move(counts)) {
        vec::require_same_size(c_.alpha.size(), R.rows(), "TransmissionObjective alpha");
        vec::require_same_size(c_.beta.size(), R.rows(), "TransmissionObjective beta");
        vec::require_same_size(c_.rho.size(), R.rows(), "TransmissionObjective rho");
    }

    const SystemMatrix& matrix() const { return *R_; }
    const TransmissionCounts& counts() const { return c_; }

    double row_value(std::size_t i, double proj) const {
        const double beta = c_.beta[i], alpha = c_.alpha[i], rho = c_.rho[i];
        const double mean = beta * std::exp(-proj);
        if (alpha == 0.0) return mean;
        const double y = mean + rho;
        const double log_y = y > 0.0 ? std::log(y) : std::log(beta) - proj;
        return mean - alpha * log_y;
    }
    double row_derivative(std::size_t i, double proj) const {
        const double beta = c_.beta[i], alpha = c_.alpha[i], rho = c_.rho[i];
        const double mean = beta * std::exp(-proj);
        const double y = mean + rho;
        if (y <= 0.0) return alpha; // rho == 0 and mean underflowed: limit of mean * alpha / mean
        return mean * (alpha / y - 1.0);
    }

  private:
    const SystemMatrix* R_;
    TransmissionCounts c_;
};

template <SeparableObjective F>
double objective_value(const F& f, std::span<const double> x) {
    const auto& R = f.matrix();
    vec::require_same_size(x.size(), R.cols(), "objective_value");
    double s = 0.0;
    for (std::size_t i = 0; i < R.rows(); ++i) s += f.row_value(i, R.row_dot(i, x));
    return s;
}

template <SeparableObjective F>
std::vector<double> objective_gradient(const F& f, std::span<const double> x) {
    const auto& R = f.matrix();
    vec::require_same_size(x.size(), R.cols(), "objective_gradient");
    std::vector<double> w(R.rows());
    for (std::size_t i = 0; i < R.rows(); ++i) w[i] = f.row_derivative(i, R.row_dot(i, x));
    return back_vector(R, w);
}

/// Gradient of sum_{i in rows} phi_i((Rx)_i).
template <SeparableObjective F>
std::vector<double> objective_partial_gradient(const F& f, std::span<const double> x,
                                               std::span<const std::size_t> rows) {
    const auto& R = f.matrix();
    vec::require_same_size(x.size(), R.cols(), "objective_partial_gradient");
    std::vector<double> g(R.cols(), 0.0);
    for (std::size_t i : rows) {
        if (i >= R.rows())
            throw std::out_of_range("partial gradient: row " + std::to_string(i) + " out of range");
        const double w = f.row_derivative(i, R.row_dot(i, x));
        const auto cols = R.row_cols(i);
        const auto wts = R.row_weights(i);
        for (std::size_t k = 0; k < cols.size(); ++k) g[cols[k]] += wts[k] * w;
    }
    return g;
}

inline double emission_value(const EmissionObjective& f, const Image& x) {
    return objective_value(f, x.values);
}
inline std::vector<double> emission_gradient(const EmissionObjective& f, const Image& x) {
    return objective_gradient(f, x.values);
}
inline std::vector<double> emission_partial_gradient(const EmissionObjective& f, const Image& x,
                                                     std::span<const std::size_t> rows) {
    return objective_partial_gradient(f, x.values, rows);
}

/// Generalised Kullback-Leibler divergence KL(b, Rx) = L_E(x) - L_E at a perfect fit.
inline double emission_divergence(const EmissionObjective& f, std::span<const double> x) {
    const auto& R = f.matrix();
    double s = 0.0;
    for (std::size_t i = 0; i < R.rows(); ++i)
        s += f.row_value(i, R.row_dot(i, x)) - f.row_minimum(i);
    return s;
}

inline double transmission_value(const TransmissionObjective& f, const Image& x) {
    return objective_value(f, x.values);
}
inline std::vector<double> transmission_gradient(const TransmissionObjective& f, const Image& x) {
    return objective_gradient(f, x.values);
}
inline std::vector<double> transmission_partial_gradient(const TransmissionObjective& f,
                                                         const Image& x,
                                                         std::span<const std::size_t> rows) {
    return objective_partial_gradient(f, x.values, rows);
}

} // namespace supertomo
