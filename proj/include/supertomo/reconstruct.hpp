#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "likelihood.hpp"
#include "random.hpp"
#include "solvers.hpp"
#include "superiorize.hpp"
#include "tv.hpp"

namespace supertomo {

enum class SolverKind { em, saem, ssaem };

struct SolverConfig {
    SolverKind kind = SolverKind::em;
    std::size_t s = 1;           // strings (saem) or view subsets (ssaem)
    std::vector<double> weights; // empty: 1/s each
    double lambda0 = 0.0;        // <= 0: calibrate on the first iterate
    double tau = 1e-14;
    std::uint64_t seed = 0;
    std::optional<ScalingVector> scaling; // default: emission or transmission choice

    ScheduleKind schedule_kind() const {
        return kind == SolverKind::ssaem ? ScheduleKind::ssaem : ScheduleKind::saem;
    }
};

struct StoppingRule {
    double threshold = 400.0;
    std::size_t max_iters = 500;
};

struct IterationRecord {
    std::size_t k = 0;
    double objective = 0.0;
    double tv = 0.0;
    double err = std::numeric_limits<double>::quiet_NaN();
    double time_s = 0.0;     // this iteration
    double time_cum_s = 0.0; // since the start of the run
    double lambda = std::numeric_limits<double>::quiet_NaN();
    double sup_norm = 0.0;
};

using Superiorizer = std::variant<std::monostate, IdentitySuperiorizer, StandardSuperiorizer,
                                  SubgradientSuperiorizer, ProxSuperiorizer>;

struct RunResult {
    Image x;                 // first iterate meeting the threshold, else the best one seen
    std::vector<IterationRecord> records;
    bool reached_threshold = false;
    std::size_t iterations = 0;      // iteration index of res.x
    std::size_t iterations_run = 0;  // records produced
    double lambda0 = std::numeric_limits<double>::quiet_NaN();
    std::size_t lambda_halvings = 0; // recalibrations after a step left the orthant
};

struct RunOptions {
    const Image* truth = nullptr;
    bool record_wall_time = true;
    /// Keep iterating to max_iters after the threshold is met (for full curves).
    bool continue_after_threshold = false;
    /// Data-fit function thresholded by the stopping rule; defaults to the objective value.
    std::function<double(std::span<const double>)> fit;
};

namespace detail {

template <SeparableObjective F>
ScalingVector default_scaling(const F& f) {
    if constexpr (std::is_same_v<F, TransmissionObjective>)
        return transmission_scaling(f.matrix(), f.counts());
    else
        return emission_scaling(f.matrix());
}

inline Image apply_superiorizer(Superiorizer& sup, const Image& x_half, std::size_t k) {
    return std::visit(
        [&](auto& s) -> Image {
            if constexpr (std::is_same_v<std::decay_t<decltype(s)>, std::monostate>)
                return x_half;
            else
                return s.apply(x_half, k);
        },
        sup);
}

} // namespace detail

/**
 * Solver plumbing for one configuration: data terms, strings, scaling and the
 * stepsize schedule. `half_step(x, k)` is the unperturbed operator O(lambda_k, x).
 */
template <SeparableObjective F>
class IncrementalSolver {
  public:
    IncrementalSolver(const F& f, SolverConfig cfg) : f_(&f), cfg_(std::move(cfg)) {
        const auto& R = f.matrix();
        scaling_ = cfg_.scaling ? *cfg_.scaling : detail::default_scaling(f);
        scaling_.validate();
        switch (cfg_.kind) {
        case SolverKind::em:
            if constexpr (!std::is_same_v<F, EmissionObjective>)
                throw std::invalid_argument("em solver requires the emission objective");
            break;
        case SolverKind::saem:
            terms_ = DataTerms::singletons(R.rows());
            strings_ = make_strings(R.rows(), cfg_.s, cfg_.seed);
            break;
        case SolverKind::ssaem:
            terms_ = DataTerms::view_subsets(R.geometry, cfg_.s);
            break;
        }
        weights_ = cfg_.weights.empty() ? uniform_weights(n_strings()) : cfg_.weights;
        validate_weights(weights_, n_strings());
    }

    const SolverConfig& config() const { return cfg_; }
    const ScalingVector& scaling() const { return scaling_; }
    const DataTerms& terms() const { return terms_; }

    std::size_t n_strings() const {
        return cfg_.kind == SolverKind::ssaem ? 1 : (cfg_.kind == SolverKind::saem ? cfg_.s : 1);
    }

    /// Strings used at iteration k; SSAEM draws a fresh subset order every iteration.
    StringPartition partition_at(std::size_t k) const {
        if (cfg_.kind != SolverKind::ssaem) return strings_;
        StringPartition p;
        p.strings.emplace_back(terms_.size());
        std::iota(p.strings[0].begin(), p.strings[0].end(), std::size_t{0});
        Rng rng(mix_seed(cfg_.seed, k));
        rng.shuffle(p.strings[0].begin(), p.strings[0].end());
        return p;
    }

    Image step_with_lambda(const Image& x, std::size_t k, double lambda) const {
        switch (cfg_.kind) {
        case SolverKind::em:
            if constexpr (std::is_same_v<F, EmissionObjective>) return em_step(*f_, x, scaling_);
            break;
        case SolverKind::saem:
            return saem_step(*f_, x, terms_, strings_, weights_, scaling_, lambda);
        case SolverKind::ssaem:
            return ssaem_step(*f_, x, terms_, partition_at(k), weights_, scaling_, lambda, cfg_.tau);
        }
        throw std::logic_error("unreachable solver kind");
    }

    /// Calibrates lambda0 on x0 when the configuration does not fix it.
    void prepare(const Image& x0) {
        if (cfg_.kind == SolverKind::em) return;
        lambda0_ = cfg_.lambda0 > 0.0
                       ? cfg_.lambda0
                       : calibrate_lambda0([&](double l) { return step_with_lambda(x0, 0, l); });
    }

    double lambda0() const { return lambda0_; }

    /// Scales lambda0 and with it the whole stepsize schedule.
    void rescale_lambda0(double factor) { lambda0_ *= factor; }

    double lambda(std::size_t k) const {
        if (cfg_.kind == SolverKind::em) return std::numeric_limits<double>::quiet_NaN();
        return StepSchedule{cfg_.schedule_kind(), lambda0_, static_cast<double>(cfg_.s)}.at(k);
    }

    Image half_step(const Image& x, std::size_t k) const { return step_with_lambda(x, k, lambda(k)); }

  private:
    const F* f_;
    SolverConfig cfg_;
    ScalingVector scaling_;
    DataTerms terms_;
    StringPartition strings_;
    std::vector<double> weights_;
    double lambda0_ = std::numeric_limits<double>::quiet_NaN();
};

/**
 * Superiorized outer loop: x^{k+1/2} = O(lambda_k, x^k), x^{k+1} = R_r(x^{k+1/2}),
 * until fit(x^k) <= threshold or max_iters iterations. One record per iteration.
 * With a calibrated lambda0, a step that leaves the nonnegative orthant halves
 * lambda0 and is retried; a fixed lambda0 lets the NegativityError through.
 */
template <SeparableObjective F>
RunResult run(const F& f, const SolverConfig& cfg, const StoppingRule& stop, Superiorizer sup,
              const Image& x0, const RunOptions& opts = {}) {
    IncrementalSolver<F> solver(f, cfg);
    solver.prepare(x0);
    std::function<double(std::span<const double>)> fit = opts.fit;
    if (!fit) fit = [&f](std::span<const double> x) { return objective_value(f, x); };

    RunResult res;
    res.lambda0 = solver.lambda0();
    Image x = x0;
    Image best = x0;
    double best_fit = fit(x0.values);
    if (best_fit <= stop.threshold) {
        res.x = x0;
        res.reached_threshold = true;
        return res;
    }

    using clock = std::chrono::steady_clock;
    double cum = 0.0;
    for (std::size_t k = 0; k < stop.max_iters; ++k) {
        const auto t0 = clock::now();
        Image x_half;
        for (;;) {
            try {
                x_half = solver.half_step(x, k);
                break;
            } catch (const NegativityError&) {
                if (cfg.lambda0 > 0.0 || res.lambda_halvings >= 60) throw;
                solver.rescale_lambda0(0.5);
                ++res.lambda_halvings;
            }
        }
        Image next = detail::apply_superiorizer(sup, x_half, k);
        const auto t1 = clock::now();

        IterationRecord rec;
        rec.k = k + 1;
        rec.lambda = solver.lambda(k);
        rec.sup_norm = displacement_norm(x_half, next);
        x = std::move(next);
        rec.objective = fit(x.values);
        rec.tv = tv_value(x);
        if (opts.truth) rec.err = vec::distance(x.values, opts.truth->values);
        if (opts.record_wall_time) {
            rec.time_s = std::chrono::duration<double>(t1 - t0).count();
            cum += rec.time_s;
            rec.time_cum_s = cum;
        }
        res.records.push_back(rec);
        res.iterations_run = k + 1;

        if (!res.reached_threshold && rec.objective < best_fit) {
            best_fit = rec.objective;
            best = x;
            res.iterations = k + 1;
        }
        if (!res.reached_threshold && rec.objective <= stop.threshold) {
            res.reached_threshold = true;
            res.x = x;
            res.iterations = k + 1;
            if (!opts.continue_after_threshold) return res;
        }
    }
    if (!res.reached_threshold) res.x = std::move(best);
    return res;
}

} // namespace supertomo
