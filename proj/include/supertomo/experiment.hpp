#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "io.hpp"
#include "likelihood.hpp"
#include "metrics.hpp"
#include "phantom.hpp"
#include "projection.hpp"
#include "random.hpp"
#include "reconstruct.hpp"
#include "superiorize.hpp"

namespace supertomo::experiment {

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class Model { emission, transmission };
enum class SupKind { none, standard, subgrad, prox };

/**
 * Flat key = value experiment description. `lambda0` and `sup_gamma0` accept
 * "auto" (stored as nullopt) for calibration on the first iterate.
 */
struct ExperimentConfig {
    std::size_t n_side = 128;
    std::size_t n_angles = 32;
    std::size_t n_rays = 182;
    std::optional<double> fov_radius; // default n_side / 2, i.e. unit pixels

    Model model = Model::emission;
    SolverKind solver = SolverKind::em;
    std::size_t strings = 1;
    std::vector<double> weights;
    std::optional<double> lambda0;
    double tau = 1e-14;

    SupKind superiorizer = SupKind::none;
    double sup_beta0 = 1.0;
    double sup_alpha = 0.95;
    std::size_t sup_n = 10;
    CounterMode sup_counter = CounterMode::reset_to_iteration;
    std::optional<double> sup_gamma0;
    double sup_ratio_target = 1e-2;
    int prox_max_inner = 100;
    double prox_tol = 1e-8;

    double snr_db = 18.0;
    double phantom_scale = 1.0;
    double blank_level = 1e4;
    double dark_level = 0.0;

    double stop_threshold = 400.0;
    std::size_t max_iters = 500;
    bool continue_after_stop = false;
    std::size_t repetitions = 15;
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    bool record_wall_time = true;

    double fov() const { return fov_radius ? *fov_radius : static_cast<double>(n_side) / 2.0; }

    bool operator==(const ExperimentConfig&) const = default;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double parse_real(const std::string& key, const std::string& v) {
    if (v == "inf" || v == "+inf") return std::numeric_limits<double>::infinity();
    if (v == "-inf" || v == "none") return -std::numeric_limits<double>::infinity();
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
    }
}

inline std::uint64_t parse_count(const std::string& key, const std::string& v) {
    if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
        throw ConfigError("config key '" + key + "': expected a nonnegative integer, got '" + v + "'");
    try {
        return std::stoull(v);
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': integer out of range");
    }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

inline std::optional<double> parse_auto(const std::string& key, const std::string& v) {
    if (v == "auto") return std::nullopt;
    return parse_real(key, v);
}

inline std::string fmt(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return io::format_double(v);
}

} // namespace detail

inline void validate(const ExperimentConfig& c) {
    if (c.n_side == 0 || c.n_angles == 0 || c.n_rays == 0)
        throw ConfigError("config: n_side, n_angles and n_rays must be positive");
    if (!(c.fov() > 0.0)) throw ConfigError("config key 'fov_radius': must be positive");
    if (c.solver == SolverKind::em && c.model != Model::emission)
        throw ConfigError("config key 'solver': em requires model = emission");
    if (c.strings == 0) throw ConfigError("config key 'strings': must be >= 1");
    if (c.solver == SolverKind::ssaem && c.strings > c.n_angles)
        throw ConfigError("config key 'strings': ssaem subsets cannot exceed n_angles");
    if (!c.weights.empty() && c.weights.size() != (c.solver == SolverKind::saem ? c.strings : 1))
        throw ConfigError("config key 'weights': need one weight per string");
    if (!c.weights.empty()) {
        try {
            validate_weights(c.weights, c.weights.size());
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config key 'weights': ") + e.what());
        }
    }
    if (c.lambda0 && !(*c.lambda0 > 0.0)) throw ConfigError("config key 'lambda0': must be > 0 or auto");
    if (!(c.tau > 0.0)) throw ConfigError("config key 'tau': must be > 0");
    if (c.superiorizer == SupKind::standard) {
        if (!(c.sup_beta0 > 0.0)) throw ConfigError("config key 'sup_beta0': must be > 0");
        if (!(c.sup_alpha > 0.0 && c.sup_alpha < 1.0))
            throw ConfigError("config key 'sup_alpha': must lie in (0, 1)");
    }
    if ((c.superiorizer == SupKind::subgrad || c.superiorizer == SupKind::prox) && c.sup_gamma0 &&
        !(*c.sup_gamma0 > 0.0))
        throw ConfigError("config key 'sup_gamma0': must be > 0 or auto");
    if (c.prox_max_inner < 1) throw ConfigError("config key 'prox_max_inner': must be >= 1");
    if (!(c.snr_db > -100.0 && c.snr_db < 200.0)) throw ConfigError("config key 'snr_db': out of range");
    if (!(c.phantom_scale > 0.0)) throw ConfigError("config key 'phantom_scale': must be > 0");
    if (!(c.blank_level > 0.0)) throw ConfigError("config key 'blank_level': must be > 0");
    if (!(c.dark_level >= 0.0)) throw ConfigError("config key 'dark_level': must be >= 0");
    if (c.repetitions == 0) throw ConfigError("config key 'repetitions': must be >= 1");
    if (c.output_dir.empty()) throw ConfigError("config key 'output_dir': must not be empty");
}

/// Parses `key = value` lines; `#` starts a comment. Unknown keys are errors.
inline ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig c;
    std::map<std::string, std::string> seen;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string v = detail::trim(line.substr(eq + 1));
        if (seen.count(key)) throw ConfigError("config key '" + key + "': given twice");
        seen[key] = v;

        using namespace detail;
        if (key == "n_side") c.n_side = parse_count(key, v);
        else if (key == "n_angles") c.n_angles = parse_count(key, v);
        else if (key == "n_rays") c.n_rays = parse_count(key, v);
        else if (key == "fov_radius") c.fov_radius = parse_auto(key, v);
        else if (key == "model") {
            if (v == "emission") c.model = Model::emission;
            else if (v == "transmission") c.model = Model::transmission;
            else throw ConfigError("config key 'model': expected emission|transmission, got '" + v + "'");
        } else if (key == "solver") {
            if (v == "em") c.solver = SolverKind::em;
            else if (v == "saem") c.solver = SolverKind::saem;
            else if (v == "ssaem") c.solver = SolverKind::ssaem;
            else throw ConfigError("config key 'solver': expected em|saem|ssaem, got '" + v + "'");
        } else if (key == "strings") c.strings = parse_count(key, v);
        else if (key == "weights") {
            c.weights.clear();
            if (!v.empty()) {
                std::istringstream ws(v);
                std::string item;
                while (std::getline(ws, item, ',')) c.weights.push_back(parse_real(key, trim(item)));
            }
        } else if (key == "lambda0") c.lambda0 = parse_auto(key, v);
        else if (key == "tau") c.tau = parse_real(key, v);
        else if (key == "superiorizer") {
            if (v == "none") c.superiorizer = SupKind::none;
            else if (v == "standard") c.superiorizer = SupKind::standard;
            else if (v == "subgrad") c.superiorizer = SupKind::subgrad;
            else if (v == "prox") c.superiorizer = SupKind::prox;
            else
                throw ConfigError("config key 'superiorizer': expected none|standard|subgrad|prox, got '" +
                                  v + "'");
        } else if (key == "sup_beta0") c.sup_beta0 = parse_real(key, v);
        else if (key == "sup_alpha") c.sup_alpha = parse_real(key, v);
        else if (key == "sup_n") c.sup_n = parse_count(key, v);
        else if (key == "sup_counter") {
            if (v == "reset") c.sup_counter = CounterMode::reset_to_iteration;
            else if (v == "persistent") c.sup_counter = CounterMode::persistent;
            else throw ConfigError("config key 'sup_counter': expected reset|persistent, got '" + v + "'");
        } else if (key == "sup_gamma0") c.sup_gamma0 = parse_auto(key, v);
        else if (key == "sup_ratio_target") c.sup_ratio_target = parse_real(key, v);
        else if (key == "prox_max_inner") c.prox_max_inner = static_cast<int>(parse_count(key, v));
        else if (key == "prox_tol") c.prox_tol = parse_real(key, v);
        else if (key == "snr_db") c.snr_db = parse_real(key, v);
        else if (key == "phantom_scale") c.phantom_scale = parse_real(key, v);
        else if (key == "blank_level") c.blank_level = parse_real(key, v);
        else if (key == "dark_level") c.dark_level = parse_real(key, v);
        else if (key == "stop_threshold") c.stop_threshold = parse_real(key, v);
        else if (key == "max_iters") c.max_iters = parse_count(key, v);
        else if (key == "continue_after_stop") c.continue_after_stop = parse_bool(key, v);
        else if (key == "repetitions") c.repetitions = parse_count(key, v);
        else if (key == "seed") c.seed = parse_count(key, v);
        else if (key == "output_dir") c.output_dir = v;
        else if (key == "record_wall_time") c.record_wall_time = parse_bool(key, v);
        else throw ConfigError("config: unknown key '" + key + "'");
    }
    validate(c);
    return c;
}

inline ExperimentConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

/// Environment variable that, when set and non-empty, replaces output_dir.
inline constexpr const char* output_dir_env = "SUPERTOMO_OUTPUT_DIR";

inline void apply_environment(ExperimentConfig& c) {
    if (const char* dir = std::getenv(output_dir_env); dir && *dir) c.output_dir = dir;
}

/// Canonical text form: every key, fixed order; parse_config_text inverts it.
inline std::string canonical(const ExperimentConfig& c) {
    using detail::fmt;
    auto opt = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string("auto"); };
    const char* solver = c.solver == SolverKind::em ? "em" : c.solver == SolverKind::saem ? "saem" : "ssaem";
    const char* sup = c.superiorizer == SupKind::none       ? "none"
                      : c.superiorizer == SupKind::standard ? "standard"
                      : c.superiorizer == SupKind::subgrad  ? "subgrad"
                                                            : "prox";
    std::ostringstream o;
    o << "n_side = " << c.n_side << '\n'
      << "n_angles = " << c.n_angles << '\n'
      << "n_rays = " << c.n_rays << '\n'
      << "fov_radius = " << opt(c.fov_radius) << '\n'
      << "model = " << (c.model == Model::emission ? "emission" : "transmission") << '\n'
      << "solver = " << solver << '\n'
      << "strings = " << c.strings << '\n'
      << "weights = ";
    for (std::size_t i = 0; i < c.weights.size(); ++i) o << (i ? "," : "") << fmt(c.weights[i]);
    o << '\n'
      << "lambda0 = " << opt(c.lambda0) << '\n'
      << "tau = " << fmt(c.tau) << '\n'
      << "superiorizer = " << sup << '\n'
      << "sup_beta0 = " << fmt(c.sup_beta0) << '\n'
      << "sup_alpha = " << fmt(c.sup_alpha) << '\n'
      << "sup_n = " << c.sup_n << '\n'
      << "sup_counter = " << (c.sup_counter == CounterMode::persistent ? "persistent" : "reset") << '\n'
      << "sup_gamma0 = " << opt(c.sup_gamma0) << '\n'
      << "sup_ratio_target = " << fmt(c.sup_ratio_target) << '\n'
      << "prox_max_inner = " << c.prox_max_inner << '\n'
      << "prox_tol = " << fmt(c.prox_tol) << '\n'
      << "snr_db = " << fmt(c.snr_db) << '\n'
      << "phantom_scale = " << fmt(c.phantom_scale) << '\n'
      << "blank_level = " << fmt(c.blank_level) << '\n'
      << "dark_level = " << fmt(c.dark_level) << '\n'
      << "stop_threshold = " << fmt(c.stop_threshold) << '\n'
      << "max_iters = " << c.max_iters << '\n'
      << "continue_after_stop = " << (c.continue_after_stop ? "true" : "false") << '\n'
      << "repetitions = " << c.repetitions << '\n'
      << "seed = " << c.seed << '\n'
      << "output_dir = " << c.output_dir << '\n'
      << "record_wall_time = " << (c.record_wall_time ? "true" : "false") << '\n';
    return o.str();
}

/// Final-iterate indicators of one repetition.
struct RepetitionOutcome {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    bool reached_threshold = false;
    double fit = 0.0; // KL divergence (emission) or objective (transmission)
    double tv = 0.0;
    double mse = 0.0;
    double ssim = 0.0;
    double iterations = 0.0;
    double time_s = 0.0;
    double lambda0 = 0.0;
    double gamma0 = 0.0;
    std::size_t lambda_halvings = 0;
    Image final_image;
    std::vector<IterationRecord> records;
};

/// Seed of repetition r: SplitMix64 of (master, r).
inline std::uint64_t repetition_seed(std::uint64_t master, std::size_t r) { return mix_seed(master, r); }

/// Uniform start whose projections match the log-converted transmission data in sum.
inline Image transmission_start(const SystemMatrix& R, const TransmissionCounts& tc) {
    std::vector<double> line(R.rows());
    for (std::size_t i = 0; i < R.rows(); ++i)
        line[i] = std::max(std::log(tc.beta[i] / std::max(tc.alpha[i] - tc.rho[i], 1.0)), 0.0);
    return starting_image(R, line);
}

namespace detail {

template <SeparableObjective F>
RepetitionOutcome reconstruct(const ExperimentConfig& c, const F& f, const Image& truth,
                              const Image& x0, std::uint64_t rep_seed,
                              std::function<double(std::span<const double>)> fit) {
    RepetitionOutcome out;
    SolverConfig sc;
    sc.kind = c.solver;
    sc.s = c.strings;
    sc.weights = c.weights;
    sc.lambda0 = c.lambda0 ? *c.lambda0 : 0.0;
    sc.tau = c.tau;
    sc.seed = mix_seed(rep_seed, 2);

    Superiorizer sup;
    const double s = static_cast<double>(c.strings);
    ProxParams prox{0.1, c.prox_max_inner, c.prox_tol};
    std::optional<double> gamma0 = c.sup_gamma0;
    if ((c.superiorizer == SupKind::subgrad || c.superiorizer == SupKind::prox) && !gamma0) {
        IncrementalSolver<F> probe(f, sc);
        probe.prepare(x0);
        const Image x_half = probe.half_step(x0, 0);
        if (c.superiorizer == SupKind::subgrad) {
            const SubgradientSuperiorizer trial(1.0, s, c.sup_n);
            gamma0 = calibrate_gamma0_ratio(
                x0, x_half, [&](double g) { return trial.apply_with(x_half, g); }, 1.0, c.sup_ratio_target);
        } else {
            gamma0 = calibrate_gamma0_ratio(
                x0, x_half,
                [&](double g) {
                    ProxParams p = prox;
                    p.gamma = g;
                    return tv_prox(x_half, p).x;
                },
                1.0, c.sup_ratio_target);
        }
    }
    switch (c.superiorizer) {
    case SupKind::none:
        break;
    case SupKind::standard:
        sup = StandardSuperiorizer(c.sup_beta0, c.sup_alpha, c.sup_n, c.sup_counter);
        break;
    case SupKind::subgrad:
        sup = SubgradientSuperiorizer(*gamma0, s, c.sup_n);
        out.gamma0 = *gamma0;
        break;
    case SupKind::prox:
        sup = ProxSuperiorizer(gamma0 ? *gamma0 : 0.15, prox);
        out.gamma0 = gamma0 ? *gamma0 : 0.15;
        break;
    }

    RunOptions opts;
    opts.truth = &truth;
    opts.record_wall_time = c.record_wall_time;
    opts.continue_after_threshold = c.continue_after_stop;
    opts.fit = std::move(fit);
    auto res = run(f, sc, StoppingRule{c.stop_threshold, c.max_iters}, std::move(sup), x0, opts);

    out.ok = true;
    out.reached_threshold = res.reached_threshold;
    out.lambda0 = res.lambda0;
    out.lambda_halvings = res.lambda_halvings;
    out.iterations = static_cast<double>(res.iterations);
    out.time_s = res.iterations > 0 ? res.records[res.iterations - 1].time_cum_s : 0.0;
    out.fit = opts.fit(res.x.values);
    out.tv = tv_value(res.x);
    out.mse = metrics::mse(res.x, truth);
    out.ssim = metrics::ssim(res.x, truth);
    out.final_image = std::move(res.x);
    out.records = std::move(res.records);
    return out;
}

} // namespace detail

/// Simulates data for repetition r and reconstructs it; errors are captured in the outcome.
inline RepetitionOutcome run_repetition(const ExperimentConfig& c, const SystemMatrix& R,
                                        const Image& truth, std::size_t r) {
    const std::uint64_t rs = repetition_seed(c.seed, r);
    try {
        RepetitionOutcome out;
        if (c.model == Model::emission) {
            const auto data = simulate_emission(R, truth, c.snr_db, mix_seed(rs, 1));
            const EmissionObjective f(R, data.normalized());
            const Image x0 = starting_image(R, f.data().values);
            out = detail::reconstruct(c, f, truth, x0, rs,
                                      [&f](std::span<const double> x) { return emission_divergence(f, x); });
        } else {
            const auto counts = simulate_transmission(R, truth, c.blank_level, c.dark_level, mix_seed(rs, 1));
            const TransmissionObjective f(R, counts);
            const Image x0 = transmission_start(R, counts);
            out = detail::reconstruct(c, f, truth, x0, rs,
                                      [&f](std::span<const double> x) { return objective_value(f, x); });
        }
        out.index = r;
        out.seed = rs;
        return out;
    } catch (const std::exception& e) {
        RepetitionOutcome out;
        out.index = r;
        out.seed = rs;
        out.ok = false;
        out.error = e.what();
        return out;
    }
}

inline SystemMatrix build_matrix(const ExperimentConfig& c) {
    return build_system_matrix(Geometry::parallel(c.n_side, c.n_angles, c.n_rays, c.fov()));
}

inline Image ground_truth(const ExperimentConfig& c) {
    Image x = shepp_logan(c.n_side);
    for (auto& v : x.values) v *= c.phantom_scale;
    return x;
}

struct CampaignResult {
    std::vector<RepetitionOutcome> repetitions;
    std::vector<metrics::MetricSummary> summary;
    std::size_t failures = 0;
};

namespace detail {

inline std::string rep_name(std::size_t r) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "rep_%03zu", r);
    return buf;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    return out;
}

} // namespace detail

inline void write_history_csv(const std::filesystem::path& p, const std::vector<IterationRecord>& recs) {
    auto out = detail::open_out(p);
    out << "k,objective,tv,err,time_s,lambda,sup_norm,time_cum_s\n";
    using detail::fmt;
    for (const auto& r : recs)
        out << r.k << ',' << fmt(r.objective) << ',' << fmt(r.tv) << ',' << fmt(r.err) << ','
            << fmt(r.time_s) << ',' << fmt(r.lambda) << ',' << fmt(r.sup_norm) << ','
            << fmt(r.time_cum_s) << '\n';
}

inline std::vector<IterationRecord> read_history_csv(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::string line;
    std::getline(in, line);
    std::vector<IterationRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::vector<double> v;
        while (std::getline(ls, cell, ',')) v.push_back(std::strtod(cell.c_str(), nullptr));
        if (v.size() < 7) throw std::runtime_error(p.string() + ": short history row");
        IterationRecord r;
        r.k = static_cast<std::size_t>(v[0]);
        r.objective = v[1];
        r.tv = v[2];
        r.err = v[3];
        r.time_s = v[4];
        r.lambda = v[5];
        r.sup_norm = v[6];
        if (v.size() > 7) r.time_cum_s = v[7];
        out.push_back(r);
    }
    return out;
}

/**
 * Runs every repetition and writes to output_dir:
 *   config.txt, rep_NNN_history.csv, rep_NNN_final.{csv,bin}, repetitions.csv,
 *   summary.csv (metric,mean,ci99), plot_error.csv, plot_tv_kl.csv.
 */
inline CampaignResult run_campaign(const ExperimentConfig& c) {
    validate(c);
    namespace fs = std::filesystem;
    const fs::path dir = c.output_dir;
    fs::create_directories(dir);
    {
        auto out = detail::open_out(dir / "config.txt");
        out << canonical(c);
    }

    const SystemMatrix R = build_matrix(c);
    const Image truth = ground_truth(c);

    CampaignResult res;
    for (std::size_t r = 0; r < c.repetitions; ++r) {
        auto rep = run_repetition(c, R, truth, r);
        const std::string name = detail::rep_name(r);
        if (rep.ok) {
            write_history_csv(dir / (name + "_history.csv"), rep.records);
            io::write_image_csv(dir / (name + "_final.csv"), rep.final_image);
            io::write_image_bin(dir / (name + "_final.bin"), rep.final_image);
        } else {
            ++res.failures;
        }
        res.repetitions.push_back(std::move(rep));
    }

    using detail::fmt;
    {
        auto out = detail::open_out(dir / "repetitions.csv");
        out << "rep,seed,status,reached,fit,tv,mse,ssim,iterations,time_s,lambda0,gamma0,lambda_halvings\n";
        for (const auto& r : res.repetitions) {
            std::string status = r.ok ? "ok" : "failed: " + r.error;
            std::replace(status.begin(), status.end(), ',', ';');
            std::replace(status.begin(), status.end(), '\n', ' ');
            out << r.index << ',' << r.seed << ',' << status << ',' << (r.reached_threshold ? 1 : 0) << ','
                << fmt(r.fit) << ',' << fmt(r.tv) << ',' << fmt(r.mse) << ',' << fmt(r.ssim) << ','
                << fmt(r.iterations) << ',' << fmt(r.time_s) << ',' << fmt(r.lambda0) << ','
                << fmt(r.gamma0) << ',' << r.lambda_halvings << '\n';
        }
    }

    std::vector<std::pair<std::string, std::vector<double>>> table{
        {c.model == Model::emission ? "kl" : "objective", {}}, {"tv", {}}, {"mse", {}},
        {"ssim", {}}, {"iterations", {}}, {"time", {}}};
    for (const auto& r : res.repetitions) {
        if (!r.ok) continue;
        table[0].second.push_back(r.fit);
        table[1].second.push_back(r.tv);
        table[2].second.push_back(r.mse);
        table[3].second.push_back(r.ssim);
        table[4].second.push_back(r.iterations);
        table[5].second.push_back(r.time_s);
    }
    {
        auto out = detail::open_out(dir / "summary.csv");
        out << "metric,mean,ci99\n";
        for (const auto& [name, values] : table) {
            metrics::MetricSummary m{name, std::numeric_limits<double>::quiet_NaN(),
                                     std::numeric_limits<double>::quiet_NaN(), values.size()};
            if (values.size() >= 2) {
                m = metrics::summarize(name, values);
            } else if (values.size() == 1) {
                m.mean = values[0];
            }
            out << m.metric << ',' << fmt(m.mean) << ',' << fmt(m.ci99) << '\n';
            res.summary.push_back(m);
        }
        out << "failures," << res.failures << ",\n";
    }

    // plot data: one column per repetition, ragged series left blank
    std::size_t longest = 0;
    for (const auto& r : res.repetitions) longest = std::max(longest, r.records.size());
    {
        auto err = detail::open_out(dir / "plot_error.csv");
        auto tvkl = detail::open_out(dir / "plot_tv_kl.csv");
        err << "k";
        tvkl << "k";
        for (const auto& r : res.repetitions) {
            const auto name = detail::rep_name(r.index);
            err << ',' << name << "_err";
            tvkl << ',' << name << "_fit," << name << "_tv";
        }
        err << '\n';
        tvkl << '\n';
        for (std::size_t k = 0; k < longest; ++k) {
            err << k + 1;
            tvkl << k + 1;
            for (const auto& r : res.repetitions) {
                if (k < r.records.size()) {
                    err << ',' << fmt(r.records[k].err);
                    tvkl << ',' << fmt(r.records[k].objective) << ',' << fmt(r.records[k].tv);
                } else {
                    err << ',';
                    tvkl << ",,";
                }
            }
            err << '\n';
            tvkl << '\n';
        }
    }
    return res;
}

/**
 * Merges repetition 0 of several campaign directories into one CSV keyed by
 * iteration: columns <label>_objective, <label>_tv, <label>_err per run, blank
 * cells past the end of shorter runs. Runs must share the geometry.
 */
inline void compare(const std::vector<std::filesystem::path>& run_dirs, std::ostream& out) {
    if (run_dirs.size() < 2) throw std::invalid_argument("compare: need at least two run directories");
    std::vector<std::vector<IterationRecord>> series;
    std::vector<std::string> labels;
    std::optional<ExperimentConfig> first;
    for (const auto& d : run_dirs) {
        const auto cfg = parse_config(d / "config.txt");
        if (first && (cfg.n_side != first->n_side || cfg.n_angles != first->n_angles ||
                      cfg.n_rays != first->n_rays || cfg.fov() != first->fov()))
            throw std::invalid_argument("compare: geometry of " + d.string() + " differs from " +
                                        run_dirs.front().string());
        if (!first) first = cfg;
        series.push_back(read_history_csv(d / (detail::rep_name(0) + "_history.csv")));
        std::string label = d.filename().string();
        if (label.empty()) label = d.parent_path().filename().string();
        labels.push_back(label + "#" + std::to_string(labels.size()));
    }
    std::size_t longest = 0;
    for (const auto& s : series) longest = std::max(longest, s.size());
    out << "k";
    for (const auto& l : labels) out << ',' << l << "_objective," << l << "_tv," << l << "_err";
    out << '\n';
    using detail::fmt;
    for (std::size_t k = 0; k < longest; ++k) {
        out << k + 1;
        for (const auto& s : series) {
            if (k < s.size())
                out << ',' << fmt(s[k].objective) << ',' << fmt(s[k].tv) << ',' << fmt(s[k].err);
            else
                out << ",,,";
        }
        out << '\n';
    }
}

} // namespace supertomo::experiment
