#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "supertomo/experiment.hpp"
#include "supertomo/io.hpp"
#include "supertomo/phantom.hpp"

namespace fs = std::filesystem;
namespace ex = supertomo::experiment;

namespace {

int cmd_run(const std::string& config_path) {
    ex::ExperimentConfig cfg;
    try {
        cfg = ex::parse_config(config_path);
        ex::apply_environment(cfg);
    } catch (const ex::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    const auto res = ex::run_campaign(cfg);
    for (const auto& r : res.repetitions) {
        if (r.ok)
            std::cout << "rep " << r.index << ": iterations " << r.iterations << ", fit " << r.fit << ", tv "
                      << r.tv << ", ssim " << r.ssim << (r.reached_threshold ? "" : " (threshold not reached)")
                      << '\n';
        else
            std::cout << "rep " << r.index << ": failed: " << r.error << '\n';
    }
    std::cout << "summary written to " << (fs::path(cfg.output_dir) / "summary.csv").string() << '\n';
    return res.failures == 0 ? 0 : 2;
}

int cmd_compare(const std::vector<std::string>& dirs, const std::string& out_path) {
    std::vector<fs::path> paths(dirs.begin(), dirs.end());
    if (out_path.empty()) {
        ex::compare(paths, std::cout);
        return 0;
    }
    std::ofstream out(out_path);
    if (!out) {
        std::cerr << "error: cannot write " << out_path << '\n';
        return 1;
    }
    ex::compare(paths, out);
    return 0;
}

int cmd_phantom(std::size_t n, const std::string& out_path) {
    const auto x = supertomo::shepp_logan(n);
    if (fs::path(out_path).extension() == ".csv")
        supertomo::io::write_image_csv(out_path, x);
    else
        supertomo::io::write_image_bin(out_path, x);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Superiorized incremental EM reconstruction"};
    app.require_subcommand(1);

    std::string config_path;
    auto* run = app.add_subcommand("run", "run an experiment campaign");
    run->add_option("config", config_path, "key = value config file")->required();

    std::vector<std::string> dirs;
    std::string compare_out;
    auto* cmp = app.add_subcommand("compare", "merge iteration histories of campaign directories");
    cmp->add_option("dirs", dirs, "campaign output directories")->required()->expected(2, -1);
    cmp->add_option("--out", compare_out, "output CSV (default stdout)");

    std::size_t n = 128;
    std::string phantom_out;
    auto* ph = app.add_subcommand("phantom", "write the Shepp-Logan phantom");
    ph->add_option("--n", n, "side length")->check(CLI::PositiveNumber);
    ph->add_option("--out", phantom_out, "output file (.csv or binary)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*run) return cmd_run(config_path);
        if (*cmp) return cmd_compare(dirs, compare_out);
        if (*ph) return cmd_phantom(n, phantom_out);
    } catch (const ex::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
