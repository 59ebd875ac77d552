#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "supertomo/experiment.hpp"

namespace fs = std::filesystem;
namespace ex = supertomo::experiment;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t line_count(const fs::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    std::string line;
    while (std::getline(in, line)) ++n;
    return n;
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("supertomo_exp_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string small_config(const fs::path& out, const std::string& extra = "") {
    return "n_side = 16\nn_angles = 6\nn_rays = 24\nmodel = emission\nsolver = saem\nstrings = 3\n"
           "superiorizer = standard\nsup_n = 5\nstop_threshold = none\nmax_iters = 4\nrepetitions = 2\n"
           "seed = 11\nrecord_wall_time = false\noutput_dir = " +
           out.string() + "\n" + extra;
}

} // namespace

TEST(Config, MinimalEmissionConfigParses) {
    const auto c = ex::parse_config_text("# minimal\nmodel = emission\nsolver = em   # baseline\n");
    EXPECT_EQ(c.model, ex::Model::emission);
    EXPECT_EQ(c.solver, supertomo::SolverKind::em);
    EXPECT_EQ(c.repetitions, 15u);
    EXPECT_EQ(c.stop_threshold, 400.0);
    EXPECT_EQ(c.max_iters, 500u);
}

TEST(Config, UnknownKeyNamed) {
    try {
        ex::parse_config_text("solverr = em\n");
        FAIL();
    } catch (const ex::ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("solverr"), std::string::npos);
    }
}

TEST(Config, InvalidValuesNameTheirKey) {
    const std::pair<const char*, const char*> cases[] = {
        {"strings = abc\n", "strings"},        {"sup_alpha = 1.5\nsuperiorizer = standard\n", "sup_alpha"},
        {"repetitions = 0\n", "repetitions"},  {"model = emission\nsolver = bogus\n", "solver"},
        {"lambda0 = -2\n", "lambda0"},         {"record_wall_time = maybe\n", "record_wall_time"},
        {"model = transmission\n", "solver"},  {"weights = 0.5,0.6\nsolver = saem\nstrings = 2\n", "weights"},
    };
    for (const auto& [text, key] : cases) {
        try {
            ex::parse_config_text(text);
            ADD_FAILURE() << "accepted: " << text;
        } catch (const ex::ConfigError& e) {
            EXPECT_NE(std::string(e.what()).find(key), std::string::npos) << e.what();
        }
    }
    EXPECT_THROW(ex::parse_config_text("seed = 1\nseed = 2\n"), ex::ConfigError);
    EXPECT_THROW(ex::parse_config_text("no equals sign\n"), ex::ConfigError);
    EXPECT_THROW(ex::parse_config("/nonexistent/path.cfg"), ex::ConfigError);
}

TEST(Config, CanonicalRoundTrip) {
    auto c = ex::parse_config_text(
        "model = transmission\nsolver = ssaem\nstrings = 8\nsuperiorizer = subgrad\nsup_gamma0 = auto\n"
        "lambda0 = 3.25\nstop_threshold = -inf\nfov_radius = 17.5\nsup_counter = persistent\n"
        "blank_level = 2e4\ndark_level = 3\noutput_dir = some/dir\nweights = 1\n");
    const auto again = ex::parse_config_text(ex::canonical(c));
    EXPECT_EQ(again, c);
    const auto defaults = ex::parse_config_text(ex::canonical(ex::ExperimentConfig{}));
    EXPECT_EQ(defaults, ex::ExperimentConfig{});
}

TEST(Config, EnvironmentOverridesOutputDir) {
    auto c = ex::parse_config_text("output_dir = a\n");
    ::setenv(ex::output_dir_env, "/tmp/elsewhere", 1);
    ex::apply_environment(c);
    EXPECT_EQ(c.output_dir, "/tmp/elsewhere");
    ::unsetenv(ex::output_dir_env);
    auto d = ex::parse_config_text("output_dir = a\n");
    ex::apply_environment(d);
    EXPECT_EQ(d.output_dir, "a");
}

TEST(Campaign, SingleRepetitionSingleIteration) {
    const auto dir = scratch("single");
    auto c = ex::parse_config_text(small_config(dir));
    c.repetitions = 1;
    c.max_iters = 1;
    const auto res = ex::run_campaign(c);
    ASSERT_EQ(res.repetitions.size(), 1u);
    EXPECT_TRUE(res.repetitions[0].ok);
    EXPECT_EQ(line_count(dir / "rep_000_history.csv"), 2u);
    EXPECT_EQ(line_count(dir / "plot_error.csv"), 2u);
    EXPECT_EQ(line_count(dir / "plot_tv_kl.csv"), 2u);
    EXPECT_EQ(line_count(dir / "repetitions.csv"), 2u);
    EXPECT_EQ(slurp(dir / "rep_000_history.csv").rfind("k,objective,tv,err,time_s,lambda,sup_norm,time_cum_s\n", 0),
              0u);
    const auto img = supertomo::io::read_image_bin(dir / "rep_000_final.bin");
    EXPECT_EQ(img, supertomo::io::read_image_csv(dir / "rep_000_final.csv"));
    EXPECT_EQ(img.n_side, 16u);
    const auto summary = slurp(dir / "summary.csv");
    EXPECT_EQ(summary.rfind("metric,mean,ci99\n", 0), 0u);
    for (const char* m : {"\nkl,", "\ntv,", "\nmse,", "\nssim,", "\niterations,", "\ntime,", "\nfailures,0"})
        EXPECT_NE(summary.find(m), std::string::npos) << m;
    fs::remove_all(dir);
}

TEST(Campaign, SameSeedByteIdentical) {
    const auto a = scratch("det_a"), b = scratch("det_b");
    ex::run_campaign(ex::parse_config_text(small_config(a)));
    ex::run_campaign(ex::parse_config_text(small_config(b)));
    std::size_t compared = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        const auto name = e.path().filename();
        if (name == "config.txt") continue;
        EXPECT_EQ(slurp(e.path()), slurp(b / name)) << name;
        ++compared;
    }
    EXPECT_GE(compared, 9u);
    const auto other = scratch("det_c");
    auto co = ex::parse_config_text(small_config(other));
    co.seed = 12;
    ex::run_campaign(co);
    EXPECT_NE(slurp(a / "rep_000_history.csv"), slurp(other / "rep_000_history.csv"));
    fs::remove_all(a);
    fs::remove_all(b);
    fs::remove_all(other);
}

TEST(Campaign, RepetitionSeedsDiffer) {
    EXPECT_NE(ex::repetition_seed(1, 0), ex::repetition_seed(1, 1));
    EXPECT_EQ(ex::repetition_seed(1, 3), supertomo::mix_seed(1, 3));
}

TEST(Campaign, FailuresRecordedAndCampaignContinues) {
    const auto dir = scratch("fail");
    // a fixed stepsize far above the positivity limit makes every string go negative
    auto c = ex::parse_config_text(small_config(dir, "lambda0 = 1e6\n"));
    const auto res = ex::run_campaign(c);
    EXPECT_EQ(res.failures, 2u);
    for (const auto& r : res.repetitions) {
        EXPECT_FALSE(r.ok);
        EXPECT_NE(r.error.find("negative"), std::string::npos);
    }
    EXPECT_NE(slurp(dir / "summary.csv").find("failures,2"), std::string::npos);
    EXPECT_NE(slurp(dir / "repetitions.csv").find("failed"), std::string::npos);
    fs::remove_all(dir);
}

TEST(Campaign, TransmissionRunsOnSyntheticData) {
    const auto dir = scratch("trans");
    auto c = ex::parse_config_text(
        "n_side = 16\nn_angles = 8\nn_rays = 24\nmodel = transmission\nsolver = ssaem\nstrings = 4\n"
        "superiorizer = subgrad\nsup_n = 10\nphantom_scale = 0.02\nstop_threshold = none\nmax_iters = 5\n"
        "repetitions = 2\nrecord_wall_time = false\noutput_dir = " +
        dir.string() + "\n");
    const auto res = ex::run_campaign(c);
    EXPECT_EQ(res.failures, 0u);
    for (const auto& r : res.repetitions) {
        EXPECT_GT(r.gamma0, 0.0);
        EXPECT_EQ(r.records.size(), 5u);
        for (double v : r.final_image.values) EXPECT_GE(v, 0.0);
    }
    EXPECT_NE(slurp(dir / "summary.csv").find("\nobjective,"), std::string::npos);
    fs::remove_all(dir);
}

TEST(Compare, SelfMergeAndRaggedPadding) {
    const auto a = scratch("cmp_a"), b = scratch("cmp_b");
    ex::run_campaign(ex::parse_config_text(small_config(a)));
    auto cb = ex::parse_config_text(small_config(b));
    cb.max_iters = 2;
    ex::run_campaign(cb);

    std::ostringstream self;
    ex::compare({a, a}, self);
    std::istringstream in(self.str());
    std::string header, line;
    std::getline(in, header);
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        ASSERT_EQ(cells.size(), 7u);
        EXPECT_EQ(cells[1], cells[4]);
        EXPECT_EQ(cells[2], cells[5]);
        EXPECT_EQ(cells[3], cells[6]);
    }
    EXPECT_EQ(rows, 4u);

    std::ostringstream ragged;
    ex::compare({a, b}, ragged);
    const auto text = ragged.str();
    EXPECT_NE(text.find("\n3,"), std::string::npos);
    EXPECT_NE(text.find(",,,\n"), std::string::npos);

    const auto g = scratch("cmp_g");
    auto cg = ex::parse_config_text(small_config(g));
    cg.n_angles = 5;
    ex::run_campaign(cg);
    std::ostringstream bad;
    EXPECT_THROW(ex::compare({a, g}, bad), std::invalid_argument);
    EXPECT_THROW(ex::compare({a}, bad), std::invalid_argument);
    fs::remove_all(a);
    fs::remove_all(b);
    fs::remove_all(g);
}

#ifdef SUPERTOMO_CONFIG_DIR
TEST(Config, SampleConfigsParse) {
    std::size_t seen = 0;
    for (const auto& e : fs::directory_iterator(SUPERTOMO_CONFIG_DIR)) {
        if (e.path().extension() != ".cfg") continue;
        ++seen;
        EXPECT_NO_THROW(ex::parse_config(e.path())) << e.path();
    }
    EXPECT_GT(seen, 0u);
}
#endif

#ifdef SUPERTOMO_CLI_PATH
TEST(Cli, ExitCodes) {
    const auto dir = scratch("cli");
    fs::create_directories(dir);
    const std::string cli = SUPERTOMO_CLI_PATH;
    auto write = [&](const std::string& name, const std::string& text) {
        std::ofstream(dir / name) << text;
        return (dir / name).string();
    };
    auto status = [](const std::string& cmd) {
        const int s = std::system((cmd + " > /dev/null 2>&1").c_str());
        return WEXITSTATUS(s);
    };
    const auto good = write("good.cfg", small_config(dir / "out_good"));
    const auto bad = write("bad.cfg", "solverr = em\n");
    const auto partial = write("partial.cfg", small_config(dir / "out_partial", "lambda0 = 1e6\n"));
    EXPECT_EQ(status(cli + " run " + good), 0);
    EXPECT_EQ(status(cli + " run " + bad), 1);
    EXPECT_EQ(status(cli + " run " + partial), 2);
    EXPECT_EQ(status("SUPERTOMO_OUTPUT_DIR=" + (dir / "env_out").string() + " " + cli + " run " + good), 0);
    EXPECT_TRUE(fs::exists(dir / "env_out" / "summary.csv"));
    EXPECT_EQ(status(cli + " phantom --n 32 --out " + (dir / "p.csv").string()), 0);
    EXPECT_EQ(supertomo::io::read_image_csv(dir / "p.csv"), supertomo::shepp_logan(32));
    EXPECT_EQ(status(cli + " phantom --n 32 --out " + (dir / "p.bin").string()), 0);
    EXPECT_EQ(supertomo::io::read_image_bin(dir / "p.bin"), supertomo::shepp_logan(32));
    EXPECT_EQ(status(cli + " compare " + (dir / "out_good").string() + " " + (dir / "env_out").string() +
                     " --out " + (dir / "merged.csv").string()),
              0);
    EXPECT_TRUE(fs::exists(dir / "merged.csv"));
    fs::remove_all(dir);
}
#endif
