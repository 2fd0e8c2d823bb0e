#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include "kayacap/kayacap.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path source_dir = KAYACAP_SOURCE_DIR;

struct Result {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / fmt::format("kayacap_cli_{}_{}", ::getpid(), info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    Result run(const std::string& args) const {
        const fs::path out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
        const std::string cmd = fmt::format("\"{}\" {} > \"{}\" 2> \"{}\"", KAYACAP_CLI, args, out.string(), err.string());
        const int status = std::system(cmd.c_str());
        Result r;
        r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        r.out = slurp(out);
        r.err = slurp(err);
        return r;
    }

    fs::path write(const std::string& name, const std::string& text) const {
        const fs::path p = dir_ / name;
        std::ofstream(p) << text;
        return p;
    }

    std::string synthetic_config() const { return (source_dir / "config" / "synthetic_us.cfg").string(); }
    std::string published_config() const { return (source_dir / "config" / "published_us.cfg").string(); }
    std::string out_flag() const { return fmt::format("--output \"{}\"", (dir_ / "out").string()); }

    fs::path dir_;
};

} // namespace

TEST_F(Cli, IngestPrintsReferenceShares) {
    const auto r = run(fmt::format("ingest --config \"{}\" {}", synthetic_config(), out_flag()));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("capital 58.2%, consumption 40.4%, investment 1.4%"), std::string::npos) << r.out;
    EXPECT_TRUE(fs::exists(dir_ / "out" / "dataset.csv"));
    EXPECT_TRUE(fs::exists(dir_ / "out" / "manifest_ingest.json"));
}

TEST_F(Cli, IngestIsDeterministic) {
    ASSERT_EQ(run(fmt::format("ingest --config \"{}\" {}", synthetic_config(), out_flag())).code, 0);
    const std::string first = slurp(dir_ / "out" / "dataset.csv");
    const std::string manifest = slurp(dir_ / "out" / "manifest_ingest.json");
    ASSERT_EQ(run(fmt::format("ingest --config \"{}\" {}", synthetic_config(), out_flag())).code, 0);
    EXPECT_EQ(slurp(dir_ / "out" / "dataset.csv"), first);
    EXPECT_EQ(slurp(dir_ / "out" / "manifest_ingest.json"), manifest);
    EXPECT_NE(manifest.find("\"sha256\""), std::string::npos);
}

TEST_F(Cli, EmptySectorFileIsValidationError) {
    write("empty.csv", "");
    const auto macro = (source_dir / "data" / "synthetic_us" / "macro.csv").string();
    const auto cfg = write("run.cfg", fmt::format("sectors = empty.csv\nmacro = {}\noutput = out\n", macro));
    const auto r = run(fmt::format("ingest --config \"{}\"", cfg.string()));
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("empty"), std::string::npos) << r.err;
}

TEST_F(Cli, UnmappedSectorIsValidationError) {
    write("sectors.csv", "sector,2004,2005\nenergy sector,1,2\nfishing,1,1\n");
    write("macro.csv", "year,gdp,savings_rate\n2003,1,0.1\n2004,1,0.1\n2005,1,0.1\n");
    const auto cfg = write("run.cfg", "sectors = sectors.csv\nmacro = macro.csv\noutput = out\n");
    const auto r = run(fmt::format("ingest --config \"{}\"", cfg.string()));
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("fishing"), std::string::npos) << r.err;
}

TEST_F(Cli, FitWithoutDatasetAsksForIngest) {
    const auto r = run(fmt::format("fit --config \"{}\" {}", synthetic_config(), out_flag()));
    EXPECT_EQ(r.code, 5);
    EXPECT_NE(r.err.find("run ingest first"), std::string::npos) << r.err;
}

TEST_F(Cli, FullPipelineOnSyntheticInputs) {
    ASSERT_EQ(run(fmt::format("ingest --config \"{}\" {}", synthetic_config(), out_flag())).code, 0);
    const auto fit = run(fmt::format("fit --config \"{}\" {}", synthetic_config(), out_flag()));
    ASSERT_EQ(fit.code, 0) << fit.err;
    const auto report = kayacap::load_fit_report(dir_ / "out" / "fit_report.txt");
    // The synthetic inputs are generated from the published parameter set plus 0.5% noise.
    EXPECT_NEAR(report.beta.rate, 0.028, 0.003);
    EXPECT_NEAR(report.gamma.rate, 0.020, 0.003);
    EXPECT_NEAR(report.capital.params.ebar_K0, 3059.0, 0.05 * 3059.0);
    EXPECT_TRUE(report.capital.converged);
    for (const char* f : {"model_vs_observed.csv", "breakpoints.csv", "manifest_fit.json"})
        EXPECT_TRUE(fs::exists(dir_ / "out" / f)) << f;

    const auto fit_text = slurp(dir_ / "out" / "fit_report.txt");
    ASSERT_EQ(run(fmt::format("fit --config \"{}\" {}", synthetic_config(), out_flag())).code, 0);
    EXPECT_EQ(slurp(dir_ / "out" / "fit_report.txt"), fit_text);

    const auto proj = run(fmt::format("project --config \"{}\" {} --baseline-emissions 5000", synthetic_config(), out_flag()));
    ASSERT_EQ(proj.code, 0) << proj.err;
    for (const auto& name : kayacap::named_plan_names())
        EXPECT_TRUE(fs::exists(dir_ / "out" / fmt::format("trajectory_{}.csv", name))) << name;
    EXPECT_TRUE(fs::exists(dir_ / "out" / "relative_summary.csv"));
    EXPECT_TRUE(fs::exists(dir_ / "out" / "scenario_parameters.csv"));
}

TEST_F(Cli, ProjectFromPublishedParameters) {
    const auto r = run(fmt::format("project --config \"{}\" {} extrapolation", published_config(), out_flag()));
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string csv = slurp(dir_ / "out" / "trajectory_extrapolation.csv");
    EXPECT_NE(csv.find("\n2050,"), std::string::npos);
    EXPECT_NE(csv.find(",9239.019853\n"), std::string::npos) << csv.substr(csv.size() - 120);
    EXPECT_FALSE(fs::exists(dir_ / "out" / "relative_summary.csv"));
}

TEST_F(Cli, ScenarioParametersMatchPublishedRounding) {
    ASSERT_EQ(run(fmt::format("project --config \"{}\" {}", published_config(), out_flag())).code, 0);
    const std::string t = slurp(dir_ / "out" / "scenario_parameters.csv");
    EXPECT_NE(t.find("extrapolation,3.1,3.7,1.00,0.9,2.8,2.0,14.0,"), std::string::npos) << t;
    EXPECT_NE(t.find("accelerated-reductions,3.1,3.7,1.00,5.6,5.6,2.0,14.0,"), std::string::npos) << t;
    EXPECT_NE(t.find("accelerated-retirement,3.1,10.0,1.00,10.9,10.9,2.0,27.0,"), std::string::npos) << t;
    EXPECT_NE(t.find("steady-state-high-tech,0.0,10.0,1.50,10.9,10.9,2.0,30.9,"), std::string::npos) << t;
}

TEST_F(Cli, ProjectIsDeterministic) {
    ASSERT_EQ(run(fmt::format("project --config \"{}\" {} --baseline-emissions 5000", published_config(), out_flag())).code, 0);
    const auto a = slurp(dir_ / "out" / "relative_summary.csv");
    const auto m = slurp(dir_ / "out" / "manifest_project.json");
    ASSERT_EQ(run(fmt::format("project --config \"{}\" {} --baseline-emissions 5000", published_config(), out_flag())).code, 0);
    EXPECT_EQ(slurp(dir_ / "out" / "relative_summary.csv"), a);
    EXPECT_EQ(slurp(dir_ / "out" / "manifest_project.json"), m);
}

TEST_F(Cli, UnknownPlanIsConfigError) {
    const auto r = run(fmt::format("project --config \"{}\" {} business-as-usual", published_config(), out_flag()));
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("unknown plan"), std::string::npos) << r.err;
}

TEST_F(Cli, InfeasibleScenarioIsRefused) {
    const auto plan = write("overbuilt.scn",
                            "name = overbuilt\n[regime 2005]\nr = historical\ndelta = historical\nk_infty = present\n"
                            "alpha = historical\nbeta = historical\ngamma = historical\ns = implied\n"
                            "[regime 2010]\nr = historical\ndelta = 20.0\nk_infty = 4.0\nalpha = historical\n"
                            "beta = historical\ngamma = historical\ns = implied\n");
    const auto r = run(fmt::format("project --config \"{}\" {} \"{}\"", published_config(), out_flag(), plan.string()));
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("infeasible"), std::string::npos) << r.err;
}

TEST_F(Cli, ReportPrintsEndpoints) {
    const auto r = run(fmt::format("report --config \"{}\" --baseline-emissions 5000", published_config()));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("alpha 0.9%"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("9239.0"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("% of 1990"), std::string::npos) << r.out;
}

TEST_F(Cli, ExitCodes) {
    EXPECT_EQ(run("").code, 2);
    EXPECT_EQ(run(fmt::format("ingest --config \"{}\" --no-such-flag", synthetic_config())).code, 2);
    EXPECT_EQ(run("ingest --config /nonexistent/run.cfg").code, 5);
    EXPECT_EQ(run(fmt::format("fit --config \"{}\" {} --step 0.3", synthetic_config(), out_flag())).code, 2);
    const auto bad = write("bad.cfg", "colour = red\n");
    EXPECT_EQ(run(fmt::format("ingest --config \"{}\"", bad.string())).code, 2);
    EXPECT_EQ(run("--help").code, 0);
}
