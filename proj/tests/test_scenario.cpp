#include "kayacap/scenario.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace kayacap;

namespace {

FitReport published() { return load_fit_report(std::string(KAYACAP_SOURCE_DIR) + "/data/published_us_fit.txt"); }

Trajectory run(const std::string& name) { return project(named_plan(name, published())); }

ScenarioPlan from_text(const std::string& text) {
    std::istringstream in(text);
    return plan_from_document(KeyValueDocument::parse(in, "test.scn"), published());
}

const std::string bridge = "[regime 2005]\nr = historical\ndelta = historical\nk_infty = present\nalpha = historical\n"
                           "beta = historical\ngamma = historical\ns = implied\n";

} // namespace

TEST(NamedPlan, AllFiveLoad) {
    const auto fit = published();
    for (const auto& name : named_plan_names()) {
        const auto plan = named_plan(name, fit);
        EXPECT_EQ(plan.name, name);
        ASSERT_EQ(plan.regimes.size(), 2u);
        EXPECT_EQ(plan.regimes[0].start_year, 2005);
        EXPECT_EQ(plan.regimes[1].start_year, 2010);
        EXPECT_EQ(plan.horizon_end, 2050);
        EXPECT_EQ(plan.baseline_year, 1990);
    }
}

TEST(NamedPlan, AcceleratedRetirementRow) {
    const auto p = named_plan("accelerated-retirement", published()).regimes[1].params;
    EXPECT_DOUBLE_EQ(p.r, 0.031);
    EXPECT_DOUBLE_EQ(p.delta, 0.10);
    EXPECT_NEAR(p.alpha, 0.10874906186625447, 1e-15);
    EXPECT_EQ(p.alpha, p.beta);
    EXPECT_DOUBLE_EQ(p.gamma, 0.020);
    EXPECT_NEAR(p.s, 0.26970588235294, 1e-12);
    EXPECT_NEAR(std::round(p.s * 100.0), 27.0, 0.0);
}

TEST(NamedPlan, ExtrapolationKeepsHistoricalParameters) {
    const auto plan = named_plan("extrapolation", published());
    const auto& a = plan.regimes[0].params;
    const auto& b = plan.regimes[1].params;
    EXPECT_EQ(a.r, b.r);
    EXPECT_EQ(a.delta, b.delta);
    EXPECT_EQ(a.s, b.s);
    EXPECT_EQ(a.alpha, b.alpha);
    EXPECT_EQ(a.beta, b.beta);
    EXPECT_EQ(a.gamma, b.gamma);
    EXPECT_NEAR(a.s, 0.14, 1e-12);
}

TEST(NamedPlan, SteadyStateSavings) {
    const auto p = named_plan("steady-state-high-tech", published()).regimes[1].params;
    EXPECT_EQ(p.r, 0.0);
    EXPECT_NEAR(p.s, 0.30882352941176, 1e-12);
}

TEST(NamedPlan, AcceleratedReductionsUsesFortyYears) {
    const auto p = named_plan("accelerated-reductions", published()).regimes[1].params;
    EXPECT_NEAR(p.alpha, 0.05593912371407662, 1e-15);
    EXPECT_NEAR(named_plan("aggressive-reductions", published()).regimes[1].params.beta, 0.10874906186625447, 1e-15);
}

TEST(NamedPlan, UnknownName) {
    EXPECT_THROW(named_plan("business-as-usual", published()), ConfigError);
}

TEST(PlanFile, RejectsMalformedDefinitions) {
    EXPECT_THROW(from_text("name = x\n"), ConfigError);
    EXPECT_THROW(from_text("name = x\ncolour = red\n" + bridge), ConfigError);
    EXPECT_THROW(from_text("name = x\n[regime 2006]\nr = historical\ndelta = historical\nalpha = historical\n"
                           "beta = historical\ngamma = historical\ns = historical\n"),
                 ConfigError);
    EXPECT_THROW(from_text("name = x\n" + bridge + "[regime 2010]\nr = 3.1\ndelta = 3.7\nalpha = factor 10 by 2000\n"
                           "beta = historical\ngamma = historical\ns = historical\n"),
                 ConfigError);
    EXPECT_THROW(from_text("name = x\n" + bridge + "[regime 2010]\nr = fast\ndelta = 3.7\nalpha = historical\n"
                           "beta = historical\ngamma = historical\ns = historical\n"),
                 ConfigError);
    EXPECT_THROW(from_text("name = x\n" + bridge + "[regime 2000]\nr = 3.1\ndelta = 3.7\nalpha = historical\n"
                           "beta = historical\ngamma = historical\ns = historical\n"),
                 ConfigError);
}

TEST(PlanFile, InfeasibleSavingsIsRefused) {
    try {
        from_text("name = overbuilt\n" + bridge + "[regime 2010]\nr = historical\ndelta = 20.0\nk_infty = 4.0\n"
                  "alpha = historical\nbeta = historical\ngamma = historical\ns = implied\n");
        FAIL() << "expected an infeasible-savings error";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("infeasible"), std::string::npos) << e.what();
    }
}

TEST(PlanFile, ExplicitSavingsMustMatchCapitalIntensity) {
    EXPECT_THROW(from_text("name = x\n" + bridge + "[regime 2010]\nr = historical\ndelta = historical\nk_infty = present\n"
                           "alpha = historical\nbeta = historical\ngamma = historical\ns = 20\n"),
                 ValidationError);
    const auto plan = from_text("name = x\n" + bridge + "[regime 2010]\nr = historical\ndelta = historical\n"
                                "alpha = historical\nbeta = historical\ngamma = historical\ns = 20\n");
    EXPECT_DOUBLE_EQ(plan.regimes[1].params.s, 0.20);
}

TEST(Project, ExtrapolationEndpoint) {
    const auto traj = run("extrapolation");
    const auto& e = traj.at(2050).emissions;
    // mpmath evaluation of the closed forms at t = 45.
    EXPECT_NEAR(e.E_K, 6687.9618820508, 1e-6);
    EXPECT_NEAR(e.E_C, 2430.3432326900, 1e-6);
    EXPECT_NEAR(e.E_I, 120.71473812003, 1e-6);
    EXPECT_NEAR(e.E_total, 9239.0198528608, 1e-6);
    EXPECT_NEAR(traj.at(2050).Y, std::exp(0.031 * 45.0), 1e-12);
}

TEST(Project, ReferenceYearMatchesObservedTotal) {
    const auto fit = published();
    for (const auto& name : named_plan_names()) {
        const auto& e = run(name).at(2005).emissions;
        EXPECT_NEAR(e.E_total, fit.E_K_ref + fit.E_C_ref + fit.E_I_ref, 1e-9) << name;
        EXPECT_NEAR(e.E_K, 3059.0, 1e-9) << name;
    }
}

TEST(Project, ScenarioOrderingIn2050) {
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& name : named_plan_names()) {
        const double e = run(name).at(2050).emissions.E_total;
        EXPECT_LT(e, prev) << name;
        prev = e;
    }
}

TEST(Project, ConservationAndNonNegativity) {
    for (const auto& name : named_plan_names()) {
        const auto traj = run(name);
        EXPECT_EQ(traj.records.size(), 46u);
        for (const auto& r : traj.records) {
            const auto& e = r.emissions;
            EXPECT_EQ(e.E_total, e.E_K + e.E_C + e.E_I);
            EXPECT_GE(e.E_K, 0.0);
            EXPECT_GE(e.E_C, 0.0);
            EXPECT_GE(e.E_I, 0.0);
            EXPECT_GT(r.Y, 0.0);
        }
    }
}

TEST(Project, StateCarriesAcrossBoundary) {
    for (const auto& name : named_plan_names()) {
        const auto traj = run(name);
        ASSERT_EQ(traj.boundaries.size(), 1u);
        const auto& b = traj.boundaries[0];
        const auto& p0 = traj.regimes[0];
        const auto& p1 = traj.regimes[1];
        EXPECT_EQ(b.year, 2010);
        // Closed form of regime 1 at its end equals the carried state.
        const double Y = std::exp(p0.r * 5.0);
        EXPECT_NEAR(b.state.Y, Y, 1e-12);
        EXPECT_NEAR(b.state.ebar_K, ebar_K_closed(5.0, p0), 1e-9 * b.state.ebar_K);
        EXPECT_EQ(p1.ebar_K0, b.state.ebar_K);
        EXPECT_EQ(p1.eps_K0, b.state.eps_K);
        EXPECT_EQ(p1.eps_C0, b.state.eps_C);
        EXPECT_EQ(p1.eps_I0, b.state.eps_I);
        // Capital emissions never jump; consumption and investment jump only through s.
        EXPECT_NEAR(b.after.E_K, b.before.E_K, 1e-9 * b.before.E_K);
        const double jump = b.state.Y * (b.s_after - b.s_before) * (b.state.eps_I - b.state.eps_C);
        EXPECT_NEAR(b.after.E_total - b.before.E_total, jump, 1e-9 * b.before.E_total) << name;
        EXPECT_NEAR(traj.at(2010).emissions.E_total, b.after.E_total, 1e-9 * b.after.E_total);
        const auto closed_before = total_emissions(5.0, p0, 1.0);
        EXPECT_NEAR(b.before.E_total, closed_before.E_total, 1e-9 * closed_before.E_total);
    }
}

TEST(Project, ContinuousWhenSavingsUnchanged) {
    const auto b = run("extrapolation").boundaries[0];
    EXPECT_NEAR(b.after.E_total, b.before.E_total, 1e-9 * b.before.E_total);
    const auto r = run("accelerated-reductions").boundaries[0];
    EXPECT_NEAR(r.after.E_total, r.before.E_total, 1e-9 * r.before.E_total);
}

TEST(Project, LegacyCapitalDecaysSlowerThanNewIntensity) {
    const auto traj = run("aggressive-reductions");
    const double ratio = traj.at(2050).emissions.E_K / traj.at(2010).emissions.E_K;
    EXPECT_GT(ratio, std::exp(-0.109 * 40.0));
}

TEST(Project, SplittingARegimeChangesNothing) {
    auto plan = named_plan("extrapolation", published());
    const auto whole = project(plan);
    plan.regimes.erase(plan.regimes.begin() + 1);
    const auto single = project(plan);
    for (int y = 2005; y <= 2050; ++y)
        EXPECT_NEAR(whole.at(y).emissions.E_total, single.at(y).emissions.E_total, 1e-9 * single.at(y).emissions.E_total);
}

TEST(Project, RejectsBadPlans) {
    auto plan = named_plan("extrapolation", published());
    plan.horizon_end = 2008;
    EXPECT_THROW(project(plan), ConfigError);
    plan = named_plan("extrapolation", published());
    plan.regimes[1].start_year = 2005;
    EXPECT_THROW(project(plan), ConfigError);
    plan = named_plan("extrapolation", published());
    plan.regimes[1].params.s = 1.2;
    EXPECT_THROW(project(plan), ValidationError);
}

TEST(RelativeReport, Percentages) {
    const auto traj = run("accelerated-reductions");
    const auto a = relative_report(traj, 5000.0);
    const auto b = relative_report(traj, 2500.0);
    ASSERT_EQ(a.size(), traj.records.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_NEAR(a[i].percent, 100.0 * traj.records[i].emissions.E_total / 5000.0, 1e-12);
        EXPECT_NEAR(b[i].percent, 2.0 * a[i].percent, 1e-9);
    }
    EXPECT_THROW(relative_report(traj, 0.0), ValidationError);
    EXPECT_THROW(relative_report(traj, std::nan("")), ValidationError);
}

TEST(RelativeReport, FlatTrajectoryIsOneHundredPercent) {
    Trajectory flat;
    for (int y = 2005; y <= 2050; ++y)
        flat.records.push_back({y, 1.0, EmissionsBreakdown::from_components(1000.0, 500.0, 100.0)});
    for (const auto& row : relative_report(flat, 1600.0))
        EXPECT_DOUBLE_EQ(row.percent, 100.0);
}

TEST(TrajectoryCsv, Layout) {
    std::ostringstream out;
    write_trajectory_csv(out, run("extrapolation"));
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "year,Y,E_K,E_C,E_I,E_total");
    std::getline(in, line);
    EXPECT_EQ(line.rfind("2005,1,3059,", 0), 0u) << line;
    std::size_t rows = 1;
    while (std::getline(in, line))
        ++rows;
    EXPECT_EQ(rows, 46u);
}
