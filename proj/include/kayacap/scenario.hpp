#pragma once

// Piecewise-constant scenario projections.
//
// A plan is an ordered list of regimes. Inside a regime every rate is
// constant, so the state is advanced with the closed forms from model.hpp.
// At a regime boundary the state (Y, ebar_K, eps_K, eps_C, eps_I) carries
// over unchanged and only the rates switch. Component emissions depend on the
// savings rate as well as the state, so E_C and E_I step at a boundary where
// s changes; a boundary with unchanged s leaves every component continuous.

#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "kayacap/calibration.hpp"
#include "kayacap/error.hpp"
#include "kayacap/keyvalue.hpp"
#include "kayacap/model.hpp"

#ifndef KAYACAP_DEFAULT_SCENARIO_DIR
#define KAYACAP_DEFAULT_SCENARIO_DIR "scenarios"
#endif

namespace kayacap {

inline const std::vector<std::string>& named_plan_names() {
    static const std::vector<std::string> names{"extrapolation", "accelerated-reductions", "aggressive-reductions",
                                                "accelerated-retirement", "steady-state-high-tech"};
    return names;
}

struct Regime {
    int start_year = 0;
    // Intensity fields are only read for the first regime; later regimes are
    // seeded from the carried state.
    ParameterSet params;
};

struct ScenarioPlan {
    std::string name;
    std::string description;
    std::vector<Regime> regimes;
    int horizon_end = 2050;
    int baseline_year = 1990;
    double initial_Y = 1.0;

    void validate() const {
        if (regimes.empty())
            throw ConfigError(fmt::format("plan '{}' has no regimes", name));
        for (std::size_t i = 1; i < regimes.size(); ++i)
            if (regimes[i].start_year <= regimes[i - 1].start_year)
                throw ConfigError(fmt::format("plan '{}': regime start years must increase ({} after {})", name,
                                              regimes[i].start_year, regimes[i - 1].start_year));
        if (horizon_end <= regimes.back().start_year)
            throw ConfigError(fmt::format("plan '{}': horizon {} must follow the last regime start {}", name,
                                          horizon_end, regimes.back().start_year));
        if (!(initial_Y > 0.0))
            throw ValidationError(fmt::format("plan '{}': initial GDP index must be positive", name));
        for (const auto& r : regimes)
            r.params.validate();
    }
};

struct TrajectoryRecord {
    int year = 0;
    double Y = 0.0;
    EmissionsBreakdown emissions;
};

// Emissions just before and just after a regime switch.
struct RegimeBoundary {
    int year = 0;
    StockState state;
    double s_before = 0.0;
    double s_after = 0.0;
    EmissionsBreakdown before;
    EmissionsBreakdown after;
};

struct Trajectory {
    std::string plan;
    double step = 1.0; // sampling interval, years
    std::vector<TrajectoryRecord> records;
    std::vector<RegimeBoundary> boundaries;
    std::vector<ParameterSet> regimes; // as applied, intensities from the carried state

    const TrajectoryRecord& at(int year) const {
        for (const auto& r : records)
            if (r.year == year)
                return r;
        throw ValidationError(fmt::format("trajectory '{}' has no record for {}", plan, year));
    }
};

// Annual trajectory from the first regime start through the horizon.
inline Trajectory project(const ScenarioPlan& plan) {
    plan.validate();
    Trajectory traj;
    traj.plan = plan.name;

    const ParameterSet& p0 = plan.regimes.front().params;
    StockState state{static_cast<double>(plan.regimes.front().start_year), plan.initial_Y, p0.ebar_K0, p0.eps_K0,
                     p0.eps_C0, p0.eps_I0};
    state.validate();

    for (std::size_t i = 0; i < plan.regimes.size(); ++i) {
        const int start = plan.regimes[i].start_year;
        const bool last = i + 1 == plan.regimes.size();
        const int end = last ? plan.horizon_end : plan.regimes[i + 1].start_year;
        const ParameterSet p = seeded_from(plan.regimes[i].params, state);
        p.validate();
        traj.regimes.push_back(p);

        for (int year = start; year < end || (last && year == end); ++year) {
            const double t = year - start;
            traj.records.push_back({year, state.Y * std::exp(p.r * t), total_emissions(t, p, state.Y)});
        }
        state = evolve(state, p, end - start);
        state.validate();
        if (!last) {
            const double s_next = plan.regimes[i + 1].params.s;
            traj.boundaries.push_back({end, state, p.s, s_next, emissions_of(state, p.s), emissions_of(state, s_next)});
        }
    }
    return traj;
}

struct RelativeRow {
    int year = 0;
    double percent = 0.0;
};

inline std::vector<RelativeRow> relative_report(const Trajectory& traj, double baseline_emissions) {
    if (!std::isfinite(baseline_emissions) || baseline_emissions <= 0.0)
        throw ValidationError("relative report needs a positive baseline emissions value");
    std::vector<RelativeRow> out;
    out.reserve(traj.records.size());
    for (const auto& r : traj.records)
        out.push_back({r.year, 100.0 * r.emissions.E_total / baseline_emissions});
    return out;
}

inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
    out << "year,Y,E_K,E_C,E_I,E_total\n";
    for (const auto& r : traj.records)
        out << fmt::format("{},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g}\n", r.year, r.Y, r.emissions.E_K, r.emissions.E_C,
                           r.emissions.E_I, r.emissions.E_total);
}

// ---------------------------------------------------------------------------
// Scenario definition files
// ---------------------------------------------------------------------------
//
//   name = accelerated-retirement
//   horizon = 2050
//   baseline_year = 1990
//
//   [regime 2010]
//   r = historical            # rates in %/yr, or `historical`
//   delta = 10.0
//   k_infty = present         # multiple of the present long-run capital intensity
//   alpha = factor 10 by 2030 # decline reaching 1/10 of the regime-start level
//   beta = factor 10 by 2030
//   gamma = historical
//   s = implied               # k_infty (r + delta); or %, or `historical`

namespace detail {

inline double rate_value(const KeyValueSection& sec, const std::string& key, double historical, int regime_start) {
    const KeyValueEntry& e = sec.require(key);
    const std::string v = lowercase(e.value);
    if (v == "historical")
        return historical;
    if (v.rfind("factor", 0) == 0) {
        std::istringstream words(v.substr(6));
        std::string by;
        double factor = 0.0;
        int year = 0;
        if (!(words >> factor >> by >> year) || by != "by")
            throw ConfigError(fmt::format("{}:{}: expected 'factor F by YEAR', got '{}'", sec.source(), e.line, e.value));
        if (year <= regime_start)
            throw ConfigError(fmt::format("{}:{}: target year {} must follow the regime start {}", sec.source(), e.line,
                                          year, regime_start));
        try {
            return factor_rate(factor, year - regime_start);
        } catch (const ValidationError& err) {
            throw ConfigError(fmt::format("{}:{}: {}", sec.source(), e.line, err.what()));
        }
    }
    auto pct = parse_double(v);
    if (!pct)
        throw ConfigError(fmt::format("{}:{}: '{}' must be a percentage, 'historical' or 'factor F by YEAR', got '{}'",
                                      sec.source(), e.line, key, e.value));
    return *pct / 100.0;
}

} // namespace detail

// Build a plan from a definition document and a fit report.
inline ScenarioPlan plan_from_document(const KeyValueDocument& doc, const FitReport& fit) {
    const KeyValueSection& root = doc.root();
    root.check_keys({"name", "description", "horizon", "baseline_year"});
    ScenarioPlan plan;
    plan.name = root.get_string("name");
    plan.description = root.get_optional("description").value_or("");
    plan.horizon_end = root.has("horizon") ? root.get_int("horizon") : 2050;
    plan.baseline_year = root.has("baseline_year") ? root.get_int("baseline_year") : 1990;

    const CapitalParameters& cap = fit.capital.params;
    const double k_present = k_infinity(fit.s_hist, fit.r_hist, cap.delta);

    for (const KeyValueSection* sec : doc.sections()) {
        std::istringstream head(sec->name());
        std::string word;
        int start = 0;
        if (!(head >> word >> start) || word != "regime")
            throw ConfigError(fmt::format("{}:{}: section must be '[regime YEAR]', got '[{}]'", sec->source(), sec->line(),
                                          sec->name()));
        sec->check_keys({"r", "delta", "k_infty", "alpha", "beta", "gamma", "s"});

        ParameterSet p;
        p.r = detail::rate_value(*sec, "r", fit.r_hist, start);
        p.delta = detail::rate_value(*sec, "delta", cap.delta, start);
        p.alpha = detail::rate_value(*sec, "alpha", cap.alpha, start);
        p.beta = detail::rate_value(*sec, "beta", fit.beta.rate, start);
        p.gamma = detail::rate_value(*sec, "gamma", fit.gamma.rate, start);

        if (auto k = sec->get_optional("k_infty")) {
            const std::string kv = detail::lowercase(*k);
            auto mult = kv == "present" ? std::optional<double>(1.0) : detail::parse_double(kv);
            if (!mult || *mult < 0.0)
                throw ConfigError(fmt::format("{}:{}: k_infty must be 'present' or a non-negative multiplier, got '{}'",
                                              sec->source(), sec->require("k_infty").line, *k));
            p.k_infty = *mult * k_present;
        }

        const KeyValueEntry& s_entry = sec->require("s");
        const std::string sv = detail::lowercase(s_entry.value);
        if (sv == "implied") {
            if (!p.k_infty)
                throw ConfigError(fmt::format("{}:{}: 's = implied' needs k_infty", sec->source(), s_entry.line));
            try {
                p.s = implied_savings(*p.k_infty, p.r, p.delta);
            } catch (const ValidationError& err) {
                throw ValidationError(fmt::format("plan '{}', regime {}: {}", plan.name, start, err.what()));
            }
        } else if (sv == "historical") {
            p.s = fit.s_hist;
        } else if (auto pct = detail::parse_double(sv)) {
            p.s = *pct / 100.0;
        } else {
            throw ConfigError(fmt::format("{}:{}: s must be 'implied', 'historical' or a percentage, got '{}'",
                                          sec->source(), s_entry.line, s_entry.value));
        }
        if (p.s >= 1.0 || p.s < 0.0)
            throw ValidationError(fmt::format("plan '{}', regime {}: savings rate {:.4g} outside [0, 1)", plan.name, start, p.s));
        if (p.k_infty && std::abs(p.s - *p.k_infty * (p.r + p.delta)) >= savings_consistency_tolerance)
            throw ValidationError(fmt::format("plan '{}', regime {}: s = {:.4g} contradicts k_infty = {:.4g}, which implies {:.4g}",
                                              plan.name, start, p.s, *p.k_infty, *p.k_infty * (p.r + p.delta)));
        plan.regimes.push_back({start, p});
    }
    if (plan.regimes.empty())
        throw ConfigError(fmt::format("{}: plan '{}' defines no [regime YEAR] sections", root.source(), plan.name));
    if (plan.regimes.front().start_year != fit.reference_year)
        throw ConfigError(fmt::format("{}: first regime starts in {}, expected the reference year {}", root.source(),
                                      plan.regimes.front().start_year, fit.reference_year));

    // Reference-year state: observed component levels at Y = 1.
    ParameterSet& first = plan.regimes.front().params;
    if (!(first.s > 0.0))
        throw ValidationError(fmt::format("plan '{}': first regime needs a positive savings rate", plan.name));
    first.ebar_K0 = fit.E_K_ref;
    first.eps_K0 = cap.eps_K0;
    first.eps_C0 = fit.E_C_ref / (1.0 - first.s);
    first.eps_I0 = fit.E_I_ref / first.s;
    plan.validate();
    return plan;
}

inline ScenarioPlan load_plan(const std::filesystem::path& path, const FitReport& fit) {
    return plan_from_document(KeyValueDocument::load(path), fit);
}

inline ScenarioPlan named_plan(const std::string& name, const FitReport& fit,
                               const std::filesystem::path& scenario_dir = KAYACAP_DEFAULT_SCENARIO_DIR) {
    const auto path = scenario_dir / (name + ".scn");
    if (!std::filesystem::exists(path)) {
        std::string known;
        for (const auto& n : named_plan_names())
            known += (known.empty() ? "" : ", ") + n;
        throw ConfigError(fmt::format("unknown plan '{}' (no {}); named plans: {}", name, path.string(), known));
    }
    return load_plan(path, fit);
}

} // namespace kayacap
