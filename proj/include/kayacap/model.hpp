#pragma once

// Closed-form mathematics of the capital-extended Kaya identity.
//
// Total emissions are split into three terms:
//
//   E(t) = E_K(t) + E_C(t) + E_I(t)
//        = Y(t) [ ebar_K(t) + (1 - s) eps_C(t) + s eps_I(t) ]
//
// where ebar_K is a stock fed by investment at the new-capital intensity
// eps_K(t) and drained by depreciation and dilution through growth:
//
//   d ebar_K / dt = -(r + delta) ebar_K + s eps_K(t).
//
// GDP is a dimensionless index (Y = 1 in the reference year), so every
// intensity below carries MtCO2 units.

#include <cmath>
#include <limits>
#include <optional>

#include <fmt/format.h>

#include "kayacap/error.hpp"

namespace kayacap {

// Below this |r + delta - alpha| the capital-emissions integral uses its linear branch.
inline constexpr double singular_branch_tolerance = 1e-8;

// Maximum allowed disagreement between a stated savings rate and one implied by k_infty.
inline constexpr double savings_consistency_tolerance = 1e-9;

// One constant-parameter regime. Rates are per year; intensities refer to the regime start.
struct ParameterSet {
    double r = 0.0;        // GDP growth rate
    double delta = 0.0;    // depreciation rate
    double s = 0.0;        // savings rate, I/Y
    std::optional<double> k_infty; // long-run capital intensity, years
    double alpha = 0.0;    // decline rate of new-capital intensity
    double beta = 0.0;     // decline rate of consumption intensity
    double gamma = 0.0;    // decline rate of investment intensity
    double ebar_K0 = 0.0;  // operating-capital emissions per unit GDP
    double eps_K0 = 0.0;   // new-capital intensity
    double eps_C0 = 0.0;   // consumption intensity
    double eps_I0 = 0.0;   // investment intensity

    void validate() const;
};

// Instantaneous model state, carried across regime boundaries.
struct StockState {
    double year = 0.0;
    double Y = 1.0;
    double ebar_K = 0.0;
    double eps_K = 0.0;
    double eps_C = 0.0;
    double eps_I = 0.0;

    void validate() const;
};

struct EmissionsBreakdown {
    double E_K = 0.0;
    double E_C = 0.0;
    double E_I = 0.0;
    double E_total = 0.0;

    static EmissionsBreakdown from_components(double capital, double consumption, double investment) {
        return {capital, consumption, investment, capital + consumption + investment};
    }
};

namespace detail {

inline bool all_finite(std::initializer_list<double> xs) {
    for (double x : xs)
        if (!std::isfinite(x))
            return false;
    return true;
}

} // namespace detail

inline void ParameterSet::validate() const {
    if (!detail::all_finite({r, delta, s, alpha, beta, gamma, ebar_K0, eps_K0, eps_C0, eps_I0}))
        throw ValidationError("parameter set contains a non-finite value");
    if (s < 0.0 || s >= 1.0)
        throw ValidationError(fmt::format("savings rate {} outside [0, 1)", s));
    if (delta <= 0.0)
        throw ValidationError(fmt::format("depreciation rate {} must be positive", delta));
    if (r + delta <= 0.0)
        throw ValidationError(fmt::format("r + delta = {} must be positive", r + delta));
    if (ebar_K0 < 0.0 || eps_K0 < 0.0 || eps_C0 < 0.0 || eps_I0 < 0.0)
        throw ValidationError("emissions intensities must be non-negative");
    if (k_infty) {
        if (!std::isfinite(*k_infty) || *k_infty < 0.0)
            throw ValidationError(fmt::format("capital intensity {} must be finite and non-negative", *k_infty));
        const double implied = *k_infty * (r + delta);
        if (std::abs(s - implied) >= savings_consistency_tolerance)
            throw ValidationError(fmt::format("savings rate {} inconsistent with k_infty {} (implies {})", s, *k_infty, implied));
    }
}

inline void StockState::validate() const {
    if (!detail::all_finite({year, Y, ebar_K, eps_K, eps_C, eps_I}))
        throw ValidationError("stock state contains a non-finite value");
    if (Y <= 0.0)
        throw ValidationError(fmt::format("GDP index {} must be positive", Y));
    if (ebar_K < 0.0 || eps_K < 0.0 || eps_C < 0.0 || eps_I < 0.0)
        throw ValidationError("stock state intensities must be non-negative");
}

// Compressed Kaya identity E = eps * Y.
inline double kaya_baseline(double intensity, double gdp) {
    if (!std::isfinite(intensity) || !std::isfinite(gdp) || intensity < 0.0 || gdp <= 0.0)
        throw ValidationError(fmt::format("kaya_baseline needs intensity >= 0 and GDP > 0 (got {}, {})", intensity, gdp));
    return intensity * gdp;
}

// Asymptotic capital intensity s / (r + delta) at constant growth and savings.
inline double k_infinity(double s, double r, double delta) {
    if (!detail::all_finite({s, r, delta}))
        throw ValidationError("k_infinity: non-finite input");
    if (r + delta <= 0.0)
        throw ValidationError(fmt::format("k_infinity: r + delta = {} has no finite asymptote", r + delta));
    return s / (r + delta);
}

// Savings rate needed to sustain capital intensity k_infty.
inline double implied_savings(double k_infty, double r, double delta) {
    if (!detail::all_finite({k_infty, r, delta}))
        throw ValidationError("implied_savings: non-finite input");
    if (k_infty < 0.0)
        throw ValidationError(fmt::format("implied_savings: negative capital intensity {}", k_infty));
    if (r + delta <= 0.0)
        throw ValidationError(fmt::format("implied_savings: r + delta = {} must be positive", r + delta));
    const double s = k_infty * (r + delta);
    if (s >= 1.0)
        throw ValidationError(fmt::format(
            "infeasible scenario: k_infty = {:.4g} with r + delta = {:.4g} implies savings rate {:.4g} >= 1", k_infty,
            r + delta, s));
    return s;
}

// Constant annual proportional decline that compounds to 1/factor over `years` steps.
inline double factor_rate(double factor, double years) {
    if (!detail::all_finite({factor, years}) || factor < 1.0)
        throw ValidationError(fmt::format("factor_rate: reduction factor {} must be >= 1", factor));
    if (years <= 0.0)
        throw ValidationError(fmt::format("factor_rate: horizon {} must be positive", years));
    return -std::expm1(-std::log(factor) / years);
}

// Integral of exp(g t') over [0, t] with g = r + delta - alpha; linear in t at g = 0.
inline double f_of_t(double t, double r, double delta, double alpha) {
    const double g = r + delta - alpha;
    if (std::abs(g) < singular_branch_tolerance)
        return t;
    return std::expm1(g * t) / g;
}

// Operating-capital emissions per unit GDP, t years after the regime start.
inline double ebar_K_closed(double t, const ParameterSet& p) {
    return (p.ebar_K0 + p.s * p.eps_K0 * f_of_t(t, p.r, p.delta, p.alpha)) * std::exp(-(p.r + p.delta) * t);
}

// Decomposed emissions t years after the regime start; y0 is GDP at the start.
inline EmissionsBreakdown total_emissions(double t, const ParameterSet& p, double y0 = 1.0) {
    const double y = y0 * std::exp(p.r * t);
    return EmissionsBreakdown::from_components(y * ebar_K_closed(t, p),
                                               y * (1.0 - p.s) * p.eps_C0 * std::exp(-p.beta * t),
                                               y * p.s * p.eps_I0 * std::exp(-p.gamma * t));
}

// Emissions implied by a state under the savings rate of the regime in force.
inline EmissionsBreakdown emissions_of(const StockState& state, double s) {
    return EmissionsBreakdown::from_components(state.Y * state.ebar_K, state.Y * (1.0 - s) * state.eps_C,
                                               state.Y * s * state.eps_I);
}

// Regime parameters with intensities taken from `state`.
inline ParameterSet seeded_from(ParameterSet p, const StockState& state) {
    p.ebar_K0 = state.ebar_K;
    p.eps_K0 = state.eps_K;
    p.eps_C0 = state.eps_C;
    p.eps_I0 = state.eps_I;
    return p;
}

// Advance a state by dt years under constant regime parameters (intensities come from the state).
inline StockState evolve(const StockState& state, const ParameterSet& rates, double dt) {
    const ParameterSet p = seeded_from(rates, state);
    StockState next;
    next.year = state.year + dt;
    next.Y = state.Y * std::exp(p.r * dt);
    next.ebar_K = ebar_K_closed(dt, p);
    next.eps_K = p.eps_K0 * std::exp(-p.alpha * dt);
    next.eps_C = p.eps_C0 * std::exp(-p.beta * dt);
    next.eps_I = p.eps_I0 * std::exp(-p.gamma * dt);
    return next;
}

} // namespace kayacap
