#pragma once

// Numerical solution of the capital and capital-emissions balances under
// time-varying growth and savings rates.
//
// Time is measured in years relative to a reference calendar year (t = 0).
// Annual rates are piecewise constant: the entry for calendar year y holds on
// the interval (y - 1, y], so that exp of the integrated growth rate
// reproduces year-over-year GDP ratios exactly. Integration may run forward
// or backward in time; every step is split at calendar-year boundaries so
// that rates are constant inside each sub-step.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <variant>
#include <vector>

#include <fmt/format.h>

#include "kayacap/error.hpp"
#include "kayacap/model.hpp"
#include "kayacap/time_series.hpp"

namespace kayacap {

inline constexpr double default_step = 1.0 / 12.0;

struct AnnualRates {
    double growth = 0.0;
    double savings = 0.0;
};

class RateFunction {
public:
    // Tabulated rates; both series must cover the same years.
    RateFunction(int reference_year, TimeSeries growth, TimeSeries savings)
        : reference_year_(reference_year), growth_(std::move(growth)), savings_(std::move(savings)) {
        if (growth_.empty() || growth_.first_year() != savings_.first_year() || growth_.size() != savings_.size())
            throw ValidationError("rate table: growth and savings series must be non-empty and share a span");
        for (int y = growth_.first_year(); y <= growth_.last_year(); ++y) {
            const double r = growth_.at(y), s = savings_.at(y);
            if (!std::isfinite(r))
                throw ValidationError(fmt::format("rate table: non-finite growth rate in {}", y));
            if (!(s >= 0.0 && s < 1.0))
                throw ValidationError(fmt::format("rate table: savings rate {} in {} outside [0, 1)", s, y));
        }
    }

    // Rates that hold at all times.
    static RateFunction constant(double growth, double savings, int reference_year = 0) {
        if (!std::isfinite(growth) || !(savings >= 0.0 && savings < 1.0))
            throw ValidationError(fmt::format("constant rates: r = {}, s = {} invalid", growth, savings));
        RateFunction out;
        out.reference_year_ = reference_year;
        out.constant_ = AnnualRates{growth, savings};
        return out;
    }

    int reference_year() const noexcept { return reference_year_; }
    bool is_constant() const noexcept { return constant_.has_value(); }

    // Covered time span in model time.
    double t_min() const {
        return constant_ ? -std::numeric_limits<double>::infinity()
                         : static_cast<double>(growth_.first_year() - 1 - reference_year_);
    }
    double t_max() const {
        return constant_ ? std::numeric_limits<double>::infinity()
                         : static_cast<double>(growth_.last_year() - reference_year_);
    }

    bool covers(double t0, double t1) const {
        const double lo = std::min(t0, t1), hi = std::max(t0, t1);
        constexpr double slack = 1e-9;
        return lo >= t_min() - slack && hi <= t_max() + slack;
    }

    // Calendar year whose rates hold at model time t (interval (y - 1, y]).
    int year_at(double t) const { return static_cast<int>(std::ceil(reference_year_ + t - 1e-9)); }

    // Rates on the open interval around `t_mid`; callers pass interval midpoints.
    AnnualRates at(double t_mid) const {
        if (constant_)
            return *constant_;
        const int y = static_cast<int>(std::ceil(reference_year_ + t_mid));
        return {growth_.at(y), savings_.at(y)};
    }

private:
    RateFunction() = default;

    int reference_year_ = 0;
    TimeSeries growth_;
    TimeSeries savings_;
    std::optional<AnnualRates> constant_;
};

struct GridSolution {
    std::vector<double> times;  // strictly increasing
    std::vector<double> values;
    double step = 0.0;

    // Value at the grid node nearest to t; t must lie on the grid.
    double at(double t) const {
        auto it = std::lower_bound(times.begin(), times.end(), t - 1e-9);
        if (it == times.end() || std::abs(*it - t) > 1e-9)
            throw ValidationError(fmt::format("time {} is not a grid node", t));
        return values[static_cast<std::size_t>(it - times.begin())];
    }
};

// Path of the new-capital intensity eps_K(t).
struct ExponentialIntensity {
    double initial = 0.0; // value at the integration start
    double alpha = 0.0;
};

struct TabulatedIntensity {
    TimeSeries values; // piecewise constant on (y - 1, y], like the rate table
};

using IntensityPath = std::variant<ExponentialIntensity, TabulatedIntensity>;

// Inputs to the general capital-emissions solution; intensities refer to the start time.
struct CapitalEmissionsInputs {
    double alpha = 0.0;
    double delta = 0.0;
    double ebar_K0 = 0.0;
    double eps_K0 = 0.0;
};

namespace detail {

inline void check_span(const RateFunction& rates, double t_start, double t_end, double step) {
    if (!(step > 0.0) || !std::isfinite(step))
        throw ValidationError(fmt::format("integration step {} must be positive", step));
    if (!std::isfinite(t_start) || !std::isfinite(t_end))
        throw ValidationError("integration bounds must be finite");
    if (!rates.covers(t_start, t_end))
        throw ValidationError(fmt::format("rates cover [{}, {}] but integration spans [{}, {}]", rates.t_min(),
                                          rates.t_max(), std::min(t_start, t_end), std::max(t_start, t_end)));
}

// Output nodes from t_start to t_end (either direction) spaced by step, last step possibly shorter.
inline std::vector<double> grid_nodes(double t_start, double t_end, double step) {
    const double span = t_end - t_start;
    const double dir = span >= 0.0 ? 1.0 : -1.0;
    const auto full = static_cast<long>(std::floor(std::abs(span) / step + 1e-9));
    std::vector<double> nodes;
    nodes.reserve(static_cast<std::size_t>(full) + 2);
    for (long k = 0; k <= full; ++k)
        nodes.push_back(t_start + dir * static_cast<double>(k) * step);
    if (std::abs(nodes.back() - t_end) > 1e-9)
        nodes.push_back(t_end);
    else
        nodes.back() = t_end;
    return nodes;
}

// Sub-intervals of [a, b] (either orientation) split at calendar-year boundaries.
template <class Visit>
void for_each_piece(const RateFunction& rates, double a, double b, Visit&& visit) {
    if (rates.is_constant()) {
        visit(a, b);
        return;
    }
    const double ref = rates.reference_year();
    const double lo = std::min(a, b), hi = std::max(a, b);
    std::vector<double> cuts{a};
    if (b > a) {
        for (double c = std::floor(ref + lo) + 1.0; c - ref < hi - 1e-9; c += 1.0)
            if (c - ref > lo + 1e-9)
                cuts.push_back(c - ref);
    } else {
        for (double c = std::ceil(ref + hi) - 1.0; c - ref > lo + 1e-9; c -= 1.0)
            if (c - ref < hi - 1e-9)
                cuts.push_back(c - ref);
    }
    cuts.push_back(b);
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
        visit(cuts[i], cuts[i + 1]);
}

inline double intensity_at(const IntensityPath& path, double t, double t_start, int year) {
    return std::visit(
        [&](const auto& p) -> double {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, ExponentialIntensity>)
                return p.initial * std::exp(-p.alpha * (t - t_start));
            else
                return p.values.at(year);
        },
        path);
}

// Fixed-step classical Runge-Kutta on a linear scalar ODE, steps split at year boundaries.
template <class Derivative>
GridSolution rk4_solve(const RateFunction& rates, double y0, double t_start, double t_end, double step,
                       Derivative&& dydt) {
    const std::vector<double> nodes = grid_nodes(t_start, t_end, step);
    std::vector<double> values{y0};
    values.reserve(nodes.size());
    double y = y0;
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
        for_each_piece(rates, nodes[i], nodes[i + 1], [&](double a, double b) {
            const double h = b - a;
            const double mid = 0.5 * (a + b);
            const AnnualRates ar = rates.at(mid);
            const int year = rates.year_at(mid);
            auto f = [&](double t, double v) { return dydt(t, v, ar, year); };
            const double k1 = f(a, y);
            const double k2 = f(mid, y + 0.5 * h * k1);
            const double k3 = f(mid, y + 0.5 * h * k2);
            const double k4 = f(b, y + h * k3);
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        });
        values.push_back(y);
    }
    GridSolution out{nodes, values, step};
    if (t_end < t_start) {
        std::reverse(out.times.begin(), out.times.end());
        std::reverse(out.values.begin(), out.values.end());
    }
    return out;
}

} // namespace detail

// General solution for ebar_K(t) by quadrature, using the integrating factor
// of d ebar_K/dt = -(r + delta) ebar_K + s eps_K0 exp(-alpha (t - t0)):
//
//   ebar_K(t) = exp(-delta (t - t0) - R(t)) [ ebar_K0 + eps_K0 J(t) ],
//   R(t) = int_{t0}^{t} r,
//   J(t) = int_{t0}^{t} exp((delta - alpha)(t' - t0) + R(t')) s(t') dt'.
//
// R is integrated exactly (r is piecewise constant); J uses composite Simpson
// with the midpoint of every sub-step as the interior node.
inline GridSolution ebar_K_general(const RateFunction& rates, const CapitalEmissionsInputs& in, double t_start,
                                   double t_end, double step = default_step) {
    detail::check_span(rates, t_start, t_end, step);
    if (!(in.delta > 0.0) || in.ebar_K0 < 0.0 || in.eps_K0 < 0.0 || !std::isfinite(in.alpha))
        throw ValidationError("ebar_K_general: need delta > 0, non-negative intensities and finite alpha");

    const std::vector<double> nodes = detail::grid_nodes(t_start, t_end, step);
    const double drift = in.delta - in.alpha;
    double R = 0.0;
    double J = 0.0;
    std::vector<double> values;
    values.reserve(nodes.size());
    values.push_back(in.ebar_K0);
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
        detail::for_each_piece(rates, nodes[i], nodes[i + 1], [&](double a, double b) {
            const double h = b - a;
            const double mid = 0.5 * (a + b);
            const AnnualRates ar = rates.at(mid);
            auto integrand = [&](double t) {
                return std::exp(drift * (t - t_start) + R + ar.growth * (t - a)) * ar.savings;
            };
            J += h / 6.0 * (integrand(a) + 4.0 * integrand(mid) + integrand(b));
            R += ar.growth * h;
        });
        const double t = nodes[i + 1];
        values.push_back(std::exp(-in.delta * (t - t_start) - R) * (in.ebar_K0 + in.eps_K0 * J));
    }
    GridSolution out{nodes, values, step};
    if (t_end < t_start) {
        std::reverse(out.times.begin(), out.times.end());
        std::reverse(out.values.begin(), out.values.end());
    }
    return out;
}

// dk/dt = -(r(t) + delta) k + s(t), classical RK4.
inline GridSolution integrate_capital_intensity(double k0, const RateFunction& rates, double delta, double t_start,
                                                double t_end, double step = default_step) {
    detail::check_span(rates, t_start, t_end, step);
    if (!std::isfinite(k0) || k0 < 0.0 || !(delta > 0.0))
        throw ValidationError("integrate_capital_intensity: need k0 >= 0 and delta > 0");
    return detail::rk4_solve(rates, k0, t_start, t_end, step,
                             [delta](double, double k, const AnnualRates& ar, int) {
                                 return -(ar.growth + delta) * k + ar.savings;
                             });
}

// d ebar_K/dt = -(r(t) + delta) ebar_K + eps_K(t) s(t), classical RK4.
inline GridSolution integrate_ebar_K_ode(double ebar_K0, const RateFunction& rates, const IntensityPath& eps_K,
                                         double delta, double t_start, double t_end, double step = default_step) {
    detail::check_span(rates, t_start, t_end, step);
    if (!std::isfinite(ebar_K0) || ebar_K0 < 0.0 || !(delta > 0.0))
        throw ValidationError("integrate_ebar_K_ode: need ebar_K0 >= 0 and delta > 0");
    return detail::rk4_solve(rates, ebar_K0, t_start, t_end, step,
                             [&](double t, double e, const AnnualRates& ar, int year) {
                                 return -(ar.growth + delta) * e +
                                        detail::intensity_at(eps_K, t, t_start, year) * ar.savings;
                             });
}

} // namespace kayacap
