#pragma once

// Parameter estimation from historical data.
//
// The capital-emissions parameters (alpha, delta, ebar_K0, eps_K0) are fitted by
// minimizing the mean squared deviation between observed operating-capital
// emissions and Y(t) * ebar_K(t), where ebar_K comes from the quadrature
// solution under the historical growth and savings rates. Time zero is the
// reference year, so ebar_K0 and eps_K0 are reference-year values. The decline
// rates beta and gamma are log-linear OLS slopes.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "kayacap/error.hpp"
#include "kayacap/ingestion.hpp"
#include "kayacap/integrator.hpp"
#include "kayacap/keyvalue.hpp"
#include "kayacap/time_series.hpp"

namespace kayacap {

// ---------------------------------------------------------------------------
// Nelder-Mead simplex
// ---------------------------------------------------------------------------

struct SimplexOptions {
    double diameter_tolerance = 1e-8; // in the coordinates the objective sees
    std::size_t max_evaluations = 10000;
    double initial_step = 0.1;
};

template <std::size_t N>
struct SimplexResult {
    std::array<double, N> x{};
    double value = std::numeric_limits<double>::infinity();
    std::size_t evaluations = 0;
    std::size_t iterations = 0;
    bool converged = false;
};

// Minimize `f` from `x0`. `project` maps any trial point onto the feasible box
// and is applied before every evaluation, so all stored vertices are feasible.
template <std::size_t N, class F, class Project>
SimplexResult<N> nelder_mead(F&& f, std::array<double, N> x0, Project&& project, const SimplexOptions& opt = {}) {
    using Point = std::array<double, N>;
    constexpr double reflect = 1.0, expand = 2.0, contract = 0.5, shrink = 0.5;

    SimplexResult<N> res;
    auto eval = [&](Point& p) {
        p = project(p);
        ++res.evaluations;
        const double v = f(p);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };

    std::array<Point, N + 1> pts;
    std::array<double, N + 1> vals;
    pts[0] = x0;
    vals[0] = eval(pts[0]);
    for (std::size_t i = 0; i < N; ++i) {
        pts[i + 1] = pts[0];
        const double h = pts[0][i] != 0.0 ? opt.initial_step * std::abs(pts[0][i]) : opt.initial_step;
        pts[i + 1][i] += h;
        if (project(pts[i + 1]) == pts[0]) // pushed back onto the start by a bound
            pts[i + 1][i] = pts[0][i] - h;
        vals[i + 1] = eval(pts[i + 1]);
    }

    std::array<std::size_t, N + 1> order;
    auto diameter = [&] {
        double d = 0.0;
        for (std::size_t j = 1; j <= N; ++j)
            for (std::size_t i = 0; i < N; ++i)
                d = std::max(d, std::abs(pts[order[j]][i] - pts[order[0]][i]));
        return d;
    };

    while (true) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
        if (diameter() < opt.diameter_tolerance) {
            res.converged = true;
            break;
        }
        if (res.evaluations >= opt.max_evaluations)
            break;
        ++res.iterations;

        const std::size_t best = order[0], worst = order[N], second = order[N - 1];
        Point centroid{};
        for (std::size_t j = 0; j < N; ++j)
            for (std::size_t i = 0; i < N; ++i)
                centroid[i] += pts[order[j]][i] / static_cast<double>(N);
        auto along = [&](double coef) {
            Point p;
            for (std::size_t i = 0; i < N; ++i)
                p[i] = centroid[i] + coef * (pts[worst][i] - centroid[i]);
            return p;
        };

        Point xr = along(-reflect);
        const double fr = eval(xr);
        if (fr < vals[best]) {
            Point xe = along(-reflect * expand);
            const double fe = eval(xe);
            if (fe < fr) {
                pts[worst] = xe;
                vals[worst] = fe;
            } else {
                pts[worst] = xr;
                vals[worst] = fr;
            }
            continue;
        }
        if (fr < vals[second]) {
            pts[worst] = xr;
            vals[worst] = fr;
            continue;
        }
        const bool outside = fr < vals[worst];
        Point xc = along(outside ? -reflect * contract : contract);
        const double fc = eval(xc);
        if (fc < (outside ? fr : vals[worst])) {
            pts[worst] = xc;
            vals[worst] = fc;
            continue;
        }
        for (std::size_t j = 1; j <= N; ++j) {
            const std::size_t k = order[j];
            for (std::size_t i = 0; i < N; ++i)
                pts[k][i] = pts[best][i] + shrink * (pts[k][i] - pts[best][i]);
            vals[k] = eval(pts[k]);
        }
    }
    res.x = pts[order[0]];
    res.value = vals[order[0]];
    return res;
}

// ---------------------------------------------------------------------------
// Capital-emissions fit
// ---------------------------------------------------------------------------

struct CapitalParameters {
    double alpha = 0.0;
    double delta = 0.0;
    double ebar_K0 = 0.0;
    double eps_K0 = 0.0;
};

struct CapitalFit {
    CapitalParameters params;
    double msd = std::numeric_limits<double>::infinity(); // mean squared deviation, (MtCO2/yr)^2
    double initial_msd = std::numeric_limits<double>::infinity();
    std::size_t evaluations = 0;
    std::size_t iterations = 0;
    bool converged = false;
};

struct CapitalFitOptions {
    double step = default_step;
    unsigned restarts = 5;
    std::uint64_t seed = 42;
    double diameter_tolerance = 1e-8;
    std::size_t max_evaluations = 10000; // per restart
    double max_rate = 0.5;
    bool parallel = true;
};

// Rates table for the dataset; entry y holds on (y - 1, y].
inline RateFunction dataset_rates(const CalibrationDataset& d) {
    return RateFunction(d.reference_year, d.growth, d.savings);
}

inline void check_step_divides_year(double step) {
    if (!(step > 0.0) || std::abs(1.0 / step - std::round(1.0 / step)) > 1e-6)
        throw ConfigError(fmt::format("step {} must divide one year into a whole number of steps", step));
}

// Modelled operating-capital emissions Y(y) * ebar_K(y - reference) for every dataset year.
inline TimeSeries model_capital_emissions(const CalibrationDataset& d, const CapitalParameters& p,
                                          double step = default_step) {
    check_step_divides_year(step);
    const RateFunction rates = dataset_rates(d);
    const CapitalEmissionsInputs in{p.alpha, p.delta, p.ebar_K0, p.eps_K0};
    const double t_first = d.first_year() - d.reference_year;
    const double t_last = d.last_year() - d.reference_year;
    std::vector<double> out;
    out.reserve(d.E_K.size());
    if (t_first < 0.0) {
        const GridSolution back = ebar_K_general(rates, in, 0.0, t_first, step);
        for (int y = d.first_year(); y < d.reference_year; ++y)
            out.push_back(d.gdp_index.at(y) * back.at(y - d.reference_year));
    }
    out.push_back(d.gdp_index.at(d.reference_year) * p.ebar_K0);
    if (t_last > 0.0) {
        const GridSolution fwd = ebar_K_general(rates, in, 0.0, t_last, step);
        for (int y = d.reference_year + 1; y <= d.last_year(); ++y)
            out.push_back(d.gdp_index.at(y) * fwd.at(y - d.reference_year));
    }
    return TimeSeries(d.first_year(), std::move(out), "MtCO2/yr");
}

inline double capital_msd(const CalibrationDataset& d, const CapitalParameters& p, double step = default_step) {
    const TimeSeries model = model_capital_emissions(d, p, step);
    double acc = 0.0;
    for (int y = d.first_year(); y <= d.last_year(); ++y) {
        const double e = d.E_K.at(y) - model.at(y);
        acc += e * e;
    }
    return acc / static_cast<double>(d.E_K.size());
}

inline CapitalFit fit_capital(const CalibrationDataset& d, const CapitalParameters& guess,
                              const CapitalFitOptions& opt = {}) {
    d.validate();
    check_step_divides_year(opt.step);
    if (d.E_K.size() < 10)
        throw ValidationError(fmt::format("fit_capital: need at least 10 years of data, got {}", d.E_K.size()));
    auto rate_ok = [&](double v) { return v > 0.0 && v < opt.max_rate; };
    if (!rate_ok(guess.alpha) || !rate_ok(guess.delta) || !(guess.ebar_K0 > 0.0) || !(guess.eps_K0 > 0.0))
        throw ValidationError(fmt::format("fit_capital: initial guess outside bounds (rates in (0, {}), intensities > 0)",
                                          opt.max_rate));

    // Search in coordinates scaled by the initial guess.
    using Point = std::array<double, 4>;
    const Point scale{guess.alpha, guess.delta, guess.ebar_K0, guess.eps_K0};
    auto unscale = [&](const Point& x) {
        return CapitalParameters{x[0] * scale[0], x[1] * scale[1], x[2] * scale[2], x[3] * scale[3]};
    };
    auto project = [&](Point x) {
        x[0] = std::clamp(x[0], 0.0, opt.max_rate / scale[0]);
        x[1] = std::clamp(x[1], 1e-6 / scale[1], opt.max_rate / scale[1]);
        x[2] = std::max(x[2], 0.0);
        x[3] = std::max(x[3], 0.0);
        return x;
    };
    auto objective = [&](const Point& x) { return capital_msd(d, unscale(x), opt.step); };

    SimplexOptions sopt;
    sopt.diameter_tolerance = opt.diameter_tolerance;

    auto run_restart = [&](unsigned k) {
        Point start{1.0, 1.0, 1.0, 1.0};
        if (k > 0) {
            std::mt19937_64 rng(opt.seed + k);
            std::uniform_real_distribution<double> jitter(-std::log(2.0), std::log(2.0));
            for (double& v : start)
                v *= std::exp(jitter(rng));
            start = project(start);
        }
        // A converged simplex is restarted once from its best vertex to guard against collapse.
        SimplexOptions local = sopt;
        local.max_evaluations = opt.max_evaluations;
        SimplexResult<4> first = nelder_mead(objective, start, project, local);
        SimplexOptions polish = local;
        polish.max_evaluations = opt.max_evaluations > first.evaluations ? opt.max_evaluations - first.evaluations : 0;
        if (polish.max_evaluations == 0)
            return first;
        SimplexResult<4> second = nelder_mead(objective, first.x, project, polish);
        second.evaluations += first.evaluations;
        second.iterations += first.iterations;
        if (second.value > first.value) {
            first.evaluations = second.evaluations;
            first.iterations = second.iterations;
            return first;
        }
        return second;
    };

    const unsigned n = std::max(1u, opt.restarts);
    std::vector<SimplexResult<4>> results(n);
    if (opt.parallel && n > 1) {
        std::vector<std::future<SimplexResult<4>>> jobs;
        for (unsigned k = 0; k < n; ++k)
            jobs.push_back(std::async(std::launch::async, run_restart, k));
        for (unsigned k = 0; k < n; ++k)
            results[k] = jobs[k].get();
    } else {
        for (unsigned k = 0; k < n; ++k)
            results[k] = run_restart(k);
    }

    std::size_t best = 0;
    for (std::size_t k = 1; k < n; ++k)
        if (results[k].value < results[best].value)
            best = k;

    CapitalFit fit;
    fit.initial_msd = capital_msd(d, guess, opt.step);
    for (const auto& r : results) {
        fit.evaluations += r.evaluations;
        fit.iterations += r.iterations;
    }
    fit.params = unscale(results[best].x);
    fit.msd = results[best].value;
    fit.converged = results[best].converged && std::isfinite(fit.msd);
    if (!(fit.msd <= fit.initial_msd)) {
        fit.params = guess;
        fit.msd = fit.initial_msd;
    }
    return fit;
}

// ---------------------------------------------------------------------------
// Log-linear decline fits
// ---------------------------------------------------------------------------

struct YearWindow {
    int start = 0;
    int end = 0;
    friend bool operator==(const YearWindow&, const YearWindow&) = default;
};

struct DeclineFit {
    double rate = 0.0;      // negated OLS slope of ln(value) on year, 1/yr
    double intercept = 0.0; // fitted ln(value) at window.end
    YearWindow window;
    double r_squared = 1.0;
};

inline DeclineFit fit_log_decline(const TimeSeries& series, const YearWindow& window) {
    if (window.end - window.start + 1 < 3)
        throw ValidationError(fmt::format("decline window {}-{} shorter than 3 years", window.start, window.end));
    if (!series.contains(window.start) || !series.contains(window.end))
        throw ValidationError(fmt::format("decline window {}-{} outside data span {}-{}", window.start, window.end,
                                          series.first_year(), series.last_year()));
    const auto n = static_cast<double>(window.end - window.start + 1);
    double xbar = 0.0, ybar = 0.0;
    std::vector<double> ly;
    for (int y = window.start; y <= window.end; ++y) {
        const double v = series.at(y);
        if (!(v > 0.0))
            throw ValidationError(fmt::format("non-positive value {} in {} inside decline window", v, y));
        ly.push_back(std::log(v));
        xbar += y;
        ybar += ly.back();
    }
    xbar /= n;
    ybar /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (int y = window.start; y <= window.end; ++y) {
        const double dx = y - xbar, dy = ly[static_cast<std::size_t>(y - window.start)] - ybar;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    const double slope = sxy / sxx;
    DeclineFit fit;
    fit.rate = -slope;
    fit.intercept = ybar + slope * (window.end - xbar);
    fit.window = window;
    // Zero variance up to rounding in the logs: R^2 reported as 1.
    if (syy > 1e-24 * n * std::max(1.0, ybar * ybar)) {
        double ss_res = 0.0;
        for (int y = window.start; y <= window.end; ++y) {
            const double e = ly[static_cast<std::size_t>(y - window.start)] - (ybar + slope * (y - xbar));
            ss_res += e * e;
        }
        fit.r_squared = 1.0 - ss_res / syy;
    }
    return fit;
}

inline std::vector<DeclineFit> breakpoint_report(const TimeSeries& series, const std::vector<YearWindow>& windows) {
    std::vector<DeclineFit> out;
    out.reserve(windows.size());
    for (const auto& w : windows)
        out.push_back(fit_log_decline(series, w));
    return out;
}

// Consumption intensity E_C / ((1 - s) Y).
inline TimeSeries consumption_intensity(const CalibrationDataset& d) {
    return d.E_C.transformed([&](int y, double e) { return e / ((1.0 - d.savings.at(y)) * d.gdp_index.at(y)); },
                             "MtCO2");
}

// Investment intensity E_I / (s Y).
inline TimeSeries investment_intensity(const CalibrationDataset& d) {
    return d.E_I.transformed([&](int y, double e) { return e / (d.savings.at(y) * d.gdp_index.at(y)); }, "MtCO2");
}

// ---------------------------------------------------------------------------
// Fit report
// ---------------------------------------------------------------------------

// Everything a projection needs from calibration: fitted rates, historical
// macro averages, and reference-year component levels.
struct FitReport {
    int reference_year = default_reference_year;
    CapitalFit capital;
    DeclineFit beta;
    DeclineFit gamma;
    std::string beta_basis = "intensity"; // or "emissions"
    double r_hist = 0.0;                  // mean growth over the data span
    double s_hist = 0.0;                  // mean savings rate over the data span
    double E_K_ref = 0.0;                 // observed component levels in the reference year, MtCO2/yr
    double E_C_ref = 0.0;
    double E_I_ref = 0.0;
    std::vector<DeclineFit> breakpoints;
};

inline std::string window_text(const YearWindow& w) { return fmt::format("{}-{}", w.start, w.end); }

inline YearWindow parse_window(const std::string& text, const std::string& where = "window") {
    auto dash = text.find('-', 1);
    std::optional<int> a, b;
    if (dash != std::string::npos) {
        a = detail::parse_int(std::string_view(text).substr(0, dash));
        b = detail::parse_int(std::string_view(text).substr(dash + 1));
    }
    if (!a || !b || *a > *b)
        throw ConfigError(fmt::format("{}: expected 'START-END' years, got '{}'", where, text));
    return {*a, *b};
}

inline void write_fit_report(std::ostream& out, const FitReport& r) {
    out << "# capital-extended Kaya fit report\n";
    out << fmt::format("reference_year = {}\n", r.reference_year);
    out << fmt::format("alpha = {:.17g}\n", r.capital.params.alpha);
    out << fmt::format("delta = {:.17g}\n", r.capital.params.delta);
    out << fmt::format("ebar_K0 = {:.17g}\n", r.capital.params.ebar_K0);
    out << fmt::format("eps_K0 = {:.17g}\n", r.capital.params.eps_K0);
    out << fmt::format("capital_msd = {:.17g}\n", r.capital.msd);
    out << fmt::format("capital_converged = {}\n", r.capital.converged);
    out << fmt::format("capital_evaluations = {}\n", r.capital.evaluations);
    out << fmt::format("beta = {:.17g}\n", r.beta.rate);
    out << fmt::format("beta_window = {}\n", window_text(r.beta.window));
    out << fmt::format("beta_basis = {}\n", r.beta_basis);
    out << fmt::format("beta_r_squared = {:.17g}\n", r.beta.r_squared);
    out << fmt::format("gamma = {:.17g}\n", r.gamma.rate);
    out << fmt::format("gamma_window = {}\n", window_text(r.gamma.window));
    out << fmt::format("gamma_r_squared = {:.17g}\n", r.gamma.r_squared);
    out << fmt::format("r = {:.17g}\n", r.r_hist);
    out << fmt::format("s = {:.17g}\n", r.s_hist);
    out << fmt::format("E_K_ref = {:.17g}\n", r.E_K_ref);
    out << fmt::format("E_C_ref = {:.17g}\n", r.E_C_ref);
    out << fmt::format("E_I_ref = {:.17g}\n", r.E_I_ref);
    for (std::size_t i = 0; i < r.breakpoints.size(); ++i)
        out << fmt::format("breakpoint_{} = {} {:.17g}\n", i, window_text(r.breakpoints[i].window),
                           r.breakpoints[i].rate);
}

// Reads a fit report. Diagnostic keys are optional so hand-written seeds
// need only the parameters and reference-year levels.
inline FitReport parse_fit_report(const KeyValueDocument& doc) {
    const KeyValueSection& kv = doc.root();
    FitReport r;
    r.reference_year = kv.get_int("reference_year");
    r.capital.params = {kv.get_double("alpha"), kv.get_double("delta"), kv.get_double("ebar_K0"),
                        kv.get_double("eps_K0")};
    r.capital.msd = kv.has("capital_msd") ? kv.get_double("capital_msd") : 0.0;
    r.capital.converged = kv.has("capital_converged") ? kv.get_bool("capital_converged") : true;
    r.capital.evaluations = kv.has("capital_evaluations") ? static_cast<std::size_t>(kv.get_int("capital_evaluations")) : 0;
    r.beta.rate = kv.get_double("beta");
    r.gamma.rate = kv.get_double("gamma");
    if (auto w = kv.get_optional("beta_window"))
        r.beta.window = parse_window(*w, "beta_window");
    if (auto w = kv.get_optional("gamma_window"))
        r.gamma.window = parse_window(*w, "gamma_window");
    if (kv.has("beta_r_squared"))
        r.beta.r_squared = kv.get_double("beta_r_squared");
    if (kv.has("gamma_r_squared"))
        r.gamma.r_squared = kv.get_double("gamma_r_squared");
    r.beta_basis = kv.get_optional("beta_basis").value_or("intensity");
    r.r_hist = kv.get_double("r");
    r.s_hist = kv.get_double("s");
    r.E_K_ref = kv.get_double("E_K_ref");
    r.E_C_ref = kv.get_double("E_C_ref");
    r.E_I_ref = kv.get_double("E_I_ref");
    for (const auto& e : kv.entries()) {
        if (e.key.rfind("breakpoint_", 0) != 0)
            continue;
        auto space = e.value.find(' ');
        auto rate = space == std::string::npos ? std::nullopt : detail::parse_double(e.value.substr(space + 1));
        if (!rate)
            throw ConfigError(fmt::format("{}:{}: breakpoint entry must be 'START-END RATE'", kv.source(), e.line));
        DeclineFit f;
        f.window = parse_window(e.value.substr(0, space), e.key);
        f.rate = *rate;
        r.breakpoints.push_back(f);
    }
    if (!(r.s_hist > 0.0 && r.s_hist < 1.0))
        throw ValidationError(fmt::format("fit report: historical savings rate {} outside (0, 1)", r.s_hist));
    if (r.E_K_ref < 0.0 || r.E_C_ref < 0.0 || r.E_I_ref < 0.0)
        throw ValidationError("fit report: negative reference-year emissions");
    return r;
}

inline FitReport load_fit_report(const std::filesystem::path& path) {
    return parse_fit_report(KeyValueDocument::load(path));
}

struct CalibrationOptions {
    CapitalParameters guess{0.02, 0.05, 0.0, 0.0}; // zero intensities: seeded from the data
    CapitalFitOptions capital;
    std::optional<YearWindow> beta_window;  // default: full span
    YearWindow gamma_window{1982, 2005};
    std::vector<YearWindow> breakpoint_windows{{1971, 1981}, {1982, 2005}};
    bool beta_on_emissions = false;
};

// Full calibration pipeline over one dataset.
inline FitReport calibrate(const CalibrationDataset& d, const CalibrationOptions& opt) {
    d.validate();
    FitReport r;
    r.reference_year = d.reference_year;
    CapitalParameters guess = opt.guess;
    if (!(guess.ebar_K0 > 0.0))
        guess.ebar_K0 = d.E_K.at(d.reference_year) / d.gdp_index.at(d.reference_year);
    if (!(guess.eps_K0 > 0.0)) // stationary ebar_K under reference-year rates
        guess.eps_K0 = guess.ebar_K0 * std::max(d.growth.at(d.reference_year) + guess.delta, guess.delta) /
                       std::max(d.savings.at(d.reference_year), 0.01);
    r.capital = fit_capital(d, guess, opt.capital);

    const YearWindow full{d.first_year(), d.last_year()};
    const TimeSeries consumption = opt.beta_on_emissions ? d.E_C : consumption_intensity(d);
    r.beta_basis = opt.beta_on_emissions ? "emissions" : "intensity";
    r.beta = fit_log_decline(consumption, opt.beta_window.value_or(full));
    const TimeSeries investment = investment_intensity(d);
    r.gamma = fit_log_decline(investment, opt.gamma_window);
    r.breakpoints = breakpoint_report(investment, opt.breakpoint_windows);

    const auto growth = d.growth.values();
    const auto savings = d.savings.values();
    r.r_hist = std::accumulate(growth.begin(), growth.end(), 0.0) / static_cast<double>(growth.size());
    r.s_hist = std::accumulate(savings.begin(), savings.end(), 0.0) / static_cast<double>(savings.size());
    r.E_K_ref = d.E_K.at(d.reference_year);
    r.E_C_ref = d.E_C.at(d.reference_year);
    r.E_I_ref = d.E_I.at(d.reference_year);
    return r;
}

} // namespace kayacap
