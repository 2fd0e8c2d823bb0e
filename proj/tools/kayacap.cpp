// kayacap: ingest sectoral data, calibrate, and project scenarios.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "kayacap/kayacap.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace kayacap;

namespace {

constexpr const char* version = "0.1.0";

struct RunConfig {
    fs::path config_path;
    fs::path base_dir;
    std::optional<fs::path> sectors, cement, macro, mapping, fit_report;
    fs::path scenario_dir = KAYACAP_DEFAULT_SCENARIO_DIR;
    fs::path output;
    int reference_year = default_reference_year;
    double step = default_step;
    std::optional<int> baseline_year;
    std::optional<double> baseline_emissions;
    std::uint64_t seed = 42;
    bool beta_on_emissions = false;
    std::vector<std::string> scenarios;
    std::optional<YearWindow> beta_window;
    YearWindow gamma_window{1982, 2005};
    std::vector<YearWindow> breakpoint_windows{{1971, 1981}, {1982, 2005}};
};

// "1/12" or a decimal.
double parse_step(const std::string& text) {
    std::optional<double> v;
    if (auto slash = text.find('/'); slash != std::string::npos) {
        auto num = detail::parse_double(std::string_view(text).substr(0, slash));
        auto den = detail::parse_double(std::string_view(text).substr(slash + 1));
        if (num && den && *den != 0.0)
            v = *num / *den;
    } else {
        v = detail::parse_double(text);
    }
    if (!v || !(*v > 0.0))
        throw ConfigError(fmt::format("step must be a positive number or fraction, got '{}'", text));
    check_step_divides_year(*v);
    return *v;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text + ",") {
        if (c == ',') {
            auto t = detail::trim(cur);
            if (!t.empty())
                out.emplace_back(t);
            cur.clear();
        } else {
            cur += c;
        }
    }
    return out;
}

RunConfig load_config(const fs::path& path) {
    if (!fs::exists(path))
        throw IoError(fmt::format("config file '{}' not found", path.string()));
    const auto doc = KeyValueDocument::load(path);
    const auto& kv = doc.root();
    if (!doc.sections().empty())
        throw ConfigError(fmt::format("{}: sections are not used in run configs", path.string()));
    kv.check_keys({"sectors", "cement", "macro", "mapping", "fit_report", "scenario_dir", "output", "reference_year",
                   "step", "baseline_year", "baseline_emissions", "seed", "beta_on_emissions", "scenarios",
                   "beta_window", "gamma_window", "breakpoint_windows"});
    RunConfig cfg;
    cfg.config_path = path;
    cfg.base_dir = fs::absolute(path).parent_path();
    auto resolve = [&](const std::string& key) -> std::optional<fs::path> {
        if (auto v = kv.get_optional(key))
            return (cfg.base_dir / *v).lexically_normal();
        return std::nullopt;
    };
    cfg.sectors = resolve("sectors");
    cfg.cement = resolve("cement");
    cfg.macro = resolve("macro");
    cfg.mapping = resolve("mapping");
    cfg.fit_report = resolve("fit_report");
    if (auto d = resolve("scenario_dir"))
        cfg.scenario_dir = *d;
    cfg.output = resolve("output").value_or(cfg.base_dir / "kayacap_out");
    if (kv.has("reference_year"))
        cfg.reference_year = kv.get_int("reference_year");
    if (auto s = kv.get_optional("step"))
        cfg.step = parse_step(*s);
    if (kv.has("baseline_year"))
        cfg.baseline_year = kv.get_int("baseline_year");
    if (kv.has("baseline_emissions"))
        cfg.baseline_emissions = kv.get_double("baseline_emissions");
    if (kv.has("seed")) {
        const int seed = kv.get_int("seed");
        if (seed < 0)
            throw ConfigError(fmt::format("{}: seed must be non-negative", path.string()));
        cfg.seed = static_cast<std::uint64_t>(seed);
    }
    if (kv.has("beta_on_emissions"))
        cfg.beta_on_emissions = kv.get_bool("beta_on_emissions");
    if (auto s = kv.get_optional("scenarios"))
        cfg.scenarios = split_list(*s);
    if (auto w = kv.get_optional("beta_window"))
        cfg.beta_window = parse_window(*w, "beta_window");
    if (auto w = kv.get_optional("gamma_window"))
        cfg.gamma_window = parse_window(*w, "gamma_window");
    if (auto w = kv.get_optional("breakpoint_windows")) {
        cfg.breakpoint_windows.clear();
        for (const auto& item : split_list(*w))
            cfg.breakpoint_windows.push_back(parse_window(item, "breakpoint_windows"));
    }
    return cfg;
}

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError(fmt::format("cannot read '{}' for hashing", path.string()));
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[1 << 14];
    while (in) {
        in.read(buf, sizeof buf);
        EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    std::string hex;
    for (unsigned int i = 0; i < len; ++i)
        hex += fmt::format("{:02x}", md[i]);
    return hex;
}

// Run manifest: hashed inputs and outputs, echoed parameters. No timestamps, so reruns are byte-identical.
class Manifest {
public:
    Manifest(const RunConfig& cfg, std::string command) : cfg_(cfg), command_(std::move(command)) {
        doc_["tool"] = "kayacap";
        doc_["version"] = version;
        doc_["command"] = command_;
        doc_["inputs"] = json::array();
        doc_["parameters"] = json::object();
        doc_["outputs"] = json::array();
        input("config", cfg.config_path);
    }

    void input(const std::string& role, const fs::path& p) {
        doc_["inputs"].push_back({{"role", role}, {"path", shown(p)}, {"sha256", sha256_file(p)}});
    }
    void output(const fs::path& p) { doc_["outputs"].push_back({{"path", shown(p)}, {"sha256", sha256_file(p)}}); }
    json& parameters() { return doc_["parameters"]; }

    void write() const {
        const fs::path p = cfg_.output / fmt::format("manifest_{}.json", command_);
        std::ofstream out(p);
        if (!out)
            throw IoError(fmt::format("cannot write '{}'", p.string()));
        out << doc_.dump(2) << '\n';
    }

private:
    std::string shown(const fs::path& p) const {
        return fs::absolute(p).lexically_normal().lexically_proximate(cfg_.base_dir).generic_string();
    }

    const RunConfig& cfg_;
    std::string command_;
    json doc_;
};

std::ofstream open_output(const fs::path& p) {
    std::ofstream out(p);
    if (!out)
        throw IoError(fmt::format("cannot write '{}'", p.string()));
    return out;
}

void ensure_output_dir(const RunConfig& cfg) {
    std::error_code ec;
    fs::create_directories(cfg.output, ec);
    if (ec)
        throw IoError(fmt::format("cannot create output directory '{}': {}", cfg.output.string(), ec.message()));
}

const fs::path& require_path(const std::optional<fs::path>& p, const char* key, const RunConfig& cfg) {
    if (!p)
        throw ConfigError(fmt::format("{}: '{}' is required for this command", cfg.config_path.string(), key));
    return *p;
}

int cmd_ingest(const RunConfig& cfg) {
    ensure_output_dir(cfg);
    Manifest manifest(cfg, "ingest");
    const auto sectors = load_sector_csv(require_path(cfg.sectors, "sectors", cfg));
    manifest.input("sectors", *cfg.sectors);
    ProxyMapping mapping = ProxyMapping::standard();
    if (cfg.mapping) {
        mapping = load_mapping(*cfg.mapping);
        manifest.input("mapping", *cfg.mapping);
    }
    std::optional<SectorSeries> cement;
    if (cfg.cement) {
        auto rows = load_sector_csv(*cfg.cement);
        if (rows.size() != 1)
            throw ValidationError(fmt::format("{}: expected a single cement row, found {}", cfg.cement->string(), rows.size()));
        cement = rows.front();
        manifest.input("cement", *cfg.cement);
    }
    const auto components = build_components(sectors, mapping, cement);
    const auto raw = load_macro_csv(require_path(cfg.macro, "macro", cfg));
    manifest.input("macro", *cfg.macro);
    const auto macro = derive_macro(raw.gdp, raw.savings, cfg.reference_year);
    const auto d = make_dataset(components, macro, cfg.reference_year);

    const fs::path out_path = cfg.output / "dataset.csv";
    {
        auto out = open_output(out_path);
        write_dataset(out, d);
    }
    manifest.output(out_path);
    manifest.parameters()["reference_year"] = cfg.reference_year;
    manifest.write();

    const int y = cfg.reference_year;
    const double k = d.E_K.at(y), c = d.E_C.at(y), i = d.E_I.at(y), total = k + c + i;
    fmt::print("dataset {}-{} ({} years, {} sectors) -> {}\n", d.first_year(), d.last_year(), d.E_K.size(),
               sectors.size() + (cement ? 1 : 0), out_path.string());
    fmt::print("{} shares: capital {:.1f}%, consumption {:.1f}%, investment {:.1f}% of {:.1f} MtCO2\n", y,
               100.0 * k / total, 100.0 * c / total, 100.0 * i / total, total);
    return 0;
}

int cmd_fit(const RunConfig& cfg) {
    const fs::path ds_path = cfg.output / "dataset.csv";
    if (!fs::exists(ds_path))
        throw IoError(fmt::format("{} not found: run ingest first", ds_path.string()));
    auto in = detail::open_input(ds_path);
    const auto d = read_dataset(in, ds_path.string());
    if (d.reference_year != cfg.reference_year)
        throw ConfigError(fmt::format("dataset reference year {} differs from the requested {}; rerun ingest",
                                      d.reference_year, cfg.reference_year));

    CalibrationOptions opt;
    opt.capital.step = cfg.step;
    opt.capital.seed = cfg.seed;
    opt.beta_on_emissions = cfg.beta_on_emissions;
    opt.beta_window = cfg.beta_window;
    opt.gamma_window = cfg.gamma_window;
    opt.breakpoint_windows = cfg.breakpoint_windows;
    const FitReport r = calibrate(d, opt);

    Manifest manifest(cfg, "fit");
    manifest.input("dataset", ds_path);
    const fs::path report_path = cfg.output / "fit_report.txt";
    {
        auto out = open_output(report_path);
        write_fit_report(out, r);
    }
    const fs::path mvo_path = cfg.output / "model_vs_observed.csv";
    {
        auto out = open_output(mvo_path);
        const auto model = model_capital_emissions(d, r.capital.params, cfg.step);
        out << "year,observed_E_K,model_E_K,residual\n";
        for (int y = d.first_year(); y <= d.last_year(); ++y)
            out << fmt::format("{},{:.10g},{:.10g},{:.10g}\n", y, d.E_K.at(y), model.at(y), d.E_K.at(y) - model.at(y));
    }
    const fs::path bp_path = cfg.output / "breakpoints.csv";
    {
        auto out = open_output(bp_path);
        out << "start,end,rate,intercept,r_squared\n";
        for (const auto& b : r.breakpoints)
            out << fmt::format("{},{},{:.10g},{:.10g},{:.10g}\n", b.window.start, b.window.end, b.rate, b.intercept,
                               b.r_squared);
    }
    for (const auto& p : {report_path, mvo_path, bp_path})
        manifest.output(p);
    auto& params = manifest.parameters();
    params["step"] = cfg.step;
    params["seed"] = cfg.seed;
    params["beta_basis"] = r.beta_basis;
    params["beta_window"] = window_text(r.beta.window);
    params["gamma_window"] = window_text(r.gamma.window);
    manifest.write();

    const auto& c = r.capital.params;
    fmt::print("alpha {:.2f}%/yr  delta {:.2f}%/yr  ebar_K0 {:.0f}  eps_K0 {:.0f}  (rms {:.1f} MtCO2, {} evaluations)\n",
               100 * c.alpha, 100 * c.delta, c.ebar_K0, c.eps_K0, std::sqrt(r.capital.msd), r.capital.evaluations);
    fmt::print("beta {:.2f}%/yr ({} {})  gamma {:.2f}%/yr ({})\n", 100 * r.beta.rate, r.beta_basis,
               window_text(r.beta.window), 100 * r.gamma.rate, window_text(r.gamma.window));
    for (const auto& b : r.breakpoints)
        fmt::print("  investment intensity {}: {:.2f}%/yr (R^2 {:.3f})\n", window_text(b.window), 100 * b.rate,
                   b.r_squared);
    fmt::print("historical r {:.2f}%  s {:.2f}%  -> {}\n", 100 * r.r_hist, 100 * r.s_hist, report_path.string());
    if (!r.capital.converged) {
        fmt::print(stderr, "error: capital-parameter search did not converge within {} evaluations per restart; "
                           "best point written to {}\n",
                   opt.capital.max_evaluations, report_path.string());
        return static_cast<int>(ErrorKind::numeric);
    }
    return 0;
}

struct Projection {
    ScenarioPlan plan;
    Trajectory trajectory;
};

fs::path fit_report_path(const RunConfig& cfg) {
    const fs::path p = cfg.fit_report.value_or(cfg.output / "fit_report.txt");
    if (!fs::exists(p))
        throw IoError(fmt::format("{} not found: run fit first, or set fit_report in the config", p.string()));
    return p;
}

std::vector<Projection> run_projections(const RunConfig& cfg, const FitReport& fit, std::vector<std::string> names) {
    if (names.empty())
        names = cfg.scenarios;
    if (names.empty())
        names = named_plan_names();
    std::vector<ScenarioPlan> plans;
    for (const auto& n : names) {
        const bool is_file = n.find('/') != std::string::npos || fs::path(n).extension() == ".scn";
        plans.push_back(is_file ? load_plan(n, fit) : named_plan(n, fit, cfg.scenario_dir));
        if (cfg.baseline_year)
            plans.back().baseline_year = *cfg.baseline_year;
    }
    std::vector<std::future<Trajectory>> jobs;
    for (const auto& p : plans)
        jobs.push_back(std::async(std::launch::async, [&p] { return project(p); }));
    std::vector<Projection> out;
    for (std::size_t i = 0; i < plans.size(); ++i)
        out.push_back({plans[i], jobs[i].get()});
    return out;
}

// Rounded parameter row for the final regime of a plan.
struct PlanSummary {
    double r, delta, k_multiplier, alpha, beta, gamma, s;
};

PlanSummary summarize(const Projection& pr, const FitReport& fit) {
    const ParameterSet& p = pr.trajectory.regimes.back();
    const double k_present = k_infinity(fit.s_hist, fit.r_hist, fit.capital.params.delta);
    const double k = p.k_infty.value_or(k_infinity(p.s, p.r, p.delta));
    return {p.r, p.delta, k / k_present, p.alpha, p.beta, p.gamma, p.s};
}

int cmd_project(const RunConfig& cfg, const std::vector<std::string>& names) {
    ensure_output_dir(cfg);
    const fs::path fit_path = fit_report_path(cfg);
    const FitReport fit = load_fit_report(fit_path);
    const auto runs = run_projections(cfg, fit, names);

    Manifest manifest(cfg, "project");
    manifest.input("fit_report", fit_path);
    for (const auto& pr : runs) {
        const fs::path p = cfg.output / fmt::format("trajectory_{}.csv", pr.plan.name);
        {
            auto out = open_output(p);
            write_trajectory_csv(out, pr.trajectory);
        }
        manifest.output(p);
    }

    const fs::path table_path = cfg.output / "scenario_parameters.csv";
    {
        auto out = open_output(table_path);
        out << "scenario,r_pct,delta_pct,k_infty_multiplier,alpha_pct,beta_pct,gamma_pct,s_pct,E_total_end\n";
        for (const auto& pr : runs) {
            const auto s = summarize(pr, fit);
            out << fmt::format("{},{:.1f},{:.1f},{:.2f},{:.1f},{:.1f},{:.1f},{:.1f},{:.1f}\n", pr.plan.name, 100 * s.r,
                               100 * s.delta, s.k_multiplier, 100 * s.alpha, 100 * s.beta, 100 * s.gamma, 100 * s.s,
                               pr.trajectory.records.back().emissions.E_total);
        }
    }
    manifest.output(table_path);

    if (cfg.baseline_emissions) {
        const fs::path rel_path = cfg.output / "relative_summary.csv";
        {
            auto out = open_output(rel_path);
            std::vector<std::vector<RelativeRow>> tables;
            out << "year";
            for (const auto& pr : runs) {
                out << ',' << pr.plan.name;
                tables.push_back(relative_report(pr.trajectory, *cfg.baseline_emissions));
            }
            out << '\n';
            for (std::size_t row = 0; row < tables.front().size(); ++row) {
                out << tables.front()[row].year;
                for (const auto& t : tables)
                    out << fmt::format(",{:.4f}", row < t.size() ? t[row].percent : std::nan(""));
                out << '\n';
            }
        }
        manifest.output(rel_path);
        manifest.parameters()["baseline_emissions"] = *cfg.baseline_emissions;
    } else {
        fmt::print("no baseline_emissions given: relative_summary.csv not written\n");
    }
    manifest.parameters()["baseline_year"] = runs.front().plan.baseline_year;
    json plans = json::array();
    for (const auto& pr : runs)
        plans.push_back(pr.plan.name);
    manifest.parameters()["plans"] = plans;
    manifest.write();

    for (const auto& pr : runs)
        fmt::print("{:<24} {} E_total {:8.1f} MtCO2/yr\n", pr.plan.name, pr.trajectory.records.back().year,
                   pr.trajectory.records.back().emissions.E_total);
    return 0;
}

int cmd_report(const RunConfig& cfg, const std::vector<std::string>& names) {
    const FitReport fit = load_fit_report(fit_report_path(cfg));
    const auto& c = fit.capital.params;
    fmt::print("fit (reference year {})\n", fit.reference_year);
    fmt::print("  alpha {:.1f}%  delta {:.1f}%  ebar_K0 {:.0f}  eps_K0 {:.0f}  beta {:.1f}%  gamma {:.1f}%\n",
               100 * c.alpha, 100 * c.delta, c.ebar_K0, c.eps_K0, 100 * fit.beta.rate, 100 * fit.gamma.rate);
    fmt::print("  historical r {:.1f}%  s {:.1f}%  k_infty {:.3f}\n", 100 * fit.r_hist, 100 * fit.s_hist,
               k_infinity(fit.s_hist, fit.r_hist, c.delta));
    fmt::print("  {} levels: E_K {:.1f}  E_C {:.1f}  E_I {:.1f} MtCO2/yr\n\n", fit.reference_year, fit.E_K_ref,
               fit.E_C_ref, fit.E_I_ref);

    const auto runs = run_projections(cfg, fit, names);
    const int base_year = runs.front().plan.baseline_year;
    fmt::print("{:<24} {:>5} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>10} {:>10}\n", "scenario", "r", "delta", "k_inf",
               "alpha", "beta", "gamma", "s", "E_end", cfg.baseline_emissions ? fmt::format("% of {}", base_year) : "");
    for (const auto& pr : runs) {
        const auto s = summarize(pr, fit);
        const double e = pr.trajectory.records.back().emissions.E_total;
        fmt::print("{:<24} {:5.1f} {:6.1f} {:6.2f} {:6.1f} {:6.1f} {:6.1f} {:6.1f} {:10.1f} {:>10}\n", pr.plan.name,
                   100 * s.r, 100 * s.delta, s.k_multiplier, 100 * s.alpha, 100 * s.beta, 100 * s.gamma, 100 * s.s, e,
                   cfg.baseline_emissions ? fmt::format("{:.1f}", 100 * e / *cfg.baseline_emissions) : "");
    }
    if (!cfg.baseline_emissions)
        fmt::print("\n(set baseline_emissions for the {} total to report percentages)\n", base_year);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Capital-extended Kaya decomposition: calibration and scenario projection"};
    app.set_version_flag("--version", version);
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::optional<int> reference_year, baseline_year;
    std::optional<std::string> step, output;
    std::optional<double> baseline_emissions;
    std::optional<std::uint64_t> seed;
    bool beta_on_emissions = false;
    std::vector<std::string> plans;

    app.add_option("--config", config_path, "run configuration file")->required();
    app.add_option("--reference-year", reference_year, "year with t = 0 and Y = 1");
    app.add_option("--step", step, "integration step in years, e.g. 1/12");
    app.add_option("--output", output, "output directory (overrides the config)");
    app.add_option("--baseline-year", baseline_year, "year the relative report refers to");
    app.add_option("--baseline-emissions", baseline_emissions, "total emissions in the baseline year, MtCO2/yr");
    app.add_option("--seed", seed, "seed for the solver restarts");
    app.add_flag("--beta-on-emissions", beta_on_emissions, "fit beta on raw consumption emissions, not intensity");

    auto* ingest = app.add_subcommand("ingest", "load and validate inputs, write dataset.csv");
    auto* fit = app.add_subcommand("fit", "calibrate against dataset.csv, write fit_report.txt");
    auto* project_cmd = app.add_subcommand("project", "project scenarios, write trajectory CSVs");
    auto* report = app.add_subcommand("report", "print fitted parameters and scenario endpoints");
    project_cmd->add_option("plans", plans, "plan names or .scn files (default: config, then all named plans)");
    report->add_option("plans", plans, "plan names or .scn files");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(ErrorKind::config);
    }

    try {
        RunConfig cfg = load_config(config_path);
        if (reference_year)
            cfg.reference_year = *reference_year;
        if (step)
            cfg.step = parse_step(*step);
        if (output)
            cfg.output = fs::absolute(*output);
        if (baseline_year)
            cfg.baseline_year = *baseline_year;
        if (baseline_emissions)
            cfg.baseline_emissions = *baseline_emissions;
        if (seed)
            cfg.seed = *seed;
        if (beta_on_emissions)
            cfg.beta_on_emissions = true;
        if (cfg.baseline_emissions && !(*cfg.baseline_emissions > 0.0))
            throw ConfigError("baseline emissions must be positive");

        if (*ingest)
            return cmd_ingest(cfg);
        if (*fit)
            return cmd_fit(cfg);
        if (*project_cmd)
            return cmd_project(cfg, plans);
        if (*report)
            return cmd_report(cfg, plans);
    } catch (const Error& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return e.exit_code();
    } catch (const fs::filesystem_error& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return static_cast<int>(ErrorKind::io);
    } catch (const std::exception& e) {
        fmt::print(stderr, "internal error: {}\n", e.what());
        return 1;
    }
    return 0;
}
