#pragma once

// Loading and validation of sectoral emissions and macroeconomic series,
// and their reduction to the three emissions components.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "kayacap/error.hpp"
#include "kayacap/time_series.hpp"

namespace kayacap {

inline constexpr int default_reference_year = 2005;

struct SectorSeries {
    std::string name;
    TimeSeries series; // MtCO2/yr
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    while (!s.empty() && is_space(s.front()))
        s.remove_prefix(1);
    while (!s.empty() && is_space(s.back()))
        s.remove_suffix(1);
    return s;
}

// Comma-separated fields; double quotes protect embedded commas.
inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.emplace_back(trim(cur));
    return fields;
}

inline std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (s.empty())
        return std::nullopt;
    if (s.front() == '+')
        s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v))
        return std::nullopt;
    return v;
}

inline std::optional<int> parse_int(std::string_view s) {
    s = trim(s);
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
        return std::nullopt;
    return v;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError(fmt::format("cannot open '{}'", path.string()));
    return in;
}

inline std::string lowercase(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

} // namespace detail

// Sector table: header `sector,<year>,<year>,...`, one row per sector.
inline std::vector<SectorSeries> parse_sector_csv(std::istream& in, const std::string& source = "<stream>") {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!detail::trim(line).empty() && detail::trim(line).front() != '#') {
            header = detail::split_csv_line(line);
            break;
        }
    }
    if (header.empty())
        throw ValidationError(fmt::format("{}: empty sector file (no header row)", source));
    if (detail::lowercase(header.front()) != "sector")
        throw ValidationError(fmt::format("{}:{}: first header column must be 'sector', got '{}'", source, line_no, header.front()));
    if (header.size() < 2)
        throw ValidationError(fmt::format("{}:{}: header declares no year columns", source, line_no));

    std::vector<int> years;
    for (std::size_t c = 1; c < header.size(); ++c) {
        auto y = detail::parse_int(header[c]);
        if (!y)
            throw ValidationError(fmt::format("{}:{}: column {} header '{}' is not a year", source, line_no, c + 1, header[c]));
        if (!years.empty() && *y != years.back() + 1)
            throw ValidationError(fmt::format("{}:{}: years not contiguous ({} follows {})", source, line_no, *y, years.back()));
        years.push_back(*y);
    }

    std::vector<SectorSeries> out;
    std::set<std::string> seen;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty() || detail::trim(line).front() == '#')
            continue;
        auto fields = detail::split_csv_line(line);
        const std::string& name = fields.front();
        if (name.empty())
            throw ValidationError(fmt::format("{}:{}: missing sector name", source, line_no));
        if (!seen.insert(name).second)
            throw ValidationError(fmt::format("{}:{}: duplicate sector '{}'", source, line_no, name));
        if (fields.size() > header.size())
            throw ValidationError(fmt::format("{}:{}: sector '{}' has {} cells, header declares {} years", source,
                                              line_no, name, fields.size() - 1, years.size()));
        std::vector<double> values;
        values.reserve(years.size());
        for (std::size_t c = 1; c < header.size(); ++c) {
            const int year = years[c - 1];
            if (c >= fields.size() || fields[c].empty())
                throw ValidationError(fmt::format("{}:{}: missing value for sector '{}' in {}", source, line_no, name, year));
            auto v = detail::parse_double(fields[c]);
            if (!v)
                throw ValidationError(fmt::format("{}:{}: column {} ({}): malformed number '{}' for sector '{}'",
                                                  source, line_no, c + 1, year, fields[c], name));
            if (*v < 0.0)
                throw ValidationError(fmt::format("{}:{}: negative emissions {} for sector '{}' in {}", source, line_no, *v, name, year));
            values.push_back(*v);
        }
        out.push_back({name, TimeSeries(years.front(), std::move(values), "MtCO2/yr")});
    }
    if (out.empty())
        throw ValidationError(fmt::format("{}: no sector rows", source));
    return out;
}

inline std::vector<SectorSeries> load_sector_csv(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    return parse_sector_csv(in, path.string());
}

// Assignment of sectors to the capital / consumption / investment terms.
struct ProxyMapping {
    std::vector<std::string> capital;
    std::vector<std::string> consumption;
    std::vector<std::string> investment;
    std::vector<std::string> exclude;

    // Operating capital: energy sector, rail and pipeline transport, manufacturing other
    // than iron & steel and machinery. Investment: cement, iron & steel, machinery.
    // Consumption: air and road transport, households, services, agriculture.
    static ProxyMapping standard() {
        return {{"energy sector", "rail transport", "pipeline transport", "other manufacturing"},
                {"air transport", "road transport", "households", "services", "agriculture"},
                {"cement", "iron and steel", "machinery"},
                {}};
    }

    enum class Component { capital, consumption, investment, excluded };

    std::optional<Component> classify(const std::string& sector) const {
        auto has = [&](const std::vector<std::string>& v) { return std::find(v.begin(), v.end(), sector) != v.end(); };
        if (has(capital))
            return Component::capital;
        if (has(consumption))
            return Component::consumption;
        if (has(investment))
            return Component::investment;
        if (has(exclude))
            return Component::excluded;
        return std::nullopt;
    }

    void validate() const {
        std::map<std::string, std::string> owner;
        const std::pair<const char*, const std::vector<std::string>*> lists[] = {
            {"capital", &capital}, {"consumption", &consumption}, {"investment", &investment}, {"exclude", &exclude}};
        for (const auto& [key, names] : lists)
            for (const auto& n : *names) {
                auto [it, fresh] = owner.emplace(n, key);
                if (!fresh)
                    throw ConfigError(fmt::format("mapping: sector '{}' listed under both '{}' and '{}'", n, it->second, key));
            }
    }

    friend bool operator==(const ProxyMapping&, const ProxyMapping&) = default;
};

// Mapping config: `[capital]`, `[consumption]`, `[investment]`, `[exclude]` sections,
// one sector name per line; `#` starts a comment.
inline ProxyMapping parse_mapping(std::istream& in, const std::string& source = "<stream>") {
    ProxyMapping m;
    std::vector<std::string>* current = nullptr;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view sv = line;
        if (auto hash = sv.find('#'); hash != std::string_view::npos)
            sv = sv.substr(0, hash);
        sv = detail::trim(sv);
        if (sv.empty())
            continue;
        if (sv.front() == '[') {
            if (sv.back() != ']')
                throw ConfigError(fmt::format("{}:{}: unterminated section header", source, line_no));
            const std::string key = detail::lowercase(detail::trim(sv.substr(1, sv.size() - 2)));
            if (key == "capital")
                current = &m.capital;
            else if (key == "consumption")
                current = &m.consumption;
            else if (key == "investment")
                current = &m.investment;
            else if (key == "exclude")
                current = &m.exclude;
            else
                throw ConfigError(fmt::format("{}:{}: unknown mapping section '{}'", source, line_no, key));
            continue;
        }
        if (!current)
            throw ConfigError(fmt::format("{}:{}: sector '{}' appears before any section", source, line_no, sv));
        current->emplace_back(sv);
    }
    m.validate();
    return m;
}

inline ProxyMapping load_mapping(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    return parse_mapping(in, path.string());
}

struct ComponentSeries {
    TimeSeries capital;
    TimeSeries consumption;
    TimeSeries investment;
    TimeSeries excluded;
};

// Sum member sectors into the three components; cement, when given separately, joins investment.
inline ComponentSeries build_components(const std::vector<SectorSeries>& sectors, const ProxyMapping& mapping,
                                        const std::optional<SectorSeries>& cement = std::nullopt) {
    mapping.validate();
    if (sectors.empty())
        throw ValidationError("build_components: no sectors");
    const int first = sectors.front().series.first_year();
    const std::size_t n = sectors.front().series.size();

    std::vector<std::string> unmapped;
    for (const auto& s : sectors) {
        if (s.series.first_year() != first || s.series.size() != n)
            throw ValidationError(fmt::format("sector '{}' spans a different set of years", s.name));
        if (!mapping.classify(s.name))
            unmapped.push_back(s.name);
        if (cement && s.name == cement->name)
            throw ValidationError(fmt::format("sector '{}' supplied both in the sector table and as the cement series", s.name));
    }
    if (!unmapped.empty()) {
        std::string list;
        for (const auto& u : unmapped)
            list += (list.empty() ? "'" : ", '") + u + "'";
        throw ValidationError(fmt::format("unmapped sectors (add them to a mapping list or [exclude]): {}", list));
    }
    if (cement && (cement->series.first_year() != first || cement->series.size() != n))
        throw ValidationError("cement series spans a different set of years than the sector table");

    std::vector<double> cap(n, 0.0), con(n, 0.0), inv(n, 0.0), exc(n, 0.0);
    for (const auto& s : sectors) {
        std::vector<double>* target = nullptr;
        switch (*mapping.classify(s.name)) {
        case ProxyMapping::Component::capital: target = &cap; break;
        case ProxyMapping::Component::consumption: target = &con; break;
        case ProxyMapping::Component::investment: target = &inv; break;
        case ProxyMapping::Component::excluded: target = &exc; break;
        }
        auto v = s.series.values();
        for (std::size_t i = 0; i < n; ++i)
            (*target)[i] += v[i];
    }
    if (cement) {
        auto v = cement->series.values();
        for (std::size_t i = 0; i < n; ++i)
            inv[i] += v[i];
    }
    const std::string unit = "MtCO2/yr";
    return {TimeSeries(first, std::move(cap), unit), TimeSeries(first, std::move(con), unit),
            TimeSeries(first, std::move(inv), unit), TimeSeries(first, std::move(exc), unit)};
}

struct MacroInputs {
    TimeSeries gdp;
    TimeSeries savings;
};

// Macro table with columns `year, gdp, savings_rate`.
inline MacroInputs parse_macro_csv(std::istream& in, const std::string& source = "<stream>") {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!detail::trim(line).empty() && detail::trim(line).front() != '#') {
            header = detail::split_csv_line(line);
            break;
        }
    }
    if (header.empty())
        throw ValidationError(fmt::format("{}: empty macro file", source));
    int col_year = -1, col_gdp = -1, col_sav = -1;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string h = detail::lowercase(header[c]);
        if (h == "year") col_year = static_cast<int>(c);
        else if (h == "gdp") col_gdp = static_cast<int>(c);
        else if (h == "savings_rate") col_sav = static_cast<int>(c);
    }
    if (col_year < 0 || col_gdp < 0 || col_sav < 0)
        throw ValidationError(fmt::format("{}:{}: header must contain year, gdp, savings_rate", source, line_no));

    std::vector<double> gdp, sav;
    int first = 0, prev = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty() || detail::trim(line).front() == '#')
            continue;
        auto f = detail::split_csv_line(line);
        auto cell = [&](int c) -> const std::string& {
            static const std::string empty;
            return static_cast<std::size_t>(c) < f.size() ? f[static_cast<std::size_t>(c)] : empty;
        };
        auto year = detail::parse_int(cell(col_year));
        if (!year)
            throw ValidationError(fmt::format("{}:{}: malformed year '{}'", source, line_no, cell(col_year)));
        if (!gdp.empty() && *year != prev + 1)
            throw ValidationError(fmt::format("{}:{}: years not contiguous ({} follows {})", source, line_no, *year, prev));
        if (gdp.empty())
            first = *year;
        prev = *year;
        auto g = detail::parse_double(cell(col_gdp));
        auto s = detail::parse_double(cell(col_sav));
        if (!g || *g <= 0.0)
            throw ValidationError(fmt::format("{}:{}: gdp in {} must be a positive number, got '{}'", source, line_no, *year, cell(col_gdp)));
        if (!s || *s < 0.0 || *s >= 1.0)
            throw ValidationError(fmt::format("{}:{}: savings_rate in {} must lie in [0, 1), got '{}'", source, line_no, *year, cell(col_sav)));
        gdp.push_back(*g);
        sav.push_back(*s);
    }
    if (gdp.empty())
        throw ValidationError(fmt::format("{}: no data rows", source));
    return {TimeSeries(first, std::move(gdp), "GDP"), TimeSeries(first, std::move(sav), "1")};
}

inline MacroInputs load_macro_csv(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    return parse_macro_csv(in, path.string());
}

struct MacroSeries {
    TimeSeries gdp_index; // 1 at the reference year
    TimeSeries growth;    // year-over-year log difference, 1/yr
    TimeSeries savings;
};

// Normalize GDP to the reference year and derive annual growth rates over the shared span.
// Growth is defined from the second year of the span onward.
inline MacroSeries derive_macro(const TimeSeries& gdp, const TimeSeries& savings, int reference_year) {
    const int first = std::max(gdp.first_year(), savings.first_year());
    const int last = std::min(gdp.last_year(), savings.last_year());
    if (gdp.empty() || savings.empty() || first > last)
        throw ValidationError("derive_macro: GDP and savings series do not overlap");
    if (reference_year < first || reference_year > last)
        throw ValidationError(fmt::format("derive_macro: reference year {} outside shared span [{}, {}]", reference_year, first, last));
    for (int y = first; y <= last; ++y) {
        if (!(gdp.at(y) > 0.0))
            throw ValidationError(fmt::format("derive_macro: GDP in {} must be positive", y));
        if (!(savings.at(y) >= 0.0 && savings.at(y) < 1.0))
            throw ValidationError(fmt::format("derive_macro: savings rate in {} outside [0, 1)", y));
    }
    const TimeSeries g = gdp.slice(first, last);
    const double ref = g.at(reference_year);
    MacroSeries out;
    out.gdp_index = g.transformed([ref](int, double v) { return v / ref; }, "index");
    out.savings = savings.slice(first, last);
    if (first < last)
        out.growth = g.slice(first + 1, last).transformed([&](int y, double v) { return std::log(v / g.at(y - 1)); }, "1/yr");
    else
        out.growth = TimeSeries(first + 1, {}, "1/yr");
    return out;
}

// Aligned inputs for calibration; every series spans [first_year, last_year].
struct CalibrationDataset {
    int reference_year = default_reference_year;
    TimeSeries E_K, E_C, E_I; // MtCO2/yr
    TimeSeries gdp_index;
    TimeSeries growth;
    TimeSeries savings;

    int first_year() const { return E_K.first_year(); }
    int last_year() const { return E_K.last_year(); }

    void validate() const {
        const TimeSeries* all[] = {&E_K, &E_C, &E_I, &gdp_index, &growth, &savings};
        for (const auto* s : all)
            if (s->empty() || s->first_year() != E_K.first_year() || s->size() != E_K.size())
                throw ValidationError("calibration dataset: all series must share one non-empty span");
        if (!E_K.contains(reference_year))
            throw ValidationError(fmt::format("calibration dataset: reference year {} outside [{}, {}]", reference_year,
                                              first_year(), last_year()));
        for (int y = first_year(); y <= last_year(); ++y) {
            if (!(gdp_index.at(y) > 0.0))
                throw ValidationError(fmt::format("calibration dataset: GDP index in {} must be positive", y));
            if (!(savings.at(y) >= 0.0 && savings.at(y) < 1.0))
                throw ValidationError(fmt::format("calibration dataset: savings in {} outside [0, 1)", y));
            if (E_K.at(y) < 0.0 || E_C.at(y) < 0.0 || E_I.at(y) < 0.0)
                throw ValidationError(fmt::format("calibration dataset: negative emissions in {}", y));
        }
    }
};

// Intersect component and macro spans into one validated dataset.
inline CalibrationDataset make_dataset(const ComponentSeries& components, const MacroSeries& macro, int reference_year) {
    const TimeSeries* all[] = {&components.capital, &components.consumption, &components.investment,
                               &macro.gdp_index, &macro.growth, &macro.savings};
    int first = components.capital.first_year(), last = components.capital.last_year();
    for (const auto* s : all) {
        if (s->empty())
            throw ValidationError("make_dataset: empty input series");
        first = std::max(first, s->first_year());
        last = std::min(last, s->last_year());
    }
    if (first > last)
        throw ValidationError("make_dataset: emissions and macro series do not overlap");
    CalibrationDataset d;
    d.reference_year = reference_year;
    d.E_K = components.capital.slice(first, last);
    d.E_C = components.consumption.slice(first, last);
    d.E_I = components.investment.slice(first, last);
    d.gdp_index = macro.gdp_index.slice(first, last);
    d.growth = macro.growth.slice(first, last);
    d.savings = macro.savings.slice(first, last);
    d.validate();
    return d;
}

// Dataset bundle: `# reference_year = N` line, then year,Y,r,s,E_K,E_C,E_I rows.
inline void write_dataset(std::ostream& out, const CalibrationDataset& d) {
    out << fmt::format("# reference_year = {}\n", d.reference_year);
    out << "year,Y,r,s,E_K,E_C,E_I\n";
    for (int y = d.first_year(); y <= d.last_year(); ++y)
        out << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", y, d.gdp_index.at(y), d.growth.at(y),
                           d.savings.at(y), d.E_K.at(y), d.E_C.at(y), d.E_I.at(y));
}

inline CalibrationDataset read_dataset(std::istream& in, const std::string& source = "<stream>") {
    std::string line;
    std::size_t line_no = 0;
    std::optional<int> ref;
    bool header = false;
    int first = 0, prev = 0;
    std::vector<double> cols[6];
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view sv = detail::trim(line);
        if (sv.empty())
            continue;
        if (sv.front() == '#') {
            auto eq = sv.find('=');
            if (eq != std::string_view::npos && detail::trim(sv.substr(1, eq - 1)) == "reference_year")
                ref = detail::parse_int(sv.substr(eq + 1));
            continue;
        }
        if (!header) {
            if (sv != "year,Y,r,s,E_K,E_C,E_I")
                throw ValidationError(fmt::format("{}:{}: unexpected dataset header", source, line_no));
            header = true;
            continue;
        }
        auto f = detail::split_csv_line(sv);
        if (f.size() != 7)
            throw ValidationError(fmt::format("{}:{}: expected 7 columns", source, line_no));
        auto year = detail::parse_int(f[0]);
        if (!year || (!cols[0].empty() && *year != prev + 1))
            throw ValidationError(fmt::format("{}:{}: bad or non-contiguous year '{}'", source, line_no, f[0]));
        if (cols[0].empty())
            first = *year;
        prev = *year;
        for (int c = 0; c < 6; ++c) {
            auto v = detail::parse_double(f[static_cast<std::size_t>(c + 1)]);
            if (!v)
                throw ValidationError(fmt::format("{}:{}: malformed number in column {}", source, line_no, c + 2));
            cols[c].push_back(*v);
        }
    }
    if (!ref || !header || cols[0].empty())
        throw ValidationError(fmt::format("{}: incomplete dataset bundle", source));
    CalibrationDataset d;
    d.reference_year = *ref;
    d.gdp_index = TimeSeries(first, cols[0], "index");
    d.growth = TimeSeries(first, cols[1], "1/yr");
    d.savings = TimeSeries(first, cols[2], "1");
    d.E_K = TimeSeries(first, cols[3], "MtCO2/yr");
    d.E_C = TimeSeries(first, cols[4], "MtCO2/yr");
    d.E_I = TimeSeries(first, cols[5], "MtCO2/yr");
    d.validate();
    return d;
}

} // namespace kayacap
