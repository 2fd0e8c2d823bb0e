#pragma once

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "kayacap/error.hpp"

namespace kayacap {

// Annual series over a contiguous span of calendar years.
class TimeSeries {
public:
    TimeSeries() = default;
    TimeSeries(int first_year, std::vector<double> values, std::string unit = {})
        : first_year_(first_year), values_(std::move(values)), unit_(std::move(unit)) {}

    bool empty() const noexcept { return values_.empty(); }
    std::size_t size() const noexcept { return values_.size(); }
    int first_year() const noexcept { return first_year_; }
    int last_year() const noexcept { return first_year_ + static_cast<int>(values_.size()) - 1; }
    const std::string& unit() const noexcept { return unit_; }
    std::span<const double> values() const noexcept { return values_; }

    bool contains(int year) const noexcept { return !empty() && year >= first_year_ && year <= last_year(); }

    double at(int year) const {
        if (!contains(year))
            throw ValidationError(fmt::format("year {} outside series span [{}, {}]", year, first_year_, last_year()));
        return values_[static_cast<std::size_t>(year - first_year_)];
    }

    double& at(int year) {
        if (!contains(year))
            throw ValidationError(fmt::format("year {} outside series span [{}, {}]", year, first_year_, last_year()));
        return values_[static_cast<std::size_t>(year - first_year_)];
    }

    TimeSeries slice(int from, int to) const {
        if (from > to || !contains(from) || !contains(to))
            throw ValidationError(fmt::format("slice [{}, {}] outside series span [{}, {}]", from, to, first_year_, last_year()));
        auto begin = values_.begin() + (from - first_year_);
        return TimeSeries(from, std::vector<double>(begin, begin + (to - from + 1)), unit_);
    }

    template <class Op>
    TimeSeries transformed(Op op, std::string unit) const {
        std::vector<double> out;
        out.reserve(values_.size());
        for (int y = first_year_; y <= last_year(); ++y)
            out.push_back(op(y, values_[static_cast<std::size_t>(y - first_year_)]));
        return TimeSeries(first_year_, std::move(out), std::move(unit));
    }

    friend bool operator==(const TimeSeries&, const TimeSeries&) = default;

private:
    int first_year_ = 0;
    std::vector<double> values_;
    std::string unit_;
};

// Element-wise sum over the shared span; both series must cover the same years.
inline TimeSeries operator+(const TimeSeries& a, const TimeSeries& b) {
    if (a.first_year() != b.first_year() || a.size() != b.size())
        throw ValidationError(fmt::format("cannot add series over [{}, {}] and [{}, {}]",
                                          a.first_year(), a.last_year(), b.first_year(), b.last_year()));
    return a.transformed([&](int y, double v) { return v + b.at(y); }, a.unit());
}

} // namespace kayacap
