#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "xbs/csv.hpp"
#include "xbs/error.hpp"

namespace xbs {

using Date = std::chrono::year_month_day;

struct Observation {
    Date date;
    double close = 0.0;

    friend bool operator==(const Observation&, const Observation&) = default;
};

/// Daily closes with strictly increasing dates and positive prices.
class PriceSeries {
public:
    PriceSeries() = default;

    /// Sorts by date; rejects duplicates and non-positive closes.
    explicit PriceSeries(std::vector<Observation> obs) : obs_(std::move(obs)) {
        std::stable_sort(obs_.begin(), obs_.end(),
                         [](const Observation& a, const Observation& b) { return a.date < b.date; });
        for (std::size_t i = 0; i < obs_.size(); ++i) {
            if (!(obs_[i].close > 0.0) || !std::isfinite(obs_[i].close))
                throw ValidationError("non-positive close on " + csv::format_date(obs_[i].date));
            if (i > 0 && obs_[i].date == obs_[i - 1].date)
                throw ValidationError("duplicate date " + csv::format_date(obs_[i].date));
        }
    }

    std::span<const Observation> observations() const { return obs_; }
    std::size_t size() const { return obs_.size(); }
    bool empty() const { return obs_.empty(); }
    const Observation& operator[](std::size_t i) const { return obs_[i]; }

    std::vector<double> closes() const {
        std::vector<double> out;
        out.reserve(obs_.size());
        for (const auto& o : obs_) out.push_back(o.close);
        return out;
    }

    /// Number of observations dated on or before `d`.
    std::size_t count_through(Date d) const {
        return std::upper_bound(obs_.begin(), obs_.end(), d,
                                [](Date lhs, const Observation& o) { return lhs < o.date; }) -
               obs_.begin();
    }

    friend bool operator==(const PriceSeries&, const PriceSeries&) = default;

private:
    std::vector<Observation> obs_;
};

struct VolEstimate {
    double sigma_annual = 0.0;
    int window_days = 0;
};

enum class SeriesFormat { csv };

/// Reads a `date,close` CSV. Rows may appear in any order.
inline PriceSeries load_price_series(const std::string& path, SeriesFormat = SeriesFormat::csv) {
    const auto rows = csv::read_rows(path);
    csv::expect_header(rows, "date,close", path);

    std::vector<Observation> obs;
    std::vector<std::size_t> lines;
    obs.reserve(rows.size() - 1);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto where = path + ":" + std::to_string(rows[r].line) + ": ";
        const auto fields = csv::split(rows[r].text);
        if (fields.size() != 2) throw ValidationError(where + "expected 2 fields");
        Observation o;
        if (!csv::parse_date(fields[0], o.date)) throw ValidationError(where + "malformed date");
        if (!csv::parse_double(fields[1], o.close)) throw ValidationError(where + "malformed close");
        if (!(o.close > 0.0) || !std::isfinite(o.close))
            throw ValidationError(where + "non-positive close " + std::string(fields[1]));
        obs.push_back(o);
        lines.push_back(rows[r].line);
    }

    // Report duplicates with both line numbers before handing off to the sorting constructor.
    std::vector<std::size_t> order(obs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return obs[a].date < obs[b].date; });
    for (std::size_t i = 1; i < order.size(); ++i) {
        if (obs[order[i]].date == obs[order[i - 1]].date)
            throw ValidationError(path + ":" + std::to_string(lines[order[i]]) + ": duplicate date " +
                                  csv::format_date(obs[order[i]].date) + " (first seen on line " +
                                  std::to_string(lines[order[i - 1]]) + ")");
    }
    return PriceSeries(std::move(obs));
}

inline void write_price_series(std::ostream& out, const PriceSeries& series) {
    out << "date,close\n";
    for (const auto& o : series.observations())
        out << csv::format_date(o.date) << ',' << csv::format_double(o.close) << '\n';
}

inline void write_price_series(const std::string& path, const PriceSeries& series) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write file: " + path);
    write_price_series(out, series);
}

/// ln(close[i+1] / close[i]) between consecutive rows, ignoring calendar gaps.
inline std::vector<double> log_returns(std::span<const double> closes) {
    detail::require(closes.size() >= 2, "log_returns needs at least 2 closes");
    std::vector<double> out(closes.size() - 1);
    for (std::size_t i = 0; i + 1 < closes.size(); ++i) out[i] = std::log(closes[i + 1] / closes[i]);
    return out;
}

inline std::vector<double> log_returns(const PriceSeries& series) {
    const auto closes = series.closes();
    return log_returns(std::span<const double>(closes));
}

/// Annualized sample (n-1) standard deviation of returns.
inline VolEstimate historical_volatility(std::span<const double> returns, int trading_days_per_year = 252) {
    detail::require(returns.size() >= 2, "historical_volatility needs at least 2 returns");
    detail::require(trading_days_per_year > 0, "trading_days_per_year must be positive");
    const double n = double(returns.size());
    double mean = 0.0;
    for (double x : returns) mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : returns) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    return {sd * std::sqrt(double(trading_days_per_year)), int(returns.size())};
}

}  // namespace xbs
