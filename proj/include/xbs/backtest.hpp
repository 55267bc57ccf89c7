#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "xbs/contract.hpp"
#include "xbs/csv.hpp"
#include "xbs/dynamics.hpp"
#include "xbs/error.hpp"
#include "xbs/grid.hpp"
#include "xbs/market_data.hpp"
#include "xbs/pde.hpp"

namespace xbs {

struct MarketQuote {
    Date date;
    double strike = 0.0;
    double maturity = 0.0;
    OptionKind kind = OptionKind::call;
    double market_price = 0.0;
    double underlying_close = 0.0;

    OptionContract contract() const { return {kind, strike, maturity}; }

    friend bool operator==(const MarketQuote&, const MarketQuote&) = default;
};

inline constexpr std::string_view quotes_header = "date,strike,maturity_years,kind,market_price,underlying_close";

/// Quote ids are 0-based row positions in the file, header excluded.
inline std::vector<MarketQuote> load_quotes(const std::string& path) {
    const auto rows = csv::read_rows(path);
    csv::expect_header(rows, quotes_header, path);
    std::vector<MarketQuote> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto where = path + ":" + std::to_string(rows[r].line) + ": ";
        const auto f = csv::split(rows[r].text);
        if (f.size() != 6) throw ValidationError(where + "expected 6 fields");
        MarketQuote q;
        if (!csv::parse_date(f[0], q.date)) throw ValidationError(where + "malformed date");
        if (!csv::parse_double(f[1], q.strike) || !(q.strike > 0.0)) throw ValidationError(where + "strike must be > 0");
        if (!csv::parse_double(f[2], q.maturity) || !(q.maturity > 0.0))
            throw ValidationError(where + "maturity_years must be > 0");
        try {
            q.kind = parse_option_kind(f[3]);
        } catch (const ValidationError& e) {
            throw ValidationError(where + e.what());
        }
        if (!csv::parse_double(f[4], q.market_price) || !(q.market_price >= 0.0))
            throw ValidationError(where + "market_price must be >= 0");
        if (!csv::parse_double(f[5], q.underlying_close) || !(q.underlying_close > 0.0))
            throw ValidationError(where + "underlying_close must be > 0");
        out.push_back(q);
    }
    return out;
}

inline void write_quotes(std::ostream& out, std::span<const MarketQuote> quotes) {
    out << quotes_header << '\n';
    for (const auto& q : quotes)
        out << csv::format_date(q.date) << ',' << csv::format_double(q.strike) << ','
            << csv::format_double(q.maturity) << ',' << to_string(q.kind) << ','
            << csv::format_double(q.market_price) << ',' << csv::format_double(q.underlying_close) << '\n';
}

inline void write_quotes(const std::string& path, std::span<const MarketQuote> quotes) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write file: " + path);
    write_quotes(out, quotes);
}

inline double rmse(std::span<const double> predicted, std::span<const double> actual) {
    detail::require(predicted.size() == actual.size(), "rmse: length mismatch");
    detail::require(!predicted.empty(), "rmse: empty input");
    double ss = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) ss += (predicted[i] - actual[i]) * (predicted[i] - actual[i]);
    return std::sqrt(ss / double(predicted.size()));
}

inline double mae(std::span<const double> predicted, std::span<const double> actual) {
    detail::require(predicted.size() == actual.size(), "mae: length mismatch");
    detail::require(!predicted.empty(), "mae: empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) s += std::abs(predicted[i] - actual[i]);
    return s / double(predicted.size());
}

struct QuoteResidual {
    std::size_t quote_id = 0;
    double theoretical = 0.0;
    double market = 0.0;

    double residual() const { return theoretical - market; }

    friend bool operator==(const QuoteResidual&, const QuoteResidual&) = default;
};

/// Accuracy and timing of one model over a quote set. Residuals are pooled across all dates.
struct BacktestReport {
    std::string model_name;
    double rmse = 0.0;
    double mae = 0.0;
    std::size_t n_quotes = 0;
    std::size_t skipped = 0;
    double wall_time_seconds = 0.0;
    std::vector<QuoteResidual> residuals;

    friend bool operator==(const BacktestReport&, const BacktestReport&) = default;
};

inline void finalize(BacktestReport& r) {
    r.n_quotes = r.residuals.size();
    if (r.residuals.empty()) {
        r.rmse = r.mae = 0.0;
        return;
    }
    std::vector<double> th, mk;
    for (const auto& q : r.residuals) {
        th.push_back(q.theoretical);
        mk.push_back(q.market);
    }
    r.rmse = rmse(th, mk);
    r.mae = mae(th, mk);
}

inline nlohmann::json to_json(const BacktestReport& r) {
    nlohmann::json res = nlohmann::json::array();
    for (const auto& q : r.residuals)
        res.push_back({{"quote_id", q.quote_id}, {"theoretical", q.theoretical}, {"market", q.market}});
    return {{"model_name", r.model_name}, {"rmse", r.rmse},           {"mae", r.mae},
            {"n_quotes", r.n_quotes},     {"skipped", r.skipped},     {"wall_time_seconds", r.wall_time_seconds},
            {"residuals", res}};
}

inline BacktestReport report_from_json(const nlohmann::json& j) {
    BacktestReport r;
    r.model_name = j.at("model_name").get<std::string>();
    r.rmse = j.at("rmse").get<double>();
    r.mae = j.at("mae").get<double>();
    r.n_quotes = j.at("n_quotes").get<std::size_t>();
    r.skipped = j.at("skipped").get<std::size_t>();
    r.wall_time_seconds = j.at("wall_time_seconds").get<double>();
    if (j.contains("residuals"))
        for (const auto& q : j.at("residuals"))
            r.residuals.push_back(
                {q.at("quote_id").get<std::size_t>(), q.at("theoretical").get<double>(), q.at("market").get<double>()});
    return r;
}

/// Historical volatility over the `window` returns ending at the quote date.
struct TrailingVolatility {
    const PriceSeries* series = nullptr;
    int window = 30;
    int trading_days_per_year = 252;

    std::optional<VolEstimate> at(Date d) const {
        const std::size_t have = series->count_through(d);
        if (window < 2 || have < std::size_t(window) + 1) return std::nullopt;
        std::vector<double> closes;
        closes.reserve(std::size_t(window) + 1);
        for (std::size_t i = have - std::size_t(window) - 1; i < have; ++i) closes.push_back((*series)[i].close);
        return historical_volatility(log_returns(closes), trading_days_per_year);
    }

    std::optional<VolEstimate> operator()(const MarketQuote& q) const { return at(q.date); }
};

struct ConstantVolatility {
    double sigma = 0.2;
    std::optional<VolEstimate> operator()(const MarketQuote&) const { return VolEstimate{sigma, 2}; }
};

/// Prices every quote with `pricer(quote, sigma, r0)`. Quotes without a volatility estimate are
/// skipped and counted.
template <typename Pricer, typename VolSource>
BacktestReport run_backtest(std::span<const MarketQuote> quotes, Pricer&& pricer, const VolSource& vol_source,
                            double r0, std::string model_name = "model") {
    detail::require(!quotes.empty(), "run_backtest needs at least one quote");
    BacktestReport report;
    report.model_name = std::move(model_name);
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < quotes.size(); ++i) {
        const auto vol = vol_source(quotes[i]);
        if (!vol) {
            ++report.skipped;
            continue;
        }
        const double theo = pricer(quotes[i], vol->sigma_annual, r0);
        report.residuals.push_back({i, theo, quotes[i].market_price});
    }
    report.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    finalize(report);
    return report;
}

struct PassthroughPricer {
    double operator()(const MarketQuote& q, double, double) const { return q.market_price; }
};

struct ClosedFormPricer {
    double operator()(const MarketQuote& q, double sigma, double r0) const {
        return bs_closed_form(q.contract(), q.underlying_close, sigma, r0);
    }
};

/// Constant-coefficient solve: a single sigma node and a single r node with zero drift, so the
/// extended PDE reduces to plain Black-Scholes.
struct DegeneratePdePricer {
    int n_s = 200;
    double steps_per_year = 2000.0;
    Scheme scheme = Scheme::explicit_fd;

    double operator()(const MarketQuote& q, double sigma, double r0) const {
        const auto c = q.contract();
        const double s0 = q.underlying_close;
        Grid4D g;
        g.s_max = 3.0 * std::max(s0, c.strike);
        g.n_s = n_s;
        g.sigma_nodes = {std::max(sigma, 1e-8)};
        g.r_nodes = {r0};
        const HestonParams h{1.0, g.sigma_nodes[0] * g.sigma_nodes[0], 0.0};
        const VasicekParams v{1.0, r0, 0.0};
        g.n_t = std::max(int(std::ceil(steps_per_year * c.maturity)), 1);
        if (scheme == Scheme::explicit_fd) g.n_t = std::max(g.n_t, stable_time_steps(c, g, h, v));
        const auto surf = solve_extended_pde(c, g, h, v, scheme);
        return surface_lookup(surf, s0, g.sigma_nodes[0], r0);
    }
};

/// Full extended PDE on a sigma x r grid, read off at (S0, sigma_hist, r0).
struct ExtendedPdePricer {
    HestonParams heston{};
    VasicekParams vasicek{};
    int n_s = 200;
    std::size_t n_sigma = 3;
    std::size_t n_r = 3;
    Scheme scheme = Scheme::explicit_fd;

    double operator()(const MarketQuote& q, double sigma, double r0) const {
        const auto c = q.contract();
        const double s0 = q.underlying_close;
        auto g = Grid4D::with_defaults(s0, c.strike, n_s, 1, n_sigma, n_r);
        const double sig = std::max(sigma, 1e-8);
        // Widen the default ranges when the market inputs fall outside them.
        g.sigma_nodes = linspace(std::min(Grid4D::default_sigma_lo, sig), std::max(Grid4D::default_sigma_hi, sig), n_sigma);
        g.r_nodes = linspace(std::min(Grid4D::default_r_lo, r0), std::max(Grid4D::default_r_hi, r0), n_r);
        if (n_sigma == 1) g.sigma_nodes = {sig};
        if (n_r == 1) g.r_nodes = {r0};
        g.n_t = stable_time_steps(c, g, heston, vasicek);
        const auto surf = solve_extended_pde(c, g, heston, vasicek, scheme);
        return surface_lookup(surf, s0, sig, r0);
    }
};

struct TimingStats {
    double median_seconds = 0.0;
    double p95_seconds = 0.0;
    double min_seconds = 0.0;
    double max_seconds = 0.0;
    int repetitions = 0;
    double checksum = 0.0;  ///< sum of all priced values, keeps the work observable
};

/// Wall-clock per pass over `workload`, repeated `repetitions` times.
template <typename Pricer>
TimingStats timing_benchmark(Pricer&& pricer, std::span<const OptionContract> workload, int repetitions) {
    detail::require(repetitions >= 3, "timing_benchmark needs repetitions >= 3");
    std::vector<double> secs;
    TimingStats out;
    out.repetitions = repetitions;
    for (int rep = 0; rep < repetitions; ++rep) {
        const auto start = std::chrono::steady_clock::now();
        double sum = 0.0;
        for (const auto& c : workload) sum += pricer(c);
        secs.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
        out.checksum += sum;
    }
    std::sort(secs.begin(), secs.end());
    const std::size_t n = secs.size();
    out.median_seconds = n % 2 ? secs[n / 2] : 0.5 * (secs[n / 2 - 1] + secs[n / 2]);
    // Nearest-rank percentile.
    out.p95_seconds = secs[std::min(n - 1, std::size_t(std::ceil(0.95 * double(n))) - 1)];
    out.min_seconds = secs.front();
    out.max_seconds = secs.back();
    return out;
}

inline nlohmann::json to_json(const TimingStats& t) {
    return {{"median_seconds", t.median_seconds}, {"p95_seconds", t.p95_seconds}, {"min_seconds", t.min_seconds},
            {"max_seconds", t.max_seconds},       {"repetitions", t.repetitions}, {"checksum", t.checksum}};
}

// ---- predictions from an external model ----------------------------------------------------

inline std::map<std::size_t, double> load_predictions(const std::string& path) {
    const auto rows = csv::read_rows(path);
    csv::expect_header(rows, "quote_id,predicted_price", path);
    std::map<std::size_t, double> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto where = path + ":" + std::to_string(rows[r].line) + ": ";
        const auto f = csv::split(rows[r].text);
        std::size_t id = 0;
        double price = 0.0;
        if (f.size() != 2 || !csv::parse_int(f[0], id) || !csv::parse_double(f[1], price) || !std::isfinite(price))
            throw ValidationError(where + "expected 'quote_id,predicted_price'");
        if (!out.emplace(id, price).second) throw ValidationError(where + "duplicate quote id " + std::to_string(id));
    }
    return out;
}

/// Report for externally produced predictions over the same quotes `reference` priced.
///
/// Every quote in `reference` needs exactly one prediction; ids outside the quote file are rejected.
/// Predictions for quotes the reference skipped are ignored.
inline BacktestReport report_from_predictions(std::span<const MarketQuote> quotes, const BacktestReport& reference,
                                              const std::map<std::size_t, double>& predictions,
                                              std::string model_name) {
    for (const auto& [id, _] : predictions)
        if (id >= quotes.size())
            throw ValidationError("prediction for quote id " + std::to_string(id) + " which is not in the quotes file");
    BacktestReport out;
    out.model_name = std::move(model_name);
    out.skipped = reference.skipped;
    for (const auto& r : reference.residuals) {
        const auto it = predictions.find(r.quote_id);
        if (it == predictions.end())
            throw ValidationError("prediction file has no row for quote id " + std::to_string(r.quote_id));
        out.residuals.push_back({r.quote_id, it->second, quotes[r.quote_id].market_price});
    }
    finalize(out);
    return out;
}

// ---- synthetic market ------------------------------------------------------------------------

struct SyntheticMarket {
    PriceSeries prices;
    std::vector<MarketQuote> quotes;
};

struct SyntheticMarketConfig {
    Date start{std::chrono::year{2019}, std::chrono::May, std::chrono::day{1}};
    Date end{std::chrono::year{2024}, std::chrono::May, std::chrono::day{31}};
    double s0 = 100.0;
    double drift = 0.08;
    double sigma = 0.3;
    double r0 = 0.05;
    int quote_every = 5;  ///< business days between quotes
    double maturity = 0.25;
    OptionKind kind = OptionKind::call;
    int vol_window = 30;
    std::uint64_t seed = 7;
};

/// Weekday GBM closes plus one at-the-money quote every `quote_every` business days, priced by the
/// closed form at the trailing historical volatility. Quotes without enough history are priced at
/// the generating volatility.
inline SyntheticMarket make_synthetic_market(const SyntheticMarketConfig& cfg) {
    using namespace std::chrono;
    detail::require(cfg.s0 > 0.0 && cfg.sigma >= 0.0 && cfg.quote_every >= 1, "invalid synthetic market config");
    NormalStream normals(cfg.seed, 0);
    std::vector<Observation> obs;
    const double dt = 1.0 / 252.0;
    double s = cfg.s0;
    for (sys_days d = cfg.start; d <= sys_days(cfg.end); d += days{1}) {
        const unsigned wd = weekday(d).c_encoding();
        if (wd == 0 || wd == 6) continue;
        if (!obs.empty())
            s *= std::exp((cfg.drift - 0.5 * cfg.sigma * cfg.sigma) * dt + cfg.sigma * std::sqrt(dt) * normals.normal());
        obs.push_back({year_month_day(d), s});
    }
    SyntheticMarket m{PriceSeries(std::move(obs)), {}};
    const TrailingVolatility vol{&m.prices, cfg.vol_window};
    for (std::size_t i = 0; i < m.prices.size(); i += std::size_t(cfg.quote_every)) {
        const auto& o = m.prices[i];
        MarketQuote q;
        q.date = o.date;
        q.strike = std::round(o.close);
        q.maturity = cfg.maturity;
        q.kind = cfg.kind;
        q.underlying_close = o.close;
        const auto est = vol.at(o.date);
        q.market_price = bs_closed_form(q.contract(), o.close, est ? est->sigma_annual : cfg.sigma, cfg.r0);
        m.quotes.push_back(q);
    }
    return m;
}

/// Per-quote model inputs for an external learner: `date,close,sigma,r,quote_id,market_price`.
/// sigma is empty where the trailing window is incomplete.
inline void write_features(std::ostream& out, std::span<const MarketQuote> quotes, const TrailingVolatility& vol,
                           double r0) {
    out << "date,close,sigma,r,quote_id,market_price\n";
    for (std::size_t i = 0; i < quotes.size(); ++i) {
        const auto& q = quotes[i];
        const auto est = vol(q);
        out << csv::format_date(q.date) << ',' << csv::format_double(q.underlying_close) << ','
            << (est ? csv::format_double(est->sigma_annual) : std::string()) << ',' << csv::format_double(r0) << ','
            << i << ',' << csv::format_double(q.market_price) << '\n';
    }
}

}  // namespace xbs
