#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "xbs/backtest.hpp"

using namespace xbs;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::string tmp(const std::string& name) { return (std::filesystem::temp_directory_path() / ("xbs_bt_" + name)).string(); }

std::vector<MarketQuote> small_quotes() {
    using namespace std::chrono;
    std::vector<MarketQuote> q;
    for (int i = 0; i < 5; ++i)
        q.push_back({year_month_day(sys_days(year{2024} / 3 / 1) + days{i}), 100.0 + i, 0.5, OptionKind::call,
                     5.0 + i, 101.0});
    return q;
}

}  // namespace

TEST_CASE("rmse") {
    const std::vector<double> a{1, 2, 3};
    CHECK(rmse(a, a) == 0.0);
    CHECK_THAT(rmse(std::vector<double>{3, 4, 5}, a), WithinAbs(2.0, 1e-15));
    CHECK_THAT(rmse(a, std::vector<double>{1, 2, 5}), WithinAbs(std::sqrt(4.0 / 3.0), 1e-15));
    CHECK_THROWS_AS(rmse(a, std::vector<double>{1, 2}), ValidationError);
    CHECK_THROWS_AS(rmse(std::vector<double>{}, std::vector<double>{}), ValidationError);
}

TEST_CASE("rmse is permutation invariant and scales linearly") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> z(0, 3);
    for (int t = 0; t < 30; ++t) {
        std::vector<double> p(40), a(40);
        for (std::size_t i = 0; i < p.size(); ++i) {
            p[i] = z(rng);
            a[i] = z(rng);
        }
        const double base = rmse(p, a);
        std::vector<std::size_t> idx(p.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::shuffle(idx.begin(), idx.end(), rng);
        std::vector<double> ps, as, pk, ak;
        const double k = 0.1 + std::abs(z(rng));
        for (auto i : idx) {
            ps.push_back(p[i]);
            as.push_back(a[i]);
        }
        for (std::size_t i = 0; i < p.size(); ++i) {
            pk.push_back(k * p[i]);
            ak.push_back(k * a[i]);
        }
        CHECK_THAT(rmse(ps, as), WithinRel(base, 1e-12));
        CHECK_THAT(rmse(pk, ak), WithinRel(k * base, 1e-12));
    }
}

TEST_CASE("run_backtest with trivial pricers") {
    const auto quotes = small_quotes();
    SECTION("passthrough is perfect") {
        const auto r = run_backtest(quotes, PassthroughPricer{}, ConstantVolatility{0.2}, 0.05, "pass");
        CHECK(r.rmse == 0.0);
        CHECK(r.mae == 0.0);
        CHECK(r.n_quotes == quotes.size());
        CHECK(r.skipped == 0);
        CHECK(r.model_name == "pass");
    }
    SECTION("constant offset of one") {
        const std::vector<MarketQuote> one(quotes.begin(), quotes.begin() + 1);
        const auto r = run_backtest(one, [](const MarketQuote& q, double, double) { return q.market_price + 1.0; },
                                    ConstantVolatility{}, 0.05);
        CHECK(r.rmse == 1.0);
        CHECK(r.mae == 1.0);
    }
    SECTION("empty quote set") {
        CHECK_THROWS_AS(run_backtest(std::vector<MarketQuote>{}, PassthroughPricer{}, ConstantVolatility{}, 0.05),
                        ValidationError);
    }
    SECTION("rmse squared is the mean squared residual") {
        const auto r = run_backtest(quotes, [](const MarketQuote& q, double, double) { return q.strike / 20.0; },
                                    ConstantVolatility{}, 0.05);
        double ms = 0.0;
        for (const auto& x : r.residuals) ms += x.residual() * x.residual();
        CHECK_THAT(r.rmse * r.rmse, WithinRel(ms / r.residuals.size(), 1e-12));
    }
}

TEST_CASE("trailing volatility skips quotes without enough history") {
    SyntheticMarketConfig cfg;
    cfg.end = std::chrono::year{2019} / std::chrono::August / 30;
    const auto m = make_synthetic_market(cfg);
    const TrailingVolatility vol{&m.prices, 30};
    const auto r = run_backtest(m.quotes, PassthroughPricer{}, vol, 0.05);
    // Quotes every 5 business days from the first day; the first with 31 closes is index 30.
    CHECK(r.skipped == 6);
    CHECK(r.n_quotes + r.skipped == m.quotes.size());
    CHECK(r.rmse == 0.0);
    CHECK(r.residuals.front().quote_id == 6);

    // The estimate uses exactly the 30 returns ending on the quote date.
    const auto est = vol.at(m.quotes[6].date);
    REQUIRE(est);
    std::vector<double> closes;
    for (std::size_t i = 0; i <= 30; ++i) closes.push_back(m.prices[i].close);
    CHECK(est->sigma_annual == historical_volatility(log_returns(closes)).sigma_annual);
}

TEST_CASE("synthetic closed-form market is reproduced by the degenerate PDE pricer") {
    SyntheticMarketConfig cfg;
    cfg.end = std::chrono::year{2020} / std::chrono::May / 31;
    const auto m = make_synthetic_market(cfg);
    const TrailingVolatility vol{&m.prices, cfg.vol_window};
    const auto r = run_backtest(m.quotes, DegeneratePdePricer{}, vol, cfg.r0, "pde");
    double mean = 0.0;
    for (const auto& q : r.residuals) mean += q.market;
    mean /= r.residuals.size();
    INFO("rmse " << r.rmse << " mean " << mean);
    CHECK(r.rmse < 0.005 * mean);
    CHECK(r.wall_time_seconds > 0.0);
}

TEST_CASE("report JSON round-trips") {
    const auto r = run_backtest(small_quotes(), [](const MarketQuote& q, double s, double) { return q.strike * s / 3.0; },
                                ConstantVolatility{0.37}, 0.05, "weird");
    const auto text = to_json(r).dump();
    CHECK(report_from_json(nlohmann::json::parse(text)) == r);
    const auto j = to_json(r);
    for (const char* key : {"model_name", "rmse", "mae", "n_quotes", "skipped", "wall_time_seconds"}) CHECK(j.contains(key));
}

TEST_CASE("quotes CSV round-trips and rejects bad rows") {
    const auto q = small_quotes();
    write_quotes(tmp("q.csv"), q);
    CHECK(load_quotes(tmp("q.csv")) == q);

    std::ofstream(tmp("bad.csv")) << quotes_header << "\n2024-01-02,100,0.5,straddle,3,100\n";
    CHECK_THROWS_WITH(load_quotes(tmp("bad.csv")), ContainsSubstring(":2:"));
    std::ofstream(tmp("bad2.csv")) << quotes_header << "\n2024-01-02,100,0,call,3,100\n";
    CHECK_THROWS_WITH(load_quotes(tmp("bad2.csv")), ContainsSubstring("maturity"));
}

TEST_CASE("timing_benchmark") {
    const std::vector<OptionContract> work{{OptionKind::call, 100, 1}, {OptionKind::put, 90, 0.5}};
    CHECK_THROWS_AS(timing_benchmark([](const OptionContract&) { return 1.0; }, work, 1), ValidationError);
    const auto t = timing_benchmark([](const OptionContract& c) { return c.strike; }, work, 5);
    CHECK(t.repetitions == 5);
    CHECK(t.checksum == 5 * 190.0);
    CHECK(t.min_seconds <= t.median_seconds);
    CHECK(t.median_seconds <= t.p95_seconds);
    CHECK(t.p95_seconds <= t.max_seconds);
}

TEST_CASE("predictions align by quote id") {
    const auto quotes = small_quotes();
    const auto pde = run_backtest(quotes, [](const MarketQuote& q, double, double) { return q.market_price + 2.0; },
                                  ConstantVolatility{}, 0.05, "pde");
    {
        std::ofstream f(tmp("pred.csv"));
        f << "quote_id,predicted_price\n";
        for (std::size_t i = 0; i < quotes.size(); ++i) f << i << ',' << quotes[i].market_price + 1.0 << '\n';
    }
    const auto lstm = report_from_predictions(quotes, pde, load_predictions(tmp("pred.csv")), "lstm");
    CHECK_THAT(lstm.rmse, WithinAbs(1.0, 1e-12));
    CHECK_THAT(pde.rmse - lstm.rmse, WithinAbs(1.0, 1e-12));

    {
        std::ofstream f(tmp("pred_missing.csv"));
        f << "quote_id,predicted_price\n";
        for (std::size_t i = 0; i < quotes.size(); ++i)
            if (i != 3) f << i << ',' << 1.0 << '\n';
    }
    CHECK_THROWS_WITH(report_from_predictions(quotes, pde, load_predictions(tmp("pred_missing.csv")), "lstm"),
                      ContainsSubstring("quote id 3"));

    std::ofstream(tmp("pred_extra.csv")) << "quote_id,predicted_price\n0,1\n1,1\n2,1\n3,1\n4,1\n99,1\n";
    CHECK_THROWS_WITH(report_from_predictions(quotes, pde, load_predictions(tmp("pred_extra.csv")), "lstm"),
                      ContainsSubstring("99"));
    std::ofstream(tmp("pred_dup.csv")) << "quote_id,predicted_price\n0,1\n0,2\n";
    CHECK_THROWS_WITH(load_predictions(tmp("pred_dup.csv")), ContainsSubstring("duplicate"));
}

TEST_CASE("features export has one row per quote") {
    SyntheticMarketConfig cfg;
    cfg.end = std::chrono::year{2019} / std::chrono::October / 31;
    const auto m = make_synthetic_market(cfg);
    std::ostringstream out;
    write_features(out, m.quotes, TrailingVolatility{&m.prices, 30}, 0.05);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "date,close,sigma,r,quote_id,market_price");
    std::size_t rows = 0, with_sigma = 0;
    while (std::getline(in, line)) {
        ++rows;
        with_sigma += line.find(",,") == std::string::npos;
    }
    CHECK(rows == m.quotes.size());
    CHECK(with_sigma == m.quotes.size() - 6);
}
