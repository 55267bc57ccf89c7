#pragma once

// Command-line front end: price, surface, simulate, backtest, compare, fixture.
//
// Settings come from an optional JSON config (`--config`, must carry `schema_version: 1`);
// command-line flags override file values. Exit codes: 0 success, 1 numerical failure,
// 2 configuration or validation error.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "xbs/xbs.hpp"

namespace xbs::cli {

using nlohmann::json;

inline constexpr int schema_version = 1;

enum class SweepMode { strike, st, grid };

enum class BacktestModel { pde_degenerate, pde_extended, closed_form, passthrough };

inline BacktestModel parse_model(const std::string& s) {
    if (s == "pde-degenerate") return BacktestModel::pde_degenerate;
    if (s == "pde-extended") return BacktestModel::pde_extended;
    if (s == "closed-form") return BacktestModel::closed_form;
    if (s == "passthrough") return BacktestModel::passthrough;
    throw ValidationError("unknown backtest model '" + s +
                          "' (expected pde-degenerate, pde-extended, closed-form or passthrough)");
}

struct RunConfig {
    OptionContract contract{};
    double s0 = 100.0;
    double sigma0 = 0.2;
    double r0 = 0.05;

    std::optional<double> s_max;
    int n_s = 200;
    std::optional<int> n_t = 2000;  ///< empty = smallest stable count
    std::vector<double> sigma_nodes;  ///< empty = {sigma0}
    std::vector<double> r_nodes;      ///< empty = {r0}

    HestonParams heston{2.0, 0.04, 0.1};
    VasicekParams vasicek{0.5, 0.05, 0.01};
    Scheme scheme = Scheme::explicit_fd;
    IterativeSettings solver{};

    int mc_steps = 0;  ///< 0 = 250 per year
    int mc_paths = 200000;
    std::uint64_t seed = 42;

    std::string prices_path;
    std::string quotes_path;
    std::string lstm_path;
    std::string backtest_model = "pde-degenerate";
    int vol_window = 30;
    int trading_days = 252;

    SweepMode sweep = SweepMode::strike;
    double k_min = 50.0;
    double k_max = 150.0;
    double k_step = 10.0;
    int t_slices = 11;

    std::string output;
    bool json_output = false;

    Grid4D grid_for(const OptionContract& c) const {
        Grid4D g;
        g.s_max = s_max.value_or(3.0 * std::max(s0, c.strike));
        g.n_s = n_s;
        g.sigma_nodes = sigma_nodes.empty() ? std::vector<double>{sigma0} : sigma_nodes;
        g.r_nodes = r_nodes.empty() ? std::vector<double>{r0} : r_nodes;
        g.n_t = n_t.value_or(1);
        if (!n_t) g.n_t = stable_time_steps(c, g, heston, vasicek);
        return g;
    }

    PdeSettings pde_settings() const {
        PdeSettings s;
        s.scheme = scheme;
        s.solver = solver;
        return s;
    }

    void validate() const {
        contract.validate();
        xbs::detail::require(s0 > 0.0, "s0 must be > 0");
        xbs::detail::require(sigma0 > 0.0, "sigma0 must be > 0");
        heston.validate();
        vasicek.validate();
        xbs::detail::require(mc_paths >= 2, "mc n_paths must be >= 2");
        xbs::detail::require(mc_steps >= 0, "mc steps must be >= 0");
        xbs::detail::require(vol_window >= 2, "vol_window must be >= 2");
        xbs::detail::require(trading_days > 0, "trading_days must be > 0");
        xbs::detail::require(t_slices >= 2, "t_slices must be >= 2");
        grid_for(contract).validate();
        for (const auto* p : {&prices_path, &quotes_path})
            if (!p->empty() && !std::filesystem::exists(*p)) throw ValidationError("file does not exist: " + *p);
    }
};

namespace detail {

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

}  // namespace detail

/// Fills `cfg` from a config document. Relative data paths resolve against the file's directory.
inline void apply_config_file(const std::string& path, RunConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError("config " + path + ": " + e.what());
    }
    try {
        if (!j.contains("schema_version") || j.at("schema_version").get<int>() != schema_version)
            throw ValidationError("config " + path + ": schema_version must be " + std::to_string(schema_version));
        using detail::read;
        if (j.contains("contract")) {
            const auto& c = j.at("contract");
            if (c.contains("kind")) cfg.contract.kind = parse_option_kind(c.at("kind").get<std::string>());
            read(c, "strike", cfg.contract.strike);
            read(c, "maturity", cfg.contract.maturity);
        }
        if (j.contains("market")) {
            const auto& m = j.at("market");
            read(m, "s0", cfg.s0);
            read(m, "sigma0", cfg.sigma0);
            read(m, "r0", cfg.r0);
        }
        if (j.contains("grid")) {
            const auto& g = j.at("grid");
            if (g.contains("s_max") && !g.at("s_max").is_null()) cfg.s_max = g.at("s_max").get<double>();
            read(g, "n_s", cfg.n_s);
            if (g.contains("n_t")) {
                if (g.at("n_t").is_string() && g.at("n_t").get<std::string>() == "auto")
                    cfg.n_t.reset();
                else
                    cfg.n_t = g.at("n_t").get<int>();
            }
            read(g, "sigma_nodes", cfg.sigma_nodes);
            read(g, "r_nodes", cfg.r_nodes);
            if (g.contains("n_sigma")) {
                const auto n = g.at("n_sigma").get<std::size_t>();
                cfg.sigma_nodes = linspace(Grid4D::default_sigma_lo, Grid4D::default_sigma_hi, n);
            }
            if (g.contains("n_r")) {
                const auto n = g.at("n_r").get<std::size_t>();
                cfg.r_nodes = linspace(Grid4D::default_r_lo, Grid4D::default_r_hi, n);
            }
        }
        if (j.contains("heston")) {
            const auto& h = j.at("heston");
            read(h, "kappa", cfg.heston.kappa);
            read(h, "theta", cfg.heston.theta);
            read(h, "xi", cfg.heston.xi);
        }
        if (j.contains("vasicek")) {
            const auto& v = j.at("vasicek");
            read(v, "a", cfg.vasicek.a);
            read(v, "b", cfg.vasicek.b);
            read(v, "s", cfg.vasicek.s);
        }
        if (j.contains("scheme")) cfg.scheme = parse_scheme(j.at("scheme").get<std::string>());
        if (j.contains("solver")) {
            const auto& s = j.at("solver");
            if (s.contains("method")) {
                const auto m = s.at("method").get<std::string>();
                if (m == "sor")
                    cfg.solver.method = IterativeMethod::sor;
                else if (m == "gauss_seidel")
                    cfg.solver.method = IterativeMethod::gauss_seidel;
                else
                    throw ValidationError("solver.method must be 'sor' or 'gauss_seidel'");
            }
            read(s, "omega", cfg.solver.omega);
            read(s, "tol", cfg.solver.tol);
            read(s, "max_iters", cfg.solver.max_iters);
        }
        if (j.contains("mc")) {
            read(j.at("mc"), "steps", cfg.mc_steps);
            read(j.at("mc"), "n_paths", cfg.mc_paths);
        }
        read(j, "seed", cfg.seed);
        const auto base = std::filesystem::path(path).parent_path();
        auto resolve = [&](const json& d, const char* key, std::string& out) {
            if (!d.contains(key) || d.at(key).is_null()) return;
            std::filesystem::path p = d.at(key).get<std::string>();
            out = (p.is_relative() ? base / p : p).string();
        };
        if (j.contains("data")) {
            const auto& d = j.at("data");
            resolve(d, "prices", cfg.prices_path);
            resolve(d, "quotes", cfg.quotes_path);
            resolve(d, "lstm_predictions", cfg.lstm_path);
        }
        if (j.contains("backtest")) {
            const auto& b = j.at("backtest");
            read(b, "model", cfg.backtest_model);
            read(b, "vol_window", cfg.vol_window);
            read(b, "trading_days", cfg.trading_days);
        }
        if (j.contains("sweep")) {
            const auto& s = j.at("sweep");
            if (s.contains("mode")) {
                const auto m = s.at("mode").get<std::string>();
                if (m == "strike")
                    cfg.sweep = SweepMode::strike;
                else if (m == "st")
                    cfg.sweep = SweepMode::st;
                else if (m == "grid")
                    cfg.sweep = SweepMode::grid;
                else
                    throw ValidationError("sweep.mode must be strike, st or grid");
            }
            read(s, "k_min", cfg.k_min);
            read(s, "k_max", cfg.k_max);
            read(s, "k_step", cfg.k_step);
            read(s, "t_slices", cfg.t_slices);
        }
        if (j.contains("output")) resolve(j, "output", cfg.output);
    } catch (const json::exception& e) {
        throw ValidationError("config " + path + ": " + e.what());
    }
}

/// Everything a subcommand needs to turn flags and config into a RunConfig.
class Options {
public:
    explicit Options(CLI::App* app) {
        app->add_option("--config", config_path_, "JSON config file")->check(CLI::ExistingFile);
        app->add_flag("--json", json_, "machine-readable output");
        seed_ = app->add_option("--seed", seed_v_, "random seed");
        out_ = app->add_option("--out", out_v_, "output path");
        kind_ = app->add_option("--kind", kind_v_, "call or put");
        strike_ = app->add_option("--strike", strike_v_, "strike price");
        maturity_ = app->add_option("--maturity", maturity_v_, "maturity in years");
        s0_ = app->add_option("--s0", s0_v_, "spot price");
        sigma0_ = app->add_option("--sigma0", sigma0_v_, "volatility at which to read the price");
        r0_ = app->add_option("--r0", r0_v_, "short rate at which to read the price");
        scheme_ = app->add_option("--scheme", scheme_v_, "explicit or implicit");
        n_s_ = app->add_option("--n-s", n_s_v_, "S nodes");
        n_t_ = app->add_option("--n-t", n_t_v_, "time steps, or 'auto'");
        s_max_ = app->add_option("--s-max", s_max_v_, "upper S bound");
    }

    RunConfig resolve() const {
        RunConfig cfg;
        if (!config_path_.empty()) apply_config_file(config_path_, cfg);
        cfg.json_output = json_;
        if (seed_->count()) cfg.seed = seed_v_;
        if (out_->count()) cfg.output = out_v_;
        if (kind_->count()) cfg.contract.kind = parse_option_kind(kind_v_);
        if (strike_->count()) cfg.contract.strike = strike_v_;
        if (maturity_->count()) cfg.contract.maturity = maturity_v_;
        if (s0_->count()) cfg.s0 = s0_v_;
        if (sigma0_->count()) cfg.sigma0 = sigma0_v_;
        if (r0_->count()) cfg.r0 = r0_v_;
        if (scheme_->count()) cfg.scheme = parse_scheme(scheme_v_);
        if (n_s_->count()) cfg.n_s = n_s_v_;
        if (n_t_->count()) {
            if (n_t_v_ == "auto") {
                cfg.n_t.reset();
            } else {
                int n = 0;
                if (!csv::parse_int(n_t_v_, n)) throw ValidationError("--n-t must be an integer or 'auto'");
                cfg.n_t = n;
            }
        }
        if (s_max_->count()) cfg.s_max = s_max_v_;
        return cfg;
    }

private:
    std::string config_path_;
    bool json_ = false;
    std::uint64_t seed_v_ = 0;
    std::string out_v_, kind_v_, scheme_v_, n_t_v_;
    double strike_v_ = 0, maturity_v_ = 0, s0_v_ = 0, sigma0_v_ = 0, r0_v_ = 0, s_max_v_ = 0;
    int n_s_v_ = 0;
    CLI::Option *seed_, *out_, *kind_, *strike_, *maturity_, *s0_, *sigma0_, *r0_, *scheme_, *n_s_, *n_t_, *s_max_;
};

inline void emit_text(const RunConfig& cfg, const std::string& text, std::ostream& out) {
    if (cfg.output.empty()) {
        out << text;
        return;
    }
    std::ofstream f(cfg.output);
    if (!f) throw ValidationError("cannot write " + cfg.output);
    f << text;
}

// ---- price -------------------------------------------------------------------------------------

inline json price_record(const RunConfig& cfg, double value, const Grid4D& g) {
    return {{"command", "price"},
            {"value", value},
            {"kind", std::string(to_string(cfg.contract.kind))},
            {"strike", cfg.contract.strike},
            {"maturity", cfg.contract.maturity},
            {"s0", cfg.s0},
            {"sigma0", cfg.sigma0},
            {"r0", cfg.r0},
            {"scheme", std::string(to_string(cfg.scheme))},
            {"n_s", g.n_s},
            {"n_t", g.n_t},
            {"s_max", g.s_max}};
}

inline int cmd_price(const RunConfig& cfg, std::ostream& out) {
    const auto g = cfg.grid_for(cfg.contract);
    const auto surf = solve_extended_pde(cfg.contract, g, cfg.heston, cfg.vasicek, cfg.pde_settings());
    const double value = surface_lookup(surf, cfg.s0, cfg.sigma0, cfg.r0);
    const auto rec = price_record(cfg, value, g);
    if (cfg.json_output)
        out << rec.dump() << '\n';
    else
        out << "price " << csv::format_double(value) << '\n';
    if (!cfg.output.empty()) {
        std::ofstream f(cfg.output);
        if (!f) throw ValidationError("cannot write " + cfg.output);
        f << rec.dump(2) << '\n';
    }
    return 0;
}

// ---- surface -----------------------------------------------------------------------------------

inline std::vector<double> strike_sweep(double lo, double hi, double step) {
    xbs::detail::require(step > 0.0, "sweep step must be > 0");
    xbs::detail::require(lo <= hi, "sweep range is empty: k_min > k_max");
    xbs::detail::require(lo > 0.0, "sweep strikes must be > 0");
    std::vector<double> out;
    const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    for (std::size_t i = 0; i < n; ++i) out.push_back(lo + double(i) * step);
    return out;
}

inline int cmd_surface(const RunConfig& cfg, std::ostream& out) {
    std::ostringstream csv_out;
    switch (cfg.sweep) {
        case SweepMode::strike: {
            // One solve per strike: the terminal condition depends on K.
            csv_out << "strike,value\n";
            for (double k : strike_sweep(cfg.k_min, cfg.k_max, cfg.k_step)) {
                OptionContract c = cfg.contract;
                c.strike = k;
                const auto surf = solve_extended_pde(c, cfg.grid_for(c), cfg.heston, cfg.vasicek, cfg.pde_settings());
                csv_out << csv::format_double(k) << ',' << csv::format_double(surface_lookup(surf, cfg.s0, cfg.sigma0, cfg.r0))
                        << '\n';
            }
            break;
        }
        case SweepMode::st: {
            const auto g = cfg.grid_for(cfg.contract);
            std::vector<int> wanted;
            for (int m = 0; m < cfg.t_slices; ++m)
                wanted.push_back(int(std::lround(double(m) * g.n_t / double(cfg.t_slices - 1))));
            std::vector<std::string> blocks(wanted.size());
            auto settings = cfg.pde_settings();
            settings.observer = [&](const PriceSurface& s, int step) {
                for (std::size_t m = 0; m < wanted.size(); ++m) {
                    if (wanted[m] != step || !blocks[m].empty()) continue;
                    std::ostringstream b;
                    for (int j = 0; j < g.n_s; ++j)
                        b << csv::format_double(s.time()) << ',' << csv::format_double(g.s_at(j)) << ','
                          << csv::format_double(surface_lookup(s, g.s_at(j), cfg.sigma0, cfg.r0)) << '\n';
                    blocks[m] = b.str();
                }
            };
            solve_extended_pde(cfg.contract, g, cfg.heston, cfg.vasicek, settings);
            csv_out << "t,s,value\n";
            for (const auto& b : blocks) csv_out << b;
            break;
        }
        case SweepMode::grid: {
            const auto g = cfg.grid_for(cfg.contract);
            write_surface_csv(csv_out, solve_extended_pde(cfg.contract, g, cfg.heston, cfg.vasicek, cfg.pde_settings()));
            break;
        }
    }
    emit_text(cfg, csv_out.str(), out);
    return 0;
}

// ---- simulate ----------------------------------------------------------------------------------

inline PathState initial_state(const RunConfig& cfg) { return {cfg.s0, cfg.sigma0 * cfg.sigma0, cfg.r0}; }

inline int mc_steps(const RunConfig& cfg) {
    return cfg.mc_steps > 0 ? cfg.mc_steps : default_mc_steps(cfg.contract.maturity);
}

inline int cmd_simulate(const RunConfig& cfg, bool cross_check, std::ostream& out) {
    const auto init = initial_state(cfg);
    const int steps = mc_steps(cfg);
    json rec;
    if (cross_check) {
        const McSettings mc{steps, cfg.mc_paths, cfg.seed};
        const auto r = mc_vs_pde_report(cfg.contract, init, cfg.heston, cfg.vasicek, cfg.grid_for(cfg.contract), mc,
                                        cfg.pde_settings());
        rec = to_json(r);
        rec["command"] = "simulate";
        rec["steps"] = steps;
    } else {
        const auto est = mc_price(cfg.contract, init, cfg.heston, cfg.vasicek, steps, cfg.mc_paths, cfg.seed);
        rec = {{"command", "simulate"}, {"price", est.price}, {"std_error", est.std_error},
               {"n_paths", est.n_paths}, {"seed", est.seed},   {"steps", steps}};
    }
    if (!cfg.output.empty()) {
        const auto paths =
            simulate_paths(init, cfg.heston, cfg.vasicek, cfg.contract.maturity, steps, cfg.mc_paths, cfg.seed);
        std::ofstream f(cfg.output);
        if (!f) throw ValidationError("cannot write " + cfg.output);
        f << "path,stock,variance,rate,rate_integral\n";
        for (std::size_t p = 0; p < paths.size(); ++p)
            f << p << ',' << csv::format_double(paths[p].terminal.stock) << ','
              << csv::format_double(paths[p].terminal.variance) << ',' << csv::format_double(paths[p].terminal.rate)
              << ',' << csv::format_double(paths[p].rate_integral) << '\n';
    }
    if (cfg.json_output) {
        out << rec.dump() << '\n';
    } else if (cross_check) {
        out << "pde " << csv::format_double(rec["pde"].get<double>()) << "  mc " << csv::format_double(rec["mc"].get<double>())
            << " +/- " << csv::format_double(rec["std_error"].get<double>()) << "  (" << rec["mode"].get<std::string>()
            << ")\n";
    } else {
        out << "mc price " << csv::format_double(rec["price"].get<double>()) << " +/- "
            << csv::format_double(rec["std_error"].get<double>()) << '\n';
    }
    return 0;
}

// ---- backtest / compare --------------------------------------------------------------------------

struct BacktestInputs {
    PriceSeries prices;
    std::vector<MarketQuote> quotes;
};

inline BacktestInputs load_backtest_inputs(const RunConfig& cfg) {
    xbs::detail::require(!cfg.prices_path.empty(), "backtest needs a prices file (--prices or data.prices)");
    xbs::detail::require(!cfg.quotes_path.empty(), "backtest needs a quotes file (--quotes or data.quotes)");
    return {load_price_series(cfg.prices_path), load_quotes(cfg.quotes_path)};
}

inline BacktestReport run_model_backtest(const RunConfig& cfg, const BacktestInputs& in) {
    const TrailingVolatility vol{&in.prices, cfg.vol_window, cfg.trading_days};
    const std::span<const MarketQuote> quotes(in.quotes);
    switch (parse_model(cfg.backtest_model)) {
        case BacktestModel::pde_degenerate:
            return run_backtest(quotes, DegeneratePdePricer{cfg.n_s, 2000.0, cfg.scheme}, vol, cfg.r0, "pde-degenerate");
        case BacktestModel::pde_extended:
            return run_backtest(quotes,
                                ExtendedPdePricer{cfg.heston, cfg.vasicek, cfg.n_s,
                                                  std::max<std::size_t>(cfg.sigma_nodes.size(), 3),
                                                  std::max<std::size_t>(cfg.r_nodes.size(), 3), cfg.scheme},
                                vol, cfg.r0, "pde-extended");
        case BacktestModel::closed_form:
            return run_backtest(quotes, ClosedFormPricer{}, vol, cfg.r0, "closed-form");
        case BacktestModel::passthrough:
            return run_backtest(quotes, PassthroughPricer{}, vol, cfg.r0, "passthrough");
    }
    throw ValidationError("unknown backtest model");
}

inline json summary_json(const BacktestReport& r) {
    auto j = to_json(r);
    j.erase("residuals");
    return j;
}

inline std::string summary_line(const BacktestReport& r) {
    std::ostringstream s;
    s << r.model_name << ": rmse " << csv::format_double(r.rmse) << "  mae " << csv::format_double(r.mae) << "  n_quotes "
      << r.n_quotes << "  skipped " << r.skipped << "  wall " << csv::format_double(r.wall_time_seconds) << "s\n";
    return s.str();
}

inline void write_json_file(const std::string& path, const json& j) {
    std::ofstream f(path);
    if (!f) throw ValidationError("cannot write " + path);
    f << j.dump(2) << '\n';
}

inline int cmd_backtest(const RunConfig& cfg, const std::string& features_out, std::ostream& out) {
    const auto in = load_backtest_inputs(cfg);
    const auto report = run_model_backtest(cfg, in);
    if (!features_out.empty()) {
        std::ofstream f(features_out);
        if (!f) throw ValidationError("cannot write " + features_out);
        write_features(f, in.quotes, TrailingVolatility{&in.prices, cfg.vol_window, cfg.trading_days}, cfg.r0);
    }
    if (!cfg.output.empty()) write_json_file(cfg.output, to_json(report));
    if (cfg.json_output)
        out << summary_json(report).dump() << '\n';
    else
        out << summary_line(report);
    return 0;
}

inline int cmd_compare(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const auto in = load_backtest_inputs(cfg);
    const auto pde = run_model_backtest(cfg, in);
    json full = {{"pde", to_json(pde)}, {"lstm", nullptr}, {"delta_rmse", nullptr}};
    json summary = {{"pde", summary_json(pde)}, {"lstm", nullptr}, {"delta_rmse", nullptr}};
    std::optional<BacktestReport> lstm;
    if (cfg.lstm_path.empty() || !std::filesystem::exists(cfg.lstm_path)) {
        err << "notice: no LSTM predictions"
            << (cfg.lstm_path.empty() ? std::string() : " at " + cfg.lstm_path) << "; emitting PDE-only report\n";
    } else {
        lstm = report_from_predictions(in.quotes, pde, load_predictions(cfg.lstm_path), "lstm");
        full["lstm"] = to_json(*lstm);
        summary["lstm"] = summary_json(*lstm);
        full["delta_rmse"] = summary["delta_rmse"] = pde.rmse - lstm->rmse;
    }
    if (!cfg.output.empty()) write_json_file(cfg.output, full);
    if (cfg.json_output) {
        out << summary.dump() << '\n';
    } else {
        out << summary_line(pde);
        if (lstm) out << summary_line(*lstm) << "delta rmse (pde - lstm) " << csv::format_double(pde.rmse - lstm->rmse) << '\n';
    }
    return 0;
}

// ---- fixture -------------------------------------------------------------------------------------

/// Writes a synthetic market (prices.csv, quotes.csv, features.csv) and a matching config.json.
inline int cmd_fixture(const RunConfig& cfg, const std::string& dir, std::ostream& out) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    SyntheticMarketConfig mc;
    mc.seed = cfg.seed;
    mc.r0 = cfg.r0;
    mc.vol_window = cfg.vol_window;
    const auto m = make_synthetic_market(mc);
    const auto base = fs::path(dir);
    write_price_series((base / "prices.csv").string(), m.prices);
    write_quotes((base / "quotes.csv").string(), m.quotes);
    {
        std::ofstream f(base / "features.csv");
        write_features(f, m.quotes, TrailingVolatility{&m.prices, cfg.vol_window, cfg.trading_days}, cfg.r0);
    }
    const json config = {{"schema_version", schema_version},
                         {"market", {{"r0", cfg.r0}}},
                         {"seed", cfg.seed},
                         {"data",
                          {{"prices", "prices.csv"}, {"quotes", "quotes.csv"}, {"lstm_predictions", "lstm_predictions.csv"}}},
                         {"backtest", {{"model", "pde-degenerate"}, {"vol_window", cfg.vol_window}}}};
    write_json_file((base / "config.json").string(), config);
    out << "wrote " << m.prices.size() << " closes and " << m.quotes.size() << " quotes to " << dir << '\n';
    return 0;
}

// ---- entry point ---------------------------------------------------------------------------------

/// Runs one command line. Diagnostics go to `err`; the return value is the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Extended Black-Scholes PDE pricer with Monte Carlo and backtest harness", "xbs"};
    app.require_subcommand(1);

    auto* price = app.add_subcommand("price", "price one contract on the PDE grid");
    Options price_opts(price);

    auto* surface = app.add_subcommand("surface", "export plot data: strike sweep, S/t slices or the t=0 grid");
    Options surface_opts(surface);
    std::string mode;
    double k_min = 0, k_max = 0, k_step = 0;
    int t_slices = 0;
    auto* mode_opt = surface->add_option("--mode", mode, "strike, st or grid")->check(CLI::IsMember({"strike", "st", "grid"}));
    auto* kmin_opt = surface->add_option("--k-min", k_min);
    auto* kmax_opt = surface->add_option("--k-max", k_max);
    auto* kstep_opt = surface->add_option("--k-step", k_step);
    auto* tsl_opt = surface->add_option("--t-slices", t_slices, "time levels in st mode");

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo price under the Heston/Vasicek dynamics");
    Options simulate_opts(simulate);
    int paths = 0, steps = 0;
    bool cross_check = false;
    auto* paths_opt = simulate->add_option("--paths", paths);
    auto* steps_opt = simulate->add_option("--steps", steps);
    simulate->add_flag("--cross-check", cross_check, "also solve the PDE and report the z-score");

    auto* backtest = app.add_subcommand("backtest", "theoretical vs market prices over a quote file");
    Options backtest_opts(backtest);
    std::string prices, quotes, model, features_out, lstm;
    int window = 0;
    auto add_data = [&](CLI::App* sub) {
        sub->add_option("--prices", prices, "date,close CSV")->check(CLI::ExistingFile);
        sub->add_option("--quotes", quotes, "quotes CSV")->check(CLI::ExistingFile);
        sub->add_option("--model", model, "pde-degenerate, pde-extended, closed-form or passthrough");
        sub->add_option("--vol-window", window, "trailing returns for historical volatility");
    };
    add_data(backtest);
    backtest->add_option("--features-out", features_out, "write per-quote features CSV");

    auto* compare = app.add_subcommand("compare", "PDE backtest against LSTM predictions");
    Options compare_opts(compare);
    add_data(compare);
    compare->add_option("--lstm", lstm, "quote_id,predicted_price CSV");

    auto* fixture = app.add_subcommand("fixture", "write a synthetic market fixture");
    Options fixture_opts(fixture);
    std::string dir;
    fixture->add_option("--dir", dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }

    auto apply_data = [&](RunConfig& cfg) {
        if (!prices.empty()) cfg.prices_path = prices;
        if (!quotes.empty()) cfg.quotes_path = quotes;
        if (!model.empty()) cfg.backtest_model = model;
        if (window != 0) cfg.vol_window = window;
        if (!lstm.empty()) cfg.lstm_path = lstm;
    };

    try {
        if (price->parsed()) {
            auto cfg = price_opts.resolve();
            cfg.validate();
            return cmd_price(cfg, out);
        }
        if (surface->parsed()) {
            auto cfg = surface_opts.resolve();
            if (mode_opt->count()) cfg.sweep = mode == "strike" ? SweepMode::strike : mode == "st" ? SweepMode::st : SweepMode::grid;
            if (kmin_opt->count()) cfg.k_min = k_min;
            if (kmax_opt->count()) cfg.k_max = k_max;
            if (kstep_opt->count()) cfg.k_step = k_step;
            if (tsl_opt->count()) cfg.t_slices = t_slices;
            cfg.validate();
            return cmd_surface(cfg, out);
        }
        if (simulate->parsed()) {
            auto cfg = simulate_opts.resolve();
            if (paths_opt->count()) cfg.mc_paths = paths;
            if (steps_opt->count()) cfg.mc_steps = steps;
            cfg.validate();
            return cmd_simulate(cfg, cross_check, out);
        }
        if (backtest->parsed()) {
            auto cfg = backtest_opts.resolve();
            apply_data(cfg);
            cfg.validate();
            parse_model(cfg.backtest_model);
            return cmd_backtest(cfg, features_out, out);
        }
        if (compare->parsed()) {
            auto cfg = compare_opts.resolve();
            apply_data(cfg);
            cfg.validate();
            parse_model(cfg.backtest_model);
            return cmd_compare(cfg, out, err);
        }
        if (fixture->parsed()) {
            auto cfg = fixture_opts.resolve();
            return cmd_fixture(cfg, dir, out);
        }
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return 1;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    return 2;
}

}  // namespace xbs::cli
