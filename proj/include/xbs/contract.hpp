#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>

#include "xbs/error.hpp"

namespace xbs {

enum class OptionKind { call, put };

inline std::string_view to_string(OptionKind k) { return k == OptionKind::call ? "call" : "put"; }

inline OptionKind parse_option_kind(std::string_view s) {
    if (s == "call") return OptionKind::call;
    if (s == "put") return OptionKind::put;
    throw ValidationError("option kind must be 'call' or 'put', got '" + std::string(s) + "'");
}

/// European option; maturity in years (ACT/365).
struct OptionContract {
    OptionKind kind = OptionKind::call;
    double strike = 100.0;
    double maturity = 1.0;

    void validate() const {
        detail::require(strike > 0.0 && std::isfinite(strike), "strike must be > 0");
        detail::require(maturity > 0.0 && std::isfinite(maturity), "maturity must be > 0");
    }

    friend bool operator==(const OptionContract&, const OptionContract&) = default;
};

inline double payoff(const OptionContract& c, double s) {
    detail::require(s >= 0.0, "payoff needs a non-negative underlying price");
    return c.kind == OptionKind::call ? std::max(s - c.strike, 0.0) : std::max(c.strike - s, 0.0);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Black-Scholes value of a European option with constant sigma and r, no dividends.
inline double bs_closed_form(const OptionContract& c, double s0, double sigma, double r) {
    detail::require(s0 > 0.0, "bs_closed_form needs s0 > 0");
    detail::require(sigma >= 0.0, "bs_closed_form needs sigma >= 0");
    c.validate();
    const double T = c.maturity;
    const double df_strike = c.strike * std::exp(-r * T);
    if (sigma == 0.0) {
        return c.kind == OptionKind::call ? std::max(s0 - df_strike, 0.0) : std::max(df_strike - s0, 0.0);
    }
    const double vol_t = sigma * std::sqrt(T);
    const double d1 = (std::log(s0 / c.strike) + (r + 0.5 * sigma * sigma) * T) / vol_t;
    const double d2 = d1 - vol_t;
    if (c.kind == OptionKind::call) return s0 * normal_cdf(d1) - df_strike * normal_cdf(d2);
    return df_strike * normal_cdf(-d2) - s0 * normal_cdf(-d1);
}

}  // namespace xbs
