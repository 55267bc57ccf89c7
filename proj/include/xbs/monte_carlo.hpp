#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "xbs/contract.hpp"
#include "xbs/dynamics.hpp"
#include "xbs/error.hpp"
#include "xbs/grid.hpp"
#include "xbs/pde.hpp"

namespace xbs {

struct McEstimate {
    double price = 0.0;
    double std_error = 0.0;
    int n_paths = 0;
    std::uint64_t seed = 0;

    friend bool operator==(const McEstimate&, const McEstimate&) = default;
};

/// Roughly daily stepping: 250 steps per year of maturity, at least one.
inline int default_mc_steps(double maturity) { return std::max(1, int(std::lround(250.0 * maturity))); }

/// Discounted payoff averaged over simulated paths, discounting each path by exp(-sum r dt).
template <typename ShockStream = NormalStream>
McEstimate mc_price(const OptionContract& c, const PathState& initial, const HestonParams& h, const VasicekParams& v,
                    int steps, int n_paths, std::uint64_t seed) {
    detail::require(n_paths >= 2, "mc_price needs at least 2 paths");
    c.validate();
    const auto paths = simulate_paths<ShockStream>(initial, h, v, c.maturity, steps, n_paths, seed);

    // Welford in path order: deterministic, and exact (zero spread) when every path agrees.
    double mean = 0.0, m2 = 0.0;
    std::size_t n = 0;
    for (const auto& p : paths) {
        const double x = std::exp(-p.rate_integral) * payoff(c, p.terminal.stock);
        ++n;
        const double delta = x - mean;
        mean += delta / double(n);
        m2 += delta * (x - mean);
    }
    const double var = n > 1 ? std::max(0.0, m2 / double(n - 1)) : 0.0;
    return {mean, std::sqrt(var / double(n)), n_paths, seed};
}

struct McSettings {
    int steps = 250;
    int n_paths = 200000;
    std::uint64_t seed = 42;
};

/// PDE vs Monte Carlo for one contract.
///
/// When the MC spread is exactly zero there is no meaningful z-score; `z` is left empty and the
/// comparison is by relative difference instead.
struct ComparisonRecord {
    double pde = 0.0;
    double mc = 0.0;
    double std_error = 0.0;
    std::optional<double> z;
    int n_paths = 0;
    std::uint64_t seed = 0;
    bool mismatched_inputs = false;

    bool exact_mode() const { return !z.has_value(); }
    double relative_difference() const { return std::abs(pde - mc) / std::max(std::abs(mc), 1e-300); }

    /// |z| <= z_bound, or relative difference within rel_tol in exact mode.
    bool agrees(double z_bound = 3.0, double rel_tol = 0.005) const {
        return exact_mode() ? relative_difference() <= rel_tol : std::abs(*z) <= z_bound;
    }
};

inline nlohmann::json to_json(const ComparisonRecord& r) {
    nlohmann::json j;
    j["pde"] = r.pde;
    j["mc"] = r.mc;
    j["std_error"] = r.std_error;
    j["z"] = r.z ? nlohmann::json(*r.z) : nlohmann::json(nullptr);
    j["n_paths"] = r.n_paths;
    j["seed"] = r.seed;
    j["mode"] = r.exact_mode() ? "exact_difference" : "z_score";
    j["relative_difference"] = r.relative_difference();
    j["mismatched_inputs"] = r.mismatched_inputs;
    return j;
}

inline ComparisonRecord make_comparison(double pde, const McEstimate& mc, bool mismatched) {
    ComparisonRecord r;
    r.pde = pde;
    r.mc = mc.price;
    r.std_error = mc.std_error;
    if (mc.std_error > 0.0) r.z = (pde - mc.price) / mc.std_error;
    r.n_paths = mc.n_paths;
    r.seed = mc.seed;
    r.mismatched_inputs = mismatched;
    return r;
}

/// Where the PDE surface is read. Usually (S0, sqrt(var0), r0) of the simulated paths.
struct PdeQuery {
    double s0 = 0.0;
    double sigma0 = 0.0;
    double r0 = 0.0;

    static PdeQuery from(const PathState& p) { return {p.stock, std::sqrt(p.variance), p.rate}; }
};

/// Prices `pde_contract` on the grid at `query` and `mc_contract` by simulation from `initial`.
/// Differing contracts are still compared, with `mismatched_inputs` set.
inline ComparisonRecord mc_vs_pde_report(const OptionContract& pde_contract, const OptionContract& mc_contract,
                                         const PathState& initial, const HestonParams& h, const VasicekParams& v,
                                         const Grid4D& grid, const McSettings& mc, const PdeSettings& pde,
                                         const PdeQuery& query) {
    initial.validate();
    const auto surface = solve_extended_pde(pde_contract, grid, h, v, pde);
    const double pde_price = surface_lookup(surface, query.s0, query.sigma0, query.r0);
    const auto est = mc_price(mc_contract, initial, h, v, mc.steps, mc.n_paths, mc.seed);
    return make_comparison(pde_price, est, !(pde_contract == mc_contract));
}

inline ComparisonRecord mc_vs_pde_report(const OptionContract& contract, const PathState& initial,
                                         const HestonParams& h, const VasicekParams& v, const Grid4D& grid,
                                         const McSettings& mc, const PdeSettings& pde = {}) {
    return mc_vs_pde_report(contract, contract, initial, h, v, grid, mc, pde, PdeQuery::from(initial));
}

}  // namespace xbs
