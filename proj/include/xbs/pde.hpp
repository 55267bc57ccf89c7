#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "xbs/contract.hpp"
#include "xbs/dynamics.hpp"
#include "xbs/error.hpp"
#include "xbs/grid.hpp"
#include "xbs/tridiagonal.hpp"

// Extended Black-Scholes PDE on a (t, S, sigma, r) grid:
//
//   V_t + 1/2 sigma^2 S^2 V_SS + r S V_S - r V + V_sigma dsigma/dt + V_r dr/dt = 0
//
// dsigma/dt and dr/dt are taken as the deterministic drifts of the Heston variance and Vasicek
// rate processes: dsigma/dt = kappa (theta - sigma^2) / (2 sigma) by the chain rule on
// d(sigma^2), and dr/dt = a (b - r). There are no second-order sigma or r terms.
//
// The march runs backward from the payoff at t = T. S derivatives use central differences;
// sigma and r derivatives are first-order upwind in the drift direction, with zero gradient where
// the upwind neighbour lies off the grid.

namespace xbs {

enum class Scheme { explicit_fd, implicit_fd };

inline std::string_view to_string(Scheme s) { return s == Scheme::explicit_fd ? "explicit" : "implicit"; }

inline Scheme parse_scheme(std::string_view s) {
    if (s == "explicit") return Scheme::explicit_fd;
    if (s == "implicit") return Scheme::implicit_fd;
    throw ValidationError("scheme must be 'explicit' or 'implicit', got '" + std::string(s) + "'");
}

/// dsigma/dt implied by the variance drift at volatility `sigma`.
inline double volatility_drift(const HestonParams& h, double sigma) {
    return variance_drift(h, sigma * sigma) / (2.0 * sigma);
}

/// (V at S = 0, V at S = s_max) for rate r at time t.
inline std::pair<double, double> boundary_values(const OptionContract& c, const Grid4D& g, double t, double r) {
    const double T = c.maturity;
    const double eps = 1e-12 * std::max(1.0, T);
    if (!(t >= -eps && t <= T + eps))
        throw ValidationError("boundary_values: t = " + csv::format_double(t) + " outside [0, " +
                              csv::format_double(T) + "]");
    const double tau = std::clamp(T - t, 0.0, T);
    const double k_disc = tau == 0.0 ? c.strike : c.strike * std::exp(-r * tau);
    // The linear call asymptote is floored at zero for grids that end below the strike.
    if (c.kind == OptionKind::call) return {0.0, std::max(0.0, g.s_max - k_disc)};
    return {k_disc, 0.0};
}

/// Surface at maturity: the payoff on every (sigma, r) slice.
inline PriceSurface terminal_surface(const OptionContract& c, const Grid4D& g) {
    PriceSurface surf(g, c, c.maturity);
    for (std::size_t l = 0; l < g.n_r(); ++l)
        for (std::size_t k = 0; k < g.n_sigma(); ++k) {
            auto row = surf.slice(k, l);
            for (int j = 0; j < g.n_s; ++j) row[std::size_t(j)] = payoff(c, g.s_at(j));
        }
    return surf;
}

namespace detail {

/// Upwind neighbour along one axis: the node the drift points toward, or none at a grid edge.
struct UpwindStencil {
    std::ptrdiff_t offset = 0;  ///< +1, -1 or 0 (zero gradient)
    double coef = 0.0;          ///< drift / spacing, signed so that term = coef * (V[nb] - V[here])
};

inline UpwindStencil upwind(std::span<const double> nodes, std::size_t i, double drift) {
    if (drift > 0.0 && i + 1 < nodes.size()) return {+1, drift / (nodes[i + 1] - nodes[i])};
    if (drift < 0.0 && i > 0) return {-1, -drift / (nodes[i] - nodes[i - 1])};
    return {};
}

struct SliceStencils {
    UpwindStencil sigma;
    UpwindStencil rate;
};

inline SliceStencils slice_stencils(const Grid4D& g, const HestonParams& h, const VasicekParams& v, std::size_t k,
                                    std::size_t l) {
    return {upwind(g.sigma_nodes, k, volatility_drift(h, g.sigma_nodes[k])),
            upwind(g.r_nodes, l, rate_drift(v, g.r_nodes[l]))};
}

/// Drift-weighted sigma and r derivative terms at node (j, k, l).
inline double advection(const PriceSurface& s, const SliceStencils& st, std::size_t j, std::size_t k,
                        std::size_t l) {
    const double here = s.at(j, k, l);
    double out = 0.0;
    if (st.sigma.offset != 0) out += st.sigma.coef * (s.at(j, std::size_t(std::ptrdiff_t(k) + st.sigma.offset), l) - here);
    if (st.rate.offset != 0) out += st.rate.coef * (s.at(j, k, std::size_t(std::ptrdiff_t(l) + st.rate.offset)) - here);
    return out;
}

}  // namespace detail

/// Largest explicit time step that keeps every stencil weight non-negative, and where it binds.
struct StabilityLimit {
    double max_dt = std::numeric_limits<double>::infinity();
    std::size_t sigma_index = 0;
    std::size_t r_index = 0;
};

/// dt <= 1 / (sigma_k^2 (s_max/dS)^2 + |r_l| s_max/dS + |r_l| + |sigma advection|/dsigma + |r advection|/dr),
/// minimized over (k, l). With single sigma and r nodes this is dS^2 / (sigma^2 s_max^2 + r s_max dS + r dS^2).
inline StabilityLimit explicit_stability_limit(const Grid4D& g, const HestonParams& h, const VasicekParams& v) {
    StabilityLimit out;
    const double jmax = g.s_max / g.ds();
    for (std::size_t l = 0; l < g.n_r(); ++l)
        for (std::size_t k = 0; k < g.n_sigma(); ++k) {
            const double sig = g.sigma_nodes[k];
            const double r = std::abs(g.r_nodes[l]);
            const auto st = detail::slice_stencils(g, h, v, k, l);
            const double rate = sig * sig * jmax * jmax + r * jmax + r + st.sigma.coef + st.rate.coef;
            const double dt = rate > 0.0 ? 1.0 / rate : std::numeric_limits<double>::infinity();
            if (dt < out.max_dt) out = {dt, k, l};
        }
    return out;
}

/// Smallest step count that satisfies the explicit bound for this contract's maturity.
inline int stable_time_steps(const OptionContract& c, const Grid4D& g, const HestonParams& h, const VasicekParams& v) {
    const auto lim = explicit_stability_limit(g, h, v);
    if (!std::isfinite(lim.max_dt)) return 1;
    return std::max(1, int(std::ceil(c.maturity / lim.max_dt * (1.0 + 1e-12))));
}

inline void check_explicit_stability(const OptionContract& c, const Grid4D& g, const HestonParams& h,
                                     const VasicekParams& v) {
    const auto lim = explicit_stability_limit(g, h, v);
    const double dt = g.dt(c.maturity);
    if (dt > lim.max_dt)
        throw NumericalError("explicit scheme unstable: dt = " + csv::format_double(dt) + " exceeds the bound " +
                             csv::format_double(lim.max_dt) + " set by slice sigma = " +
                             csv::format_double(g.sigma_nodes[lim.sigma_index]) +
                             ", r = " + csv::format_double(g.r_nodes[lim.r_index]) + "; need n_t >= " +
                             std::to_string(stable_time_steps(c, g, h, v)));
}

/// One explicit backward step: `next` holds V at t_{i+1}, the result V at t_i = t_{i+1} - dt.
inline PriceSurface explicit_step(const PriceSurface& next, const Grid4D& g, const OptionContract& c,
                                  const HestonParams& h, const VasicekParams& v) {
    check_explicit_stability(c, g, h, v);
    const double dt = g.dt(c.maturity);
    const double t = std::max(0.0, next.time() - dt);
    PriceSurface out(g, c, t);
    const std::size_t n = std::size_t(g.n_s);

    for (std::size_t l = 0; l < g.n_r(); ++l) {
        const double r = g.r_nodes[l];
        for (std::size_t k = 0; k < g.n_sigma(); ++k) {
            const double sig2 = g.sigma_nodes[k] * g.sigma_nodes[k];
            const auto st = detail::slice_stencils(g, h, v, k, l);
            const auto prev = next.slice(k, l);
            auto row = out.slice(k, l);
            for (std::size_t j = 1; j + 1 < n; ++j) {
                const double jj = double(j);
                const double second = prev[j + 1] - 2.0 * prev[j] + prev[j - 1];
                const double first = prev[j + 1] - prev[j - 1];
                const double op = 0.5 * sig2 * jj * jj * second + 0.5 * r * jj * first - r * prev[j] +
                                  detail::advection(next, st, j, k, l);
                row[j] = prev[j] + dt * op;
            }
            const auto [lo, hi] = boundary_values(c, g, t, r);
            row[0] = lo;
            row[n - 1] = hi;
        }
    }
    return out;
}

/// Implicit-in-S system for one (sigma, r) slice over the n_s - 2 interior nodes.
///
/// Row j: a_j V_{j-1} + b_j V_j + c_j V_{j+1} = known_j with
///   a_j = -dt/2 (sigma^2 j^2 - r j),  b_j = 1 + dt (sigma^2 j^2 + r),  c_j = -dt/2 (sigma^2 j^2 + r j).
/// The a_1 and c_{n_s-2} couplings to the boundary nodes are kept aside and folded into the rhs.
struct SliceSystem {
    Tridiagonal<double> matrix;
    double lower_boundary_coef = 0.0;
    double upper_boundary_coef = 0.0;

    std::vector<double> rhs(std::span<const double> known, double v_lo, double v_hi) const {
        std::vector<double> b(known.begin(), known.end());
        b.front() -= lower_boundary_coef * v_lo;
        b.back() -= upper_boundary_coef * v_hi;
        return b;
    }
};

inline SliceSystem assemble_tridiagonal(const Grid4D& g, const OptionContract&, double sigma, double r, double dt) {
    detail::require(g.n_s >= 3, "assemble_tridiagonal needs n_s >= 3");
    detail::require(dt > 0.0, "assemble_tridiagonal needs dt > 0");
    const std::size_t m = std::size_t(g.n_s - 2);
    SliceSystem sys{Tridiagonal<double>(m)};
    const double sig2 = sigma * sigma;
    for (std::size_t i = 0; i < m; ++i) {
        const double j = double(i + 1);
        const double a = -0.5 * dt * (sig2 * j * j - r * j);
        const double b = 1.0 + dt * (sig2 * j * j + r);
        const double cc = -0.5 * dt * (sig2 * j * j + r * j);
        sys.matrix.diag[i] = b;
        if (i == 0)
            sys.lower_boundary_coef = a;
        else
            sys.matrix.lower[i] = a;
        if (i + 1 == m)
            sys.upper_boundary_coef = cc;
        else
            sys.matrix.upper[i] = cc;
    }
    return sys;
}

/// One implicit backward step: S implicit per slice, sigma/r advection taken from `next`.
inline PriceSurface implicit_step(const PriceSurface& next, const Grid4D& g, const OptionContract& c,
                                  const HestonParams& h, const VasicekParams& v,
                                  const IterativeSettings& solver = {}) {
    const double dt = g.dt(c.maturity);
    const double t = std::max(0.0, next.time() - dt);
    PriceSurface out(g, c, t);
    const std::size_t n = std::size_t(g.n_s);
    std::vector<double> known(n - 2);
    std::vector<double> guess(n - 2);

    for (std::size_t l = 0; l < g.n_r(); ++l) {
        const double r = g.r_nodes[l];
        for (std::size_t k = 0; k < g.n_sigma(); ++k) {
            const auto st = detail::slice_stencils(g, h, v, k, l);
            const auto prev = next.slice(k, l);
            const double sig2 = g.sigma_nodes[k] * g.sigma_nodes[k];
            for (std::size_t j = 1; j + 1 < n; ++j) {
                known[j - 1] = prev[j] + dt * detail::advection(next, st, j, k, l);
                // Explicit predictor as the starting iterate; it is O(dt^2) away from the solution.
                const double jj = double(j);
                guess[j - 1] = known[j - 1] + dt * (0.5 * sig2 * jj * jj * (prev[j + 1] - 2.0 * prev[j] + prev[j - 1]) +
                                                    0.5 * r * jj * (prev[j + 1] - prev[j - 1]) - r * prev[j]);
            }

            const auto sys = assemble_tridiagonal(g, c, g.sigma_nodes[k], r, dt);
            const auto [lo, hi] = boundary_values(c, g, t, r);
            const auto b = sys.rhs(known, lo, hi);
            const auto sol = iterative_solve<double>(sys.matrix, b, solver, guess);

            auto row = out.slice(k, l);
            row[0] = lo;
            row[n - 1] = hi;
            // The solver stops at its residual tolerance, which can leave sub-tolerance negative noise
            // where the exact value is zero.
            for (std::size_t j = 1; j + 1 < n; ++j) row[j] = std::max(0.0, sol.x[j - 1]);
        }
    }
    return out;
}

struct PdeSettings {
    Scheme scheme = Scheme::explicit_fd;
    IterativeSettings solver{};
    /// Called with every time level from maturity (step n_t) down to t = 0 (step 0).
    std::function<void(const PriceSurface&, int step)> observer;
};

/// Backward march from the payoff at maturity to t = 0.
inline PriceSurface solve_extended_pde(const OptionContract& c, const Grid4D& g, const HestonParams& h,
                                       const VasicekParams& v, const PdeSettings& settings = {}) {
    c.validate();
    g.validate();
    h.validate();
    v.validate();
    if (settings.scheme == Scheme::explicit_fd) check_explicit_stability(c, g, h, v);

    PriceSurface surf = terminal_surface(c, g);
    if (settings.observer) settings.observer(surf, g.n_t);
    for (int i = g.n_t - 1; i >= 0; --i) {
        surf = settings.scheme == Scheme::explicit_fd ? explicit_step(surf, g, c, h, v)
                                                      : implicit_step(surf, g, c, h, v, settings.solver);
        surf.set_time(i == 0 ? 0.0 : c.maturity * double(i) / double(g.n_t));
        for (double x : surf.values())
            if (!std::isfinite(x)) throw NumericalError("non-finite value in PDE march at step " + std::to_string(i));
        if (settings.observer) settings.observer(surf, i);
    }
    return surf;
}

inline PriceSurface solve_extended_pde(const OptionContract& c, const Grid4D& g, const HestonParams& h,
                                       const VasicekParams& v, Scheme scheme) {
    PdeSettings s;
    s.scheme = scheme;
    return solve_extended_pde(c, g, h, v, s);
}

}  // namespace xbs
