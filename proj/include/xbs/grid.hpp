#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "xbs/contract.hpp"
#include "xbs/csv.hpp"
#include "xbs/error.hpp"

namespace xbs {

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
    if (n == 1) return {lo};
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = lo + (hi - lo) * double(i) / double(n - 1);
    out.back() = hi;
    return out;
}

/// Discretization of (t, S, sigma, r). S and t are uniform; sigma and r nodes are explicit lists.
struct Grid4D {
    double s_max = 300.0;
    int n_s = 200;  ///< S nodes, including S = 0 and S = s_max
    int n_t = 2000;  ///< time steps from t = 0 to maturity
    std::vector<double> sigma_nodes{0.2};
    std::vector<double> r_nodes{0.05};

    static constexpr double default_sigma_lo = 0.05;
    static constexpr double default_sigma_hi = 0.8;
    static constexpr double default_r_lo = 0.0;
    static constexpr double default_r_hi = 0.10;

    /// s_max = 3 max(S0, K); sigma nodes over [0.05, 0.8]; r nodes over [0, 0.1].
    static Grid4D with_defaults(double s0, double strike, int n_s, int n_t, std::size_t n_sigma,
                                std::size_t n_r) {
        Grid4D g;
        g.s_max = 3.0 * std::max(s0, strike);
        g.n_s = n_s;
        g.n_t = n_t;
        g.sigma_nodes = linspace(default_sigma_lo, default_sigma_hi, n_sigma);
        g.r_nodes = linspace(default_r_lo, default_r_hi, n_r);
        return g;
    }

    void validate() const {
        detail::require(s_max > 0.0 && std::isfinite(s_max), "grid s_max must be > 0");
        detail::require(n_s >= 3, "grid needs n_s >= 3");
        detail::require(n_t >= 1, "grid needs n_t >= 1");
        detail::require(!sigma_nodes.empty(), "grid needs at least one sigma node");
        detail::require(!r_nodes.empty(), "grid needs at least one r node");
        for (std::size_t k = 0; k < sigma_nodes.size(); ++k) {
            detail::require(sigma_nodes[k] > 0.0, "sigma nodes must be positive");
            if (k > 0) detail::require(sigma_nodes[k] > sigma_nodes[k - 1], "sigma nodes must be strictly ascending");
        }
        for (std::size_t l = 1; l < r_nodes.size(); ++l)
            detail::require(r_nodes[l] > r_nodes[l - 1], "r nodes must be strictly ascending");
    }

    double ds() const { return s_max / double(n_s - 1); }
    double dt(double maturity) const { return maturity / double(n_t); }
    double s_at(int j) const { return j == n_s - 1 ? s_max : double(j) * ds(); }
    std::size_t n_sigma() const { return sigma_nodes.size(); }
    std::size_t n_r() const { return r_nodes.size(); }
    std::size_t size() const { return std::size_t(n_s) * n_sigma() * n_r(); }

    friend bool operator==(const Grid4D&, const Grid4D&) = default;
};

/// Option values over (S_j, sigma_k, r_l) at one time level.
///
/// Storage is S-fastest so that each (k, l) slice is a contiguous span of n_s values.
class PriceSurface {
public:
    PriceSurface(Grid4D grid, OptionContract contract, double t = 0.0)
        : grid_(std::move(grid)), contract_(contract), t_(t), values_(grid_.size(), 0.0) {}

    const Grid4D& grid() const { return grid_; }
    const OptionContract& contract() const { return contract_; }
    double time() const { return t_; }
    void set_time(double t) { t_ = t; }

    std::size_t index(std::size_t j, std::size_t k, std::size_t l) const {
        return (l * grid_.n_sigma() + k) * std::size_t(grid_.n_s) + j;
    }
    double& at(std::size_t j, std::size_t k, std::size_t l) { return values_[index(j, k, l)]; }
    double at(std::size_t j, std::size_t k, std::size_t l) const { return values_[index(j, k, l)]; }

    std::span<double> slice(std::size_t k, std::size_t l) {
        return std::span<double>(values_).subspan(index(0, k, l), std::size_t(grid_.n_s));
    }
    std::span<const double> slice(std::size_t k, std::size_t l) const {
        return std::span<const double>(values_).subspan(index(0, k, l), std::size_t(grid_.n_s));
    }

    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }

private:
    Grid4D grid_;
    OptionContract contract_;
    double t_ = 0.0;
    std::vector<double> values_;
};

namespace detail {

struct Bracket {
    std::size_t lo = 0;
    std::size_t hi = 0;
    double weight = 0.0;  ///< weight of the `hi` node
};

inline Bracket bracket(std::span<const double> nodes, double x, const char* axis) {
    const double span = nodes.back() - nodes.front();
    const double slack = 1e-12 * std::max({1.0, std::abs(nodes.front()), std::abs(nodes.back())});
    if (!(x >= nodes.front() - slack && x <= nodes.back() + slack))
        throw ValidationError(std::string("surface lookup: ") + axis + " = " + csv::format_double(x) +
                              " is outside the grid range [" + csv::format_double(nodes.front()) + ", " +
                              csv::format_double(nodes.back()) + "]");
    if (nodes.size() == 1 || span == 0.0) return {0, 0, 0.0};
    x = std::clamp(x, nodes.front(), nodes.back());
    auto it = std::upper_bound(nodes.begin(), nodes.end(), x);
    std::size_t hi = std::min<std::size_t>(std::size_t(it - nodes.begin()), nodes.size() - 1);
    std::size_t lo = hi - 1;
    const double w = (x - nodes[lo]) / (nodes[hi] - nodes[lo]);
    return {lo, hi, w};
}

}  // namespace detail

/// Trilinear interpolation in (S, sigma, r); exact at grid nodes.
inline double surface_lookup(const PriceSurface& surface, double s0, double sigma0, double r0) {
    const auto& g = surface.grid();
    std::vector<double> s_nodes(std::size_t(g.n_s));
    for (int j = 0; j < g.n_s; ++j) s_nodes[std::size_t(j)] = g.s_at(j);
    const auto bs = detail::bracket(s_nodes, s0, "S");
    const auto bk = detail::bracket(g.sigma_nodes, sigma0, "sigma");
    const auto bl = detail::bracket(g.r_nodes, r0, "r");

    double value = 0.0;
    for (int dl = 0; dl < 2; ++dl) {
        const double wl = dl ? bl.weight : 1.0 - bl.weight;
        if (wl == 0.0) continue;
        for (int dk = 0; dk < 2; ++dk) {
            const double wk = dk ? bk.weight : 1.0 - bk.weight;
            if (wk == 0.0) continue;
            for (int dj = 0; dj < 2; ++dj) {
                const double wj = dj ? bs.weight : 1.0 - bs.weight;
                if (wj == 0.0) continue;
                value += wl * wk * wj *
                         surface.at(dj ? bs.hi : bs.lo, dk ? bk.hi : bk.lo, dl ? bl.hi : bl.lo);
            }
        }
    }
    return value;
}

/// CSV with columns `s,sigma,r,value`.
inline void write_surface_csv(std::ostream& out, const PriceSurface& surface) {
    const auto& g = surface.grid();
    out << "s,sigma,r,value\n";
    for (std::size_t l = 0; l < g.n_r(); ++l)
        for (std::size_t k = 0; k < g.n_sigma(); ++k)
            for (int j = 0; j < g.n_s; ++j)
                out << csv::format_double(g.s_at(j)) << ',' << csv::format_double(g.sigma_nodes[k]) << ','
                    << csv::format_double(g.r_nodes[l]) << ',' << csv::format_double(surface.at(std::size_t(j), k, l))
                    << '\n';
}

}  // namespace xbs
