#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <thread>
#include <vector>

#include "xbs/error.hpp"

namespace xbs {

/// Mean-reverting variance: d(var) = kappa (theta - var) dt + xi sqrt(var) dW.
struct HestonParams {
    double kappa = 2.0;
    double theta = 0.04;
    double xi = 0.0;

    // theta == 0 is admitted so that a zero-volatility path (var0 = theta = 0) stays deterministic.
    void validate() const {
        detail::require(kappa > 0.0, "heston kappa must be > 0");
        detail::require(theta >= 0.0, "heston theta must be >= 0");
        detail::require(xi >= 0.0, "heston xi must be >= 0");
    }
};

/// Gaussian short rate: dr = a (b - r) dt + s dW.
struct VasicekParams {
    double a = 0.5;
    double b = 0.05;
    double s = 0.0;

    void validate() const {
        detail::require(a > 0.0, "vasicek a must be > 0");
        detail::require(s >= 0.0, "vasicek s must be >= 0");
    }
};

struct PathState {
    double stock = 100.0;
    double variance = 0.04;
    double rate = 0.05;

    void validate() const {
        detail::require(stock > 0.0, "path stock must be > 0");
        detail::require(variance >= 0.0, "path variance must be >= 0");
    }

    friend bool operator==(const PathState&, const PathState&) = default;
};

/// Independent standard-normal draws driving one Euler step.
struct Shocks {
    double stock = 0.0;
    double variance = 0.0;
    double rate = 0.0;
};

inline double variance_drift(const HestonParams& p, double variance) {
    detail::require(variance >= 0.0, "variance must be >= 0");
    return p.kappa * (p.theta - variance);
}

inline double rate_drift(const VasicekParams& p, double rate) { return p.a * (p.b - rate); }

/// One Euler-Maruyama step. The stock moves in log space; variance is floored at zero.
inline PathState euler_step(const PathState& state, const HestonParams& h, const VasicekParams& v, double dt,
                            const Shocks& z) {
    if (!(dt > 0.0)) throw ValidationError("euler_step needs dt > 0");
    const double var = state.variance;
    const double sqrt_var_dt = std::sqrt(var * dt);
    PathState next;
    next.stock = state.stock * std::exp((state.rate - 0.5 * var) * dt + sqrt_var_dt * z.stock);
    next.variance = std::max(0.0, var + h.kappa * (h.theta - var) * dt + h.xi * sqrt_var_dt * z.variance);
    next.rate = state.rate + v.a * (v.b - state.rate) * dt + v.s * std::sqrt(dt) * z.rate;
    return next;
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace detail

/// Per-path normal stream: mt19937_64 seeded from splitmix64(seed, path), Box-Muller pairs.
///
/// The sub-stream depends only on (seed, path index), so ensembles do not depend on how paths are
/// scheduled across threads.
class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint64_t path)
        : engine_(detail::splitmix64(seed ^ detail::splitmix64(path + 0x632BE59BD9B4E019ULL))) {}

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // (k + 0.5) / 2^53 lies strictly inside (0, 1).
        const double u1 = (double(engine_() >> 11) + 0.5) * 0x1.0p-53;
        const double u2 = (double(engine_() >> 11) + 0.5) * 0x1.0p-53;
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    Shocks next() {
        Shocks z;
        z.stock = normal();
        z.variance = normal();
        z.rate = normal();
        return z;
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

struct PathOutcome {
    PathState terminal;
    double rate_integral = 0.0;  ///< left-endpoint sum of r dt

    friend bool operator==(const PathOutcome&, const PathOutcome&) = default;
};

namespace detail {

template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t workers = std::min<std::size_t>(hw, std::max<std::size_t>(1, n / 256));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w * n / workers, end = (w + 1) * n / workers; i < end; ++i) fn(i);
        });
    }
}

}  // namespace detail

/// Simulates `n_paths` independent paths of `steps` Euler steps over `horizon` years.
template <typename ShockStream = NormalStream>
std::vector<PathOutcome> simulate_paths(const PathState& initial, const HestonParams& h, const VasicekParams& v,
                                        double horizon, int steps, int n_paths, std::uint64_t seed) {
    detail::require(steps >= 1, "simulate_paths needs steps >= 1");
    detail::require(n_paths >= 1, "simulate_paths needs n_paths >= 1");
    detail::require(horizon > 0.0, "simulate_paths needs horizon > 0");
    initial.validate();
    h.validate();
    v.validate();

    const double dt = horizon / steps;
    std::vector<PathOutcome> out(static_cast<std::size_t>(n_paths));
    detail::parallel_for(out.size(), [&](std::size_t p) {
        ShockStream shocks(seed, p);
        PathState state = initial;
        double integral = 0.0;
        for (int i = 0; i < steps; ++i) {
            integral += state.rate * dt;
            state = euler_step(state, h, v, dt, shocks.next());
        }
        out[p] = {state, integral};
    });
    return out;
}

}  // namespace xbs
