#include <catch_amalgamated.hpp>

#include <cmath>

#include "xbs/dynamics.hpp"

using namespace xbs;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

struct ZeroShocks {
    ZeroShocks(std::uint64_t, std::uint64_t) {}
    Shocks next() { return {}; }
};

}  // namespace

TEST_CASE("variance_drift") {
    const HestonParams h{2.0, 0.04, 0.3};
    CHECK(variance_drift(h, 0.04) == 0.0);
    CHECK_THAT(variance_drift(h, 0.09), WithinAbs(-0.10, 1e-15));
    CHECK_THAT(variance_drift(h, 0.0), WithinAbs(0.08, 1e-15));
    CHECK_THROWS_AS(variance_drift(h, -0.01), ValidationError);
}

TEST_CASE("rate_drift") {
    const VasicekParams v{0.5, 0.03, 0.01};
    CHECK(rate_drift(v, 0.03) == 0.0);
    CHECK_THAT(rate_drift(v, 0.05), WithinAbs(-0.01, 1e-15));
    CHECK_THAT(rate_drift(v, 0.0), WithinAbs(0.015, 1e-15));
}

TEST_CASE("euler_step") {
    const HestonParams h{2.0, 0.04, 0.5};
    const VasicekParams v{0.5, 0.03, 0.01};

    SECTION("deterministic fixed point") {
        const PathState s{100.0, 0.04, 0.03};
        const auto n = euler_step(s, h, v, 0.01, {});
        CHECK(n.variance == 0.04);
        CHECK(n.rate == 0.03);
        CHECK_THAT(n.stock, WithinRel(100.0 * std::exp((0.03 - 0.02) * 0.01), 1e-15));
    }
    SECTION("deterministic variance arithmetic") {
        const auto n = euler_step({100.0, 0.09, 0.03}, h, v, 0.01, {});
        CHECK_THAT(n.variance, WithinAbs(0.089, 1e-15));
    }
    SECTION("full truncation floors variance at zero") {
        const auto n = euler_step({100.0, 0.01, 0.03}, h, v, 0.01, {0.0, -50.0, 0.0});
        CHECK(n.variance == 0.0);
        CHECK(n.stock > 0.0);
    }
    SECTION("dt must be positive") {
        CHECK_THROWS_AS(euler_step({}, h, v, 0.0, {}), ValidationError);
        CHECK_THROWS_AS(euler_step({}, h, v, -1.0, {}), ValidationError);
    }
}

TEST_CASE("simulate_paths, zero diffusion") {
    const HestonParams h{2.0, 0.04, 0.0};
    const VasicekParams v{0.5, 0.05, 0.0};
    const auto paths = simulate_paths<ZeroShocks>({100.0, 0.04, 0.05}, h, v, 1.0, 100, 5, 1);
    for (const auto& p : paths) {
        CHECK(p == paths.front());
        CHECK_THAT(p.terminal.stock, WithinRel(100.0 * std::exp(0.05 - 0.02), 1e-12));
        CHECK_THAT(p.rate_integral, WithinRel(0.05, 1e-12));
    }
}

TEST_CASE("simulate_paths is seed-deterministic") {
    const HestonParams h{1.5, 0.04, 0.4};
    const VasicekParams v{0.5, 0.03, 0.02};
    const PathState s0{100.0, 0.09, 0.05};
    const auto a = simulate_paths(s0, h, v, 1.0, 50, 2000, 99);
    const auto b = simulate_paths(s0, h, v, 1.0, 50, 2000, 99);
    CHECK(a == b);
    const auto c = simulate_paths(s0, h, v, 1.0, 50, 2000, 100);
    CHECK_FALSE(a == c);

    // Each path depends only on (seed, index): a serial replay of path 1234 matches.
    NormalStream z(99, 1234);
    PathState st = s0;
    double integral = 0.0;
    for (int i = 0; i < 50; ++i) {
        integral += st.rate * (1.0 / 50);
        st = euler_step(st, h, v, 1.0 / 50, z.next());
    }
    CHECK(a[1234].terminal == st);
    CHECK(a[1234].rate_integral == integral);
}

TEST_CASE("terminal variance tracks the mean-reversion ODE when xi = 0") {
    const HestonParams h{2.0, 0.04, 0.0};
    const VasicekParams v{0.5, 0.05, 0.0};
    const double var0 = 0.16, T = 1.0;
    const double exact = h.theta + (var0 - h.theta) * std::exp(-h.kappa * T);
    double prev_err = 0.0;
    for (int steps : {100, 200, 400}) {
        const auto p = simulate_paths({100.0, var0, 0.05}, h, v, T, steps, 1, 1);
        const double err = std::abs(p[0].terminal.variance - exact);
        CHECK(err < 2.0 * (var0 - h.theta) * h.kappa * h.kappa * T * (T / steps));  // O(dt)
        if (prev_err > 0.0) CHECK_THAT(prev_err / err, WithinAbs(2.0, 0.1));
        prev_err = err;
    }
}

TEST_CASE("variance and rate relax monotonically toward theta and b without noise") {
    const HestonParams h{3.0, 0.04, 0.0};
    const VasicekParams v{0.8, 0.03, 0.0};
    for (const PathState start : {PathState{100, 0.25, 0.10}, PathState{100, 0.0, -0.02}}) {
        PathState s = start;
        for (int i = 0; i < 500; ++i) {
            const auto n = euler_step(s, h, v, 0.01, {0.7, 0.0, 0.0});
            if (start.variance > h.theta) {
                CHECK(n.variance <= s.variance);
                CHECK(n.variance >= h.theta);
            } else {
                CHECK(n.variance >= s.variance);
                CHECK(n.variance <= h.theta);
            }
            if (start.rate > v.b) CHECK(n.rate <= s.rate);
            else CHECK(n.rate >= s.rate);
            s = n;
        }
    }
}

TEST_CASE("variance never goes negative under heavy vol-of-vol") {
    const HestonParams h{0.5, 0.04, 2.0};
    const VasicekParams v{0.5, 0.03, 0.01};
    const auto paths = simulate_paths({100.0, 0.04, 0.03}, h, v, 2.0, 200, 3000, 5);
    std::size_t floored = 0;
    for (const auto& p : paths) {
        CHECK(p.terminal.variance >= 0.0);
        CHECK(p.terminal.stock > 0.0);
        floored += p.terminal.variance == 0.0;
    }
    CHECK(floored > 0);  // the floor is actually exercised
}

TEST_CASE("ensemble mean of the terminal rate matches the Vasicek mean") {
    const HestonParams h{2.0, 0.04, 0.0};
    const VasicekParams v{0.7, 0.03, 0.02};
    const double r0 = 0.08, T = 2.0;
    const int n = 40000;
    const auto paths = simulate_paths({100.0, 0.04, r0}, h, v, T, 200, n, 17);
    double sum = 0.0, sq = 0.0;
    for (const auto& p : paths) {
        sum += p.terminal.rate;
        sq += p.terminal.rate * p.terminal.rate;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sq / n - mean * mean) / (n - 1));
    const double dt = T / 200;
    // Euler mean is b + (r0 - b)(1 - a dt)^steps; the continuous value differs by O(dt).
    const double exact = v.b + (r0 - v.b) * std::exp(-v.a * T);
    CHECK(std::abs(mean - exact) < 3.0 * se + std::abs(r0 - v.b) * v.a * v.a * T * dt);
}

TEST_CASE("simulate_paths rejects empty runs") {
    CHECK_THROWS_AS(simulate_paths({}, {}, {}, 1.0, 0, 10, 1), ValidationError);
    CHECK_THROWS_AS(simulate_paths({}, {}, {}, 1.0, 10, 0, 1), ValidationError);
}
