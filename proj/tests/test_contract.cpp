#include <catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "xbs/contract.hpp"

using namespace xbs;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

// Frozen lognormal-expectation quadrature values (30-digit adaptive quadrature, computed offline).
constexpr double kCallAtm = 10.4505835721855668;    // S=100 K=100 r=0.05 sigma=0.2 T=1
constexpr double kPutAtm = 5.57352602225696769;     // same, put
constexpr double kCallOtm = 5.23950567848488164;    // S=100 K=110 r=0.03 sigma=0.3 T=0.5

TEST_CASE("payoff") {
    const OptionContract call{OptionKind::call, 100.0, 1.0};
    const OptionContract put{OptionKind::put, 100.0, 1.0};
    CHECK(payoff(call, 120.0) == 20.0);
    CHECK(payoff(call, 80.0) == 0.0);
    CHECK(payoff(put, 80.0) == 20.0);
    CHECK(payoff(put, 120.0) == 0.0);
    CHECK_THROWS_AS(payoff(call, -1.0), ValidationError);
}

TEST_CASE("bs_closed_form matches lognormal quadrature") {
    CHECK_THAT(bs_closed_form({OptionKind::call, 100, 1}, 100, 0.2, 0.05), WithinRel(kCallAtm, 1e-12));
    CHECK_THAT(bs_closed_form({OptionKind::put, 100, 1}, 100, 0.2, 0.05), WithinRel(kPutAtm, 1e-12));
    CHECK_THAT(bs_closed_form({OptionKind::call, 110, 0.5}, 100, 0.3, 0.03), WithinRel(kCallOtm, 1e-12));

    // The in-tree Simpson oracle agrees with the frozen values.
    CHECK_THAT(oracle::lognormal_expectation(100, 100, 0.05, 0.2, 1, true), WithinRel(kCallAtm, 1e-9));
    CHECK_THAT(oracle::lognormal_expectation(100, 100, 0.05, 0.2, 1, false), WithinRel(kPutAtm, 1e-9));
}

TEST_CASE("bs_closed_form sweep against Simpson quadrature") {
    for (double k : {60.0, 90.0, 100.0, 130.0})
        for (double sig : {0.1, 0.35, 0.7})
            for (double r : {0.0, 0.04, 0.1}) {
                const double T = 0.75;
                CHECK_THAT(bs_closed_form({OptionKind::call, k, T}, 100, sig, r),
                           WithinAbs(oracle::lognormal_expectation(100, k, r, sig, T, true), 1e-7));
                CHECK_THAT(bs_closed_form({OptionKind::put, k, T}, 100, sig, r),
                           WithinAbs(oracle::lognormal_expectation(100, k, r, sig, T, false), 1e-7));
            }
}

TEST_CASE("bs_closed_form limits") {
    SECTION("vanishing strike: the call is the stock") {
        CHECK_THAT(bs_closed_form({OptionKind::call, 1e-9, 1}, 100, 0.2, 0.05), WithinAbs(100.0, 1e-8));
    }
    SECTION("zero volatility") {
        CHECK_THAT(bs_closed_form({OptionKind::call, 100, 1}, 100, 0.0, 0.05),
                   WithinAbs(100.0 - 100.0 * std::exp(-0.05), 1e-12));
        CHECK(bs_closed_form({OptionKind::put, 100, 1}, 100, 0.0, 0.05) == 0.0);
    }
    SECTION("put-call parity") {
        for (double k : {70.0, 100.0, 140.0}) {
            const double c = bs_closed_form({OptionKind::call, k, 2}, 100, 0.25, 0.04);
            const double p = bs_closed_form({OptionKind::put, k, 2}, 100, 0.25, 0.04);
            CHECK_THAT(c - p, WithinAbs(100.0 - k * std::exp(-0.08), 1e-10));
        }
    }
    SECTION("invalid inputs") {
        CHECK_THROWS_AS(bs_closed_form({OptionKind::call, 100, 1}, 0.0, 0.2, 0.05), ValidationError);
        CHECK_THROWS_AS(bs_closed_form({OptionKind::call, 100, 1}, 100, -0.1, 0.05), ValidationError);
        CHECK_THROWS_AS(bs_closed_form({OptionKind::call, -1, 1}, 100, 0.2, 0.05), ValidationError);
    }
}
