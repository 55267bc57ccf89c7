#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <span>
#include <type_traits>
#include <string>
#include <vector>

#include "xbs/csv.hpp"
#include "xbs/error.hpp"

namespace xbs {

/// Row i reads lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1].
/// lower[0] and upper[n-1] are ignored.
template <std::floating_point T = double>
struct Tridiagonal {
    std::vector<T> lower;
    std::vector<T> diag;
    std::vector<T> upper;

    Tridiagonal() = default;
    explicit Tridiagonal(std::size_t n) : lower(n, T(0)), diag(n, T(0)), upper(n, T(0)) {}

    std::size_t size() const { return diag.size(); }

    T row_product(std::span<const T> x, std::size_t i) const {
        T v = diag[i] * x[i];
        if (i > 0) v += lower[i] * x[i - 1];
        if (i + 1 < size()) v += upper[i] * x[i + 1];
        return v;
    }

    std::vector<T> multiply(std::span<const T> x) const {
        std::vector<T> out(size());
        for (std::size_t i = 0; i < size(); ++i) out[i] = row_product(x, i);
        return out;
    }

    /// max_i |(Ax - b)_i|
    T residual(std::span<const T> x, std::span<const T> b) const {
        T r = 0;
        for (std::size_t i = 0; i < size(); ++i) r = std::max(r, std::abs(row_product(x, i) - b[i]));
        return r;
    }

    /// Row-wise weak dominance |d_i| >= |l_i| + |u_i|, strict in at least one row.
    bool diagonally_dominant() const {
        bool strict = false;
        for (std::size_t i = 0; i < size(); ++i) {
            const T off = (i > 0 ? std::abs(lower[i]) : T(0)) + (i + 1 < size() ? std::abs(upper[i]) : T(0));
            if (std::abs(diag[i]) < off) return false;
            if (std::abs(diag[i]) > off) strict = true;
        }
        return strict;
    }
};

enum class IterativeMethod { gauss_seidel, sor };

template <std::floating_point T = double>
struct SolveResult {
    std::vector<T> x;
    int iterations = 0;
    T residual = 0;
};

struct IterativeSettings {
    IterativeMethod method = IterativeMethod::sor;
    double omega = 1.2;
    double tol = 1e-8;
    int max_iters = 10000;
};

/// Gauss-Seidel / SOR sweeps until the max-norm residual drops to `tol`.
///
/// `guess`, when non-empty, seeds the iteration. Throws NumericalError with the last residual if
/// `max_iters` sweeps are not enough.
template <std::floating_point T>
SolveResult<T> iterative_solve(const Tridiagonal<T>& a, std::type_identity_t<std::span<const T>> rhs,
                               const IterativeSettings& settings,
                               std::type_identity_t<std::span<const T>> guess = {}) {
    const std::size_t n = a.size();
    detail::require(n > 0, "iterative_solve: empty system");
    detail::require(a.lower.size() == n && a.upper.size() == n && rhs.size() == n,
                    "iterative_solve: dimension mismatch");
    detail::require(guess.empty() || guess.size() == n, "iterative_solve: guess has wrong size");
    detail::require(settings.omega > 0.0 && settings.omega < 2.0, "iterative_solve: omega must lie in (0, 2)");
    detail::require(settings.tol > 0.0, "iterative_solve: tol must be > 0");
    detail::require(settings.max_iters >= 1, "iterative_solve: max_iters must be >= 1");
    for (std::size_t i = 0; i < n; ++i)
        detail::require(a.diag[i] != T(0), "iterative_solve: zero on the diagonal at row " + std::to_string(i));

    const T omega = settings.method == IterativeMethod::gauss_seidel ? T(1) : T(settings.omega);
    const T tol = T(settings.tol);
    SolveResult<T> out;
    out.x = guess.empty() ? std::vector<T>(n, T(0)) : std::vector<T>(guess.begin(), guess.end());
    T* x = out.x.data();

    out.residual = a.residual(out.x, rhs);
    if (out.residual <= tol) return out;

    for (int it = 1; it <= settings.max_iters; ++it) {
        // Row i-1 sees only x[i-2..i], all final for this sweep once x[i] is updated, so the
        // residual of the new iterate is accumulated on the fly.
        T res = 0;
        for (std::size_t i = 0; i < n; ++i) {
            T sigma = rhs[i];
            if (i > 0) sigma -= a.lower[i] * x[i - 1];
            if (i + 1 < n) sigma -= a.upper[i] * x[i + 1];
            x[i] += omega * (sigma / a.diag[i] - x[i]);
            if (i > 0) {
                const std::size_t p = i - 1;
                T row = a.diag[p] * x[p] + a.upper[p] * x[i] - rhs[p];
                if (p > 0) row += a.lower[p] * x[p - 1];
                res = std::max(res, std::abs(row));
            }
        }
        {
            const std::size_t p = n - 1;
            T row = a.diag[p] * x[p] - rhs[p];
            if (p > 0) row += a.lower[p] * x[p - 1];
            res = std::max(res, std::abs(row));
        }
        out.iterations = it;
        out.residual = res;
        if (!std::isfinite(res)) break;
        if (res <= tol) return out;
    }
    throw NumericalError("iterative_solve did not converge in " + std::to_string(out.iterations) +
                         " iterations; final residual " + csv::format_double(double(out.residual)));
}

}  // namespace xbs
