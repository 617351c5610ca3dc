#pragma once

// Test-only oracles, independent of the library's solve paths: dense operator
// assembly, 1-d brute-force prox minimization, dense normal-equation solves.

#include <cmath>
#include <functional>
#include <vector>

#include "iuzawa/field.hpp"

namespace oracle {

using iuzawa::Domain;
using iuzawa::GridField;

/// Dense matrix of a linear field-to-field map, built column by column.
inline std::vector<std::vector<double>> dense_matrix(
    const Domain& d, const std::function<GridField(const GridField&)>& op) {
    const std::size_t n = d.size();
    std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
    for (std::size_t j = 0; j < n; ++j) {
        GridField e(d);
        e.values[j] = 1.0;
        GridField col = op(e);
        for (std::size_t i = 0; i < n; ++i) a[i][j] = col.values[i];
    }
    return a;
}

/// Brute-force pointwise resolvent: argmin over a 1e-3 grid of
/// 1/2 (lambda+tau) r^2 - v r + beta|r| restricted to [lo, hi].
inline double prox_grid_search(double v, double lambda_tau, double beta, double lo, double hi,
                               double grid_step = 1e-3, double pad = 1.0) {
    double best_r = lo, best_val = 1e300;
    const double a = lo - pad, b = hi + pad;
    const long steps = std::lround((b - a) / grid_step);
    for (long s = 0; s <= steps; ++s) {
        double r = a + s * grid_step;
        if (r < lo) r = lo;
        if (r > hi) r = hi;
        const double val = 0.5 * lambda_tau * r * r - v * r + beta * std::fabs(r);
        if (val < best_val) {
            best_val = val;
            best_r = r;
        }
    }
    return best_r;
}

/// Gaussian elimination with partial pivoting (small dense systems).
inline std::vector<double> dense_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
        std::swap(a[c], a[piv]);
        std::swap(b[c], b[piv]);
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = a[r][c] / a[c][c];
            for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
            b[r] -= f * b[c];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
        x[i] = s / a[i][i];
    }
    return x;
}

}  // namespace oracle
