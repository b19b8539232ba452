#pragma once

// Independent reference computations used only by tests. Nothing here calls the
// closed forms it is meant to check.

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <vector>

namespace oracle {

/// alpha_H * int_a^b int_c^d |t-s|^{2H-2} ds dt for disjoint intervals with c < d <= a < b,
/// by nested tanh-sinh quadrature. Distances are rebuilt from the complement arguments
/// so the integrand stays accurate next to the shared endpoint. Boost passes a negative
/// complement x_lo - x on the left half and a positive one x_hi - x on the right half.
inline double kernel_rectangle_right(double a, double b, double c, double d, double hurst) {
    const double e = 2.0 * hurst - 2.0;
    const double alpha = hurst * (2.0 * hurst - 1.0);
    // Separate integrators: the abscissa tables grow lazily, so nesting one object is unsafe.
    boost::math::quadrature::tanh_sinh<double> outer_rule(15), inner_rule(15);
    const double outer_len = b - a, inner_len = d - c, offset = a - d;
    auto outer = [&](double t, double tc) {
        // t - a, accurate near both endpoints
        const double from_a = tc < 0.0 ? -tc : outer_len - tc;
        const double gap = from_a + offset;  // t - d
        auto inner = [&](double s, double sc) {
            const double to_d = sc > 0.0 ? sc : inner_len + sc;  // d - s
            return std::pow(gap + to_d, e);
        };
        return inner_rule.integrate(inner, c, d);
    };
    return alpha * outer_rule.integrate(outer, a, b);
}

/// Same integral for any two cells of equal length that are either identical or disjoint.
/// Identical cells use the exact value (b-a)^{2H}.
inline double kernel_cell_pair(double a, double b, double c, double d, double hurst) {
    if (a == c && b == d) return std::pow(b - a, 2.0 * hurst);
    if (a >= d) return kernel_rectangle_right(a, b, c, d, hurst);
    return kernel_rectangle_right(c, d, a, b, hurst);
}

/// Cell Gram matrix of a uniform grid by quadrature.
inline std::vector<std::vector<double>> kernel_gram(double horizon, std::size_t cells, double hurst) {
    std::vector<std::vector<double>> g(cells, std::vector<double>(cells));
    const double dt = horizon / static_cast<double>(cells);
    for (std::size_t i = 0; i < cells; ++i)
        for (std::size_t j = i; j < cells; ++j) {
            const double v = kernel_cell_pair(i * dt, (i + 1) * dt, j * dt, (j + 1) * dt, hurst);
            g[i][j] = v;
            g[j][i] = v;
        }
    return g;
}

inline double quadratic_form(const std::vector<std::vector<double>>& g, const std::vector<double>& x,
                             const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < y.size(); ++j) s += x[i] * g[i][j] * y[j];
    return s;
}

}  // namespace oracle
