#pragma once

// Fractional kernel alpha_H |t-s|^{2H-2} and the norms built on it. Every
// cell-pair integral of the kernel is taken in closed form (increment covariance),
// so the |t-s|^{2H-2} singularity is never quadratured.

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "fracheat/core.hpp"
#include "fracheat/fbm.hpp"

namespace fracheat {

/// alpha_H = H (2H - 1).
inline double alpha(HurstIndex h) { return h.value() * (2.0 * h.value() - 1.0); }

/// Gram matrix of cell indicators: K(c, c') = <1_c, 1_c'>_H.
class FractionalKernel {
public:
    FractionalKernel(const TimeGrid& grid, HurstIndex h) : grid_(grid), hurst_(h), gram_(grid.cells(), grid.cells()) {
        const std::size_t m = grid.cells();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = i; j < m; ++j) {
                const double v = increment_covariance(grid.node(i), grid.node(i + 1), grid.node(j), grid.node(j + 1), h);
                gram_(i, j) = v;
                gram_(j, i) = v;
            }
    }

    const TimeGrid& grid() const noexcept { return grid_; }
    HurstIndex hurst() const noexcept { return hurst_; }
    double alpha() const noexcept { return fracheat::alpha(hurst_); }
    const Eigen::MatrixXd& gram() const noexcept { return gram_; }
    double operator()(std::size_t i, std::size_t j) const { return gram_(i, j); }

private:
    TimeGrid grid_;
    HurstIndex hurst_;
    Eigen::MatrixXd gram_;
};

// Value types a step function may carry. Other value types (GridField) supply
// value_inner / value_norm overloads found by ADL.
using Sequence = std::vector<double>;

inline double value_inner(double a, double b) { return a * b; }
inline double value_norm(double a) { return std::abs(a); }

inline double value_inner(const Sequence& a, const Sequence& b) {
    const std::size_t n = std::min(a.size(), b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}
inline double value_norm(const Sequence& a) { return std::sqrt(value_inner(a, a)); }

/// Piecewise-constant function on the cells of a time grid.
template <typename V>
class StepFunction {
public:
    StepFunction(const TimeGrid& grid, std::vector<V> coefficients) : grid_(grid), coef_(std::move(coefficients)) {
        if (coef_.size() != grid.cells())
            throw GridMismatch(detail::concat("step function needs ", grid.cells(), " coefficients, got ", coef_.size()));
    }

    /// c * 1_{(a,b]} with a, b grid nodes.
    static StepFunction indicator(const TimeGrid& grid, double a, double b, V c, V zero) {
        const std::size_t i0 = grid.node_index(a), i1 = grid.node_index(b);
        std::vector<V> v(grid.cells(), zero);
        for (std::size_t i = i0; i < i1; ++i) v[i] = c;
        return StepFunction(grid, std::move(v));
    }

    const TimeGrid& grid() const noexcept { return grid_; }
    std::size_t cells() const noexcept { return coef_.size(); }
    const V& operator[](std::size_t c) const { return coef_[c]; }
    V& operator[](std::size_t c) { return coef_[c]; }
    const std::vector<V>& coefficients() const noexcept { return coef_; }

private:
    TimeGrid grid_;
    std::vector<V> coef_;
};

using ScalarStep = StepFunction<double>;

inline ScalarStep indicator(const TimeGrid& grid, double a, double b, double c = 1.0) {
    return ScalarStep::indicator(grid, a, b, c, 0.0);
}

/// Piecewise-constant function on [0,T]^2; entry (theta, s) on cell pairs.
class BiStepFunction {
public:
    explicit BiStepFunction(const TimeGrid& grid)
        : grid_(grid), coef_(Eigen::MatrixXd::Zero(grid.cells(), grid.cells())) {}
    BiStepFunction(const TimeGrid& grid, Eigen::MatrixXd coef) : grid_(grid), coef_(std::move(coef)) {
        if (coef_.rows() != static_cast<Eigen::Index>(grid.cells()) || coef_.cols() != coef_.rows())
            throw GridMismatch("bi-step coefficient array must be cells x cells");
    }

    /// a(theta) b(s).
    static BiStepFunction outer(const ScalarStep& a, const ScalarStep& b) {
        require_same_grid(a.grid(), b.grid());
        const std::size_t m = a.cells();
        Eigen::MatrixXd c(m, m);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) c(i, j) = a[i] * b[j];
        return BiStepFunction(a.grid(), std::move(c));
    }

    const TimeGrid& grid() const noexcept { return grid_; }
    const Eigen::MatrixXd& coefficients() const noexcept { return coef_; }
    Eigen::MatrixXd& coefficients() noexcept { return coef_; }

    /// Arguments swapped: phi*(theta, s) = phi(s, theta).
    BiStepFunction adjoint() const { return BiStepFunction(grid_, coef_.transpose()); }

private:
    TimeGrid grid_;
    Eigen::MatrixXd coef_;
};

namespace detail {
inline void check_kernel(const FractionalKernel& k, const TimeGrid& g) { require_same_grid(k.grid(), g); }
}  // namespace detail

/// <phi, psi>_H as the coefficient double sum against the cell Gram matrix.
inline double h_inner(const FractionalKernel& k, const ScalarStep& phi, const ScalarStep& psi) {
    detail::check_kernel(k, phi.grid());
    require_same_grid(phi.grid(), psi.grid());
    const auto& g = k.gram();
    const std::size_t m = phi.cells();
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        if (phi[i] == 0.0) continue;
        double row = 0.0;
        for (std::size_t j = 0; j < m; ++j) row += g(i, j) * psi[j];
        s += phi[i] * row;
    }
    return s;
}

inline double h_inner(const ScalarStep& phi, const ScalarStep& psi, HurstIndex h) {
    return h_inner(FractionalKernel(phi.grid(), h), phi, psi);
}

/// <phi, psi>_{H_V}: V-inner products inside the kernel sum.
template <typename V>
double h_inner_V(const FractionalKernel& k, const StepFunction<V>& phi, const StepFunction<V>& psi) {
    detail::check_kernel(k, phi.grid());
    require_same_grid(phi.grid(), psi.grid());
    const std::size_t m = phi.cells();
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) s += k(i, j) * value_inner(phi[i], psi[j]);
    return s;
}

/// ||phi||_{|H_V|}: kernel sum of cellwise V-norms.
template <typename V>
double abs_h_norm(const FractionalKernel& k, const StepFunction<V>& phi) {
    detail::check_kernel(k, phi.grid());
    const std::size_t m = phi.cells();
    std::vector<double> n(m);
    for (std::size_t i = 0; i < m; ++i) n[i] = value_norm(phi[i]);
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) s += k(i, j) * n[i] * n[j];
    return std::sqrt(std::max(s, 0.0));
}

/// (sum_c ||coef_c||_V^q dt)^{1/q}.
template <typename V>
double lp_time_norm(const StepFunction<V>& phi, double q) {
    if (!(q >= 1.0)) throw DomainError(detail::concat("time norm exponent must be >= 1, got ", q));
    const double dt = phi.grid().dt();
    double s = 0.0;
    for (std::size_t i = 0; i < phi.cells(); ++i) s += std::pow(value_norm(phi[i]), q) * dt;
    return std::pow(s, 1.0 / q);
}

// ---------------------------------------------------------------------------
// Tensor spaces on [0,T]^2. The 2D kernel factorizes, so the quadruple cell sum
// is sum(A .* (K B K)).

inline double tensor_h_inner(const FractionalKernel& k, const BiStepFunction& a, const BiStepFunction& b) {
    detail::check_kernel(k, a.grid());
    require_same_grid(a.grid(), b.grid());
    const Eigen::MatrixXd kb = k.gram() * b.coefficients() * k.gram();
    return a.coefficients().cwiseProduct(kb).sum();
}

/// ||phi||_{H (x) H}.
inline double tensor_h_norm(const FractionalKernel& k, const BiStepFunction& a) {
    return std::sqrt(std::max(tensor_h_inner(k, a, a), 0.0));
}

/// ||phi||_{|H| (x) |H|}.
inline double tensor_abs_h_norm(const FractionalKernel& k, const BiStepFunction& a) {
    const BiStepFunction abs_a(a.grid(), a.coefficients().cwiseAbs());
    return std::sqrt(std::max(tensor_h_inner(k, abs_a, abs_a), 0.0));
}

/// <D, D*>_{H (x) H}, the contraction with arguments swapped.
inline double adjoint_contraction(const FractionalKernel& k, const BiStepFunction& d) {
    return tensor_h_inner(k, d, d.adjoint());
}

// ---------------------------------------------------------------------------

/// Named nonnegative norms; std::map keeps JSON key order stable.
struct NormReport {
    std::map<std::string, double> values;
    std::map<std::string, bool> checks;

    double at(const std::string& key) const { return values.at(key); }
};

/// ||phi||_H <= ||phi||_{|H|} <= b_H ||phi||_{L_{1/H}} <= b_H ||phi||_{L_2}. Reports the four
/// norms and the two ratios (the first ratio is an empirical lower bound for b_H) and
/// checks the two parameter-free links, the second with Hoelder's factor T^{H-1/2}.
template <typename V>
NormReport norm_chain_report(const FractionalKernel& k, const StepFunction<V>& phi) {
    const double h = k.hurst().value();
    const double hn = std::sqrt(std::max(h_inner_V(k, phi, phi), 0.0));
    const double an = abs_h_norm(k, phi);
    const double l1h = lp_time_norm(phi, 1.0 / h);
    const double l2 = lp_time_norm(phi, 2.0);
    const double holder = std::pow(phi.grid().horizon(), h - 0.5);
    NormReport r;
    r.values["H_inner"] = hn;
    r.values["absH"] = an;
    r.values["L_1/H"] = l1h;
    r.values["L_2"] = l2;
    r.values["ratio_absH_over_L_1/H"] = l1h > 0.0 ? an / l1h : 0.0;
    r.values["ratio_L_1/H_over_L_2"] = l2 > 0.0 ? l1h / l2 : 0.0;
    const double eps = 1e-12;
    r.checks["H_le_absH"] = hn <= an * (1.0 + eps) + eps;
    r.checks["L_1/H_le_T^(H-1/2)_L_2"] = l1h <= holder * l2 * (1.0 + eps) + eps;
    return r;
}

/// One realization of u = (u^k)_k with its Malliavin derivative (D^{beta^k} u^k)_k.
struct SequenceProcessSample {
    std::vector<ScalarStep> u;        // per k
    std::vector<BiStepFunction> du;   // per k, entry (theta, s)
};

/// Integrand of the L_H^{1,p}(l2) norm for one realization:
///   sum_s |u_s|_{l2}^p dt + sum_s ( sum_theta |D_theta u_s|_{l2}^{1/H} dt )^{pH} dt.
inline double lHp_l2_power(const SequenceProcessSample& x, double p, HurstIndex hurst) {
    if (p < 2.0) throw DomainError(detail::concat("L_H^{1,p}(l2) norm needs p >= 2, got ", p));
    if (x.u.empty()) return 0.0;
    const TimeGrid& grid = x.u.front().grid();
    const std::size_t m = grid.cells();
    const double dt = grid.dt();
    const double h = hurst.value();
    for (const auto& uk : x.u) require_same_grid(grid, uk.grid());
    for (const auto& dk : x.du) require_same_grid(grid, dk.grid());

    double first = 0.0;
    for (std::size_t s = 0; s < m; ++s) {
        double sq = 0.0;
        for (const auto& uk : x.u) sq += uk[s] * uk[s];
        first += std::pow(std::sqrt(sq), p) * dt;
    }
    double second = 0.0;
    if (!x.du.empty()) {
        for (std::size_t s = 0; s < m; ++s) {
            double inner = 0.0;
            for (std::size_t th = 0; th < m; ++th) {
                double sq = 0.0;
                for (const auto& dk : x.du) sq += dk.coefficients()(th, s) * dk.coefficients()(th, s);
                inner += std::pow(std::sqrt(sq), 1.0 / h) * dt;
            }
            second += std::pow(inner, p * h) * dt;
        }
    }
    return first + second;
}

/// Per-noise p = 2 right side for one realization:
///   sum_k [ sum_s |u^k_s|^2 dt + sum_s ( sum_theta |D_theta u^k_s|^{1/H} dt )^{2H} dt ].
inline double p2_summed_power(const SequenceProcessSample& x, HurstIndex hurst) {
    double total = 0.0;
    for (std::size_t k = 0; k < x.u.size(); ++k) {
        SequenceProcessSample one{{x.u[k]}, {}};
        if (k < x.du.size()) one.du.push_back(x.du[k]);
        total += lHp_l2_power(one, 2.0, hurst);
    }
    return total;
}

/// ||u||_{L_H^{1,p}(l2)} with the expectation taken as the average over samples.
inline double lHp_l2_norm(const std::vector<SequenceProcessSample>& samples, double p, HurstIndex hurst) {
    if (p < 2.0) throw DomainError(detail::concat("L_H^{1,p}(l2) norm needs p >= 2, got ", p));
    if (samples.empty()) return 0.0;
    double s = 0.0;
    for (const auto& x : samples) s += lHp_l2_power(x, p, hurst);
    return std::pow(s / static_cast<double>(samples.size()), 1.0 / p);
}

}  // namespace fracheat
