#pragma once

// Constructive solution of du = (Delta u + f) dt + sum_k g^k dbeta^k for elementary
// g, following the mild formula
//   u(t) = T_t u0 + int_0^t T_{t-s} f(s) ds + sum_k int_0^t T_{t-r} g^k(r) delta beta^k_r.
// The semigroup argument is frozen at cell midpoints; the Skorohod step uses the
// integration-by-parts closed form.

#include <cmath>
#include <cstdint>
#include <vector>

#include "fracheat/core.hpp"
#include "fracheat/fbm.hpp"
#include "fracheat/kernel.hpp"
#include "fracheat/malliavin.hpp"
#include "fracheat/rng.hpp"
#include "fracheat/spectral.hpp"

namespace fracheat {

using FieldProcess = ElementaryProcess<GridField>;

/// A_j 1_{(t_first, t_last]}(t) f_j(x); A_j ~ Bernoulli(probability), 1 if deterministic.
struct ForcingTerm {
    std::size_t first_cell = 0;
    std::size_t last_cell = 0;  // exclusive
    GridField profile;
    double probability = 1.0;
};

/// A_j u0_j(x), same convention.
struct InitialTerm {
    GridField profile;
    double probability = 1.0;
};

struct ProblemSpec {
    TimeGrid time;
    SpatialGrid space;
    HurstIndex hurst;
    std::vector<InitialTerm> u0;
    std::vector<ForcingTerm> f;
    FieldProcess g;

    std::size_t noises() const noexcept { return g.noise_count(); }

    /// Grids agree, intervals are aligned and g profiles live in the central half of the torus.
    void validate() const {
        require_same_grid(time, g.grid);
        for (const auto& t : u0) require_same_grid(space, t.profile.grid());
        for (const auto& t : f) {
            require_same_grid(space, t.profile.grid());
            if (t.first_cell >= t.last_cell || t.last_cell > time.cells())
                throw DomainError("forcing interval must be a nonempty range of time cells");
        }
        for (const auto& t : u0)
            if (!(t.probability >= 0.0 && t.probability <= 1.0)) throw DomainError("probability must lie in [0,1]");
        for (const auto& t : f)
            if (!(t.probability >= 0.0 && t.probability <= 1.0)) throw DomainError("probability must lie in [0,1]");
        const double half = 0.5 * space.half_width();
        for (const auto& terms : g.per_noise)
            for (const auto& t : terms) {
                require_same_grid(space, t.profile.grid());
                double inside = 0.0, outside = 0.0;
                for (std::size_t i = 0; i < t.profile.size(); ++i) {
                    const auto p = space.point(i);
                    double& slot = (std::abs(p[0]) <= half && std::abs(p[1]) <= half) ? inside : outside;
                    slot = std::max(slot, std::abs(t.profile[i]));
                }
                if (outside > 1e-6 * inside)
                    throw DomainError("noise profiles must be supported in the central half of the torus");
            }
    }
};

/// The A_j draws of one replicate.
struct Realization {
    std::vector<char> u0_on;
    std::vector<char> f_on;
};

/// Stream index reserved for the Bernoulli factors; fBm paths use indices 0..K-1.
inline constexpr std::uint64_t kIndicatorStream = 0xA11CE5ull << 32;

inline Realization draw_realization(const ProblemSpec& spec, std::uint64_t seed, std::uint64_t replicate) {
    NormalStream rng({seed, kIndicatorStream, replicate});
    Realization r;
    for (const auto& t : spec.u0) r.u0_on.push_back(t.probability >= 1.0 || rng.uniform_open() < t.probability);
    for (const auto& t : spec.f) r.f_on.push_back(t.probability >= 1.0 || rng.uniform_open() < t.probability);
    return r;
}

/// All indicators on.
inline Realization deterministic_realization(const ProblemSpec& spec) {
    return {std::vector<char>(spec.u0.size(), 1), std::vector<char>(spec.f.size(), 1)};
}

inline GridField initial_value(const ProblemSpec& spec, const Realization& r) {
    GridField u(spec.space);
    for (std::size_t i = 0; i < spec.u0.size(); ++i)
        if (r.u0_on.at(i)) u += spec.u0[i].profile;
    return u;
}

/// f on each time cell.
inline std::vector<GridField> forcing_cells(const ProblemSpec& spec, const Realization& r) {
    std::vector<GridField> out(spec.time.cells(), GridField(spec.space));
    for (std::size_t i = 0; i < spec.f.size(); ++i) {
        if (!r.f_on.at(i)) continue;
        const auto& t = spec.f[i];
        for (std::size_t c = t.first_cell; c < t.last_cell; ++c) out[c] += t.profile;
    }
    return out;
}

/// T_{t_j} u0 + sum_{c < j} T_{t_j - s_c} f_c dt with s_c the cell midpoint.
inline GridField deterministic_part(const GridField& u0, const std::vector<GridField>& f, const TimeGrid& time,
                                    std::size_t j) {
    if (j > time.cells()) throw DomainError("node index beyond the time grid");
    if (!f.empty() && f.size() != time.cells()) throw GridMismatch("forcing needs one field per time cell");
    GridField u = semigroup_apply(u0, time.node(j));
    for (std::size_t c = 0; c < std::min(j, f.size()); ++c)
        u.axpy(time.dt(), semigroup_apply(f[c], time.node(j) - time.midpoint(c)));
    return u;
}

/// Per-term data of g with the kernel images K psi_l precomputed.
class CompiledFieldProcess {
public:
    struct Term {
        std::size_t noise;
        std::size_t first_cell, last_cell;
        SmoothFunctional f;
        std::vector<SmoothFunctional> partials;
        std::vector<ScalarStep> args;
        std::vector<std::vector<double>> kernel_args;
        const GridField* profile;
    };

    CompiledFieldProcess(const FieldProcess& g, const FractionalKernel& k) : grid_(g.grid) {
        require_same_grid(g.grid, k.grid());
        const std::size_t m = grid_.cells();
        for (std::size_t n = 0; n < g.per_noise.size(); ++n)
            for (const auto& t : g.per_noise[n]) {
                Term c{n, t.first_cell, t.last_cell, t.factor.functional(), {}, t.factor.args(), {}, &t.profile};
                for (std::size_t l = 0; l < c.args.size(); ++l) {
                    c.partials.push_back(c.f.partial(l));
                    std::vector<double> kp(m, 0.0);
                    for (std::size_t a = 0; a < m; ++a)
                        for (std::size_t b = 0; b < m; ++b) kp[a] += k(a, b) * c.args[l][b];
                    c.kernel_args.push_back(std::move(kp));
                }
                terms_.push_back(std::move(c));
            }
    }

    const std::vector<Term>& terms() const noexcept { return terms_; }

    /// w_c = F dbeta_c - sum_l d_l f (K psi_l)_c on the term's cells (zero elsewhere):
    /// the Skorohod integral of F 1_c.
    std::vector<double> cell_weights(const Term& t, const FbmPath& path) const {
        require_same_grid(grid_, path.grid);
        std::vector<double> x(t.args.size());
        for (std::size_t l = 0; l < x.size(); ++l) x[l] = wiener_integral(t.args[l], path);
        const double fv = t.f(x);
        std::vector<double> d(x.size());
        for (std::size_t l = 0; l < x.size(); ++l) d[l] = t.partials[l](x);
        std::vector<double> w(grid_.cells(), 0.0);
        for (std::size_t c = t.first_cell; c < t.last_cell; ++c) {
            double v = fv * path.increment(c);
            for (std::size_t l = 0; l < d.size(); ++l) v -= d[l] * t.kernel_args[l][c];
            w[c] = v;
        }
        return w;
    }

private:
    TimeGrid grid_;
    std::vector<Term> terms_;
};

namespace detail {
inline void check_ensemble(const FieldProcess& g, const FbmEnsemble& e) {
    require_same_grid(g.grid, e.grid);
    if (e.size() < g.noise_count())
        throw DomainError(concat("process uses ", g.noise_count(), " noises, ensemble has ", e.size()));
}
}  // namespace detail

/// sum_k int_0^{t_j} T_{t_j - r} g^k(r) delta beta^k_r with r frozen at cell midpoints,
/// one semigroup application per (term, cell).
inline GridField stochastic_convolution(const FieldProcess& g, const FbmEnsemble& ensemble, const SpatialGrid& space,
                                        std::size_t j) {
    detail::check_ensemble(g, ensemble);
    const TimeGrid& time = g.grid;
    if (j > time.cells()) throw DomainError("node index beyond the time grid");
    GridField u(space);
    if (g.noise_count() == 0) return u;
    const FractionalKernel k(time, ensemble.hurst);
    const CompiledFieldProcess cg(g, k);
    for (const auto& t : cg.terms()) {
        const auto w = cg.cell_weights(t, ensemble[t.noise]);
        for (std::size_t c = t.first_cell; c < std::min(t.last_cell, j); ++c)
            u.axpy(w[c], semigroup_apply(*t.profile, time.node(j) - time.midpoint(c)));
    }
    return u;
}

/// u, u1 (deterministic part) and u2 (stochastic convolution) at every node.
struct SolutionPath {
    TimeGrid time;
    SpatialGrid space;
    std::vector<GridField> u, u1, u2;

    const GridField& at(std::size_t j) const { return u.at(j); }
};

/// Solves on one replicate. Both parts advance by the exact per-mode recursion
///   X_j = e^{-|xi|^2 dt} X_{j-1} + e^{-|xi|^2 dt/2} (source on cell j-1),
/// which reproduces the midpoint-frozen sums of deterministic_part and
/// stochastic_convolution.
inline SolutionPath solve(const ProblemSpec& spec, const FbmEnsemble& ensemble, const Realization& r) {
    spec.validate();
    detail::check_ensemble(spec.g, ensemble);
    if (ensemble.hurst.value() != spec.hurst.value()) throw DomainError("ensemble Hurst index differs from the spec");
    const TimeGrid& time = spec.time;
    const SpatialGrid& space = spec.space;
    const std::size_t m = time.cells(), n = space.size();
    const double dt = time.dt();

    std::vector<double> decay(n), half(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double lam = space.xi_squared(i);
        decay[i] = std::exp(-lam * dt);
        half[i] = std::exp(-0.5 * lam * dt);
    }

    const GridField u0 = initial_value(spec, r);
    Spectrum d = u0.spectrum();
    Spectrum s(n, fft::cplx(0.0, 0.0));

    // Forcing spectrum per cell, assembled from term spectra.
    std::vector<const Spectrum*> f_spec;
    std::vector<std::pair<std::size_t, std::size_t>> f_range;
    for (std::size_t i = 0; i < spec.f.size(); ++i)
        if (r.f_on.at(i)) {
            f_spec.push_back(&spec.f[i].profile.spectrum());
            f_range.emplace_back(spec.f[i].first_cell, spec.f[i].last_cell);
        }

    std::vector<std::vector<double>> weights;
    std::vector<const Spectrum*> g_spec;
    std::vector<std::pair<std::size_t, std::size_t>> g_range;
    if (spec.noises() > 0) {
        const FractionalKernel k(time, spec.hurst);
        const CompiledFieldProcess cg(spec.g, k);
        for (const auto& t : cg.terms()) {
            weights.push_back(cg.cell_weights(t, ensemble[t.noise]));
            g_spec.push_back(&t.profile->spectrum());
            g_range.emplace_back(t.first_cell, t.last_cell);
        }
    }

    SolutionPath sol{time, space, {}, {}, {}};
    sol.u.reserve(m + 1);
    sol.u1.reserve(m + 1);
    sol.u2.reserve(m + 1);
    sol.u1.push_back(u0);
    sol.u2.push_back(GridField(space));
    sol.u.push_back(u0);
    for (std::size_t j = 1; j <= m; ++j) {
        const std::size_t c = j - 1;
        for (std::size_t i = 0; i < n; ++i) {
            fft::cplx src_d(0.0, 0.0), src_s(0.0, 0.0);
            for (std::size_t q = 0; q < f_spec.size(); ++q)
                if (c >= f_range[q].first && c < f_range[q].second) src_d += (*f_spec[q])[i];
            for (std::size_t q = 0; q < g_spec.size(); ++q)
                if (c >= g_range[q].first && c < g_range[q].second) src_s += weights[q][c] * (*g_spec[q])[i];
            d[i] = decay[i] * d[i] + half[i] * dt * src_d;
            s[i] = decay[i] * s[i] + half[i] * src_s;
        }
        sol.u1.push_back(GridField::from_spectrum(space, d));
        sol.u2.push_back(GridField::from_spectrum(space, s));
        sol.u.push_back(sol.u1.back() + sol.u2.back());
    }
    return sol;
}

inline SolutionPath solve(const ProblemSpec& spec, const FbmEnsemble& ensemble) {
    return solve(spec, ensemble, deterministic_realization(spec));
}

/// Pathwise defect of the weak form at node j:
///   |(u(t_j),phi) - (u0,phi) - int_0^{t_j} (u, Delta phi) + (f, phi) dt - sum_k delta^k((g^k, phi) 1_{[0,t_j]})|.
/// The time integral of (u, Delta phi) uses the trapezoid rule on the stored nodes; f
/// is constant on cells. The Skorohod term is evaluated independently of the solver
/// through the scalar closed form with profiles (g_i^k, phi).
inline double weak_form_residual(const SolutionPath& sol, const ProblemSpec& spec, const GridField& phi, std::size_t j,
                                 const FbmEnsemble& ensemble, const Realization& r) {
    require_same_grid(sol.time, spec.time);
    require_same_grid(sol.space, phi.grid());
    if (j >= sol.u.size()) throw DomainError("node index beyond the solution");
    const double dt = spec.time.dt();
    const GridField lap_phi = laplacian(phi);
    const GridField u0 = initial_value(spec, r);
    double res = pairing(sol.u[j], phi) - pairing(u0, phi);
    double drift = 0.0;
    for (std::size_t c = 0; c < j; ++c) drift += 0.5 * dt * (pairing(sol.u[c], lap_phi) + pairing(sol.u[c + 1], lap_phi));
    for (std::size_t i = 0; i < spec.f.size(); ++i) {
        if (!r.f_on.at(i)) continue;
        const auto& t = spec.f[i];
        const std::size_t hi = std::min(t.last_cell, j);
        if (hi > t.first_cell) drift += static_cast<double>(hi - t.first_cell) * dt * pairing(t.profile, phi);
    }
    res -= drift;
    if (j > 0 && spec.noises() > 0) {
        const FractionalKernel k(spec.time, spec.hurst);
        for (std::size_t n = 0; n < spec.noises(); ++n) {
            ScalarIntegrand u{spec.time, {}};
            for (const auto& t : spec.g.per_noise[n]) {
                std::vector<double> c(spec.time.cells(), 0.0);
                const double a = pairing(t.profile, phi);
                for (std::size_t i = t.first_cell; i < std::min(t.last_cell, j); ++i) c[i] = a;
                u.terms.push_back({t.factor, ScalarStep(spec.time, std::move(c))});
            }
            res -= skorohod_elementary(u, ensemble[n], k);
        }
    }
    return std::abs(res);
}

}  // namespace fracheat
