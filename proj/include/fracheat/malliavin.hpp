#pragma once

// Smooth cylindrical functionals F = f(beta(phi_1), ..., beta(phi_n)), their
// Malliavin derivatives, and Skorohod integrals of elementary integrands
// sum_i F_i phi_i via the integration-by-parts closed form
//   delta(F phi) = F beta(phi) - <DF, phi>_H.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fracheat/core.hpp"
#include "fracheat/fbm.hpp"
#include "fracheat/kernel.hpp"

namespace fracheat {

/// coef * prod_i x_i^{powers[i]}
struct Monomial {
    double coef = 0.0;
    std::vector<int> powers;
};

enum class FunctionalFamily { Polynomial, DampedPolynomial };

/// Polynomial P(x) or damped polynomial P(x) exp(-|x|^2/2) in n variables. The
/// family is closed under partial differentiation, so derivatives stay exact.
class SmoothFunctional {
public:
    SmoothFunctional(std::size_t arity, std::vector<Monomial> terms,
                     FunctionalFamily family = FunctionalFamily::Polynomial)
        : arity_(arity), family_(family), terms_(std::move(terms)) {
        for (auto& t : terms_) {
            if (t.powers.size() > arity_) throw DomainError("monomial uses more variables than the functional's arity");
            t.powers.resize(arity_, 0);
            for (int p : t.powers)
                if (p < 0) throw DomainError("monomial powers must be nonnegative");
        }
        normalize();
    }

    static SmoothFunctional constant(double c, std::size_t arity = 0) {
        return SmoothFunctional(arity, {Monomial{c, {}}});
    }
    /// x_i
    static SmoothFunctional coordinate(std::size_t i, std::size_t arity) {
        std::vector<int> pw(arity, 0);
        pw.at(i) = 1;
        return SmoothFunctional(arity, {Monomial{1.0, pw}});
    }

    std::size_t arity() const noexcept { return arity_; }
    FunctionalFamily family() const noexcept { return family_; }
    const std::vector<Monomial>& terms() const noexcept { return terms_; }

    double operator()(std::span<const double> x) const {
        if (x.size() != arity_) throw DomainError("functional evaluated with the wrong number of arguments");
        double s = 0.0;
        for (const auto& t : terms_) {
            double v = t.coef;
            for (std::size_t i = 0; i < arity_; ++i)
                for (int e = 0; e < t.powers[i]; ++e) v *= x[i];
            s += v;
        }
        if (family_ == FunctionalFamily::DampedPolynomial) {
            double r2 = 0.0;
            for (double xi : x) r2 += xi * xi;
            s *= std::exp(-0.5 * r2);
        }
        return s;
    }

    /// d f / d x_i, in the same family.
    SmoothFunctional partial(std::size_t i) const {
        if (i >= arity_) throw DomainError("partial derivative index out of range");
        std::vector<Monomial> out;
        for (const auto& t : terms_) {
            if (t.powers[i] > 0) {
                Monomial d = t;
                d.coef *= t.powers[i];
                d.powers[i] -= 1;
                out.push_back(std::move(d));
            }
            if (family_ == FunctionalFamily::DampedPolynomial) {
                // d/dx_i exp(-|x|^2/2) = -x_i exp(-|x|^2/2)
                Monomial d = t;
                d.coef = -t.coef;
                d.powers[i] += 1;
                out.push_back(std::move(d));
            }
        }
        return SmoothFunctional(arity_, std::move(out), family_);
    }

    /// a f + b g; both must share arity and family.
    static SmoothFunctional linear_combination(double a, const SmoothFunctional& f, double b,
                                               const SmoothFunctional& g) {
        if (f.arity_ != g.arity_ || f.family_ != g.family_)
            throw DomainError("linear combination needs equal arity and family");
        std::vector<Monomial> t;
        for (auto m : f.terms_) {
            m.coef *= a;
            t.push_back(std::move(m));
        }
        for (auto m : g.terms_) {
            m.coef *= b;
            t.push_back(std::move(m));
        }
        return SmoothFunctional(f.arity_, std::move(t), f.family_);
    }

    bool is_zero() const noexcept { return terms_.empty(); }

    friend bool operator==(const SmoothFunctional& a, const SmoothFunctional& b) {
        if (a.arity_ != b.arity_ || a.family_ != b.family_ || a.terms_.size() != b.terms_.size()) return false;
        for (std::size_t i = 0; i < a.terms_.size(); ++i)
            if (a.terms_[i].coef != b.terms_[i].coef || a.terms_[i].powers != b.terms_[i].powers) return false;
        return true;
    }

private:
    // Merge like monomials, drop zeros, sort by exponent vector.
    void normalize() {
        std::map<std::vector<int>, double> merged;
        for (const auto& t : terms_) merged[t.powers] += t.coef;
        terms_.clear();
        for (const auto& [p, c] : merged)
            if (c != 0.0) terms_.push_back(Monomial{c, p});
    }

    std::size_t arity_;
    FunctionalFamily family_;
    std::vector<Monomial> terms_;
};

/// beta(phi) = sum_c phi_c (beta_{t_{c+1}} - beta_{t_c}).
inline double wiener_integral(const ScalarStep& phi, const FbmPath& path) {
    require_same_grid(phi.grid(), path.grid);
    double s = 0.0;
    for (std::size_t c = 0; c < phi.cells(); ++c) s += phi[c] * path.increment(c);
    return s;
}

/// F = f(beta^k(phi_1), ..., beta^k(phi_n)).
class CylindricalRV {
public:
    CylindricalRV(SmoothFunctional f, std::vector<ScalarStep> args, std::size_t noise = 0)
        : f_(std::move(f)), args_(std::move(args)), noise_(noise) {
        if (args_.size() != f_.arity())
            throw DomainError(detail::concat("functional arity ", f_.arity(), " but ", args_.size(), " arguments"));
        for (const auto& a : args_) require_same_grid(args_.front().grid(), a.grid());
    }

    static CylindricalRV constant(double c, std::size_t noise = 0) {
        return CylindricalRV(SmoothFunctional::constant(c), {}, noise);
    }
    /// beta^k(phi)
    static CylindricalRV wiener(const ScalarStep& phi, std::size_t noise = 0) {
        return CylindricalRV(SmoothFunctional::coordinate(0, 1), {phi}, noise);
    }

    const SmoothFunctional& functional() const noexcept { return f_; }
    const std::vector<ScalarStep>& args() const noexcept { return args_; }
    std::size_t noise() const noexcept { return noise_; }
    std::size_t arity() const noexcept { return args_.size(); }

    /// Wiener integrals of the arguments along a path.
    std::vector<double> arguments_at(const FbmPath& path) const {
        std::vector<double> x(args_.size());
        for (std::size_t i = 0; i < args_.size(); ++i) x[i] = wiener_integral(args_[i], path);
        return x;
    }

    double evaluate_at(std::span<const double> x) const { return f_(x); }

private:
    SmoothFunctional f_;
    std::vector<ScalarStep> args_;
    std::size_t noise_;
};

inline double evaluate(const CylindricalRV& f, const FbmPath& path) {
    const auto x = f.arguments_at(path);
    return f.evaluate_at(x);
}

/// D F = sum_i (d_i f)(beta(phi)) phi_i.
struct MalliavinGradient {
    struct Term {
        CylindricalRV coefficient;
        ScalarStep direction;
    };
    std::vector<Term> terms;

    /// The gradient at one sample as a step function in theta.
    ScalarStep collapse(const FbmPath& path, const TimeGrid& grid) const {
        std::vector<double> c(grid.cells(), 0.0);
        for (const auto& t : terms) {
            const double a = evaluate(t.coefficient, path);
            for (std::size_t j = 0; j < c.size(); ++j) c[j] += a * t.direction[j];
        }
        return ScalarStep(grid, std::move(c));
    }
};

inline MalliavinGradient derivative(const CylindricalRV& f) {
    MalliavinGradient g;
    for (std::size_t i = 0; i < f.arity(); ++i)
        g.terms.push_back({CylindricalRV(f.functional().partial(i), f.args(), f.noise()), f.args()[i]});
    return g;
}

// ---------------------------------------------------------------------------
// Elementary integrands u = sum_i F_i phi_i on one noise.

struct IntegrandTerm {
    CylindricalRV factor;
    ScalarStep direction;

    /// F c 1_{(a,b]}
    static IntegrandTerm on_interval(CylindricalRV f, const TimeGrid& grid, double a, double b, double c = 1.0) {
        return {std::move(f), indicator(grid, a, b, c)};
    }
};

struct ScalarIntegrand {
    TimeGrid grid;
    std::vector<IntegrandTerm> terms;

    std::size_t noise() const { return terms.empty() ? 0 : terms.front().factor.noise(); }
};

/// Precomputes every deterministic pairing an integrand needs, so per-sample
/// evaluation only takes Wiener integrals and evaluates polynomials.
class CompiledIntegrand {
public:
    CompiledIntegrand(const ScalarIntegrand& u, const FractionalKernel& k) : grid_(u.grid), kernel_(&k) {
        require_same_grid(k.grid(), u.grid);
        const std::size_t m = grid_.cells();
        for (const auto& t : u.terms) {
            require_same_grid(grid_, t.direction.grid());
            if (t.factor.noise() != u.noise()) throw DomainError("integrand terms must share one noise index");
            Term c{t.factor.functional(), {}, t.factor.args(), {}, t.direction.coefficients(), {}};
            for (std::size_t l = 0; l < t.factor.arity(); ++l) c.partials.push_back(t.factor.functional().partial(l));
            // K psi_l for every argument.
            for (const auto& psi : t.factor.args()) {
                std::vector<double> kp(m, 0.0);
                for (std::size_t a = 0; a < m; ++a)
                    for (std::size_t b = 0; b < m; ++b) kp[a] += k(a, b) * psi[b];
                c.kernel_args.push_back(std::move(kp));
            }
            terms_.push_back(std::move(c));
        }
        // <psi_il, phi_j>_H and <phi_i, phi_j>_H and <psi_il, psi_jr>_H.
        const std::size_t n = terms_.size();
        phi_gram_.assign(n, std::vector<double>(n, 0.0));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) phi_gram_[i][j] = pair(terms_[i].direction, terms_[j].direction);
        for (std::size_t i = 0; i < n; ++i) {
            auto& t = terms_[i];
            t.arg_dir.assign(t.args.size(), std::vector<double>(n, 0.0));
            for (std::size_t l = 0; l < t.args.size(); ++l)
                for (std::size_t j = 0; j < n; ++j) t.arg_dir[l][j] = dot(t.kernel_args[l], terms_[j].direction);
        }
    }

    const TimeGrid& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return terms_.size(); }

    /// Per-sample quantities of u on one path.
    struct Sample {
        std::vector<double> factor;                 // F_i
        std::vector<std::vector<double>> partials;  // d_l f_i
        std::vector<double> wiener;                 // beta(phi_i)
    };

    Sample sample(const FbmPath& path) const {
        require_same_grid(grid_, path.grid);
        Sample s;
        std::vector<double> x;
        for (const auto& t : terms_) {
            x.resize(t.args.size());
            for (std::size_t l = 0; l < t.args.size(); ++l) x[l] = wiener_integral(t.args[l], path);
            s.factor.push_back(t.f(x));
            std::vector<double> d(t.args.size());
            for (std::size_t l = 0; l < t.args.size(); ++l) d[l] = t.partials[l](x);
            s.partials.push_back(std::move(d));
            double w = 0.0;
            for (std::size_t c = 0; c < t.direction.size(); ++c) w += t.direction[c] * path.increment(c);
            s.wiener.push_back(w);
        }
        return s;
    }

    /// delta(u) = sum_i F_i beta(phi_i) - sum_i sum_l d_l f_i <psi_il, phi_i>_H.
    double skorohod(const Sample& s) const {
        double v = 0.0;
        for (std::size_t i = 0; i < terms_.size(); ++i) {
            v += s.factor[i] * s.wiener[i];
            for (std::size_t l = 0; l < s.partials[i].size(); ++l) v -= s.partials[i][l] * terms_[i].arg_dir[l][i];
        }
        return v;
    }

    /// delta(u 1_{[0,t_j]}) for every node j = 0..m.
    std::vector<double> skorohod_running(const FbmPath& path, const Sample& s) const {
        const std::size_t m = grid_.cells();
        std::vector<double> out(m + 1, 0.0);
        for (std::size_t c = 0; c < m; ++c) {
            double inc = 0.0;
            for (std::size_t i = 0; i < terms_.size(); ++i) {
                const double phi = terms_[i].direction[c];
                if (phi == 0.0) continue;
                double corr = 0.0;
                for (std::size_t l = 0; l < s.partials[i].size(); ++l)
                    corr += s.partials[i][l] * terms_[i].kernel_args[l][c];
                inc += phi * (s.factor[i] * path.increment(c) - corr);
            }
            out[c + 1] = out[c] + inc;
        }
        return out;
    }

    /// ||u||_H^2 = sum_ij F_i F_j <phi_i, phi_j>_H.
    double h_norm_squared(const Sample& s) const {
        double v = 0.0;
        for (std::size_t i = 0; i < terms_.size(); ++i)
            for (std::size_t j = 0; j < terms_.size(); ++j) v += s.factor[i] * s.factor[j] * phi_gram_[i][j];
        return v;
    }

    /// <DG, u>_H for G with gradient coefficients a_l on arguments psi_l.
    double gradient_pairing(const std::vector<double>& grad_coef, const std::vector<std::vector<double>>& kernel_psi,
                            const Sample& s) const {
        double v = 0.0;
        for (std::size_t l = 0; l < grad_coef.size(); ++l)
            for (std::size_t i = 0; i < terms_.size(); ++i)
                v += grad_coef[l] * s.factor[i] * dot(kernel_psi[l], terms_[i].direction);
        return v;
    }

    /// D_theta u_s as a bi-step function (theta, s) at one sample.
    BiStepFunction derivative_bistep(const Sample& s) const {
        const std::size_t m = grid_.cells();
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
        for (std::size_t i = 0; i < terms_.size(); ++i)
            for (std::size_t l = 0; l < s.partials[i].size(); ++l) {
                const double c = s.partials[i][l];
                if (c == 0.0) continue;
                const auto& psi = terms_[i].args[l];
                const auto& phi = terms_[i].direction;
                for (std::size_t th = 0; th < m; ++th) {
                    if (psi[th] == 0.0) continue;
                    for (std::size_t r = 0; r < m; ++r) a(th, r) += c * psi[th] * phi[r];
                }
            }
        return BiStepFunction(grid_, std::move(a));
    }

    /// u at one sample as a step function.
    ScalarStep value(const Sample& s) const {
        std::vector<double> v(grid_.cells(), 0.0);
        for (std::size_t i = 0; i < terms_.size(); ++i)
            for (std::size_t c = 0; c < v.size(); ++c) v[c] += s.factor[i] * terms_[i].direction[c];
        return ScalarStep(grid_, std::move(v));
    }

    /// <Du, (Du)*>_{H(x)H} and ||Du||^2_{H(x)H} from the precomputed pairings.
    std::pair<double, double> derivative_contractions(const Sample& s) const {
        double adj = 0.0, sq = 0.0;
        const std::size_t n = terms_.size();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t l = 0; l < s.partials[i].size(); ++l) {
                const double a = s.partials[i][l];
                if (a == 0.0) continue;
                for (std::size_t j = 0; j < n; ++j)
                    for (std::size_t r = 0; r < s.partials[j].size(); ++r) {
                        const double b = s.partials[j][r];
                        if (b == 0.0) continue;
                        // psi_il (x) phi_i against phi_j (x) psi_jr, and against psi_jr (x) phi_j.
                        adj += a * b * terms_[i].arg_dir[l][j] * terms_[j].arg_dir[r][i];
                        sq += a * b * pair(terms_[i].args[l], terms_[j].args[r]) * phi_gram_[i][j];
                    }
            }
        return {adj, sq};
    }

private:
    struct Term {
        SmoothFunctional f;
        std::vector<SmoothFunctional> partials;
        std::vector<ScalarStep> args;
        std::vector<std::vector<double>> kernel_args;  // K psi_l
        std::vector<double> direction;                 // phi_i
        std::vector<std::vector<double>> arg_dir;      // <psi_l, phi_j>_H
    };

    static double dot(const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
        return s;
    }
    double pair(const std::vector<double>& a, const std::vector<double>& b) const {
        return h_inner(*kernel_, ScalarStep(grid_, a), ScalarStep(grid_, b));
    }
    double pair(const ScalarStep& a, const ScalarStep& b) const { return h_inner(*kernel_, a, b); }

    TimeGrid grid_;
    const FractionalKernel* kernel_;
    std::vector<Term> terms_;
    std::vector<std::vector<double>> phi_gram_;
};

/// delta(u) on one path by the integration-by-parts closed form.
inline double skorohod_elementary(const ScalarIntegrand& u, const FbmPath& path, const FractionalKernel& k) {
    CompiledIntegrand c(u, k);
    return c.skorohod(c.sample(path));
}

inline double skorohod_elementary(const ScalarIntegrand& u, const FbmPath& path) {
    return skorohod_elementary(u, path, FractionalKernel(u.grid, path.hurst));
}

/// u restricted to [0, t_j].
inline ScalarIntegrand restrict_to(const ScalarIntegrand& u, std::size_t node) {
    ScalarIntegrand r{u.grid, {}};
    for (const auto& t : u.terms) {
        std::vector<double> c = t.direction.coefficients();
        for (std::size_t i = node; i < c.size(); ++i) c[i] = 0.0;
        r.terms.push_back({t.factor, ScalarStep(u.grid, std::move(c))});
    }
    return r;
}

// ---------------------------------------------------------------------------
// Elementary processes over the sequence (beta^k)_k:
//   g^k(t) = sum_i F_i^k 1_{(t_{i-1}^k, t_i^k]}(t) g_i^k,  F_i^k measurable w.r.t. beta^k.

template <typename Profile>
struct ElementaryTerm {
    CylindricalRV factor;   // noise index = k
    std::size_t first_cell; // interval (t_first, t_last]
    std::size_t last_cell;  // exclusive
    Profile profile;
};

template <typename Profile>
struct ElementaryProcess {
    TimeGrid grid;
    std::vector<std::vector<ElementaryTerm<Profile>>> per_noise;  // index k

    std::size_t noise_count() const noexcept { return per_noise.size(); }

    void add(std::size_t k, CylindricalRV f, double a, double b, Profile profile) {
        if (f.noise() != k) throw DomainError("factor F_i^k must be measurable with respect to beta^k");
        const std::size_t i0 = grid.node_index(a), i1 = grid.node_index(b);
        if (i0 >= i1) throw DomainError(detail::concat("empty interval (", a, ",", b, "]"));
        if (per_noise.size() <= k) per_noise.resize(k + 1);
        for (const auto& t : per_noise[k])
            if (i0 < t.last_cell && t.first_cell < i1)
                throw DomainError("intervals of one noise index must be disjoint");
        per_noise[k].push_back({std::move(f), i0, i1, std::move(profile)});
    }
};

using ScalarProcess = ElementaryProcess<double>;

/// The scalar integrand of noise k: sum_i F_i^k c_i 1_{(a_i,b_i]}.
inline ScalarIntegrand component(const ScalarProcess& g, std::size_t k) {
    ScalarIntegrand u{g.grid, {}};
    if (k >= g.per_noise.size()) return u;
    for (const auto& t : g.per_noise[k]) {
        std::vector<double> c(g.grid.cells(), 0.0);
        for (std::size_t i = t.first_cell; i < t.last_cell; ++i) c[i] = t.profile;
        u.terms.push_back({t.factor, ScalarStep(g.grid, std::move(c))});
    }
    return u;
}

/// sum_k delta^{beta^k}(g^k 1_{[0,t]}) at a grid node t.
inline double skorohod_sum(const ScalarProcess& g, const FbmEnsemble& ensemble, double t) {
    if (ensemble.size() < g.noise_count())
        throw DomainError(detail::concat("process uses ", g.noise_count(), " noises, ensemble has ", ensemble.size()));
    const std::size_t node = g.grid.node_index(t);
    const FractionalKernel k(g.grid, ensemble.hurst);
    double s = 0.0;
    for (std::size_t n = 0; n < g.noise_count(); ++n)
        s += skorohod_elementary(restrict_to(component(g, n), node), ensemble[n], k);
    return s;
}

// ---------------------------------------------------------------------------
// Monte Carlo identity checks on one noise.

struct DualityReport {
    SampleStats lhs;   // E F delta(u)
    SampleStats rhs;   // E <DF, u>_H
    SampleStats diff;  // paired difference
    bool pass = false;
};

/// E(F delta(u)) = E <DF, u>_H, checked within 4 SE of the paired difference.
inline DualityReport duality_check(const CylindricalRV& f, const ScalarIntegrand& u, const FbmGenerator& gen,
                                   std::size_t n_mc, std::uint64_t seed) {
    if (!u.terms.empty() && f.noise() != u.noise()) throw DomainError("F and u must share the noise index");
    const FractionalKernel k(u.grid, gen.hurst());
    const CompiledIntegrand cu(u, k);
    const MalliavinGradient df = derivative(f);
    std::vector<std::vector<double>> kernel_psi;
    for (const auto& t : df.terms) {
        std::vector<double> kp(u.grid.cells(), 0.0);
        for (std::size_t a = 0; a < kp.size(); ++a)
            for (std::size_t b = 0; b < kp.size(); ++b) kp[a] += k(a, b) * t.direction[b];
        kernel_psi.push_back(std::move(kp));
    }
    std::vector<double> lhs(n_mc), rhs(n_mc), diff(n_mc);
    parallel_for(n_mc, [&](std::size_t r) {
        const FbmPath path = gen.sample({seed, f.noise(), r});
        const auto s = cu.sample(path);
        const auto x = f.arguments_at(path);
        std::vector<double> a(df.terms.size());
        for (std::size_t l = 0; l < a.size(); ++l) a[l] = df.terms[l].coefficient.evaluate_at(x);
        lhs[r] = f.evaluate_at(x) * cu.skorohod(s);
        rhs[r] = cu.gradient_pairing(a, kernel_psi, s);
        diff[r] = lhs[r] - rhs[r];
    });
    DualityReport rep{sample_stats(lhs), sample_stats(rhs), sample_stats(diff), false};
    rep.pass = std::abs(rep.diff.mean) <= kMcStandardErrors * rep.diff.se + 1e-12;
    return rep;
}

struct L2IdentityReport {
    SampleStats delta_sq;         // E |delta(u)|^2
    SampleStats h_norm_sq;        // E ||u||_H^2
    SampleStats adjoint;          // E <Du, (Du)*>
    SampleStats derivative_sq;    // E ||Du||^2_{H(x)H}
    SampleStats identity_defect;  // delta^2 - ||u||^2 - <Du,(Du)*>
    SampleStats inequality_gap;   // delta^2 - ||u||^2 - ||Du||^2
    bool identity_pass = false;
    bool inequality_pass = false;
    bool pathwise_contraction_ok = false;  // <Du,(Du)*> <= ||Du||^2 on every sample
};

/// E|delta(u)|^2 = E||u||_H^2 + E<Du,(Du)*> and E|delta(u)|^2 <= E||u||_H^2 + E||Du||^2.
inline L2IdentityReport l2_identity_check(const ScalarIntegrand& u, const FbmGenerator& gen, std::size_t n_mc,
                                          std::uint64_t seed) {
    const FractionalKernel k(u.grid, gen.hurst());
    const CompiledIntegrand cu(u, k);
    std::vector<double> d2(n_mc), h2(n_mc), adj(n_mc), dd(n_mc), defect(n_mc), gap(n_mc);
    std::vector<char> ok(n_mc, 1);
    parallel_for(n_mc, [&](std::size_t r) {
        const FbmPath path = gen.sample({seed, u.noise(), r});
        const auto s = cu.sample(path);
        const double d = cu.skorohod(s);
        const auto [a, q] = cu.derivative_contractions(s);
        d2[r] = d * d;
        h2[r] = cu.h_norm_squared(s);
        adj[r] = a;
        dd[r] = q;
        defect[r] = d2[r] - h2[r] - a;
        gap[r] = d2[r] - h2[r] - q;
        ok[r] = a <= q * (1.0 + 1e-10) + 1e-14;
    });
    L2IdentityReport rep;
    rep.delta_sq = sample_stats(d2);
    rep.h_norm_sq = sample_stats(h2);
    rep.adjoint = sample_stats(adj);
    rep.derivative_sq = sample_stats(dd);
    rep.identity_defect = sample_stats(defect);
    rep.inequality_gap = sample_stats(gap);
    rep.identity_pass = std::abs(rep.identity_defect.mean) <= kMcStandardErrors * rep.identity_defect.se + 1e-12;
    rep.pathwise_contraction_ok = std::all_of(ok.begin(), ok.end(), [](char c) { return c != 0; });
    rep.inequality_pass = rep.pathwise_contraction_ok &&
                          rep.inequality_gap.mean <= kMcStandardErrors * rep.inequality_gap.se + 1e-12;
    return rep;
}

}  // namespace fracheat
