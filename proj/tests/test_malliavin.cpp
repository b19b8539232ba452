#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fracheat/malliavin.hpp"

using namespace fracheat;

namespace {

SmoothFunctional random_functional(std::size_t arity, FunctionalFamily fam, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> pw(0, 3);
    std::normal_distribution<double> c(0.0, 1.0);
    std::vector<Monomial> terms;
    for (int t = 0; t < 4; ++t) {
        Monomial m{c(rng), std::vector<int>(arity)};
        for (auto& p : m.powers) p = pw(rng);
        terms.push_back(m);
    }
    return SmoothFunctional(arity, terms, fam);
}

}  // namespace

TEST(SmoothFunctional, PartialsMatchCentralDifferences) {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> n(0.0, 1.0);
    for (auto fam : {FunctionalFamily::Polynomial, FunctionalFamily::DampedPolynomial}) {
        const auto f = random_functional(3, fam, rng);
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<double> x{n(rng), n(rng), n(rng)};
            for (std::size_t i = 0; i < 3; ++i) {
                const double h = 1e-5;
                auto xp = x, xm = x;
                xp[i] += h;
                xm[i] -= h;
                const double fd = (f(xp) - f(xm)) / (2.0 * h);
                const double an = f.partial(i)(x);
                EXPECT_NEAR(an, fd, 1e-6 * std::max(1.0, std::abs(an))) << "trial " << trial << " i " << i;
            }
        }
    }
}

TEST(SmoothFunctional, NormalizationAndLinearity) {
    const SmoothFunctional a(2, {{1.0, {1, 0}}, {2.0, {1, 0}}, {0.0, {0, 2}}});
    ASSERT_EQ(a.terms().size(), 1u);
    EXPECT_DOUBLE_EQ(a.terms()[0].coef, 3.0);
    EXPECT_THROW(SmoothFunctional(1, {{1.0, {1, 1}}}), DomainError);
    EXPECT_THROW(SmoothFunctional(1, {{1.0, {-1}}}), DomainError);
    std::mt19937_64 rng(3);
    const auto f = random_functional(2, FunctionalFamily::Polynomial, rng);
    const auto g = random_functional(2, FunctionalFamily::Polynomial, rng);
    // D(aF + bG) = a DF + b DG at coefficient level
    const auto lhs = SmoothFunctional::linear_combination(2.0, f, -0.5, g).partial(1);
    const auto rhs = SmoothFunctional::linear_combination(2.0, f.partial(1), -0.5, g.partial(1));
    ASSERT_EQ(lhs.terms().size(), rhs.terms().size());
    for (std::size_t i = 0; i < lhs.terms().size(); ++i) {
        EXPECT_EQ(lhs.terms()[i].powers, rhs.terms()[i].powers);
        EXPECT_NEAR(lhs.terms()[i].coef, rhs.terms()[i].coef, 1e-14 * (1.0 + std::abs(rhs.terms()[i].coef)));
    }
}

TEST(CylindricalRV, EvaluateExamples) {
    const TimeGrid g(1.0, 8);
    const FbmGenerator gen(g, HurstIndex(0.75));
    const auto path = gen.sample({1, 0, 0});
    EXPECT_NEAR(evaluate(CylindricalRV::wiener(indicator(g, 0, 0.5)), path), path.values[4], 1e-15);
    EXPECT_DOUBLE_EQ(evaluate(CylindricalRV::constant(2.5), path), 2.5);
    EXPECT_THROW(CylindricalRV(SmoothFunctional::coordinate(0, 2), {indicator(g, 0, 1)}), DomainError);

    const CylindricalRV sq(SmoothFunctional(1, {{1.0, {2}}}), {indicator(g, 0, 1)});
    std::vector<double> v(100000);
    for (std::size_t r = 0; r < v.size(); ++r) v[r] = evaluate(sq, gen.sample({2, 0, r}));
    const auto st = sample_stats(v);
    EXPECT_TRUE(within_se(st.mean, 1.0, st.se)) << st.mean;
}

TEST(Derivative, ChainRule) {
    const TimeGrid g(1.0, 8);
    const auto phi = indicator(g, 0, 0.5);
    const auto d1 = derivative(CylindricalRV::wiener(phi));
    ASSERT_EQ(d1.terms.size(), 1u);
    EXPECT_EQ(d1.terms[0].direction.coefficients(), phi.coefficients());
    EXPECT_EQ(d1.terms[0].coefficient.functional(), SmoothFunctional::constant(1.0, 1));
    EXPECT_TRUE(derivative(CylindricalRV::constant(3.0)).terms.empty());

    const CylindricalRV sq(SmoothFunctional(1, {{1.0, {2}}}), {phi});
    const auto d2 = derivative(sq);
    const auto path = FbmGenerator(g, HurstIndex(0.7)).sample({5, 0, 0});
    const auto col = d2.collapse(path, g);
    const double b = wiener_integral(phi, path);
    for (std::size_t c = 0; c < g.cells(); ++c) EXPECT_NEAR(col[c], 2.0 * b * phi[c], 1e-14);
}

TEST(WienerIntegral, VarianceMatchesHInner) {
    const TimeGrid g(1.0, 8);
    const HurstIndex h(0.65);
    const FbmGenerator gen(g, h);
    const ScalarStep phi(g, {0.3, -1.0, 2.0, 0.0, 0.5, 1.5, -0.7, 0.2});
    EXPECT_DOUBLE_EQ(wiener_integral(ScalarStep(g, std::vector<double>(8, 0.0)), gen.sample({0, 0, 0})), 0.0);
    std::vector<double> sq(100000);
    for (std::size_t r = 0; r < sq.size(); ++r) {
        const double w = wiener_integral(phi, gen.sample({8, 0, r}));
        sq[r] = w * w;
    }
    const auto st = sample_stats(sq);
    EXPECT_TRUE(within_se(st.mean, h_inner(phi, phi, h), st.se));
}

TEST(Skorohod, IntegrationByPartsPathwise) {
    const TimeGrid g(2.0, 16);
    const HurstIndex h(0.75);
    const FbmGenerator gen(g, h);
    const FractionalKernel k(g, h);
    // u = beta_T 1_[0,T]
    const ScalarIntegrand u{g, {IntegrandTerm::on_interval(CylindricalRV::wiener(indicator(g, 0, 2)), g, 0, 2)}};
    // u = beta_1 1_(1,2]
    const ScalarIntegrand v{g, {IntegrandTerm::on_interval(CylindricalRV::wiener(indicator(g, 0, 1)), g, 1, 2)}};
    for (std::size_t r = 0; r < 50; ++r) {
        const auto p = gen.sample({9, 0, r});
        const double bt = p.values.back();
        EXPECT_NEAR(skorohod_elementary(u, p, k), bt * bt - std::pow(2.0, 1.5), 1e-12 * (1.0 + bt * bt));
        const double b1 = p.values[8];
        const double expect = b1 * (bt - b1) - increment_covariance(0, 1, 1, 2, h);
        EXPECT_NEAR(skorohod_elementary(v, p, k), expect, 1e-12 * (1.0 + std::abs(expect)));
    }
}

TEST(Skorohod, RunningMatchesRestriction) {
    const TimeGrid g(1.0, 8);
    const HurstIndex h(0.7);
    const FbmGenerator gen(g, h);
    const FractionalKernel k(g, h);
    const CylindricalRV f(SmoothFunctional(1, {{1.0, {2}}, {0.5, {0}}}), {indicator(g, 0, 0.25)});
    const ScalarIntegrand u{g, {IntegrandTerm::on_interval(f, g, 0.25, 1.0, 2.0),
                                IntegrandTerm::on_interval(CylindricalRV::constant(1.0), g, 0.0, 0.5)}};
    const CompiledIntegrand cu(u, k);
    const auto p = gen.sample({4, 0, 0});
    const auto run = cu.skorohod_running(p, cu.sample(p));
    for (std::size_t j = 0; j <= g.cells(); ++j)
        EXPECT_NEAR(run[j], skorohod_elementary(restrict_to(u, j), p, k), 1e-12);
}

TEST(Skorohod, DeterministicIntegrandHasZeroMean) {
    const TimeGrid g(1.0, 8);
    const FbmGenerator gen(g, HurstIndex(0.8));
    const ScalarIntegrand u{g, {IntegrandTerm::on_interval(CylindricalRV::constant(2.0), g, 0.25, 0.75)}};
    const FractionalKernel k(g, gen.hurst());
    std::vector<double> v(100000);
    for (std::size_t r = 0; r < v.size(); ++r) v[r] = skorohod_elementary(u, gen.sample({6, 0, r}), k);
    const auto st = sample_stats(v);
    EXPECT_TRUE(within_se(st.mean, 0.0, st.se));
}

TEST(ElementaryProcess, ValidationAndSum) {
    const TimeGrid g(1.0, 8);
    ScalarProcess proc{g, {}};
    EXPECT_THROW(proc.add(1, CylindricalRV::constant(1.0, 0), 0, 0.5, 1.0), DomainError);
    proc.add(0, CylindricalRV::constant(1.0, 0), 0, 0.5, 1.0);
    EXPECT_THROW(proc.add(0, CylindricalRV::constant(1.0, 0), 0.25, 0.75, 1.0), DomainError);
    EXPECT_THROW(proc.add(0, CylindricalRV::constant(1.0, 0), 0.75, 0.75, 1.0), DomainError);
    EXPECT_THROW(proc.add(0, CylindricalRV::constant(1.0, 0), 0.7, 0.9, 1.0), DomainError);

    const auto ens = cholesky_sample(g, HurstIndex(0.7), 1, 3);
    EXPECT_NEAR(skorohod_sum(proc, ens, 1.0), ens[0].values[4], 1e-14);
    EXPECT_NEAR(skorohod_sum(proc, ens, 0.25), ens[0].values[2], 1e-14);
    ScalarProcess two{g, {}};
    two.add(1, CylindricalRV::constant(1.0, 1), 0, 0.5, 1.0);
    EXPECT_THROW(skorohod_sum(two, ens, 1.0), DomainError);
}

TEST(ElementaryProcess, GaussianSumVariance) {
    const TimeGrid g(1.0, 8);
    const HurstIndex h(0.75);
    const FbmGenerator gen(g, h);
    ScalarProcess proc{g, {}};
    double expect = 0.0;
    for (std::size_t k = 0; k < 8; ++k) {
        const double c = 0.5 + 0.25 * static_cast<double>(k);
        const double a = 0.125 * static_cast<double>(k % 4), b = a + 0.5;
        proc.add(k, CylindricalRV::constant(1.0, k), a, b, c);
        const auto phi = indicator(g, a, b, c);
        expect += h_inner(phi, phi, h);
    }
    std::vector<double> sq(20000);
    for (std::size_t r = 0; r < sq.size(); ++r) {
        const auto e = gen.ensemble(8, 100, r);
        const double s = skorohod_sum(proc, e, 1.0);
        sq[r] = s * s;
    }
    const auto st = sample_stats(sq);
    EXPECT_TRUE(within_se(st.mean, expect, st.se)) << st.mean << " vs " << expect;
}

TEST(Duality, ExamplesWithinFourSE) {
    const TimeGrid g(1.0, 8);
    const HurstIndex h(0.75);
    const FbmGenerator gen(g, h);
    const auto psi = indicator(g, 0, 0.5);
    const auto phi = indicator(g, 0.25, 1.0);

    const auto r1 = duality_check(CylindricalRV::constant(2.0), ScalarIntegrand{g, {{CylindricalRV::constant(1.0), phi}}},
                                  gen, 100000, 1);
    EXPECT_TRUE(r1.pass);
    EXPECT_DOUBLE_EQ(r1.rhs.mean, 0.0);

    const auto r2 = duality_check(CylindricalRV::wiener(psi), ScalarIntegrand{g, {{CylindricalRV::constant(1.0), phi}}},
                                  gen, 100000, 2);
    EXPECT_TRUE(r2.pass);
    EXPECT_TRUE(within_se(r2.lhs.mean, h_inner(psi, phi, h), r2.lhs.se));
    EXPECT_NEAR(r2.rhs.mean, h_inner(psi, phi, h), 1e-12);

    const CylindricalRV sq(SmoothFunctional(1, {{1.0, {2}}}), {psi});
    const auto r3 = duality_check(sq, ScalarIntegrand{g, {{CylindricalRV::wiener(psi), indicator(g, 0, 1)}}}, gen,
                                  100000, 3);
    EXPECT_TRUE(r3.pass) << r3.diff.mean << " +- " << r3.diff.se;
}

TEST(L2Identity, AdjointConvention) {
    const TimeGrid g(2.0, 8);
    const HurstIndex h(0.75);
    const FbmGenerator gen(g, h);
    const auto det = l2_identity_check(ScalarIntegrand{g, {{CylindricalRV::constant(1.0), indicator(g, 0.5, 1.5)}}},
                                       gen, 100000, 4);
    EXPECT_TRUE(det.identity_pass);
    EXPECT_DOUBLE_EQ(det.adjoint.mean, 0.0);

    // beta_T 1_[0,T]: E delta^2 = 2 T^{4H} and the adjoint term is T^{4H}.
    const ScalarIntegrand u{g, {IntegrandTerm::on_interval(CylindricalRV::wiener(indicator(g, 0, 2)), g, 0, 2)}};
    const auto r = l2_identity_check(u, gen, 100000, 5);
    EXPECT_TRUE(r.identity_pass) << r.identity_defect.mean << " +- " << r.identity_defect.se;
    EXPECT_TRUE(r.inequality_pass);
    EXPECT_NEAR(r.adjoint.mean, std::pow(2.0, 3.0), 1e-10);

    // beta_1 1_(1,2]: adjoint term equals <1_(0,1], 1_(1,2]>_H^2.
    const ScalarIntegrand v{g, {IntegrandTerm::on_interval(CylindricalRV::wiener(indicator(g, 0, 1)), g, 1, 2)}};
    const auto rv = l2_identity_check(v, gen, 100000, 6);
    const double c = increment_covariance(0, 1, 1, 2, h);
    EXPECT_TRUE(rv.identity_pass);
    EXPECT_NEAR(rv.adjoint.mean, c * c, 1e-12);
    EXPECT_TRUE(within_se(rv.delta_sq.mean, 1.0 + c * c, rv.delta_sq.se));
}
