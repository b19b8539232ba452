#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>

#include "fracheat/verify.hpp"

using namespace fracheat;
namespace fs = std::filesystem;

namespace {

const fs::path kExperiments = fs::path(FRACHEAT_SOURCE_DIR) / "experiments";

fs::path write_temp(const std::string& name, const std::string& body) {
    const fs::path dir = fs::temp_directory_path() / "fracheat_test_verify";
    fs::create_directories(dir);
    const fs::path p = dir / name;
    std::ofstream(p) << body;
    return p;
}

/// zero and beta_T on noise 0; with two_noises a deterministic member on noise 1.
Battery small_battery(bool two_noises = true) {
    std::string body =
        "[battery]\nH = 0.75\nm = 8\nn_mc = 400\nseed = 3\n"
        "[zero]\nterm1 = 0 | 0:1 | 0 | -\n"
        "[beta_T]\nterm1 = 0 | 0:1 | x0 | 0:1\ndual = x0 | 0:1\n";
    if (two_noises) body += "[second]\nterm1 = 1 | 0:0.5 | 1 | -\n";
    return load_battery(write_temp(two_noises ? "two.battery" : "one.battery", body).string());
}

/// Unit-scale problem description with no data at all.
ProblemDescription empty_problem() {
    ProblemDescription d;
    d.cells = 16;
    d.points = 32;
    return d;
}

}  // namespace

TEST(Verify, SafeRatio) {
    EXPECT_EQ(safe_ratio(0.0, 0.0), 0.0);
    EXPECT_TRUE(std::isinf(safe_ratio(1.0, 0.0)));
    EXPECT_DOUBLE_EQ(safe_ratio(3.0, 2.0), 1.5);
}

TEST(Verify, FitLineRecoversExactLine) {
    const std::vector<double> x{0, 1, 2, 3};
    const std::vector<double> y{1, 3.5, 6, 8.5};
    const LineFit f = fit_line(x, y);
    EXPECT_NEAR(f.slope, 2.5, 1e-14);
    EXPECT_NEAR(f.intercept, 1.0, 1e-14);
    EXPECT_NEAR(f.r2, 1.0, 1e-14);
}

TEST(Verify, MaximalZeroMemberHasZeroRatio) {
    const Battery b = small_battery();
    MaximalConfig c;
    c.p = 4.0;
    c.hurst = b.hurst;
    c.cells = b.cells;
    c.n_mc = 400;
    c.seed = 5;
    const MaximalRun run = detail::maximal_run(b, c, MaximalRhs::LHp, true, false);
    ASSERT_EQ(run.ratio.size(), 3u);
    EXPECT_EQ(run.lhs[0].mean, 0.0);
    EXPECT_EQ(run.rhs[0].mean, 0.0);
    EXPECT_EQ(run.ratio[0], 0.0);
    for (double r : run.ratio) EXPECT_TRUE(std::isfinite(r));
    // Deterministic integrand on the second noise: RHS is exact, so its SE is zero.
    EXPECT_EQ(run.rhs[2].se, 0.0);
    EXPECT_GT(run.rhs[2].mean, 0.0);
}

TEST(Verify, P2RoutesAgreeOnSmallBattery) {
    const Battery b = small_battery();
    MaximalConfig c;
    c.hurst = b.hurst;
    c.cells = b.cells;
    c.n_mc = 400;
    const ExperimentReport rep = p2_maximal_experiment(b, c);
    EXPECT_TRUE(rep.details["routes_agree"].get<bool>());
    EXPECT_TRUE(rep.details["finite"].get<bool>());
}

TEST(Verify, ZeroSolutionGivesZeroNorms) {
    SolutionConfig c;
    c.n_mc = 4;
    const SolutionNorms s = solution_norms(empty_problem(), c);
    EXPECT_EQ(s.sup_power.mean, 0.0);
    EXPECT_EQ(s.h_norm(), 0.0);
    EXPECT_EQ(s.data_norm(), 0.0);
    const ExperimentReport rep = embedding_sup_experiment(empty_problem(), c);
    EXPECT_EQ(rep.ratio, 0.0);
    EXPECT_TRUE(rep.pass);
}

TEST(Verify, HeatOnlySolutionNorms) {
    ProblemDescription d = empty_problem();
    d.u0.push_back({"gaussian 1 0 1", 1.0});
    SolutionConfig c;
    c.p = 2.0;
    c.n = 2.0;
    c.n_mc = 2;
    const SolutionNorms s = solution_norms(d, c);
    EXPECT_EQ(s.g_power.mean, 0.0);
    EXPECT_EQ(s.f_power.mean, 0.0);
    // Without f, D u = Delta u = u_xx.
    EXPECT_NEAR(s.du_power.mean, s.uxx_power.mean, 1e-12 * s.uxx_power.mean);
    // Heat flow does not increase the L2 norm: sup is attained at t = 0.
    EXPECT_GT(s.sup_power.mean, 0.0);
}

// u0 = cos(w x) with lambda = w^2: u(t) = e^{-lambda t} u0, every Bessel potential is a scalar
// multiple and int |cos|^4 = 3L/4 over the torus, so each term of the solution-space norm has a closed form.
TEST(Verify, HeatFlowRatioMatchesClosedForm) {
    ProblemDescription d = empty_problem();
    d.cells = 64;
    d.u0.push_back({"cosine 1 1", 1.0});
    SolutionConfig c;
    c.p = 4.0;
    c.n = 2.0;
    c.n_mc = 2;
    const double p = c.p, n = c.n, lambda = std::pow(std::numbers::pi / d.half_width, 2);
    const double cp = 0.75 * d.half_width;
    const double bessel = std::pow(1.0 + lambda, (n - 2.0) / 2.0);
    const double sup = std::pow(bessel, p) * cp;
    const double u0 = std::pow(std::pow(1.0 + lambda, (n - 2.0 / p) / 2.0), p) * cp;
    const double uxx = std::pow(lambda * bessel, p) * cp * (1.0 - std::exp(-p * lambda)) / (p * lambda);
    const double h = std::pow(u0, 1.0 / p) + 2.0 * std::pow(uxx, 1.0 / p);

    const SolutionNorms s = solution_norms(d, c);
    EXPECT_NEAR(s.sup_power.mean, sup, 1e-12 * sup);
    EXPECT_NEAR(s.u0_power.mean, u0, 1e-12 * u0);
    // Trapezoid rule in time: relative error about (p lambda dt)^2 / 12.
    EXPECT_NEAR(s.uxx_power.mean, uxx, 1e-4 * uxx);
    const ExperimentReport rep = embedding_sup_experiment(d, c);
    EXPECT_NEAR(rep.ratio, sup / std::pow(h, p), 1e-4 * rep.ratio);
    EXPECT_TRUE(rep.pass);
}

TEST(Verify, HoelderValidatesParameters) {
    const auto d = load_problem((kExperiments / "det_g.spec").string());
    HoelderConfig c;
    c.n_mc = 10;
    c.p = 2.0;
    EXPECT_THROW(hoelder_experiment(d, c), DomainError);
    c.p = 4.0;
    c.alpha = 0.2;  // alpha must exceed 1/p
    EXPECT_THROW(hoelder_experiment(d, c), DomainError);
    c.alpha = 0.3;
    c.beta = 0.6;
    EXPECT_THROW(hoelder_experiment(d, c), DomainError);
}

TEST(Verify, SmallHoelderRun) {
    const auto d = load_problem((kExperiments / "det_g.spec").string());
    HoelderConfig c;
    c.n_mc = 300;
    const ExperimentReport rep = hoelder_experiment(d, c);
    EXPECT_TRUE(rep.pass) << to_json(rep).dump();
    ASSERT_EQ(rep.series.size(), 1u);
    EXPECT_EQ(rep.series[0].x.size(), c.lags.size());
}

TEST(Verify, WeakResidualSmallRun) {
    const auto d = load_problem((kExperiments / "det_g.spec").string());
    WeakResidualConfig c;
    c.replicates = 4;
    const ExperimentReport rep = weak_residual_experiment(d, c);
    EXPECT_TRUE(rep.pass) << to_json(rep).dump();
    EXPECT_THROW(weak_residual_experiment(d, WeakResidualConfig{{64}, 2}), DomainError);
}

TEST(Verify, HeatReductionAndSpectralLaws) {
    const auto d = load_problem((kExperiments / "det_g.spec").string());
    EXPECT_TRUE(heat_reduction_experiment(d).pass);
    ContractionConfig c;
    c.points = 64;
    EXPECT_TRUE(spectral_laws_experiment(c).pass);
    EXPECT_TRUE(contraction_experiment(c).pass);
}

TEST(Verify, SliceIdentityIsExact) {
    LittlewoodPaleyConfig c;
    const SliceIdentityCheck k = slice_identity_check(c);
    EXPECT_LT(k.relative_error, 1e-6);
    // On a finite interval the slice stays below the whole-line limit.
    EXPECT_LT(k.fourier, k.full_line_limit);
}

TEST(Verify, ReportsAreByteIdenticalAcrossRunsAndThreadCounts) {
    const Battery b = small_battery(false);
    const unsigned saved = max_threads();
    max_threads() = 1;
    const std::string one = to_json(skorohod_experiment(b, 300, 9)).dump();
    const std::string again = to_json(skorohod_experiment(b, 300, 9)).dump();
    max_threads() = 3;
    const std::string three = to_json(skorohod_experiment(b, 300, 9)).dump();
    max_threads() = saved;
    EXPECT_EQ(one, again);
    EXPECT_EQ(one, three);
    EXPECT_NE(one, to_json(skorohod_experiment(b, 300, 10)).dump());
}

TEST(Verify, SkorohodRejectsMultiNoiseMembers) { EXPECT_THROW(skorohod_experiment(small_battery(), 10, 1), DomainError); }

TEST(Verify, DualityRequiresDualFunctional) {
    const Battery b = small_battery(false);
    EXPECT_THROW(duality_experiment(b, 100, 1), std::exception);
}
