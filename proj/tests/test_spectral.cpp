#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>

#include "fracheat/spectral.hpp"

using namespace fracheat;

namespace {

// Smooth random field: a few low modes with random phases plus a bump.
GridField smooth_random(const SpatialGrid& g, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    const double a1 = n(rng), a2 = n(rng), a3 = n(rng), ph = n(rng);
    const double w = std::numbers::pi / g.half_width();
    return GridField::from_function(g, [&](double x, double y) {
        return a1 * std::cos(w * x + ph) + a2 * std::sin(3.0 * w * (x + y)) + a3 * std::exp(-(x * x + y * y));
    });
}

GridField rough_random(const SpatialGrid& g, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> v(g.size());
    for (auto& x : v) x = n(rng);
    return GridField(g, std::move(v));
}

double rel_diff(const GridField& a, const GridField& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num = std::max(num, std::abs(a[i] - b[i]));
        den = std::max(den, std::abs(b[i]));
    }
    return num / std::max(den, 1e-300);
}

}  // namespace

TEST(SpatialGrid, Validation) {
    EXPECT_THROW(SpatialGrid(3, 1.0, 16), DomainError);
    EXPECT_THROW(SpatialGrid(1, 1.0, 24), DomainError);
    EXPECT_THROW(SpatialGrid(1, -1.0, 16), DomainError);
    const SpatialGrid g(1, 4.0, 16);
    EXPECT_DOUBLE_EQ(g.coordinate(0), -4.0);
    EXPECT_DOUBLE_EQ(g.dx(), 0.5);
    EXPECT_EQ(g.wavenumber(8), -8);
    EXPECT_EQ(g.wavenumber(7), 7);
}

TEST(HeatKernel, Examples) {
    EXPECT_NEAR(heat_kernel(0.3, 0.0), 1.0 / std::sqrt(4.0 * std::numbers::pi * 0.3), 1e-15);
    EXPECT_DOUBLE_EQ(heat_kernel(0.3, 1.2), heat_kernel(0.3, -1.2));
    EXPECT_THROW(heat_kernel(0.0, 1.0), DomainError);
    const SpatialGrid g(1, 10.0, 4096);
    double mass = 0.0;
    for (std::size_t j = 0; j < g.points(); ++j) mass += heat_kernel(0.5, g.coordinate(j)) * g.dx();
    EXPECT_NEAR(mass, 1.0, 1e-6);
    const SpatialGrid g2(2, 8.0, 256);
    double mass2 = 0.0;
    for (std::size_t i = 0; i < g2.size(); ++i) {
        const auto p = g2.point(i);
        mass2 += heat_kernel(0.5, std::span<const double>(p.data(), 2)) * g2.cell_volume();
    }
    EXPECT_NEAR(mass2, 1.0, 1e-6);
}

TEST(GridField, SpectrumRoundTrip) {
    std::mt19937_64 rng(4);
    for (int d : {1, 2}) {
        const SpatialGrid g(d, 3.0, 32);
        const auto u = rough_random(g, rng);
        const auto back = GridField::from_spectrum(g, u.spectrum());
        EXPECT_LE(rel_diff(back, u), 1e-12);
    }
}

TEST(Semigroup, IdentityConstantAndModes) {
    const SpatialGrid g(1, 4.0, 64);
    std::mt19937_64 rng(6);
    const auto u = rough_random(g, rng);
    EXPECT_EQ(semigroup_apply(u, 0.0).values(), u.values());
    const auto c = GridField::constant(g, 2.5);
    EXPECT_LE(rel_diff(semigroup_apply(c, 0.7), c), 1e-14);
    const auto e = GridField::cosine_mode(g, 3);
    const double xi = std::numbers::pi * 3.0 / 4.0;
    const auto te = semigroup_apply(e, 0.2);
    EXPECT_LE(rel_diff(te, std::exp(-0.2 * xi * xi) * e), 1e-12);
    EXPECT_THROW(semigroup_apply(u, -1.0), DomainError);
}

TEST(Semigroup, SemigroupLaw) {
    std::mt19937_64 rng(7);
    for (int d : {1, 2}) {
        const SpatialGrid g(d, 4.0, 32);
        const auto u = rough_random(g, rng);
        const auto st = semigroup_apply(semigroup_apply(u, 0.03), 0.05);
        EXPECT_LE(rel_diff(st, semigroup_apply(u, 0.08)), 1e-12);
    }
}

TEST(Semigroup, MatchesWrappedKernelConvolution) {
    const SpatialGrid g(1, 8.0, 128);
    std::mt19937_64 rng(12);
    const auto u = smooth_random(g, rng);
    const double t = 0.5;
    const auto tu = semigroup_apply(u, t);
    std::vector<double> direct(g.points(), 0.0);
    for (std::size_t i = 0; i < g.points(); ++i)
        for (std::size_t j = 0; j < g.points(); ++j) {
            double k = 0.0;
            for (int n = -3; n <= 3; ++n) k += heat_kernel(t, g.coordinate(i) - g.coordinate(j) + n * g.period());
            direct[i] += k * u[j] * g.dx();
        }
    EXPECT_LE(rel_diff(tu, GridField(g, direct)), 1e-8);
}

TEST(Semigroup, LpContraction) {
    std::mt19937_64 rng(13);
    for (int d : {1, 2}) {
        const SpatialGrid g(d, 8.0, d == 1 ? 256 : 64);
        const double dx2 = g.dx() * g.dx();
        for (int trial = 0; trial < 10; ++trial) {
            const auto u = rough_random(g, rng);
            for (double t : {2.0 * dx2, 0.1, 1.0}) {
                const auto tu = semigroup_apply(u, t);
                EXPECT_LE(lp_norm(tu, 2.0), lp_norm(u, 2.0) * (1.0 + 1e-12));
                EXPECT_LE(lp_norm(tu, 4.0), lp_norm(u, 4.0) * (1.0 + 1e-8));
            }
        }
    }
    const SpatialGrid g(1, 4.0, 64);
    const auto c = GridField::constant(g, 1.5);
    EXPECT_NEAR(lp_norm(semigroup_apply(c, 1.0), 4.0), lp_norm(c, 4.0), 1e-12);
    const auto e = GridField::cosine_mode(g, 2);
    EXPECT_LT(lp_norm(semigroup_apply(e, 0.1), 2.0), lp_norm(e, 2.0));
}

TEST(Bessel, IdentityEigenvalueInverse) {
    const SpatialGrid g(2, 4.0, 32);
    std::mt19937_64 rng(14);
    const auto u = rough_random(g, rng);
    EXPECT_EQ(bessel_potential(u, 0.0).values(), u.values());
    const auto e = GridField::cosine_mode(g, 2);
    const double xi2 = 2.0 * std::pow(std::numbers::pi * 2.0 / 4.0, 2);
    EXPECT_LE(rel_diff(bessel_potential(e, 2.0), (1.0 + xi2) * e), 1e-12);
    EXPECT_LE(rel_diff(bessel_potential(e, 2.0), e - laplacian(e)), 1e-12);
    const auto sm = smooth_random(g, rng);
    EXPECT_LE(rel_diff(bessel_potential(bessel_potential(sm, 1.5), -1.5), sm), 1e-10);
    EXPECT_LE(rel_diff(bessel_potential(bessel_potential(sm, 0.7), 0.6), bessel_potential(sm, 1.3)), 1e-10);
}

TEST(Sobolev, NormsAndIsometry) {
    const SpatialGrid g(1, 4.0, 64);
    const auto c = GridField::constant(g, -2.0);
    for (double n : {0.0, 1.0, 2.5})
        for (double p : {2.0, 4.0}) EXPECT_NEAR(sobolev_norm(c, n, p), 2.0 * std::pow(8.0, 1.0 / p), 1e-12);
    std::mt19937_64 rng(15);
    const auto u = smooth_random(g, rng);
    EXPECT_DOUBLE_EQ(sobolev_norm(u, 0.0, 4.0), lp_norm(u, 4.0));
    for (double m : {1.0, 2.0, -1.0}) {
        const double lhs = sobolev_norm(bessel_potential(u, m), 1.0 - m, 4.0);
        const double rhs = sobolev_norm(u, 1.0, 4.0);
        EXPECT_NEAR(lhs, rhs, 1e-10 * rhs);
    }
}

TEST(Pairing, IndependentOfOrderAndHoelder) {
    std::mt19937_64 rng(16);
    const SpatialGrid g(2, 4.0, 32);
    const auto u = smooth_random(g, rng), phi = smooth_random(g, rng);
    const double p0 = pairing(u, phi, 0.0);
    EXPECT_NEAR(p0, value_inner(u, phi), 1e-12 * (1.0 + std::abs(p0)));
    EXPECT_NEAR(pairing(u, phi, 2.0), p0, 1e-10 * (1.0 + std::abs(p0)));
    for (int trial = 0; trial < 10; ++trial) {
        const auto a = rough_random(g, rng), b = rough_random(g, rng);
        for (double n : {0.0, 1.0, -1.0})
            for (double p : {2.0, 4.0}) {
                const double q = p / (p - 1.0);
                const double bound = lp_norm(bessel_potential(b, -n), q) * sobolev_norm(a, n, p);
                EXPECT_LE(std::abs(pairing(a, b, n)), bound * (1.0 + 1e-12));
            }
    }
    EXPECT_THROW(pairing(u, GridField(SpatialGrid(2, 4.0, 16)), 0.0), GridMismatch);
}

TEST(SequenceSobolev, ReductionsAndMinkowski) {
    std::mt19937_64 rng(17);
    const SpatialGrid g(1, 4.0, 64);
    const auto u = smooth_random(g, rng);
    EXPECT_NEAR(sequence_sobolev_norm({{u}}, 1.0, 4.0), sobolev_norm(u, 1.0, 4.0), 1e-12);
    EXPECT_NEAR(sequence_sobolev_norm({{u, u}}, 1.0, 4.0), std::sqrt(2.0) * sobolev_norm(u, 1.0, 4.0), 1e-12);
    for (int trial = 0; trial < 10; ++trial) {
        FieldSequence s;
        double sum = 0.0;
        for (int k = 0; k < 3; ++k) {
            s.components.push_back(rough_random(g, rng));
            sum += std::pow(sobolev_norm(s.components.back(), 0.5, 4.0), 2);
        }
        EXPECT_LE(std::pow(sequence_sobolev_norm(s, 0.5, 4.0), 2), sum * (1.0 + 1e-12));
    }
}

TEST(Gradient, ModesConstantsAndFiniteDifferences) {
    const SpatialGrid g(1, 4.0, 64);
    EXPECT_LE(lp_norm(gradient_field(GridField::constant(g, 3.0))[0], 2.0), 1e-12);
    const double w = std::numbers::pi * 3.0 / 4.0;
    const auto e = GridField::cosine_mode(g, 3);
    const auto de = gradient_field(e)[0];
    const auto expect = GridField::from_function(g, [&](double x, double) { return -w * std::sin(w * x); });
    EXPECT_LE(rel_diff(de, expect), 1e-12);

    auto fd_error = [](std::size_t m) {
        const SpatialGrid gg(1, 4.0, m);
        const auto f = GridField::from_function(gg, [](double x, double) { return std::exp(-x * x); });
        const auto d = gradient_field(f)[0];
        double err = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const double fd = (f[(j + 1) % m] - f[(j + m - 1) % m]) / (2.0 * gg.dx());
            err = std::max(err, std::abs(d[j] - fd));
        }
        return err;
    };
    const double e1 = fd_error(64), e2 = fd_error(128);
    EXPECT_NEAR(std::log2(e1 / e2), 2.0, 0.1);

    const SpatialGrid g2(2, 6.0, 64);
    const auto f2 = GridField::from_function(g2, [](double x, double y) { return std::exp(-x * x - 2.0 * y * y); });
    const auto grad = gradient_field(f2);
    ASSERT_EQ(grad.size(), 2u);
    const auto ex = GridField::from_function(
        g2, [](double x, double y) { return -2.0 * x * std::exp(-x * x - 2.0 * y * y); });
    EXPECT_LE(rel_diff(grad[0], ex), 1e-8);
}

TEST(Hessian, MagnitudeOfQuadraticLikeField) {
    const SpatialGrid g(2, 4.0, 64);
    const auto e = GridField::cosine_mode(g, 1);  // cos(wx) cos(wy)
    const double w = std::numbers::pi / 4.0;
    const auto h = hessian_magnitude(e);
    const auto expect = GridField::from_function(g, [&](double x, double y) {
        const double cx = std::cos(w * x), cy = std::cos(w * y), sx = std::sin(w * x), sy = std::sin(w * y);
        return w * w * std::sqrt(2.0 * cx * cx * cy * cy + 2.0 * sx * sx * sy * sy);
    });
    EXPECT_LE(rel_diff(h, expect), 1e-10);
}

TEST(FieldFiles, BinaryAndCsv) {
    std::mt19937_64 rng(18);
    const SpatialGrid g(2, 2.0, 8);
    const auto u = rough_random(g, rng);
    const std::string file = ::testing::TempDir() + "u.fld";
    write_field_binary(file, u);
    const auto back = read_field_binary(file);
    EXPECT_TRUE(back.grid() == g);
    EXPECT_EQ(back.values(), u.values());
    std::remove(file.c_str());
    std::ostringstream os;
    write_field_csv(os, u);
    EXPECT_EQ(os.str().substr(0, 12), "x0,x1,value\n");
    EXPECT_THROW(read_field_binary(::testing::TempDir() + "missing.fld"), std::runtime_error);
}
