#pragma once

// Fields on the periodic torus [-L, L)^d, d in {1, 2}, and the Fourier multipliers
// acting on them: heat semigroup exp(-t|xi|^2), Bessel potential (1+|xi|^2)^{n/2},
// spectral gradient i xi. Frequencies xi = pi k / L with -M/2 <= k < M/2.

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <memory>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fracheat/core.hpp"
#include "fracheat/fft.hpp"
#include "fracheat/fbm.hpp"  // little-endian helpers

namespace fracheat {

class SpatialGrid {
public:
    SpatialGrid(int dim, double half_width, std::size_t points) : dim_(dim), half_width_(half_width), points_(points) {
        if (dim != 1 && dim != 2) throw DomainError(detail::concat("spatial dimension must be 1 or 2, got ", dim));
        if (!(half_width > 0.0)) throw DomainError(detail::concat("half-width L must be positive, got ", half_width));
        if (!fft::is_power_of_two(points) || points < 2)
            throw DomainError(detail::concat("points per axis must be a power of two, got ", points));
    }

    int dim() const noexcept { return dim_; }
    double half_width() const noexcept { return half_width_; }
    std::size_t points() const noexcept { return points_; }
    std::size_t size() const noexcept { return dim_ == 1 ? points_ : points_ * points_; }
    double dx() const noexcept { return 2.0 * half_width_ / static_cast<double>(points_); }
    double cell_volume() const noexcept { return dim_ == 1 ? dx() : dx() * dx(); }
    double period() const noexcept { return 2.0 * half_width_; }

    double coordinate(std::size_t j) const noexcept {
        return -half_width_ + 2.0 * half_width_ * static_cast<double>(j) / static_cast<double>(points_);
    }
    /// Axis indices of a flat index (row-major, axis 0 slowest).
    std::array<std::size_t, 2> axes(std::size_t idx) const noexcept {
        return dim_ == 1 ? std::array<std::size_t, 2>{idx, 0} : std::array<std::size_t, 2>{idx / points_, idx % points_};
    }
    std::array<double, 2> point(std::size_t idx) const noexcept {
        const auto a = axes(idx);
        return {coordinate(a[0]), dim_ == 2 ? coordinate(a[1]) : 0.0};
    }
    /// Signed wavenumber k in [-M/2, M/2) of axis index j.
    long wavenumber(std::size_t j) const noexcept {
        const long jj = static_cast<long>(j), m = static_cast<long>(points_);
        return jj < m / 2 ? jj : jj - m;
    }
    double frequency(std::size_t j) const noexcept {
        return std::numbers::pi * static_cast<double>(wavenumber(j)) / half_width_;
    }
    /// Frequency vector of a flat spectral index.
    std::array<double, 2> xi(std::size_t idx) const noexcept {
        const auto a = axes(idx);
        return {frequency(a[0]), dim_ == 2 ? frequency(a[1]) : 0.0};
    }
    double xi_squared(std::size_t idx) const noexcept {
        const auto x = xi(idx);
        return x[0] * x[0] + x[1] * x[1];
    }

    friend bool operator==(const SpatialGrid& a, const SpatialGrid& b) noexcept {
        return a.dim_ == b.dim_ && a.points_ == b.points_ && a.half_width_ == b.half_width_;
    }

private:
    int dim_;
    double half_width_;
    std::size_t points_;
};

inline void require_same_grid(const SpatialGrid& a, const SpatialGrid& b) {
    if (!(a == b)) throw GridMismatch("spatial grids differ");
}

using Spectrum = std::vector<fft::cplx>;

/// Real field on a spatial grid. The spectrum is computed on first use and cached.
class GridField {
public:
    explicit GridField(const SpatialGrid& grid) : grid_(grid), values_(grid.size(), 0.0) {}
    GridField(const SpatialGrid& grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
        if (values_.size() != grid.size())
            throw GridMismatch(detail::concat("field needs ", grid.size(), " values, got ", values_.size()));
    }

    static GridField constant(const SpatialGrid& g, double c) { return GridField(g, std::vector<double>(g.size(), c)); }

    static GridField from_function(const SpatialGrid& g, const std::function<double(double, double)>& f) {
        std::vector<double> v(g.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            const auto p = g.point(i);
            v[i] = f(p[0], p[1]);
        }
        return GridField(g, std::move(v));
    }

    /// amplitude * exp(-|x - center|^2 / (2 width^2)), center on the diagonal.
    static GridField gaussian(const SpatialGrid& g, double amplitude, double center, double width) {
        return from_function(g, [&](double x, double y) {
            double r2 = (x - center) * (x - center);
            if (g.dim() == 2) r2 += (y - center) * (y - center);
            return amplitude * std::exp(-r2 / (2.0 * width * width));
        });
    }

    /// amplitude * cos(pi k x / L) (product over axes in d = 2).
    static GridField cosine_mode(const SpatialGrid& g, long k, double amplitude = 1.0) {
        const double w = std::numbers::pi * static_cast<double>(k) / g.half_width();
        return from_function(g, [&](double x, double y) {
            return amplitude * std::cos(w * x) * (g.dim() == 2 ? std::cos(w * y) : 1.0);
        });
    }

    static GridField from_spectrum(const SpatialGrid& g, Spectrum s) {
        fft::transform(s, g.dim(), static_cast<int>(g.points()), fft::Direction::Backward);
        const double inv = 1.0 / static_cast<double>(g.size());
        std::vector<double> v(g.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = s[i].real() * inv;
        // Not cached: dropping the imaginary part may change the spectrum (Nyquist).
        return GridField(g, std::move(v));
    }

    const SpatialGrid& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return values_.size(); }
    const std::vector<double>& values() const noexcept { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }

    /// Unnormalized forward DFT of the values.
    const Spectrum& spectrum() const {
        // Shared fields may be read from several workers; the cache slot is swapped atomically.
        if (auto cached = std::atomic_load(&spectrum_)) return *cached;
        auto s = std::make_shared<Spectrum>(values_.begin(), values_.end());
        fft::transform(*s, grid_.dim(), static_cast<int>(grid_.points()), fft::Direction::Forward);
        std::shared_ptr<const Spectrum> expected;
        std::shared_ptr<const Spectrum> fresh = std::move(s);
        std::atomic_compare_exchange_strong(&spectrum_, &expected, fresh);
        return *std::atomic_load(&spectrum_);
    }

    GridField& operator+=(const GridField& o) {
        require_same_grid(grid_, o.grid_);
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
        spectrum_.reset();
        return *this;
    }
    GridField& operator-=(const GridField& o) {
        require_same_grid(grid_, o.grid_);
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
        spectrum_.reset();
        return *this;
    }
    GridField& operator*=(double c) {
        for (auto& v : values_) v *= c;
        spectrum_.reset();
        return *this;
    }
    friend GridField operator+(GridField a, const GridField& b) { return a += b; }
    friend GridField operator-(GridField a, const GridField& b) { return a -= b; }
    friend GridField operator*(double c, GridField a) { return a *= c; }

    /// this += c * o
    void axpy(double c, const GridField& o) {
        require_same_grid(grid_, o.grid_);
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += c * o.values_[i];
        spectrum_.reset();
    }

private:
    SpatialGrid grid_;
    std::vector<double> values_;
    mutable std::shared_ptr<const Spectrum> spectrum_;
};

/// l2-sequence-valued field (u^k)_k on one grid.
struct FieldSequence {
    std::vector<GridField> components;

    const SpatialGrid& grid() const { return components.at(0).grid(); }
};

// ---------------------------------------------------------------------------
// Discrete integrals (cell-volume weighted).

/// L2 dot product of two fields.
inline double value_inner(const GridField& a, const GridField& b) {
    require_same_grid(a.grid(), b.grid());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s * a.grid().cell_volume();
}
inline double value_norm(const GridField& a) { return std::sqrt(value_inner(a, a)); }

inline double lp_norm(const GridField& u, double p) {
    if (!(p >= 1.0)) throw DomainError(detail::concat("L_p norm needs p >= 1, got ", p));
    double s = 0.0;
    for (double v : u.values()) s += std::pow(std::abs(v), p);
    return std::pow(s * u.grid().cell_volume(), 1.0 / p);
}

// ---------------------------------------------------------------------------
// Multipliers.

/// Applies m(xi) pointwise to the spectrum.
template <typename Multiplier>
GridField apply_multiplier(const GridField& u, Multiplier&& m) {
    const auto& g = u.grid();
    Spectrum s = u.spectrum();
    for (std::size_t i = 0; i < s.size(); ++i) s[i] *= m(i);
    return GridField::from_spectrum(g, std::move(s));
}

/// G_t(x) = (4 pi t)^{-d/2} exp(-|x|^2 / (4t)).
inline double heat_kernel(double t, std::span<const double> x) {
    if (!(t > 0.0)) throw DomainError(detail::concat("heat kernel needs t > 0, got ", t));
    double r2 = 0.0;
    for (double xi : x) r2 += xi * xi;
    const double d = static_cast<double>(x.size());
    return std::pow(4.0 * std::numbers::pi * t, -0.5 * d) * std::exp(-r2 / (4.0 * t));
}

inline double heat_kernel(double t, double x) { return heat_kernel(t, std::span<const double>(&x, 1)); }

/// T_t u: spectrum times exp(-t |xi|^2).
inline GridField semigroup_apply(const GridField& u, double t) {
    if (t < 0.0) throw DomainError(detail::concat("semigroup time must be >= 0, got ", t));
    if (t == 0.0) return u;
    const auto& g = u.grid();
    return apply_multiplier(u, [&](std::size_t i) { return std::exp(-t * g.xi_squared(i)); });
}

/// (1 - Delta)^{n/2} u: spectrum times (1 + |xi|^2)^{n/2}.
inline GridField bessel_potential(const GridField& u, double order) {
    if (order == 0.0) return u;
    const auto& g = u.grid();
    return apply_multiplier(u, [&](std::size_t i) { return std::pow(1.0 + g.xi_squared(i), 0.5 * order); });
}

/// ||u||_{H_p^n} = ||(1 - Delta)^{n/2} u||_{L_p}.
inline double sobolev_norm(const GridField& u, double order, double p) { return lp_norm(bessel_potential(u, order), p); }

/// (u, phi) = integral of [(1-Delta)^{n/2} u] [(1-Delta)^{-n/2} phi].
inline double pairing(const GridField& u, const GridField& phi, double order = 0.0) {
    require_same_grid(u.grid(), phi.grid());
    return value_inner(bessel_potential(u, order), bessel_potential(phi, -order));
}

/// || |(1 - Delta)^{n/2} u|_{l2} ||_{L_p}.
inline double sequence_sobolev_norm(const FieldSequence& u, double order, double p) {
    if (u.components.empty()) return 0.0;
    const auto& g = u.grid();
    std::vector<double> sq(g.size(), 0.0);
    for (const auto& c : u.components) {
        const GridField b = bessel_potential(c, order);
        for (std::size_t i = 0; i < sq.size(); ++i) sq[i] += b[i] * b[i];
    }
    for (auto& v : sq) v = std::sqrt(v);
    return lp_norm(GridField(g, std::move(sq)), p);
}

/// Spectral partial derivatives, one field per axis.
inline std::vector<GridField> gradient_field(const GridField& u) {
    const auto& g = u.grid();
    std::vector<GridField> out;
    for (int axis = 0; axis < g.dim(); ++axis)
        out.push_back(apply_multiplier(u, [&](std::size_t i) { return fft::cplx(0.0, g.xi(i)[axis]); }));
    return out;
}

/// Spectral Laplacian: spectrum times -|xi|^2.
inline GridField laplacian(const GridField& u) {
    const auto& g = u.grid();
    return apply_multiplier(u, [&](std::size_t i) { return -g.xi_squared(i); });
}

/// Pointwise Frobenius norm of the Hessian |D^2 u|.
inline GridField hessian_magnitude(const GridField& u) {
    const auto& g = u.grid();
    std::vector<double> sq(g.size(), 0.0);
    for (int a = 0; a < g.dim(); ++a)
        for (int b = 0; b < g.dim(); ++b) {
            const GridField d2 = apply_multiplier(u, [&](std::size_t i) {
                const auto x = g.xi(i);
                return -x[a] * x[b];
            });
            for (std::size_t i = 0; i < sq.size(); ++i) sq[i] += d2[i] * d2[i];
        }
    for (auto& v : sq) v = std::sqrt(v);
    return GridField(g, std::move(sq));
}

// ---------------------------------------------------------------------------
// Field files. Binary: "FLD1" | u64 d | u64 M | f64 L | M^d f64, little-endian.

inline void write_field_binary(const std::string& file, const GridField& u) {
    std::ofstream os(file, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + file + " for writing");
    os.write("FLD1", 4);
    detail::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(u.grid().dim()));
    detail::write_le<std::uint64_t>(os, u.grid().points());
    detail::write_le<double>(os, u.grid().half_width());
    for (double v : u.values()) detail::write_le<double>(os, v);
}

inline GridField read_field_binary(const std::string& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + file);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "FLD1", 4) != 0) throw std::runtime_error(file + ": not an FLD1 file");
    const auto d = detail::read_le<std::uint64_t>(is);
    const auto m = detail::read_le<std::uint64_t>(is);
    const auto l = detail::read_le<double>(is);
    SpatialGrid g(static_cast<int>(d), l, m);
    std::vector<double> v(g.size());
    for (auto& x : v) x = detail::read_le<double>(is);
    return GridField(g, std::move(v));
}

/// CSV rows: node coordinates then value.
inline void write_field_csv(std::ostream& os, const GridField& u) {
    os.precision(17);
    os << (u.grid().dim() == 1 ? "x,value\n" : "x0,x1,value\n");
    for (std::size_t i = 0; i < u.size(); ++i) {
        const auto p = u.grid().point(i);
        os << p[0] << ",";
        if (u.grid().dim() == 2) os << p[1] << ",";
        os << u[i] << "\n";
    }
}

}  // namespace fracheat
