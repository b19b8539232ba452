#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <span>
#include <ostream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "fracheat/core.hpp"
#include "fracheat/fft.hpp"
#include "fracheat/rng.hpp"

namespace fracheat {

/// R_H(t,s) = (t^{2H} + s^{2H} - |t-s|^{2H}) / 2.
inline double covariance(double t, double s, HurstIndex h) {
    if (t < 0.0 || s < 0.0) throw DomainError(detail::concat("covariance needs t,s >= 0, got ", t, ", ", s));
    const double e = 2.0 * h.value();
    return 0.5 * (std::pow(t, e) + std::pow(s, e) - std::pow(std::abs(t - s), e));
}

/// E[(b_b - b_a)(b_d - b_c)] for a <= b, c <= d.
inline double increment_covariance(double a, double b, double c, double d, HurstIndex h) {
    if (a > b || c > d)
        throw DomainError(detail::concat("increment_covariance needs a<=b and c<=d, got (", a, ",", b, ",", c, ",", d, ")"));
    const double e = 2.0 * h.value();
    auto pw = [e](double x) { return std::pow(std::abs(x), e); };
    return 0.5 * (pw(b - c) + pw(a - d) - pw(a - c) - pw(b - d));
}

/// One fBm sample at the grid nodes; values[0] = 0.
struct FbmPath {
    TimeGrid grid;
    HurstIndex hurst;
    std::vector<double> values;

    double at(std::size_t node) const { return values.at(node); }
    double increment(std::size_t cell) const { return values[cell + 1] - values[cell]; }
};

enum class FbmMethod { Cholesky, Circulant };

inline const char* to_string(FbmMethod m) { return m == FbmMethod::Cholesky ? "cholesky" : "circulant"; }

/// K paths on one grid for one replicate: the sequence (beta^k)_k.
struct FbmEnsemble {
    TimeGrid grid;
    HurstIndex hurst;
    std::uint64_t seed = 0;
    std::uint64_t replicate = 0;
    FbmMethod method = FbmMethod::Cholesky;
    bool circulant_fallback = false;  // requested circulant, produced by Cholesky
    std::vector<FbmPath> paths;       // paths[k] uses substream (seed, k, replicate)

    std::size_t size() const noexcept { return paths.size(); }
    const FbmPath& operator[](std::size_t k) const { return paths.at(k); }
};

/// Exact-law fBm sampler on a fixed grid. Pure: the path for a StreamKey depends
/// only on (grid, H, method, key), so instances may be shared across threads.
class FbmGenerator {
public:
    static constexpr std::size_t kMaxCholeskyCells = 4096;

    FbmGenerator(const TimeGrid& grid, HurstIndex h, FbmMethod method = FbmMethod::Cholesky, bool jitter = false)
        : grid_(grid), hurst_(h) {
        if (method == FbmMethod::Circulant && setup_circulant()) {
            method_ = FbmMethod::Circulant;
            return;
        }
        fallback_ = method == FbmMethod::Circulant;
        setup_cholesky(jitter);
        method_ = FbmMethod::Cholesky;
    }

    const TimeGrid& grid() const noexcept { return grid_; }
    HurstIndex hurst() const noexcept { return hurst_; }
    FbmMethod method() const noexcept { return method_; }
    bool fell_back() const noexcept { return fallback_; }

    /// Fills values[0..m] with one path from the given substream.
    void sample_into(const StreamKey& key, std::span<double> values) const {
        const std::size_t m = grid_.cells();
        if (values.size() != m + 1) throw GridMismatch("sample buffer must hold m+1 nodes");
        NormalStream rng(key);
        values[0] = 0.0;
        if (method_ == FbmMethod::Cholesky) {
            thread_local std::vector<double> z;
            z.resize(m);
            for (auto& x : z) x = rng();
            for (std::size_t i = 0; i < m; ++i) {
                double acc = 0.0;
                const double* row = chol_.data() + i * m;
                for (std::size_t j = 0; j <= i; ++j) acc += row[j] * z[j];
                values[i + 1] = acc;
            }
            return;
        }
        const std::size_t n = sqrt_eig_.size();
        thread_local std::vector<fft::cplx> w;
        w.resize(n);
        for (std::size_t j = 0; j < n; ++j) {
            const double re = rng();
            const double im = rng();
            w[j] = sqrt_eig_[j] * fft::cplx(re, im);
        }
        fft::transform(w, 1, static_cast<int>(n), fft::Direction::Forward);
        const double scale = std::pow(grid_.dt(), hurst_.value());
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            acc += scale * w[i].real();
            values[i + 1] = acc;
        }
    }

    FbmPath sample(const StreamKey& key) const {
        FbmPath p{grid_, hurst_, std::vector<double>(grid_.nodes())};
        sample_into(key, p.values);
        return p;
    }

    /// Paths k = 0..n_paths-1 of one replicate.
    FbmEnsemble ensemble(std::size_t n_paths, std::uint64_t seed, std::uint64_t replicate = 0) const {
        FbmEnsemble e{grid_, hurst_, seed, replicate, method_, fallback_, {}};
        e.paths.reserve(n_paths);
        for (std::size_t k = 0; k < n_paths; ++k) e.paths.push_back(sample({seed, k, replicate}));
        return e;
    }

    /// Smallest eigenvalue of the circulant embedding (diagnostic; 0 when Cholesky was requested).
    double min_embedding_eigenvalue() const noexcept { return min_eig_; }

private:
    void setup_cholesky(bool jitter) {
        const std::size_t m = grid_.cells();
        if (m > kMaxCholeskyCells)
            throw DomainError(detail::concat("Cholesky sampling limited to m <= ", kMaxCholeskyCells, " cells, got ", m,
                                             "; use the circulant method or a coarser grid"));
        Eigen::MatrixXd c(m, m);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) c(i, j) = covariance(grid_.node(i + 1), grid_.node(j + 1), hurst_);
        if (jitter) c.diagonal().array() += 1e-12 * std::pow(grid_.horizon(), 2.0 * hurst_.value());
        Eigen::LLT<Eigen::MatrixXd> llt(c);
        if (llt.info() != Eigen::Success)
            throw NumericalError(detail::concat("fBm covariance factorization failed (m=", m, ", H=", hurst_.value(),
                                                "); retry with jitter enabled or a smaller grid"));
        Eigen::MatrixXd l = llt.matrixL();
        chol_.assign(m * m, 0.0);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j <= i; ++j) chol_[i * m + j] = l(i, j);
    }

    // Davies-Harte embedding of unit-spacing fGn; false if an eigenvalue is negative.
    bool setup_circulant() {
        const std::size_t m = grid_.cells();
        const std::size_t n = fft::next_power_of_two(2 * m);
        const double e = 2.0 * hurst_.value();
        auto gamma = [e](double k) {
            return 0.5 * (std::pow(k + 1.0, e) - 2.0 * std::pow(k, e) + std::pow(std::abs(k - 1.0), e));
        };
        std::vector<fft::cplx> row(n);
        for (std::size_t j = 0; j <= n / 2; ++j) row[j] = gamma(static_cast<double>(j));
        for (std::size_t j = n / 2 + 1; j < n; ++j) row[j] = row[n - j];
        fft::transform(row, 1, static_cast<int>(n), fft::Direction::Forward);
        double max_eig = 0.0;
        min_eig_ = row[0].real();
        for (const auto& v : row) {
            max_eig = std::max(max_eig, v.real());
            min_eig_ = std::min(min_eig_, v.real());
        }
        if (min_eig_ < -1e-10 * max_eig) return false;
        sqrt_eig_.resize(n);
        for (std::size_t j = 0; j < n; ++j)
            sqrt_eig_[j] = std::sqrt(std::max(row[j].real(), 0.0) / static_cast<double>(n));
        return true;
    }

    TimeGrid grid_;
    HurstIndex hurst_;
    FbmMethod method_ = FbmMethod::Cholesky;
    bool fallback_ = false;
    double min_eig_ = 0.0;
    std::vector<double> chol_;      // row-major lower factor of [R_H(t_i,t_j)]_{i,j>=1}
    std::vector<double> sqrt_eig_;  // sqrt(lambda_j / N)
};

inline FbmEnsemble cholesky_sample(const TimeGrid& grid, HurstIndex h, std::size_t n_paths, std::uint64_t seed,
                                   bool jitter = false) {
    return FbmGenerator(grid, h, FbmMethod::Cholesky, jitter).ensemble(n_paths, seed);
}

/// Falls back to Cholesky (recorded in circulant_fallback) if the embedding is not
/// nonnegative definite.
inline FbmEnsemble circulant_sample(const TimeGrid& grid, HurstIndex h, std::size_t n_paths, std::uint64_t seed) {
    return FbmGenerator(grid, h, FbmMethod::Circulant).ensemble(n_paths, seed);
}

/// The same paths observed on every `factor`-th node.
inline FbmEnsemble coarsen(const FbmEnsemble& e, std::size_t factor) {
    FbmEnsemble out = e;
    out.grid = e.grid.coarsen(factor);
    for (auto& p : out.paths) {
        p.grid = out.grid;
        std::vector<double> v(out.grid.nodes());
        for (std::size_t j = 0; j < v.size(); ++j) v[j] = p.values[j * factor];
        p.values = std::move(v);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Path cache: "FBM1" | u64 m | u64 K | f64 H | u64 seed | K*(m+1) f64, little-endian.

namespace detail {
template <typename T>
void write_le(std::ostream& os, T v) {
    static_assert(std::is_trivially_copyable_v<T> && (sizeof(T) == 8));
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}
template <typename T>
T read_le(std::istream& is) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("truncated binary file");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    T v;
    std::memcpy(&v, &bits, 8);
    return v;
}
}  // namespace detail

inline void write_fbm_cache(const std::string& file, const FbmEnsemble& e) {
    std::ofstream os(file, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + file + " for writing");
    os.write("FBM1", 4);
    detail::write_le<std::uint64_t>(os, e.grid.cells());
    detail::write_le<std::uint64_t>(os, e.paths.size());
    detail::write_le<double>(os, e.hurst.value());
    detail::write_le<std::uint64_t>(os, e.seed);
    for (const auto& p : e.paths)
        for (double v : p.values) detail::write_le<double>(os, v);
}

/// The header does not carry T; the caller supplies the horizon.
inline FbmEnsemble read_fbm_cache(const std::string& file, double horizon) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + file);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "FBM1", 4) != 0) throw std::runtime_error(file + ": not an FBM1 file");
    const auto m = detail::read_le<std::uint64_t>(is);
    const auto k = detail::read_le<std::uint64_t>(is);
    const auto h = detail::read_le<double>(is);
    const auto seed = detail::read_le<std::uint64_t>(is);
    TimeGrid grid(horizon, m);
    FbmEnsemble e{grid, HurstIndex(h), seed, 0, FbmMethod::Cholesky, false, {}};
    for (std::uint64_t i = 0; i < k; ++i) {
        FbmPath p{grid, e.hurst, std::vector<double>(m + 1)};
        for (auto& v : p.values) v = detail::read_le<double>(is);
        e.paths.push_back(std::move(p));
    }
    return e;
}

/// One row per node (t, path_0, path_1, ...).
inline void write_fbm_csv(std::ostream& os, const FbmEnsemble& e) {
    os.precision(17);
    os << "t";
    for (std::size_t k = 0; k < e.paths.size(); ++k) os << ",path" << k;
    os << "\n";
    for (std::size_t j = 0; j < e.grid.nodes(); ++j) {
        os << e.grid.node(j);
        for (const auto& p : e.paths) os << "," << p.values[j];
        os << "\n";
    }
}

}  // namespace fracheat
