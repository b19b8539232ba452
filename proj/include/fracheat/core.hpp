#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

namespace fracheat {

/// Parameter outside its mathematical domain (H, p, t, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Two objects that must share a time or spatial grid do not.
class GridMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical failure (factorization, non-finite result).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {
/// Floating-point values print in their shortest round-trip form.
template <typename T>
void put(std::ostringstream& os, const T& x) {
    if constexpr (std::is_floating_point_v<T>) {
        char buf[64];
        const auto r = std::to_chars(buf, buf + sizeof buf, x);
        os.write(buf, r.ptr - buf);
    } else {
        os << x;
    }
}

template <typename... Args>
std::string concat(const Args&... args) {
    std::ostringstream os;
    (put(os, args), ...);
    return os.str();
}
}  // namespace detail

/// Hurst index restricted to the regular regime 1/2 < H < 1.
class HurstIndex {
public:
    explicit HurstIndex(double h) : value_(h) {
        if (!(h > 0.5 && h < 1.0))
            throw DomainError(detail::concat("H must lie in (1/2,1), got ", h));
    }
    double value() const noexcept { return value_; }
    operator double() const noexcept { return value_; }

private:
    double value_;
};

/// Uniform time grid t_j = j T / m on [0, T].
class TimeGrid {
public:
    TimeGrid(double horizon, std::size_t cells) : horizon_(horizon), cells_(cells) {
        if (!(horizon > 0.0) || !std::isfinite(horizon))
            throw DomainError(detail::concat("time horizon must be positive, got ", horizon));
        if (cells == 0) throw DomainError("time grid needs at least one cell");
    }

    double horizon() const noexcept { return horizon_; }
    std::size_t cells() const noexcept { return cells_; }
    std::size_t nodes() const noexcept { return cells_ + 1; }
    double dt() const noexcept { return horizon_ / static_cast<double>(cells_); }

    // Last node is pinned to T exactly.
    double node(std::size_t j) const noexcept {
        return j == cells_ ? horizon_ : horizon_ * static_cast<double>(j) / static_cast<double>(cells_);
    }
    double midpoint(std::size_t cell) const noexcept { return 0.5 * (node(cell) + node(cell + 1)); }

    /// Index of the node equal to t (within 1e-9 relative), or throws.
    std::size_t node_index(double t) const {
        const double x = t / dt();
        const double r = std::round(x);
        if (r < 0.0 || r > static_cast<double>(cells_) || std::abs(x - r) > 1e-9 * std::max(1.0, r))
            throw DomainError(detail::concat("time ", t, " is not a grid node"));
        return static_cast<std::size_t>(r);
    }

    /// Coarsened grid keeping every `factor`-th node.
    TimeGrid coarsen(std::size_t factor) const {
        if (factor == 0 || cells_ % factor != 0)
            throw DomainError(detail::concat("cannot coarsen ", cells_, " cells by ", factor));
        return TimeGrid(horizon_, cells_ / factor);
    }

    friend bool operator==(const TimeGrid& a, const TimeGrid& b) noexcept {
        return a.cells_ == b.cells_ && a.horizon_ == b.horizon_;
    }

private:
    double horizon_;
    std::size_t cells_;
};

inline void require_same_grid(const TimeGrid& a, const TimeGrid& b) {
    if (!(a == b))
        throw GridMismatch(detail::concat("time grids differ: (T=", a.horizon(), ", m=", a.cells(), ") vs (T=",
                                          b.horizon(), ", m=", b.cells(), ")"));
}

/// Worker cap for data-parallel loops. Results never depend on it: work is split
/// into contiguous index blocks and every index writes its own slot.
inline unsigned& max_threads() {
    static unsigned n = 1;
    return n;
}

template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const std::size_t workers = std::min<std::size_t>(std::max(1u, max_threads()), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    const std::size_t block = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * block, hi = std::min(n, lo + block);
        pool.emplace_back([&fn, lo, hi] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

/// Mean and standard error of a sample.
struct SampleStats {
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;
};

inline SampleStats sample_stats(const std::vector<double>& xs) {
    SampleStats s;
    s.n = xs.size();
    if (xs.empty()) return s;
    // Two-pass in fixed order.
    double sum = 0.0;
    for (double x : xs) sum += x;
    s.mean = sum / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - s.mean) * (x - s.mean);
        s.se = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
    }
    return s;
}

/// The Monte Carlo pass rule used throughout: |mean - target| <= 4 SE.
inline constexpr double kMcStandardErrors = 4.0;

inline bool within_se(double estimate, double target, double se) {
    return std::abs(estimate - target) <= kMcStandardErrors * se;
}

}  // namespace fracheat
