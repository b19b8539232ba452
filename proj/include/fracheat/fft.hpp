#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <tuple>
#include <vector>

namespace fracheat::fft {

using cplx = std::complex<double>;

enum class Direction { Forward, Backward };

namespace detail {

inline std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

// One plan plus its in-place work buffer. FFTW_ESTIMATE plans are deterministic.
class Plan {
public:
    Plan(int rank, int n, Direction dir) : size_(1) {
        for (int r = 0; r < rank; ++r) size_ *= static_cast<std::size_t>(n);
        buf_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * size_));
        const int dims[2] = {n, n};
        std::lock_guard<std::mutex> lock(planner_mutex());
        plan_ = fftw_plan_dft(rank, dims, buf_, buf_, dir == Direction::Forward ? FFTW_FORWARD : FFTW_BACKWARD,
                              FFTW_ESTIMATE);
    }
    Plan(const Plan&) = delete;
    Plan& operator=(const Plan&) = delete;
    ~Plan() {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(plan_);
        fftw_free(buf_);
    }

    void run(std::span<cplx> data) {
        auto* p = reinterpret_cast<cplx*>(buf_);
        std::copy(data.begin(), data.end(), p);
        fftw_execute(plan_);
        std::copy(p, p + size_, data.begin());
    }

private:
    std::size_t size_;
    fftw_complex* buf_ = nullptr;
    fftw_plan plan_ = nullptr;
};

inline Plan& plan_for(int rank, int n, Direction dir) {
    thread_local std::map<std::tuple<int, int, int>, std::unique_ptr<Plan>> cache;
    auto key = std::make_tuple(rank, n, static_cast<int>(dir));
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, std::make_unique<Plan>(rank, n, dir)).first;
    return *it->second;
}

}  // namespace detail

/// Unnormalized in-place DFT over a rank-1 or rank-2 array of side n (row-major).
/// Backward followed by forward multiplies by n^rank.
inline void transform(std::span<cplx> data, int rank, int n, Direction dir) {
    detail::plan_for(rank, n, dir).run(data);
}

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_power_of_two(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace fracheat::fft
