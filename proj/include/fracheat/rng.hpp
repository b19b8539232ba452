#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace fracheat {

/// Identifies one reproducible random substream: (seed, path index, replicate index).
struct StreamKey {
    std::uint64_t seed = 0;
    std::uint64_t path = 0;
    std::uint64_t replicate = 0;
};

/// Counter-based Philox4x32-10 generator. The key is derived from the seed; the
/// upper counter words are a hash of (path, replicate), so every substream is
/// addressable without sequential state.
class Philox4x32 {
public:
    using result_type = std::uint32_t;

    explicit Philox4x32(const StreamKey& key) {
        const std::uint64_t k = splitmix64(key.seed);
        key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
        ctr_ = {0u, 0u, 0u, 0u};
        // (path, replicate) selects the counter's high half.
        const std::uint64_t hi = splitmix64(key.path ^ splitmix64(key.replicate + 0x632be59bd9b4e019ULL));
        ctr_[2] = static_cast<std::uint32_t>(hi);
        ctr_[3] = static_cast<std::uint32_t>(hi >> 32);
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        if (pos_ == 4) {
            block_ = round10(ctr_, key_);
            if (++ctr_[0] == 0) ++ctr_[1];
            pos_ = 0;
        }
        return block_[pos_++];
    }

    static std::uint64_t splitmix64(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

private:
    using Block = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Block round10(Block c, Key k) {
        constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
        constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
        for (int r = 0; r < 10; ++r) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(M0) * c[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(M1) * c[2];
            c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
                 static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
            k[0] += W0;
            k[1] += W1;
        }
        return c;
    }

    Key key_{};
    Block ctr_{};
    Block block_{};
    int pos_ = 4;
};

/// Standard normal draws from one substream. Box-Muller on 53-bit uniforms so the
/// sequence is identical across standard libraries.
class NormalStream {
public:
    explicit NormalStream(const StreamKey& key) : eng_(key) {}

    double operator()() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_open();
        const double u2 = uniform_open();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    /// Uniform on (0, 1).
    double uniform_open() {
        const std::uint64_t hi = eng_();
        const std::uint64_t lo = eng_();
        const std::uint64_t bits = ((hi << 32) | lo) >> 11;
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

private:
    Philox4x32 eng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace fracheat
