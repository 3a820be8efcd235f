#pragma once

// Counter-based RNG (Philox4x32-10).  Streams are addressed by a 64-bit key;
// derive() splits off an independent child stream, so every dataset, grid
// cell and test sample owns its own stream and nothing depends on the order
// in which worker threads touch them.  Identical seeds give identical output
// on a given platform; bit-equality across libms is not promised for the
// gaussian path (it goes through log/sqrt/sincos).

#include <cstdint>
#include <cmath>
#include <string_view>

namespace driftlab {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ull;
    }
    return h;
}

} // namespace detail

class Rng {
public:
    explicit Rng(std::uint64_t seed) : key_(detail::splitmix64(seed)) {}

    // Child stream; deterministic function of (this stream's key, tag).
    Rng derive(std::uint64_t tag) const {
        Rng child(FromKey{}, detail::splitmix64(key_ ^ detail::splitmix64(tag + 0x632BE59BD9B4E019ull)));
        return child;
    }
    Rng derive(std::string_view label) const { return derive(detail::fnv1a64(label)); }

    std::uint32_t next_u32() {
        if (idx_ == 4) refill();
        return out_[idx_++];
    }

    std::uint64_t next_u64() {
        std::uint64_t lo = next_u32(), hi = next_u32();
        return (hi << 32) | lo;
    }

    // uniform on [0,1), 53 random bits
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // standard normal via Box-Muller; second member of each pair is cached
    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - next_double(); // (0,1], keeps the log finite
        double u2 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.28318530717958647692 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    struct FromKey {};
    Rng(FromKey, std::uint64_t key) : key_(key) {}

    void refill() {
        std::uint32_t c0 = static_cast<std::uint32_t>(ctr_);
        std::uint32_t c1 = static_cast<std::uint32_t>(ctr_ >> 32);
        std::uint32_t c2 = 0, c3 = 0;
        std::uint32_t k0 = static_cast<std::uint32_t>(key_);
        std::uint32_t k1 = static_cast<std::uint32_t>(key_ >> 32);
        for (int round = 0; round < 10; ++round) {
            std::uint64_t p0 = 0xD2511F53ull * c0;
            std::uint64_t p1 = 0xCD9E8D57ull * c2;
            std::uint32_t t0 = static_cast<std::uint32_t>(p1 >> 32) ^ c1 ^ k0;
            std::uint32_t t1 = static_cast<std::uint32_t>(p1);
            std::uint32_t t2 = static_cast<std::uint32_t>(p0 >> 32) ^ c3 ^ k1;
            std::uint32_t t3 = static_cast<std::uint32_t>(p0);
            c0 = t0; c1 = t1; c2 = t2; c3 = t3;
            k0 += 0x9E3779B9u;
            k1 += 0xBB67AE85u;
        }
        out_[0] = c0; out_[1] = c1; out_[2] = c2; out_[3] = c3;
        ++ctr_;
        idx_ = 0;
    }

    std::uint64_t key_;
    std::uint64_t ctr_ = 0;
    std::uint32_t out_[4] = {};
    int idx_ = 4;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace driftlab
