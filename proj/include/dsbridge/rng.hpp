#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace dsb {

// Deterministic, splittable PRNG. xoshiro256++ core seeded through splitmix64,
// with substreams derived by hashing (seed, index). Substreams of distinct
// indices are independent streams and do not depend on how much the parent
// has been consumed, so trajectory-parallel code stays reproducible.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed) {
        std::uint64_t x = seed;
        for (auto& w : state_) w = splitmix64(x);
        spare_valid_ = false;
    }

    std::uint64_t seed() const { return seed_; }

    // Child stream independent of this stream's position.
    Rng substream(std::uint64_t index) const {
        std::uint64_t x = seed_ ^ 0x9e3779b97f4a7c15ULL;
        std::uint64_t h = splitmix64(x);
        h ^= splitmix64(x) + index * 0xbf58476d1ce4e5b9ULL;
        return Rng(splitmix64(h));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). n must be > 0.
    std::uint64_t uniform_index(std::uint64_t n) {
        // multiply-shift; bias is negligible for n << 2^64 and keeps the
        // draw count per call fixed (determinism across replays).
        unsigned __int128 m = (unsigned __int128)next_u64() * n;
        return (std::uint64_t)(m >> 64);
    }

    // Standard normal via Box-Muller; the spare keeps draws cheap while the
    // call sequence stays fully determined by the state.
    double normal() {
        if (spare_valid_) {
            spare_valid_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        spare_valid_ = true;
        return r * std::cos(theta);
    }

    // +1 or -1 with equal probability.
    double rademacher() { return (next_u64() >> 63) ? 1.0 : -1.0; }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    static std::uint64_t splitmix64(std::uint64_t& x) {
        std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
    std::uint64_t state_[4];
    double spare_ = 0.0;
    bool spare_valid_;
};

// dim i.i.d. standard normal draws; advances rng.
inline std::vector<double> gaussian_vector(Rng& rng, std::size_t dim) {
    std::vector<double> v(dim);
    for (auto& x : v) x = rng.normal();
    return v;
}

}  // namespace dsb
