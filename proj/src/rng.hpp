#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>

namespace hmsr {

// xoshiro256++ with splitmix64 seeding. Used instead of <random> engines so
// that the stream is identical across standard libraries and the full state
// (4x u64) can be checkpointed verbatim.
class Rng {
public:
    Rng() : Rng(0x9e3779b97f4a7c15ull) {}

    explicit Rng(uint64_t seed) {
        uint64_t x = seed;
        for (auto& si : s_) {
            x += 0x9e3779b97f4a7c15ull;
            uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
            si = z ^ (z >> 31);
        }
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform integer in [0, n)
    uint64_t uniform_int(uint64_t n) {
        // rejection sampling to avoid modulo bias
        const uint64_t limit = n * (UINT64_MAX / n);
        uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % n;
    }

    // standard normal via Box-Muller (no cached spare, keeps state exact)
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    void save(std::ostream& os) const {
        os.write(reinterpret_cast<const char*>(s_), sizeof(s_));
    }
    void load(std::istream& is) {
        is.read(reinterpret_cast<char*>(s_), sizeof(s_));
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t s_[4];
};

// Stable 64-bit mix of several counters, for deriving independent per-stream
// seeds (e.g. per iteration, per batch slot) from one experiment seed.
inline uint64_t mix_seed(uint64_t a, uint64_t b = 0, uint64_t c = 0) {
    uint64_t h = a * 0x9e3779b97f4a7c15ull;
    h ^= b + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    h *= 0xbf58476d1ce4e5b9ull;
    h ^= c + 0x94d049bb133111ebull + (h << 6) + (h >> 2);
    h ^= h >> 29;
    h *= 0xff51afd7ed558ccdull;
    h ^= h >> 32;
    return h;
}

}  // namespace hmsr
