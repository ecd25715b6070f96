#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace cotaudit {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// Every sub-seed in a run is derived from the master seed through this
// chain, so any single (instance, layer, draw) measurement can be
// reproduced in isolation.
inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t salt) {
    return splitmix64(parent ^ splitmix64(salt));
}

inline std::uint64_t derive_seed(std::uint64_t parent, std::string_view salt) {
    return derive_seed(parent, fnv1a64(salt));
}

// mt19937_64 with hand-rolled float conversions. std::uniform_real_distribution
// and std::normal_distribution are implementation-defined, the raw engine is
// not, so bit-level reproducibility of seeded draws needs the conversions here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n). Rejection sampling keeps it unbiased.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = engine_();
        while (v >= limit) v = engine_();
        return v % n;
    }

    // Standard normal via Box-Muller with a cached spare.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace cotaudit
