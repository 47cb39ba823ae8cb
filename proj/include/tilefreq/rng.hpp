#pragma once

#include <cmath>
#include <cstdint>

namespace tilefreq {

// splitmix64 finalizer
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Pure keyed draw: value depends only on (seed, stream, counter), so work
// split across threads draws the same numbers as a serial sweep.
inline std::uint64_t keyed_u64(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
    std::uint64_t base = mix64(seed ^ 0x8badf00d5ca1ab1eULL) ^ mix64(stream ^ 0x5851f42d4c957f2dULL);
    return mix64(base + counter * 0x9e3779b97f4a7c15ULL);
}

inline double u64_to_unit(std::uint64_t x) {
    return static_cast<double>(x >> 11) * 0x1.0p-53;  // [0, 1)
}

// Counter-based generator. Stateful convenience wrapper over keyed_u64.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream), counter_(0) {}

    std::uint64_t next_u64() { return keyed_u64(seed_, stream_, counter_++); }

    double next_unit() { return u64_to_unit(next_u64()); }  // [0, 1)

    double next_in(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    // uniform in [0, n), n > 0
    std::uint64_t next_below(std::uint64_t n) {
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // standard normal via Box-Muller; always consumes two draws
    double next_gaussian() {
        double u1 = 1.0 - next_unit();  // (0, 1]
        double u2 = next_unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_;
};

}  // namespace tilefreq
