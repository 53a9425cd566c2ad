#pragma once

// Deterministic random streams: splitmix64 for deriving per-purpose stream
// seeds, mt19937_64 underneath, and a hand-rolled Box-Muller normal so draws
// do not depend on the standard library's distribution implementation.

#include <cmath>
#include <cstdint>
#include <random>

namespace varcover {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return splitmix64(base ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

class RandomStream {
  public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    double uniform01() {
        // 53-bit mantissa in (0, 1]
        const std::uint64_t bits = engine_() >> 11;
        return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u = uniform01();
        const double v = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u));
        const double a = 2.0 * M_PI * v;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    std::uint64_t bits() { return engine_(); }

    // Index in [0, n) from a uniform draw.
    std::size_t index(std::size_t n) {
        return std::min<std::size_t>(n - 1, static_cast<std::size_t>(uniform01() * static_cast<double>(n)));
    }

  private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace varcover
