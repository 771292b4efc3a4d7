#pragma once
// Deterministic random source.  std::mt19937_64 has a fully specified output
// sequence, but the standard *distributions* do not, so every mapping from
// raw 64-bit draws to usable values is done by hand here.  This keeps all
// sampling bitwise reproducible across compilers and standard libraries.

#include <cstdint>
#include <random>

namespace evfl {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform double in [0, 1) with 53 random mantissa bits.
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double next_uniform(double lo, double hi) {
        return lo + (hi - lo) * next_unit();
    }

    // Unbiased integer in [0, n).  Rejection sampling over a power-of-two
    // mask; expected < 2 draws per call.
    std::uint64_t next_index(std::uint64_t n) {
        if (n == 0) return 0;
        std::uint64_t mask = n - 1;
        mask |= mask >> 1;
        mask |= mask >> 2;
        mask |= mask >> 4;
        mask |= mask >> 8;
        mask |= mask >> 16;
        mask |= mask >> 32;
        for (;;) {
            std::uint64_t v = next_u64() & mask;
            if (v < n) return v;
        }
    }

    // Standard normal via Box-Muller; the second value of each pair is
    // cached so draws come in a fixed, reproducible order.
    double next_gaussian();

private:
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace evfl
