#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace most {

/// Seeded random source with explicit sampling routines.
/// std::*_distribution output is implementation-defined, so every draw here
/// is spelled out to keep results stable across standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1).
    double next_double() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [lo, hi] inclusive.
    uint64_t uniform(uint64_t lo, uint64_t hi) {
        if (hi < lo) throw std::invalid_argument("Rng::uniform: hi < lo");
        uint64_t span = hi - lo + 1;
        if (span == 0) return engine_();  // full 64-bit range
        // rejection sampling to avoid modulo bias
        uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return lo + x % span;
    }

    /// Standard normal via Box-Muller (second value cached).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = next_double();
        } while (u1 <= 0.0);
        u2 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    /// Fisher-Yates shuffle, deterministic for a given seed state.
    template <typename Vec>
    void shuffle(Vec& v) {
        if (v.empty()) return;
        for (size_t i = v.size() - 1; i > 0; --i) {
            size_t j = static_cast<size_t>(uniform(0, i));
            std::swap(v[i], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace most
