#pragma once

#include <cstdint>
#include <random>

namespace foar::core {

/// Seeded RNG with explicitly-specified output transforms so that every
/// stream of draws is reproducible bit-for-bit for a given seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (one cached spare).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    /// Uniform integer in [0, n). Multiplicative range reduction; n > 0.
    std::uint64_t uniform_int(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(engine_()) * n) >> 64);
    }

    std::uint64_t raw() { return engine_(); }

    /// Independent child stream; stable under draws from the parent.
    Rng derive(std::uint64_t stream_id) const {
        std::uint64_t s = seed_mix_ ^ (0x9e3779b97f4a7c15ull * (stream_id + 1));
        return Rng(splitmix(s));
    }

    static std::uint64_t splitmix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

private:
    explicit Rng(std::uint64_t seed, int) : engine_(seed) {}

    std::mt19937_64 engine_;
    std::uint64_t seed_mix_ = engine_();  // consumed once; decorrelates derive()
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace foar::core
