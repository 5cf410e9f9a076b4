#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace crosscov::random {

/// Role tags separate substreams drawn for the same replicate.
enum class Role : std::uint64_t {
    x_source = 1,
    z_residual = 2,
    w_source = 3,
    rotation = 4,
    power_start = 5,
    complexity = 6,
    direction = 7,
    oracle = 8,
};

/// splitmix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of substream (master, replicate, role). Pure function, so any
/// replicate can be generated on any thread in any order.
constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t replicate,
                                    Role role) noexcept {
    std::uint64_t h = mix64(master ^ 0x6a09e667f3bcc908ULL);
    h = mix64(h ^ replicate);
    return mix64(h ^ (static_cast<std::uint64_t>(role) * 0x3c6ef372fe94f82bULL));
}

/// Deterministic scalar generator over one substream.
///
/// Normals use the Marsaglia polar method rather than
/// std::normal_distribution, whose algorithm varies between standard
/// library implementations.
class Stream {
public:
    explicit Stream(std::uint64_t seed) : engine_(seed) {}
    Stream(std::uint64_t master, std::uint64_t replicate, Role role)
        : engine_(stream_seed(master, replicate, role)) {}

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    double rademacher() { return (engine_() >> 63) != 0 ? 1.0 : -1.0; }

    std::uint64_t bits() { return engine_(); }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace crosscov::random
