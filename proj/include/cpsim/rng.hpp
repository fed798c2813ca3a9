#pragma once

#include <cstdint>
#include <cmath>
#include <random>

namespace cpsim {

/// splitmix64 finalizer; the one mixing function used for all seed derivation.
inline constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Domain tags keeping unrelated random streams apart. Environment sampling
/// and replica dynamics never share a stream even for equal indices.
enum class StreamDomain : std::uint64_t {
    environment_xi  = 0x01,
    environment_rho = 0x02,
    replica         = 0x03,
    graphical       = 0x04,
    theory          = 0x05,
    environment_lbl = 0x06,
    environment     = 0x07,  // seeds of whole quenched environments
};

/// Stream seed for (master, domain, index): mix64(mix64(master ^ mix64(domain)) ^ mix64(index)).
inline constexpr std::uint64_t derive_seed(std::uint64_t master, StreamDomain domain,
                                           std::uint64_t index) {
    return mix64(mix64(master ^ mix64(static_cast<std::uint64_t>(domain))) ^ mix64(index));
}

/// mt19937_64 wrapped with fixed real-valued draw conventions so results do not
/// depend on the standard library's distribution implementations.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t bits() { return engine_(); }

    /// Uniform on [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1].
    double uniform_open01() { return 1.0 - uniform01(); }

    /// Exponential with the given rate; requires rate > 0.
    double exponential(double rate) { return -std::log(uniform_open01()) / rate; }

    /// Unbiased integer in [0, n); requires n > 0.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    /// Bernoulli(p).
    bool bernoulli(double p) { return uniform01() < p; }

private:
    std::mt19937_64 engine_;
};

}  // namespace cpsim
