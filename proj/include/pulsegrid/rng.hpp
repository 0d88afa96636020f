#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace pulsegrid {

/// Seedable, splittable PRNG used everywhere randomness is needed.
///
/// Engine: splitmix64 state advance feeding xoshiro256** output, seeded via
/// splitmix64 expansion. All distribution helpers are hand-written on top of
/// the raw 64-bit stream so output is identical across platforms and standard
/// library versions. Identified in serialized model metadata as
/// "xoshiro256ss/splitmix64".
class Rng {
public:
    static constexpr const char* kAlgorithm = "xoshiro256ss/splitmix64";

    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& s : state_) s = splitmix64(x);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n).
    std::size_t uniform_index(std::size_t n) {
        return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (one value per call, cache discarded).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    /// Deterministic child generator: stream `label` derived from this seed.
    static Rng child(std::uint64_t seed, std::uint64_t label) {
        std::uint64_t x = seed;
        const std::uint64_t a = splitmix64(x);
        std::uint64_t y = label ^ 0x9e3779b97f4a7c15ULL;
        return Rng(a ^ splitmix64(y));
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = uniform_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

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

    std::uint64_t state_[4];
};

}  // namespace pulsegrid
