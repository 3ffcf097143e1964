#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace cwpca {

/// Seeded 64-bit generator used for every random draw in the toolkit.
///
/// The algorithm is SplitMix64 (Steele, Lea, Flood 2014):
///
///     state += 0x9E3779B97F4A7C15
///     z = state
///     z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///     z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///     return z ^ (z >> 31)
///
/// Derived quantities:
///   uniform()     = (next() >> 11) * 2^-53, in [0, 1)
///   below(n)      = floor(uniform() * n)
///   normal()      = Box-Muller on (u1, u2) = (1 - uniform(), uniform()),
///                   returning sqrt(-2 ln u1) * cos(2 pi u2); one draw per
///                   call, the sine branch is discarded so the stream
///                   position never depends on cached state.
///
/// Independent streams are obtained with `Rng::stream(seed, index)`, which
/// seeds a fresh generator with mix(seed ^ mix(index + 1)), where mix is the
/// SplitMix64 output finalizer. Per-class and per-purpose streams are split
/// this way so they can be drawn in any order.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    static constexpr std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    static Rng stream(std::uint64_t seed, std::uint64_t index) {
        return Rng(mix(seed ^ mix(index + 1)));
    }

    std::uint64_t next() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix(state_);
    }

    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
    }

    double normal() {
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Fisher-Yates, walking from the back.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t state_;
};

} // namespace cwpca
