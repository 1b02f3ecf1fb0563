#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace sefusion {

namespace detail {

inline uint64_t fnv1a(std::string_view s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

}  // namespace detail

/// All randomness in a run flows from one master seed via named sub-streams,
/// so `split`, `init`, `dropout`, and `synth` are independently reproducible.
class SeedStream {
public:
    explicit SeedStream(uint64_t master) : master_(master) {}

    uint64_t derive(std::string_view name) const {
        return detail::splitmix64(master_ ^ detail::fnv1a(name));
    }

    uint64_t derive(std::string_view name, uint64_t index) const {
        return detail::splitmix64(derive(name) ^ detail::splitmix64(index + 1));
    }

    std::mt19937_64 rng_for(std::string_view name) const {
        return std::mt19937_64(derive(name));
    }

    std::mt19937_64 rng_for(std::string_view name, uint64_t index) const {
        return std::mt19937_64(derive(name, index));
    }

    uint64_t master() const { return master_; }

private:
    uint64_t master_;
};

/// Bounded draw and Fisher-Yates kept by hand: std::shuffle and
/// std::uniform_int_distribution are implementation-defined, which would
/// break byte-identical artifacts across standard libraries.
inline uint64_t draw_below(std::mt19937_64& rng, uint64_t n) {
    return rng() % n;  // modulo bias is irrelevant at these ranges
}

template <typename V>
void deterministic_shuffle(std::vector<V>& items, std::mt19937_64& rng) {
    for (size_t i = items.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(draw_below(rng, i));
        std::swap(items[i - 1], items[j]);
    }
}

/// U(0,1) from explicit 53-bit draws, same everywhere.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_in(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

/// Box-Muller, one value per call (the pair's second half is discarded to
/// keep the draw count independent of call sites).
inline double normal01(std::mt19937_64& rng) {
    double u1 = uniform01(rng);
    double u2 = uniform01(rng);
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace sefusion
