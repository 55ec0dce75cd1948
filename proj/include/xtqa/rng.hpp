#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace xtqa {

std::uint64_t fnv1a64(std::string_view s);

// Deterministic RNG. mt19937_64 gives a portable bit stream; the derived
// draws (uniform doubles, bounded ints, shuffle) are implemented here rather
// than with std::uniform_*_distribution so that identical seeds produce
// identical values on every standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [0, n), unbiased by rejection
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return x % n;
    }

    // [lo, hi] inclusive
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
};

// Named RNG streams derived from one base seed. Keeps initialization,
// dropout, shuffling and synthesis decoupled: consuming draws from one
// stream never shifts another.
Rng derive_stream(std::uint64_t base_seed, std::string_view name);

}  // namespace xtqa
