#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <string_view>

namespace regopt {

// SplitMix64 (Vigna's fixed-increment variant of Java's SplittableRandom).
// Every random draw in the toolkit goes through this generator so that
// archives, models and plans are bit-reproducible from their seeds.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform double in [0, 1) from the top 53 bits.
    double next_unit() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    // Uniform index in [0, n) by masked rejection (no modulo bias).
    std::uint64_t next_index(std::uint64_t n) {
        if (n <= 1) return 0;
        const int bits = std::bit_width(n - 1);
        const std::uint64_t mask = (bits >= 64) ? ~0ULL : ((1ULL << bits) - 1);
        for (;;) {
            const std::uint64_t v = next() & mask;
            if (v < n) return v;
        }
    }

private:
    std::uint64_t state_;
};

// FNV-1a 64-bit. Stable name hash used to derive per-bin / per-test PRNG
// streams and to fingerprint canonical file bytes for change detection.
constexpr std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

inline std::uint64_t stable_hash(std::string_view name) { return fnv1a64(name); }

// "fnv1a64:<16 lowercase hex digits>" rendering used in provenance records.
std::string digest_string(std::string_view bytes);

} // namespace regopt
