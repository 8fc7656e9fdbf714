#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace maflow {

// Deterministic stream-splitting RNG.
//
// Every random draw in a run derives from one root seed. A stream is
// identified by (root, tag, a, b): the tag names the purpose ("episode-env",
// "loss", ...), a and b are indices (episode number, batch item, trial, ...).
// Derivation hashes the identifiers through splitmix64 and seeds a
// xoshiro256++ generator, so streams are independent of each other and of
// the order in which they are created. Parallel workers each derive their
// own stream from their item index, which keeps results identical across
// thread counts.

inline uint64_t splitmix64_next(uint64_t& state) {
    uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<uint8_t>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

class RngStream {
public:
    RngStream() : RngStream(0, "default") {}

    RngStream(uint64_t root, std::string_view tag, uint64_t a = 0, uint64_t b = 0) {
        uint64_t st = root;
        splitmix64_next(st);
        st ^= fnv1a64(tag);
        splitmix64_next(st);
        st ^= a * 0x9E3779B97F4A7C15ULL + 1;
        splitmix64_next(st);
        st ^= b * 0xBF58476D1CE4E5B9ULL + 1;
        for (auto& word : state_) word = splitmix64_next(st);
    }

    // Child stream keyed by the current state plus an index; does not
    // advance this stream.
    RngStream split(std::string_view tag, uint64_t a = 0, uint64_t b = 0) const {
        uint64_t root = state_[0] ^ (state_[2] << 1);
        return RngStream(root, tag, a, b);
    }

    uint64_t next() {
        const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0, n). n must be > 0.
    uint64_t below(uint64_t n) {
        return static_cast<uint64_t>((static_cast<__uint128_t>(next()) * n) >> 64);
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::array<uint64_t, 4> state_;
};

}  // namespace maflow
