#pragma once

#include <cstdint>
#include <random>

namespace distmean {

/// Advances `state` and returns the next splitmix64 output word.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Mixes up to three words into one well-scrambled 64-bit value. Used to
/// derive substream ids so that replica results do not depend on execution
/// order or worker count.
inline std::uint64_t hash64(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t s = a;
    std::uint64_t h = splitmix64_next(s);
    s ^= b;
    h ^= splitmix64_next(s);
    s ^= c;
    h ^= splitmix64_next(s);
    return h;
}

/// A value-semantic handle for one reproducible random substream.
///
/// Identical (master_seed, stream_id) pairs always reproduce the same draw
/// sequence; distinct stream ids give statistically independent streams.
/// Each consumer materializes its own engine, so streams can be used from
/// any number of threads without shared state.
struct RngStream {
    std::uint64_t master_seed = 0;
    std::uint64_t stream_id = 0;

    std::mt19937_64 make_engine() const {
        std::uint64_t s = hash64(master_seed, stream_id);
        std::uint32_t words[8];
        for (int i = 0; i < 4; ++i) {
            const std::uint64_t w = splitmix64_next(s);
            words[2 * i] = static_cast<std::uint32_t>(w);
            words[2 * i + 1] = static_cast<std::uint32_t>(w >> 32);
        }
        std::seed_seq seq(words, words + 8);
        return std::mt19937_64(seq);
    }
};

}  // namespace distmean
