#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace lfmc {

using Rng = std::mt19937_64;

namespace detail {

constexpr std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (char c : text) {
        hash ^= static_cast<std::uint8_t>(c);
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace detail

/// Derives independent generators from one master seed.
///
/// Each stream is identified by a name plus up to two indices, e.g.
/// ("mcmc-chain", subset, chain). Changing how often one stream is drawn
/// never perturbs another, so e.g. switching LFDS to LFSS leaves the
/// initial design and the chain proposals untouched.
class RngStreams {
public:
    explicit RngStreams(std::uint64_t master_seed) : master_(master_seed) {}

    [[nodiscard]] std::uint64_t master_seed() const { return master_; }

    [[nodiscard]] std::uint64_t stream_seed(std::string_view name, std::uint64_t a = 0,
                                            std::uint64_t b = 0) const {
        std::uint64_t h = detail::splitmix64(master_ ^ detail::fnv1a(name));
        h = detail::splitmix64(h ^ a);
        return detail::splitmix64(h ^ (b * 0x9e3779b97f4a7c15ULL));
    }

    [[nodiscard]] Rng stream(std::string_view name, std::uint64_t a = 0, std::uint64_t b = 0) const {
        const std::uint64_t s = stream_seed(name, a, b);
        std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32)};
        return Rng(seq);
    }

private:
    std::uint64_t master_;
};

}  // namespace lfmc
