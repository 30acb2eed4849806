#ifndef DIRCOLLAPSE_RNG_HPP
#define DIRCOLLAPSE_RNG_HPP

#include <cstdint>
#include <random>
#include <string_view>

namespace dircollapse {

using Rng = std::mt19937_64;

inline constexpr std::string_view kSeedScheme = "splitmix64(master ^ fnv1a(stream)) mixed with index; mt19937_64";

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Counter-based child seed: depends only on (master, stream, index), so work
// items may be evaluated in any order or on any thread.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view stream, std::uint64_t index = 0) noexcept {
    return splitmix64(splitmix64(master ^ fnv1a(stream)) + splitmix64(index + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t master, std::string_view stream, std::uint64_t index = 0) {
    return Rng(derive_seed(master, stream, index));
}

}  // namespace dircollapse

#endif
