#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>

namespace cascadelab {

using NodeId = std::uint32_t;
using Rng = std::mt19937_64;

// Bad input: malformed files, violated preconditions, inconsistent arguments.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A computation could not complete (non-convergence, exhausted budgets).
class RuntimeFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Stream seed derived from a master seed and a path of labels. Stable across
// platforms so that results only depend on (master, labels).
template <typename... Parts>
std::uint64_t derive_seed(std::uint64_t master, const Parts&... parts) {
    std::uint64_t h = splitmix64(master);
    auto mix = [&h](const auto& part) {
        using T = std::decay_t<decltype(part)>;
        std::uint64_t v;
        if constexpr (std::is_convertible_v<T, std::string_view>)
            v = fnv1a(std::string_view(part));
        else
            v = static_cast<std::uint64_t>(part);
        h = splitmix64(h ^ (v + 0x632be59bd9b4e019ULL + (h << 6) + (h >> 2)));
    };
    (mix(parts), ...);
    return h;
}

} // namespace cascadelab
