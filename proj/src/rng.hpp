#pragma once

#include <cstdint>
#include <random>

namespace pws {

// mt19937_64 output is pinned by the standard, but the std distributions are
// not; these helpers keep seeded results identical across toolchains.

inline std::uint64_t bounded_u64(std::mt19937_64& gen, std::uint64_t n) {
    // rejection sampling over the largest multiple of n
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
        v = gen();
    } while (v >= limit);
    return v % n;
}

inline double unit_real(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;  // [0,1)
}

}  // namespace pws
