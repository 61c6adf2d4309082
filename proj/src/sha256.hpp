#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace pws {

struct Digest {
    std::array<unsigned char, 32> bytes{};

    std::string hex() const;
    // First 8 bytes interpreted as a big-endian unsigned integer.
    std::uint64_t prefix_u64() const;

    bool operator==(const Digest&) const = default;
    auto operator<=>(const Digest&) const = default;
};

Digest sha256(std::string_view data);
Digest sha256_file(const std::string& path);

}  // namespace pws
