#pragma once

#include <cstdint>
#include <functional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "backend.hpp"

namespace pws {

// Server-side cache of encoded latent representations, keyed by the digest
// of (modality, content). Repeated encodes of the same content cost zero
// encoder invocations.
class ReprCache {
public:
    using Encoder = std::function<std::vector<double>(Modality, const std::string&)>;

    std::vector<double> get_or_encode(Modality modality, const std::string& content,
                                      const Encoder& encoder);

    std::size_t size() const;
    void clear();
    std::uint64_t hits() const { return hits_; }
    std::uint64_t misses() const { return misses_; }

private:
    mutable std::shared_mutex mutex_;
    std::unordered_map<std::string, std::vector<double>> entries_;
    std::atomic<std::uint64_t> hits_{0};
    std::atomic<std::uint64_t> misses_{0};
};

}  // namespace pws
