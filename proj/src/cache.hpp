#pragma once

#include <cstdint>
#include <cstdio>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>

#include "sha256.hpp"

namespace pws {

// Content-addressed response store backed by an append-only log of
// length-prefixed records: [u32 len][key 32B][payload], len covering key and
// payload, little-endian. Duplicate keys resolve to the last write. A
// truncated tail record (crash mid-append) is ignored on load.
class ResponseCache {
public:
    // In-memory only.
    ResponseCache();
    // Persistent: loads existing records, appends new ones.
    explicit ResponseCache(std::string path);
    ~ResponseCache();

    ResponseCache(const ResponseCache&) = delete;
    ResponseCache& operator=(const ResponseCache&) = delete;

    std::optional<std::string> get(const Digest& key) const;
    void put(const Digest& key, const std::string& payload);

    std::size_t size() const;
    const std::string& path() const { return path_; }

private:
    struct DigestHash {
        std::size_t operator()(const Digest& d) const;
    };

    void load();
    void append_record(const Digest& key, const std::string& payload);

    std::string path_;  // empty: memory only
    mutable std::shared_mutex mutex_;
    std::unordered_map<Digest, std::string, DigestHash> entries_;
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> log_;
};

}  // namespace pws
