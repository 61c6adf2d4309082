#include "cache.hpp"

#include <cstring>
#include <mutex>

#include "error.hpp"

namespace pws {

namespace {

constexpr std::size_t kKeySize = 32;
constexpr std::uint32_t kMaxRecord = 64u << 20;

std::uint32_t read_u32_le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void write_u32_le(unsigned char* p, std::uint32_t v) {
    p[0] = static_cast<unsigned char>(v);
    p[1] = static_cast<unsigned char>(v >> 8);
    p[2] = static_cast<unsigned char>(v >> 16);
    p[3] = static_cast<unsigned char>(v >> 24);
}

}  // namespace

std::size_t ResponseCache::DigestHash::operator()(const Digest& d) const {
    std::size_t h;
    std::memcpy(&h, d.bytes.data(), sizeof h);
    return h;
}

ResponseCache::ResponseCache() : log_(nullptr, &std::fclose) {}

ResponseCache::ResponseCache(std::string path) : path_(std::move(path)), log_(nullptr, &std::fclose) {
    load();
    log_.reset(std::fopen(path_.c_str(), "ab"));
    if (!log_) throw Error(ErrorCode::Io, "cannot open cache file for append: " + path_);
}

ResponseCache::~ResponseCache() = default;

void ResponseCache::load() {
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(path_.c_str(), "rb"), &std::fclose);
    if (!f) return;  // fresh cache
    unsigned char header[4];
    while (std::fread(header, 1, 4, f.get()) == 4) {
        const std::uint32_t len = read_u32_le(header);
        if (len < kKeySize || len > kMaxRecord) break;  // corrupt tail
        Digest key;
        if (std::fread(key.bytes.data(), 1, kKeySize, f.get()) != kKeySize) break;
        std::string payload(len - kKeySize, '\0');
        if (!payload.empty() &&
            std::fread(payload.data(), 1, payload.size(), f.get()) != payload.size())
            break;
        entries_[key] = std::move(payload);  // last write wins
    }
}

void ResponseCache::append_record(const Digest& key, const std::string& payload) {
    if (!log_) return;
    unsigned char header[4];
    write_u32_le(header, static_cast<std::uint32_t>(kKeySize + payload.size()));
    if (std::fwrite(header, 1, 4, log_.get()) != 4 ||
        std::fwrite(key.bytes.data(), 1, kKeySize, log_.get()) != kKeySize ||
        (!payload.empty() &&
         std::fwrite(payload.data(), 1, payload.size(), log_.get()) != payload.size()))
        throw Error(ErrorCode::Io, "cache append failed: " + path_);
    std::fflush(log_.get());
}

std::optional<std::string> ResponseCache::get(const Digest& key) const {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void ResponseCache::put(const Digest& key, const std::string& payload) {
    std::unique_lock lock(mutex_);
    entries_[key] = payload;
    append_record(key, payload);
}

std::size_t ResponseCache::size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

}  // namespace pws
