#include "repr_cache.hpp"

#include <mutex>

#include "sha256.hpp"

namespace pws {

std::vector<double> ReprCache::get_or_encode(Modality modality, const std::string& content,
                                             const Encoder& encoder) {
    const std::string key =
        sha256(std::string(modality == Modality::image ? "image" : "text") + "\x1f" + content)
            .hex();
    {
        std::shared_lock lock(mutex_);
        auto it = entries_.find(key);
        if (it != entries_.end()) {
            hits_ += 1;
            return it->second;
        }
    }
    // Encoder failures propagate without storing an entry.
    std::vector<double> vec = encoder(modality, content);
    std::unique_lock lock(mutex_);
    auto [it, inserted] = entries_.emplace(key, std::move(vec));
    if (inserted) misses_ += 1;
    return it->second;
}

std::size_t ReprCache::size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

void ReprCache::clear() {
    std::unique_lock lock(mutex_);
    entries_.clear();
}

}  // namespace pws
