#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "backend.hpp"
#include "batching.hpp"
#include "cache.hpp"
#include "query.hpp"
#include "response.hpp"

namespace pws {

struct ClientOptions {
    BatchOptions batching;
    // Cache nondeterministic completions (temperature > 0) anyway.
    bool cache_nondeterministic = false;
};

struct ClientStats {
    std::uint64_t cache_hits = 0;
    std::uint64_t cache_misses = 0;
    std::uint64_t backend_queries = 0;

    double hit_rate() const {
        const std::uint64_t total = cache_hits + cache_misses;
        return total == 0 ? 0.0 : static_cast<double>(cache_hits) / static_cast<double>(total);
    }
};

// Executes queries against a backend through the batch planner, with a
// transparent response cache keyed by the canonical query serialization.
// Safe for concurrent run() calls; one in-flight backend dispatch at a time.
class Client {
public:
    explicit Client(std::shared_ptr<Backend> backend,
                    std::shared_ptr<ResponseCache> cache = nullptr,
                    ClientOptions options = {});

    // Response i corresponds to query i. The cache is consulted before the
    // backend and populated after it; hits are bit-identical to the original
    // backend output.
    std::vector<Response> run(std::span<const Query> queries);
    Response run_one(const Query& query);

    Backend& backend() { return *backend_; }
    const std::string& model_id() const { return model_id_; }
    ClientStats stats() const;

private:
    bool cacheable(const Query& q) const;

    std::shared_ptr<Backend> backend_;
    std::shared_ptr<ResponseCache> cache_;
    ClientOptions options_;
    std::string model_id_;
    std::mutex dispatch_mutex_;
    mutable std::mutex stats_mutex_;
    ClientStats stats_;
};

}  // namespace pws
