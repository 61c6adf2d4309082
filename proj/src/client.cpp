#include "client.hpp"

#include <chrono>
#include <unordered_map>

#include "error.hpp"

namespace pws {

Client::Client(std::shared_ptr<Backend> backend, std::shared_ptr<ResponseCache> cache,
               ClientOptions options)
    : backend_(std::move(backend)), cache_(std::move(cache)), options_(options) {
    if (!backend_) throw Error(ErrorCode::InvalidArgument, "client needs a backend");
    model_id_ = backend_->model_id();
}

bool Client::cacheable(const Query& q) const {
    if (!cache_) return false;
    if (const auto* c = std::get_if<CompletionQuery>(&q)) {
        if (c->gen.temperature > 0.0 && !options_.cache_nondeterministic) return false;
    }
    return backend_->deterministic() || options_.cache_nondeterministic;
}

std::vector<Response> Client::run(std::span<const Query> queries) {
    const Capabilities caps = backend_->capabilities();
    for (std::size_t i = 0; i < queries.size(); ++i) {
        validate(queries[i]);
        if (!caps.supports(queries[i]))
            throw Error(ErrorCode::Capability,
                        "query " + std::to_string(i) + " is outside backend capabilities (" +
                            model_id_ + ")");
    }

    std::vector<Response> out(queries.size());
    std::vector<char> resolved(queries.size(), 0);
    std::vector<std::size_t> misses;
    std::uint64_t hits = 0;

    for (std::size_t i = 0; i < queries.size(); ++i) {
        if (!cacheable(queries[i])) {
            misses.push_back(i);
            continue;
        }
        const Digest key = query_cache_key(model_id_, queries[i]);
        if (auto payload = cache_->get(key)) {
            const Json record = Json::parse(*payload);
            out[i] = response_from_json(record.at("response"));
            resolved[i] = 1;
            ++hits;
        } else {
            misses.push_back(i);
        }
    }

    // Dedupe identical cache-able queries inside one call so the backend
    // sees each of them once.
    std::vector<std::size_t> to_run;
    std::vector<std::vector<std::size_t>> aliases;
    {
        std::unordered_map<std::string, std::size_t> canon_to_slot;
        for (std::size_t i : misses) {
            if (!cacheable(queries[i])) {
                to_run.push_back(i);
                aliases.push_back({});
                continue;
            }
            const std::string canon = canonical_query(queries[i]);
            auto it = canon_to_slot.find(canon);
            if (it == canon_to_slot.end()) {
                canon_to_slot.emplace(canon, to_run.size());
                to_run.push_back(i);
                aliases.push_back({});
            } else {
                aliases[it->second].push_back(i);
            }
        }
    }

    if (!to_run.empty()) {
        std::vector<Query> pending;
        pending.reserve(to_run.size());
        for (std::size_t i : to_run) pending.push_back(queries[i]);

        std::lock_guard<std::mutex> dispatch_lock(dispatch_mutex_);
        const auto lengths = query_token_lengths(pending, backend_.get());
        const BatchPlan p = plan(lengths, options_.batching.token_budget, options_.batching.max_batch);
        std::vector<Response> fresh = execute(*backend_, pending, p, options_.batching.workers);

        const auto created_at = static_cast<std::int64_t>(
            std::chrono::duration_cast<std::chrono::seconds>(
                std::chrono::system_clock::now().time_since_epoch())
                .count());
        for (std::size_t k = 0; k < to_run.size(); ++k) {
            validate(fresh[k]);
            const std::size_t i = to_run[k];
            if (cacheable(queries[i])) {
                Json record;
                record["created_at"] = created_at;
                record["response"] = response_to_json(fresh[k]);
                cache_->put(query_cache_key(model_id_, queries[i]), canonical_dump(record));
            }
            for (std::size_t alias : aliases[k]) {
                out[alias] = fresh[k];
                resolved[alias] = 1;
            }
            out[i] = std::move(fresh[k]);
            resolved[i] = 1;
        }
    }

    for (std::size_t i = 0; i < queries.size(); ++i)
        if (!resolved[i]) throw Error(ErrorCode::Internal, "unresolved query " + std::to_string(i));

    {
        std::lock_guard<std::mutex> lock(stats_mutex_);
        stats_.cache_hits += hits;
        stats_.cache_misses += misses.size();
        stats_.backend_queries += to_run.size();
    }
    return out;
}

Response Client::run_one(const Query& query) {
    std::vector<Query> qs{query};
    return run(qs)[0];
}

ClientStats Client::stats() const {
    std::lock_guard<std::mutex> lock(stats_mutex_);
    return stats_;
}

}  // namespace pws
