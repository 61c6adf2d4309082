#include "batching.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <thread>

#include "error.hpp"

namespace pws {

BatchPlan plan(const std::vector<std::size_t>& lengths, std::size_t token_budget,
               std::size_t max_batch) {
    if (token_budget < 1) throw Error(ErrorCode::InvalidArgument, "token_budget must be >= 1");
    if (max_batch < 1) throw Error(ErrorCode::InvalidArgument, "max_batch must be >= 1");

    BatchPlan p;
    p.token_budget = token_budget;
    p.lengths = lengths;

    std::vector<std::size_t> order(lengths.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return lengths[a] > lengths[b]; });

    std::vector<std::size_t> cur;
    std::size_t cur_max = 0;
    for (std::size_t idx : order) {
        if (cur.empty()) {
            cur.push_back(idx);
            cur_max = lengths[idx];
            continue;
        }
        // cur_max is the batch max: lengths arrive in descending order
        if (cur.size() < max_batch && (cur.size() + 1) * cur_max <= token_budget) {
            cur.push_back(idx);
        } else {
            p.batches.push_back(std::move(cur));
            cur = {idx};
            cur_max = lengths[idx];
        }
    }
    if (!cur.empty()) p.batches.push_back(std::move(cur));
    return p;
}

std::size_t padding_cost(const BatchPlan& plan) {
    std::size_t total = 0;
    for (const auto& b : plan.batches) {
        std::size_t mx = 0, sum = 0;
        for (std::size_t i : b) {
            mx = std::max(mx, plan.lengths.at(i));
            sum += plan.lengths.at(i);
        }
        total += b.size() * mx - sum;
    }
    return total;
}

namespace {

std::size_t whitespace_estimate(const std::string& text) {
    std::size_t tokens = 0;
    bool in_token = false;
    for (char c : text) {
        const bool ws = c == ' ' || c == '\t' || c == '\n' || c == '\r';
        if (!ws && !in_token) ++tokens;
        in_token = !ws;
    }
    return static_cast<std::size_t>(std::ceil(1.5 * static_cast<double>(tokens)));
}

std::size_t text_length(const std::string& text, const Backend* backend) {
    if (backend) {
        if (auto n = backend->token_count(text)) return *n;
    }
    return whitespace_estimate(text);
}

}  // namespace

std::size_t query_token_length(const Query& q, const Backend* backend) {
    if (const auto* c = std::get_if<CompletionQuery>(&q))
        return std::max<std::size_t>(1, text_length(c->prompt, backend));
    const auto& r = std::get<RankedQuery>(q);
    std::size_t payload_len =
        r.payload.kind == Payload::Kind::text ? text_length(r.payload.text, backend) : 1;
    std::size_t cand_max = 0;
    for (const auto& cand : r.candidates)
        cand_max = std::max(cand_max, text_length(cand, backend));
    return std::max<std::size_t>(1, payload_len + cand_max);
}

std::vector<std::size_t> query_token_lengths(std::span<const Query> queries,
                                             const Backend* backend) {
    std::vector<std::size_t> out;
    out.reserve(queries.size());
    for (const Query& q : queries) out.push_back(query_token_length(q, backend));
    return out;
}

namespace {

void run_one_batch(const BatchFn& run_batch, std::span<const Query> queries,
                   const std::vector<std::size_t>& batch, std::vector<Response>& out,
                   std::vector<char>& done) {
    std::vector<Query> gathered;
    gathered.reserve(batch.size());
    for (std::size_t i : batch) gathered.push_back(queries[i]);
    std::vector<Response> responses = run_batch(gathered);
    if (responses.size() != batch.size())
        throw Error(ErrorCode::Backend,
                    "backend returned " + std::to_string(responses.size()) + " responses for a batch of " +
                        std::to_string(batch.size()));
    for (std::size_t k = 0; k < batch.size(); ++k) {
        out[batch[k]] = std::move(responses[k]);
        done[batch[k]] = 1;
    }
}

std::size_t max_length_of(const std::vector<std::size_t>& indices,
                          const std::vector<std::size_t>& lengths) {
    std::size_t mx = 1;
    for (std::size_t i : indices) mx = std::max(mx, lengths[i]);
    return mx;
}

// Runs one batch; on MemoryPressure the budget halves (floored at the
// batch's longest item) and the batch is re-planned under the reduced
// budget. A singleton failing at the minimum budget is a hard error.
// Terminates: a failing batch of size >= 2 satisfied |b|*max <= budget, so
// the halved budget strictly decreases until only singletons remain.
void execute_batch_with_retries(const BatchFn& run_batch, std::span<const Query> queries,
                                const std::vector<std::size_t>& batch, std::size_t budget,
                                const std::vector<std::size_t>& lengths,
                                std::vector<Response>& out, std::vector<char>& done) {
    try {
        run_one_batch(run_batch, queries, batch, out, done);
        return;
    } catch (const MemoryPressure& e) {
        const std::size_t batch_max = max_length_of(batch, lengths);
        if (batch.size() == 1 && budget <= batch_max)
            throw Error(ErrorCode::Backend,
                        std::string("memory pressure at minimum budget: ") + e.what());
        const std::size_t new_budget = std::max(budget / 2, batch_max);
        std::vector<std::size_t> batch_lengths;
        batch_lengths.reserve(batch.size());
        for (std::size_t i : batch) batch_lengths.push_back(lengths[i]);
        const BatchPlan sub = plan(batch_lengths, new_budget, batch.size());
        for (const auto& b : sub.batches) {
            std::vector<std::size_t> mapped;
            mapped.reserve(b.size());
            for (std::size_t k : b) mapped.push_back(batch[k]);
            execute_batch_with_retries(run_batch, queries, mapped, new_budget, lengths, out, done);
        }
    }
}

void execute_sequential(const BatchFn& run_batch, std::span<const Query> queries,
                        const BatchPlan& p, std::vector<Response>& out,
                        std::vector<char>& done) {
    for (const auto& batch : p.batches)
        execute_batch_with_retries(run_batch, queries, batch, p.token_budget, p.lengths, out, done);
}

}  // namespace

std::vector<Response> execute(const BatchFn& run_batch, std::span<const Query> queries,
                              const BatchPlan& p, std::size_t workers) {
    std::size_t planned = 0;
    for (const auto& b : p.batches) planned += b.size();
    if (p.lengths.size() != queries.size() || planned != queries.size())
        throw Error(ErrorCode::InvalidArgument, "plan does not match the query list");

    std::vector<Response> out(queries.size());
    std::vector<char> done(queries.size(), 0);

    if (workers <= 1 || p.batches.size() <= 1) {
        execute_sequential(run_batch, queries, p, out, done);
    } else {
        // Concurrent batches; per-batch memory-pressure retries fall back to
        // a sequential halving loop over that batch alone.
        std::mutex mu;
        std::size_t next = 0;
        std::exception_ptr first_error;
        auto worker = [&] {
            while (true) {
                std::size_t mine;
                {
                    std::lock_guard<std::mutex> lock(mu);
                    if (first_error || next >= p.batches.size()) return;
                    mine = next++;
                }
                try {
                    execute_batch_with_retries(run_batch, queries, p.batches[mine],
                                               p.token_budget, p.lengths, out, done);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mu);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        };
        std::vector<std::thread> pool;
        const std::size_t n_workers = std::min(workers, p.batches.size());
        pool.reserve(n_workers);
        for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    for (std::size_t i = 0; i < done.size(); ++i)
        if (!done[i]) throw Error(ErrorCode::Internal, "query " + std::to_string(i) + " was not executed");
    return out;
}

std::vector<Response> execute(Backend& backend, std::span<const Query> queries,
                              const BatchPlan& p, std::size_t workers) {
    return execute([&backend](std::span<const Query> batch) { return backend.run_batch(batch); },
                   queries, p, workers);
}

}  // namespace pws
