#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "backend.hpp"
#include "query.hpp"
#include "response.hpp"

namespace pws {

// Length-aware grouping of query indices under a token budget. Batches
// partition the input; each batch is a contiguous run of the length-sorted
// order (descending) and respects |b| * max_len <= budget unless singleton.
struct BatchPlan {
    std::vector<std::vector<std::size_t>> batches;
    std::size_t token_budget = 0;
    std::vector<std::size_t> lengths;
};

struct BatchOptions {
    std::size_t token_budget = 4096;
    std::size_t max_batch = 64;
    std::size_t workers = 1;
};

// Greedy planner: sort by length descending (stable), extend the current
// batch while (|b|+1) * max_len_b fits the budget and |b| < max_batch.
// Over-budget items degrade to singleton batches.
BatchPlan plan(const std::vector<std::size_t>& lengths, std::size_t token_budget,
               std::size_t max_batch);

// Total padded-slot waste: sum over batches of |b| * max_len_b - sum(len).
std::size_t padding_cost(const BatchPlan& plan);

// Estimated token length of a query: the backend tokenizer when available,
// else ceil(1.5 * whitespace-token count). Ranked queries count the payload
// plus the longest candidate.
std::size_t query_token_length(const Query& q, const Backend* backend = nullptr);

std::vector<std::size_t> query_token_lengths(std::span<const Query> queries,
                                             const Backend* backend = nullptr);

using BatchFn = std::function<std::vector<Response>(std::span<const Query>)>;

// Dispatches planned batches and scatters responses back to input order.
// On MemoryPressure the budget halves (never below the longest remaining
// item) and the remaining work is re-planned; repeated failure at the
// minimum budget is a hard error. With workers > 1 batches run concurrently;
// output order and values are unchanged.
std::vector<Response> execute(const BatchFn& run_batch, std::span<const Query> queries,
                              const BatchPlan& plan, std::size_t workers = 1);

std::vector<Response> execute(Backend& backend, std::span<const Query> queries,
                              const BatchPlan& plan, std::size_t workers = 1);

}  // namespace pws
