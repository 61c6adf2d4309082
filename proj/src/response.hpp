#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "canonical.hpp"

namespace pws {

struct CompletionResponse {
    std::string prediction;

    bool operator==(const CompletionResponse&) const = default;
};

// Scores are a normalized distribution over the query's candidates;
// prediction is the argmax, ties broken by candidate order.
struct RankedResponse {
    std::string prediction;
    std::vector<std::string> candidates;  // query order
    std::map<std::string, double> scores;

    bool operator==(const RankedResponse&) const = default;
};

using Response = std::variant<CompletionResponse, RankedResponse>;

// Builds a RankedResponse from raw (unnormalized, log-space) candidate
// scores: softmax at temperature 1, then argmax with order tie-break.
RankedResponse make_ranked_response(const std::vector<std::string>& candidates,
                                    const std::vector<double>& raw_scores);

// Scores of a RankedResponse in candidate order.
std::vector<double> scores_in_order(const RankedResponse& r);

// Checks normalization, score/candidate key agreement and the argmax rule.
void validate(const Response& r);

Json response_to_json(const Response& r);
Response response_from_json(const Json& j);

inline std::string canonical_response(const Response& r) {
    return canonical_dump(response_to_json(r));
}

}  // namespace pws
