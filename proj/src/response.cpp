#include "response.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"

namespace pws {

RankedResponse make_ranked_response(const std::vector<std::string>& candidates,
                                    const std::vector<double>& raw_scores) {
    if (candidates.empty() || candidates.size() != raw_scores.size())
        throw Error(ErrorCode::InvalidArgument, "candidate/score length mismatch");

    const double mx = *std::max_element(raw_scores.begin(), raw_scores.end());
    std::vector<double> exps(raw_scores.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < raw_scores.size(); ++i) {
        exps[i] = std::exp(raw_scores[i] - mx);
        sum += exps[i];
    }

    RankedResponse r;
    r.candidates = candidates;
    std::size_t best = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const double p = exps[i] / sum;
        r.scores[candidates[i]] = p;
        if (p > exps[best] / sum) best = i;
    }
    r.prediction = candidates[best];
    return r;
}

std::vector<double> scores_in_order(const RankedResponse& r) {
    std::vector<double> out;
    out.reserve(r.candidates.size());
    for (const auto& c : r.candidates) {
        auto it = r.scores.find(c);
        if (it == r.scores.end())
            throw Error(ErrorCode::Internal, "score missing for candidate: " + c);
        out.push_back(it->second);
    }
    return out;
}

void validate(const Response& resp) {
    const auto* r = std::get_if<RankedResponse>(&resp);
    if (!r) return;
    if (r->candidates.empty())
        throw Error(ErrorCode::InvalidArgument, "ranked response has no candidates");
    if (r->scores.size() != r->candidates.size())
        throw Error(ErrorCode::InvalidArgument, "score keys do not match candidates");
    double sum = 0.0;
    for (const auto& c : r->candidates) {
        auto it = r->scores.find(c);
        if (it == r->scores.end())
            throw Error(ErrorCode::InvalidArgument, "score missing for candidate: " + c);
        if (it->second < 0.0 || it->second > 1.0)
            throw Error(ErrorCode::InvalidArgument, "score out of [0,1]");
        sum += it->second;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw Error(ErrorCode::InvalidArgument, "scores do not sum to 1");
    // argmax with candidate-order tie-break
    std::size_t best = 0;
    for (std::size_t i = 1; i < r->candidates.size(); ++i)
        if (r->scores.at(r->candidates[i]) > r->scores.at(r->candidates[best])) best = i;
    if (r->prediction != r->candidates[best])
        throw Error(ErrorCode::InvalidArgument, "prediction is not the argmax candidate");
}

Json response_to_json(const Response& resp) {
    Json j;
    if (const auto* c = std::get_if<CompletionResponse>(&resp)) {
        j["type"] = "completion";
        j["prediction"] = c->prediction;
    } else {
        const auto& r = std::get<RankedResponse>(resp);
        j["type"] = "ranked";
        j["prediction"] = r.prediction;
        j["candidates"] = r.candidates;
        Json scores;
        for (const auto& [k, v] : r.scores) scores[k] = v;
        j["scores"] = std::move(scores);
    }
    return j;
}

Response response_from_json(const Json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "completion") {
        CompletionResponse c;
        c.prediction = j.at("prediction").get<std::string>();
        return c;
    }
    if (type == "ranked") {
        RankedResponse r;
        r.prediction = j.at("prediction").get<std::string>();
        r.candidates = j.at("candidates").get<std::vector<std::string>>();
        for (auto it = j.at("scores").begin(); it != j.at("scores").end(); ++it)
            r.scores[it.key()] = it.value().get<double>();
        return r;
    }
    throw Error(ErrorCode::Parse, "unknown response type: " + type);
}

}  // namespace pws
