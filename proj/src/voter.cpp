#include "voter.hpp"

#include <algorithm>
#include <cctype>

#include "error.hpp"

namespace pws {

void LabelMap::check_within(int k) const {
    for (const auto& [key, vote] : entries) {
        if (vote.is_abstain())
            throw Error(ErrorCode::Config, "label map entry \"" + key + "\" maps to abstain");
        vote.check_within(k);
    }
}

namespace {

std::string lower_trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    std::string out;
    out.reserve(e - b);
    for (std::size_t i = b; i < e; ++i)
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(s[i]))));
    return out;
}

class ExactMatcher : public Matcher {
public:
    bool matches(const std::string& answer, const std::string& key) const override {
        return answer == key;
    }
    std::string name() const override { return "exact"; }
};

class UncasedMatcher : public Matcher {
public:
    bool matches(const std::string& answer, const std::string& key) const override {
        return lower_trim(answer) == lower_trim(key);
    }
    std::string name() const override { return "uncased"; }
};

class PrefixMatcher : public Matcher {
public:
    bool matches(const std::string& answer, const std::string& key) const override {
        return answer.size() >= key.size() && answer.compare(0, key.size(), key) == 0;
    }
    std::string name() const override { return "prefix"; }
};

class SimilarityMatcher : public Matcher {
public:
    SimilarityMatcher(std::function<double(const std::string&, const std::string&)> similarity,
                      double threshold)
        : similarity_(std::move(similarity)), threshold_(threshold) {
        if (!similarity_) throw Error(ErrorCode::Config, "similarity function is required");
    }
    bool matches(const std::string& answer, const std::string& key) const override {
        return similarity_(answer, key) >= threshold_;
    }
    std::string name() const override { return "similarity"; }

private:
    std::function<double(const std::string&, const std::string&)> similarity_;
    double threshold_;
};

}  // namespace

std::shared_ptr<Matcher> exact_matcher() { return std::make_shared<ExactMatcher>(); }
std::shared_ptr<Matcher> uncased_matcher() { return std::make_shared<UncasedMatcher>(); }
std::shared_ptr<Matcher> prefix_matcher() { return std::make_shared<PrefixMatcher>(); }
std::shared_ptr<Matcher> similarity_matcher(
    std::function<double(const std::string&, const std::string&)> similarity, double threshold) {
    return std::make_shared<SimilarityMatcher>(std::move(similarity), threshold);
}

std::shared_ptr<Matcher> matcher_by_name(const std::string& name) {
    if (name == "exact" || name.empty()) return exact_matcher();
    if (name == "uncased") return uncased_matcher();
    if (name == "prefix") return prefix_matcher();
    throw Error(ErrorCode::Config, "unknown matcher: " + name);
}

std::vector<double> calibrated_scores(const Voter& voter, const RankedResponse& response) {
    std::vector<double> scores = scores_in_order(response);
    if (!voter.calibration) return scores;
    const auto& w = *voter.calibration;
    if (w.size() != scores.size())
        throw Error(ErrorCode::InvalidArgument,
                    "calibration weight count " + std::to_string(w.size()) +
                        " does not match candidate count " + std::to_string(scores.size()));
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        scores[i] *= w[i];
        sum += scores[i];
    }
    if (sum <= 0.0) throw Error(ErrorCode::InvalidArgument, "calibrated scores sum to zero");
    for (auto& s : scores) s /= sum;
    return scores;
}

Vote Voter::vote(const Response& response) const {
    const Matcher& m = *matcher;
    auto match_text = [&](const std::string& answer) -> Vote {
        for (const auto& [key, mapped] : label_map.entries)
            if (m.matches(answer, key)) return mapped;
        return Vote::abstain();
    };

    if (const auto* c = std::get_if<CompletionResponse>(&response)) return match_text(c->prediction);

    const auto& r = std::get<RankedResponse>(response);
    if (r.candidates.empty()) return Vote::abstain();
    const std::vector<double> scores = calibrated_scores(*this, r);
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i)
        if (scores[i] > scores[best]) best = i;  // ties keep the earliest candidate
    return match_text(r.candidates[best]);
}

Voter calibrate(Client& client, const StringTemplate& tmpl, Voter voter,
                const std::vector<std::string>& content_free_inputs) {
    if (!tmpl.answer_choices)
        throw Error(ErrorCode::InvalidArgument, "calibration requires answer_choices");
    if (!client.backend().capabilities().rank_text)
        throw Error(ErrorCode::Capability, "calibration requires a rank_text backend");
    if (content_free_inputs.empty())
        throw Error(ErrorCode::InvalidArgument, "calibration needs at least one content-free input");

    // gather every placeholder the template (and its choices) can consume
    std::vector<std::string> keys = tmpl.text.keys();
    for (const auto& choice : *tmpl.answer_choices)
        for (const auto& k : choice.keys())
            if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);

    std::vector<Query> queries;
    queries.reserve(content_free_inputs.size());
    for (const auto& cf : content_free_inputs) {
        std::vector<std::pair<std::string, TypedColumn>> cols;
        cols.reserve(keys.size());
        for (const auto& k : keys)
            cols.emplace_back(k, TypedColumn{ColumnKind::text, {cf}, {}, {}});
        // a template without placeholders still queries once per input
        if (cols.empty()) cols.emplace_back("_cf", TypedColumn{ColumnKind::text, {cf}, {}, {}});
        const Dataset row = Dataset::from_columns(std::move(cols));
        queries.push_back(apply(tmpl, row, 0));
    }

    const std::vector<Response> responses = client.run(queries);
    std::vector<double> p_cf;
    for (const Response& resp : responses) {
        const auto* r = std::get_if<RankedResponse>(&resp);
        if (!r) throw Error(ErrorCode::Internal, "calibration expected ranked responses");
        const auto scores = scores_in_order(*r);
        if (p_cf.empty()) p_cf.assign(scores.size(), 0.0);
        if (scores.size() != p_cf.size())
            throw Error(ErrorCode::InvalidArgument,
                        "content-free inputs yield differing candidate counts");
        for (std::size_t i = 0; i < scores.size(); ++i) p_cf[i] += scores[i];
    }
    for (auto& p : p_cf) p /= static_cast<double>(responses.size());

    std::vector<double> weights(p_cf.size());
    for (std::size_t i = 0; i < p_cf.size(); ++i) {
        if (p_cf[i] <= 0.0)
            throw Error(ErrorCode::InvalidArgument,
                        "degenerate calibration: candidate " + std::to_string(i) +
                            " has zero content-free mass");
        weights[i] = 1.0 / p_cf[i];
    }
    voter.calibration = std::move(weights);
    return voter;
}

VoteMatrix build_vote_matrix(const std::vector<Voter>& voters,
                             const std::vector<std::vector<Response>>& responses_per_voter) {
    if (voters.size() != responses_per_voter.size())
        throw Error(ErrorCode::InvalidArgument, "one response list per voter required");
    const std::size_t m = voters.size();
    const std::size_t n = m == 0 ? 0 : responses_per_voter[0].size();
    for (std::size_t j = 0; j < m; ++j)
        if (responses_per_voter[j].size() != n)
            throw Error(ErrorCode::InvalidArgument,
                        "response list " + std::to_string(j) + " has length " +
                            std::to_string(responses_per_voter[j].size()) + ", expected " +
                            std::to_string(n));
    VoteMatrix votes(n, m);
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t i = 0; i < n; ++i)
            votes.at(i, j) = voters[j].vote(responses_per_voter[j][i]);
    return votes;
}

}  // namespace pws
