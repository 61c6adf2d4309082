#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "client.hpp"
#include "response.hpp"
#include "templates.hpp"
#include "votes.hpp"

namespace pws {

// Ordered answer-text -> label associations; when several keys match a
// response, the first-declared entry wins.
struct LabelMap {
    std::vector<std::pair<std::string, Vote>> entries;

    void check_within(int k) const;
};

// Matching functions decide whether a model answer matches a label-map key.
class Matcher {
public:
    virtual ~Matcher() = default;
    virtual bool matches(const std::string& answer, const std::string& key) const = 0;
    virtual std::string name() const = 0;
};

std::shared_ptr<Matcher> exact_matcher();
// case-insensitive (ASCII) with surrounding whitespace trimmed
std::shared_ptr<Matcher> uncased_matcher();
// the answer starts with the key
std::shared_ptr<Matcher> prefix_matcher();
// pluggable similarity: matches when similarity(answer, key) >= threshold
std::shared_ptr<Matcher> similarity_matcher(
    std::function<double(const std::string&, const std::string&)> similarity, double threshold);

std::shared_ptr<Matcher> matcher_by_name(const std::string& name);

// Maps model responses to label votes. Calibration weights, when present,
// are positional over the template's answer candidates: ranked scores are
// reweighted q_c ∝ w_c * p_c and renormalized before the argmax.
struct Voter {
    LabelMap label_map;
    std::shared_ptr<Matcher> matcher = exact_matcher();
    std::optional<std::vector<double>> calibration;  // positive, one per candidate

    Vote vote(const Response& response) const;
};

// Calibrated candidate scores in candidate order (identity without weights).
std::vector<double> calibrated_scores(const Voter& voter, const RankedResponse& response);

// Contextual calibration: runs the template over content-free inputs, takes
// the mean candidate distribution p_cf, and stores weights w_c = 1 / p_cf[c].
// Every placeholder is replaced by each content-free input in turn.
Voter calibrate(Client& client, const StringTemplate& tmpl, Voter voter,
                const std::vector<std::string>& content_free_inputs = {"N/A", "", "[MASK]"});

// votes[i][j] = voter_j(responses[j][i]); all per-voter response lists must
// share the same length.
VoteMatrix build_vote_matrix(const std::vector<Voter>& voters,
                             const std::vector<std::vector<Response>>& responses_per_voter);

}  // namespace pws
