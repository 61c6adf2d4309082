#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "client.hpp"
#include "error.hpp"
#include "rng.hpp"
#include "voter.hpp"

using namespace pws;

namespace {

LabelMap yes_no_map() {
    LabelMap map;
    map.entries.emplace_back("Yes", Vote(1));
    map.entries.emplace_back("No", Vote(2));
    return map;
}

RankedResponse ranked_response(std::vector<std::string> candidates, std::vector<double> scores) {
    RankedResponse r;
    r.candidates = std::move(candidates);
    double best = -1.0;
    for (std::size_t i = 0; i < r.candidates.size(); ++i) {
        r.scores[r.candidates[i]] = scores[i];
        if (scores[i] > best) {
            best = scores[i];
            r.prediction = r.candidates[i];
        }
    }
    return r;
}

// Ranked backend with scripted per-payload score vectors (candidate order).
class ScriptedBackend : public Backend {
public:
    explicit ScriptedBackend(std::map<std::string, std::vector<double>> scores)
        : scores_(std::move(scores)) {}

    std::string model_id() const override { return "scripted-1"; }
    Capabilities capabilities() const override { return {false, true, true}; }
    std::vector<Response> run_batch(std::span<const Query> batch) override {
        std::vector<Response> out;
        for (const Query& q : batch) {
            const auto& rq = std::get<RankedQuery>(q);
            auto it = scores_.find(rq.payload.text);
            if (it == scores_.end())
                throw Error(ErrorCode::Backend, "no script for: " + rq.payload.text);
            out.emplace_back(ranked_response(rq.candidates, it->second));
        }
        return out;
    }

private:
    std::map<std::string, std::vector<double>> scores_;
};

}  // namespace

TEST_CASE("exact matching votes and abstains") {
    Voter voter{yes_no_map(), exact_matcher(), std::nullopt};
    CHECK(voter.vote(CompletionResponse{"Yes"}) == Vote(1));
    CHECK(voter.vote(CompletionResponse{"yes"}) == Vote::abstain());
    CHECK(voter.vote(CompletionResponse{"Maybe"}) == Vote::abstain());

    Voter uncased{yes_no_map(), uncased_matcher(), std::nullopt};
    CHECK(uncased.vote(CompletionResponse{"yes"}) == Vote(1));
    CHECK(uncased.vote(CompletionResponse{"  NO \n"}) == Vote(2));
}

TEST_CASE("prefix and similarity matchers") {
    Voter prefix{yes_no_map(), prefix_matcher(), std::nullopt};
    CHECK(prefix.vote(CompletionResponse{"Yes, definitely"}) == Vote(1));
    CHECK(prefix.vote(CompletionResponse{"Nope"}) == Vote(2));  // "No" prefix

    auto similarity = [](const std::string& a, const std::string& b) {
        return a == b ? 1.0 : (a.size() == b.size() ? 0.5 : 0.0);
    };
    Voter sim{yes_no_map(), similarity_matcher(similarity, 0.4), std::nullopt};
    CHECK(sim.vote(CompletionResponse{"Yep"}) == Vote(1));  // same length as "Yes"
    CHECK(sim.vote(CompletionResponse{"Never"}) == Vote::abstain());
}

TEST_CASE("first-declared map entry wins") {
    LabelMap map;
    map.entries.emplace_back("Y", Vote(1));
    map.entries.emplace_back("Ye", Vote(2));
    Voter voter{map, prefix_matcher(), std::nullopt};
    CHECK(voter.vote(CompletionResponse{"Yes"}) == Vote(1));
}

TEST_CASE("ranked votes take the argmax candidate through the map") {
    Voter voter{yes_no_map(), exact_matcher(), std::nullopt};
    CHECK(voter.vote(ranked_response({"Yes", "No"}, {0.8, 0.2})) == Vote(1));
    CHECK(voter.vote(ranked_response({"Yes", "No"}, {0.3, 0.7})) == Vote(2));
    // argmax candidate missing from the map abstains
    CHECK(voter.vote(ranked_response({"Hmm", "No"}, {0.9, 0.1})) == Vote::abstain());
}

TEST_CASE("class-set map entries yield partial votes") {
    LabelMap map;
    map.entries.emplace_back("cat", Vote(std::vector<int>{1, 2}));
    Voter voter{map, exact_matcher(), std::nullopt};
    CHECK(voter.vote(CompletionResponse{"cat"}) == Vote(std::vector<int>{1, 2}));
}

TEST_CASE("calibration reweights scores and flips the argmax") {
    Voter voter{yes_no_map(), exact_matcher(), std::vector<double>{1.0 / 0.7, 1.0 / 0.3}};
    const auto scores = calibrated_scores(voter, ranked_response({"Yes", "No"}, {0.5, 0.5}));
    CHECK(std::abs(scores[0] - 0.3) < 1e-12);
    CHECK(std::abs(scores[1] - 0.7) < 1e-12);
    CHECK(voter.vote(ranked_response({"Yes", "No"}, {0.5, 0.5})) == Vote(2));
}

TEST_CASE("uniform content-free distribution leaves the argmax unchanged") {
    std::mt19937_64 gen(11);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t k = 2 + bounded_u64(gen, 4);
        std::vector<std::string> candidates;
        std::vector<double> raw(k);
        double sum = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            candidates.push_back("c" + std::to_string(c));
            raw[c] = 0.05 + unit_real(gen);
            sum += raw[c];
        }
        for (auto& x : raw) x /= sum;
        Voter plain{LabelMap{}, exact_matcher(), std::nullopt};
        Voter calibrated{LabelMap{}, exact_matcher(),
                         std::vector<double>(k, static_cast<double>(k))};  // uniform p_cf
        const auto r = ranked_response(candidates, raw);
        const auto qs = calibrated_scores(calibrated, r);
        const auto ps = calibrated_scores(plain, r);
        std::size_t am_q = 0, am_p = 0;
        for (std::size_t c = 1; c < k; ++c) {
            if (qs[c] > qs[am_q]) am_q = c;
            if (ps[c] > ps[am_p]) am_p = c;
        }
        CHECK(am_q == am_p);
        for (std::size_t c = 0; c < k; ++c) CHECK(std::abs(qs[c] - ps[c]) < 1e-12);
    }
}

TEST_CASE("calibration tie resolves to the first candidate") {
    Voter voter{yes_no_map(), exact_matcher(), std::vector<double>{1.0 / 0.9, 1.0 / 0.1}};
    const auto scores = calibrated_scores(voter, ranked_response({"Yes", "No"}, {0.9, 0.1}));
    CHECK(std::abs(scores[0] - 0.5) < 1e-12);
    CHECK(std::abs(scores[1] - 0.5) < 1e-12);
    CHECK(voter.vote(ranked_response({"Yes", "No"}, {0.9, 0.1})) == Vote(1));
}

TEST_CASE("calibration scale invariance") {
    Voter voter{yes_no_map(), exact_matcher(), std::vector<double>{2.5, 0.4}};
    const auto base = calibrated_scores(voter, ranked_response({"Yes", "No"}, {0.4, 0.6}));
    const auto scaled = calibrated_scores(voter, ranked_response({"Yes", "No"}, {0.4 * 3.0, 0.6 * 3.0}));
    for (std::size_t c = 0; c < 2; ++c) CHECK(std::abs(base[c] - scaled[c]) < 1e-12);
}

TEST_CASE("client calibration gathers content-free scores") {
    // template renders "Q: <text>"; content-free inputs map to scripted scores
    auto backend = std::make_shared<ScriptedBackend>(std::map<std::string, std::vector<double>>{
        {"Q: N/A", {0.8, 0.2}},
        {"Q: ", {0.7, 0.3}},
        {"Q: [MASK]", {0.6, 0.4}},
    });
    Client client(backend);
    StringTemplate tmpl("Q: [[text]]", std::vector<std::string>{"Yes", "No"});
    Voter voter{yes_no_map(), exact_matcher(), std::nullopt};
    Voter calibrated = calibrate(client, tmpl, voter);
    REQUIRE(calibrated.calibration.has_value());
    // p_cf = mean of (0.8,0.7,0.6) and (0.2,0.3,0.4) = (0.7, 0.3)
    CHECK(std::abs((*calibrated.calibration)[0] - 1.0 / 0.7) < 1e-12);
    CHECK(std::abs((*calibrated.calibration)[1] - 1.0 / 0.3) < 1e-12);

    // degenerate calibration: one candidate never gets mass
    auto zero_backend = std::make_shared<ScriptedBackend>(std::map<std::string, std::vector<double>>{
        {"Q: N/A", {1.0, 0.0}},
        {"Q: ", {1.0, 0.0}},
        {"Q: [MASK]", {1.0, 0.0}},
    });
    Client zero_client(zero_backend);
    CHECK_THROWS_WITH_AS(calibrate(zero_client, tmpl, voter), doctest::Contains("degenerate"),
                         Error);
}

TEST_CASE("calibration requires answer choices and rank support") {
    Client client(std::make_shared<MockBackend>());
    StringTemplate no_choices("Q: [[text]]");
    Voter voter{yes_no_map(), exact_matcher(), std::nullopt};
    CHECK_THROWS_AS(calibrate(client, no_choices, voter), Error);

    Client complete_only(std::make_shared<MockBackend>("gen", Capabilities{true, false, false}));
    StringTemplate with_choices("Q: [[text]]", std::vector<std::string>{"Yes", "No"});
    CHECK_THROWS_AS(calibrate(complete_only, with_choices, voter), Error);
}

TEST_CASE("vote matrix construction") {
    Voter v1{yes_no_map(), exact_matcher(), std::nullopt};
    LabelMap set_map;
    set_map.entries.emplace_back("cat", Vote(std::vector<int>{1, 2}));
    Voter v2{set_map, exact_matcher(), std::nullopt};

    std::vector<std::vector<Response>> responses{
        {CompletionResponse{"Yes"}, CompletionResponse{"No"}, CompletionResponse{"?"}},
        {CompletionResponse{"cat"}, CompletionResponse{"dog"}, CompletionResponse{"cat"}},
    };
    VoteMatrix votes = build_vote_matrix({v1, v2}, responses);
    REQUIRE(votes.n_rows() == 3);
    REQUIRE(votes.n_cols() == 2);
    CHECK(votes.at(0, 0) == Vote(1));
    CHECK(votes.at(1, 0) == Vote(2));
    CHECK(votes.at(2, 0) == Vote::abstain());
    CHECK(votes.at(0, 1) == Vote(std::vector<int>{1, 2}));
    CHECK(votes.at(1, 1) == Vote::abstain());

    std::vector<std::vector<Response>> ragged{
        {CompletionResponse{"Yes"}},
        {CompletionResponse{"cat"}, CompletionResponse{"dog"}},
    };
    CHECK_THROWS_AS(build_vote_matrix({v1, v2}, ragged), Error);
}

TEST_CASE("matchers agree whenever case already matches") {
    std::mt19937_64 gen(3);
    const std::vector<std::string> words{"Alpha", "beta", "GAMMA", "delta42", "x y"};
    Voter exact{yes_no_map(), exact_matcher(), std::nullopt};
    for (const auto& answer : words) {
        LabelMap map;
        map.entries.emplace_back(answer, Vote(1));
        Voter e{map, exact_matcher(), std::nullopt};
        Voter u{map, uncased_matcher(), std::nullopt};
        CHECK(e.vote(CompletionResponse{answer}) == u.vote(CompletionResponse{answer}));
    }
}

TEST_CASE("vote rendering round-trips") {
    CHECK(Vote::abstain().render() == "0");
    CHECK(Vote(2).render() == "2");
    CHECK(Vote(std::vector<int>{2, 1}).render() == "1|2");
    CHECK(Vote::parse("0") == Vote::abstain());
    CHECK(Vote::parse("3") == Vote(3));
    CHECK(Vote::parse("1|3") == Vote(std::vector<int>{1, 3}));
    CHECK_THROWS_AS(Vote::parse("abc"), Error);
    CHECK_THROWS_AS(Vote::parse(""), Error);
}
