#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "error.hpp"
#include "labelmodel.hpp"
#include "oracles.hpp"
#include "rng.hpp"

using namespace pws;

namespace {

VoteMatrix single_column(const std::vector<int>& column_votes) {
    VoteMatrix v(column_votes.size(), 1);
    for (std::size_t i = 0; i < column_votes.size(); ++i)
        if (column_votes[i] != 0) v.at(i, 0) = Vote(column_votes[i]);
    return v;
}

VoteMatrix row_of_votes(const std::vector<int>& votes_for_one_row) {
    VoteMatrix v(1, votes_for_one_row.size());
    for (std::size_t j = 0; j < votes_for_one_row.size(); ++j)
        if (votes_for_one_row[j] != 0) v.at(0, j) = Vote(votes_for_one_row[j]);
    return v;
}

VoteMatrix random_single_votes(std::mt19937_64& gen, std::size_t n, std::size_t m, int k,
                               bool allow_abstain = true) {
    VoteMatrix v(n, m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            const auto roll = bounded_u64(gen, static_cast<std::uint64_t>(k + (allow_abstain ? 1 : 0)));
            if (allow_abstain && roll == static_cast<std::uint64_t>(k)) continue;
            v.at(i, j) = Vote(1 + static_cast<int>(roll));
        }
    return v;
}

}  // namespace

TEST_CASE("majority vote counts, ties and abstain fallback") {
    ProbLabels p = majority_vote(row_of_votes({1, 1, 2}), 2);
    CHECK(p.at(0, 0) == doctest::Approx(2.0 / 3).epsilon(1e-12));
    CHECK(p.at(0, 1) == doctest::Approx(1.0 / 3).epsilon(1e-12));

    ProbLabels tie = majority_vote(row_of_votes({1, 2}), 2);
    CHECK(tie.at(0, 0) == doctest::Approx(0.5));
    CHECK(tie.at(0, 1) == doctest::Approx(0.5));

    ProbLabels uniform = majority_vote(row_of_votes({0, 0}), 3);
    for (int c = 0; c < 3; ++c) CHECK(uniform.at(0, c) == doctest::Approx(1.0 / 3));

    // class sets contribute 1/|S| per member
    VoteMatrix sets(1, 2);
    sets.at(0, 0) = Vote(std::vector<int>{1, 2});
    sets.at(0, 1) = Vote(3);
    ProbLabels ps = majority_vote(sets, 3);
    CHECK(ps.at(0, 0) == doctest::Approx(0.25));
    CHECK(ps.at(0, 1) == doctest::Approx(0.25));
    CHECK(ps.at(0, 2) == doctest::Approx(0.5));
}

TEST_CASE("naive bayes recovers planted accuracies") {
    const std::vector<double> alpha{0.9, 0.8, 0.7};
    const std::vector<double> beta{1.0, 1.0, 1.0};
    auto instance = oracles::sample_one_coin(5000, 2, alpha, beta, 42);
    FitTrace trace;
    NBParams params = naive_bayes_fit(instance.votes, 2, {}, &trace);
    for (std::size_t j = 0; j < alpha.size(); ++j)
        CHECK(std::abs(params.accuracy[j] - alpha[j]) <= 0.03);
    for (std::size_t j = 0; j < beta.size(); ++j)
        CHECK(params.propensity[j] == doctest::Approx(1.0));
    CHECK_FALSE(params.degenerate);
}

TEST_CASE("fitted posterior equals brute-force enumeration") {
    std::mt19937_64 gen(7);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + bounded_u64(gen, 5);
        const std::size_t m = 1 + bounded_u64(gen, 3);
        const int k = 2 + static_cast<int>(bounded_u64(gen, 2));
        VoteMatrix v = random_single_votes(gen, n, m, k);
        NBParams params = naive_bayes_fit(v, k);
        ProbLabels posterior = naive_bayes_predict(v, params);
        ProbLabels reference = oracles::brute_force_posterior(
            n, m, k, params.prior, [&](std::size_t i, std::size_t j, int y) {
                return oracles::nb_emission(v, params, k, i, j, y);
            });
        for (std::size_t i = 0; i < n; ++i)
            for (int y = 0; y < k; ++y)
                CHECK(std::abs(posterior.at(i, y) - reference.at(i, y)) < 1e-9);
    }
}

TEST_CASE("EM log-likelihood is non-decreasing on random instances") {
    std::mt19937_64 gen(13);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 10 + bounded_u64(gen, 150);
        const std::size_t m = 3 + bounded_u64(gen, 5);
        const int k = 2 + static_cast<int>(bounded_u64(gen, 3));
        VoteMatrix v = random_single_votes(gen, n, m, k);
        FitTrace trace;
        naive_bayes_fit(v, k, {}, &trace);  // fit itself throws if LL decreases
        REQUIRE(!trace.log_likelihood.empty());
        for (std::size_t t = 1; t < trace.log_likelihood.size(); ++t)
            CHECK(trace.log_likelihood[t] >=
                  trace.log_likelihood[t - 1] -
                      1e-7 * (1.0 + std::abs(trace.log_likelihood[t - 1])));
    }
}

TEST_CASE("degenerate consensus drives every posterior to the voted class") {
    VoteMatrix v = single_column({1, 1, 1, 1, 1});
    NBParams params = naive_bayes_fit(v, 2);
    ProbLabels p = naive_bayes_predict(v, params);
    for (std::size_t i = 0; i < v.n_rows(); ++i) CHECK(p.top1(i) == 1);
}

TEST_CASE("all-abstain matrix yields prior-only params with a warning flag") {
    VoteMatrix v(4, 2);
    NBParams params = naive_bayes_fit(v, 3);
    CHECK(params.degenerate);
    for (double pi : params.prior) CHECK(pi == doctest::Approx(1.0 / 3));
    ProbLabels p = naive_bayes_predict(v, params);
    for (std::size_t i = 0; i < 4; ++i)
        for (int c = 0; c < 3; ++c) CHECK(p.at(i, c) == doctest::Approx(1.0 / 3));
}

TEST_CASE("k < 2 is rejected") {
    CHECK_THROWS_AS(naive_bayes_fit(single_column({1, 1}), 1), Error);
}

TEST_CASE("predict on an all-abstain row returns the prior") {
    NBParams params;
    params.prior = {0.6, 0.4};
    params.accuracy = {0.8};
    params.propensity = {0.5};
    VoteMatrix v(1, 1);  // abstain
    ProbLabels p = naive_bayes_predict(v, params);
    CHECK(p.at(0, 0) == doctest::Approx(0.6));
    CHECK(p.at(0, 1) == doctest::Approx(0.4));
}

TEST_CASE("symmetric votes with symmetric params stay symmetric") {
    NBParams params;
    params.prior = {0.5, 0.5};
    params.accuracy = {0.8, 0.8};
    params.propensity = {1.0, 1.0};
    VoteMatrix v = row_of_votes({1, 2});
    ProbLabels p = naive_bayes_predict(v, params);
    CHECK(p.at(0, 0) == doctest::Approx(0.5));
    CHECK(p.at(0, 1) == doctest::Approx(0.5));
}

TEST_CASE("class permutation permutes posterior columns") {
    std::mt19937_64 gen(21);
    const int k = 3;
    const std::vector<int> perm{2, 0, 1};  // new class of old class c = perm[c]+1
    for (int trial = 0; trial < 10; ++trial) {
        VoteMatrix v = random_single_votes(gen, 30, 4, k);
        VoteMatrix permuted(v.n_rows(), v.n_cols());
        for (std::size_t i = 0; i < v.n_rows(); ++i)
            for (std::size_t j = 0; j < v.n_cols(); ++j) {
                const Vote& vote = v.at(i, j);
                if (!vote.is_abstain())
                    permuted.at(i, j) = Vote(perm[static_cast<std::size_t>(vote.single() - 1)] + 1);
            }
        ProbLabels base = naive_bayes_predict(v, naive_bayes_fit(v, k));
        ProbLabels mapped = naive_bayes_predict(permuted, naive_bayes_fit(permuted, k));
        for (std::size_t i = 0; i < v.n_rows(); ++i)
            for (int c = 0; c < k; ++c)
                CHECK(std::abs(base.at(i, c) - mapped.at(i, static_cast<std::size_t>(perm[static_cast<std::size_t>(c)]))) <
                      1e-7);
    }
}

TEST_CASE("LF column permutation leaves the posterior unchanged") {
    std::mt19937_64 gen(22);
    VoteMatrix v = random_single_votes(gen, 40, 5, 3);
    const std::vector<std::size_t> perm{3, 1, 4, 0, 2};
    VoteMatrix shuffled(v.n_rows(), v.n_cols());
    for (std::size_t i = 0; i < v.n_rows(); ++i)
        for (std::size_t j = 0; j < v.n_cols(); ++j) shuffled.at(i, j) = v.at(i, perm[j]);
    ProbLabels base = naive_bayes_predict(v, naive_bayes_fit(v, 3));
    ProbLabels mapped = naive_bayes_predict(shuffled, naive_bayes_fit(shuffled, 3));
    for (std::size_t i = 0; i < v.n_rows(); ++i)
        for (int c = 0; c < 3; ++c) CHECK(std::abs(base.at(i, c) - mapped.at(i, c)) < 1e-9);
}

TEST_CASE("triplet recovery from exact closed-form moments") {
    // moments of accuracies (0.8, 0.6, 0.9): M_jl = a_j * a_l
    std::vector<std::vector<double>> moments{
        {0.0, 0.48, 0.72}, {0.48, 0.0, 0.54}, {0.72, 0.54, 0.0}};
    TripletParams params = triplet_from_moments(moments);
    CHECK(std::abs(params.accuracies[0] - 0.8) < 1e-12);
    CHECK(std::abs(params.accuracies[1] - 0.6) < 1e-12);
    CHECK(std::abs(params.accuracies[2] - 0.9) < 1e-12);

    std::mt19937_64 gen(17);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t m = 3 + bounded_u64(gen, 4);
        std::vector<double> a(m);
        for (auto& x : a) x = 0.15 + 0.8 * unit_real(gen);
        std::vector<std::vector<double>> mm(m, std::vector<double>(m, 0.0));
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t l = 0; l < m; ++l)
                if (j != l) mm[j][l] = a[j] * a[l];
        TripletParams fitted = triplet_from_moments(mm);
        for (std::size_t j = 0; j < m; ++j) CHECK(std::abs(fitted.accuracies[j] - a[j]) < 1e-12);
    }
}

TEST_CASE("triplet recovery from 200k Monte-Carlo samples") {
    const std::vector<double> a{0.8, 0.6, 0.9};
    SignedVotes votes = oracles::sample_signed(200000, a, 0.5, 1234);
    TripletParams params = triplet_fit(votes);
    for (std::size_t j = 0; j < a.size(); ++j)
        CHECK(std::abs(params.accuracies[j] - a[j]) <= 0.02);
}

TEST_CASE("triplet method rejects thin inputs") {
    CHECK_THROWS_WITH_AS(triplet_fit(SignedVotes{{1, -1}, {1, 1}}),
                         doctest::Contains("at least 3"), Error);
    // a zero cross-moment makes every triplet unusable
    std::vector<std::vector<double>> moments{
        {0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}};
    CHECK_THROWS_WITH_AS(triplet_from_moments(moments), doctest::Contains("unidentifiable"), Error);
}

TEST_CASE("triplet posterior matches hand Bayes arithmetic") {
    TripletParams params;
    params.accuracies = {0.8};
    params.class_balance = 0.5;
    ProbLabels single = triplet_predict(SignedVotes{{1}}, params);
    CHECK(single.at(0, 0) == doctest::Approx(0.9).epsilon(1e-12));

    params.class_balance = 0.3;
    ProbLabels abstained = triplet_predict(SignedVotes{{0}}, params);
    CHECK(abstained.at(0, 0) == doctest::Approx(0.3));
    CHECK(abstained.at(0, 1) == doctest::Approx(0.7));

    TripletParams two;
    two.accuracies = {0.7, 0.7};
    two.class_balance = 0.5;
    ProbLabels opposing = triplet_predict(SignedVotes{{1, -1}}, two);
    CHECK(opposing.at(0, 0) == doctest::Approx(0.5));
}

TEST_CASE("signed vote bridge maps class 1 to +1 and class 2 to -1") {
    VoteMatrix v(2, 2);
    v.at(0, 0) = Vote(1);
    v.at(0, 1) = Vote(2);
    SignedVotes s = to_signed_votes(v);
    CHECK(s[0][0] == 1);
    CHECK(s[0][1] == -1);
    CHECK(s[1][0] == 0);
}

TEST_CASE("partial model narrows mass with coarse and fine votes") {
    // classes: 1=persian 2=siamese 3=beagle 4=pug
    // LF "cat" votes {1,2}; LF "breed" votes {1} on the persian row.
    // Extra rows populate each LF's observed vocabulary.
    VoteMatrix v(5, 2);
    v.at(0, 0) = Vote(std::vector<int>{1, 2});
    v.at(0, 1) = Vote(1);
    v.at(1, 0) = Vote(std::vector<int>{1, 2});
    v.at(1, 1) = Vote(2);
    v.at(2, 0) = Vote(std::vector<int>{3, 4});
    v.at(2, 1) = Vote(3);
    v.at(3, 0) = Vote(std::vector<int>{3, 4});
    v.at(3, 1) = Vote(4);
    v.at(4, 0) = Vote(std::vector<int>{1, 2});
    v.at(4, 1) = Vote(1);

    ProbLabels p = partial_label_fit_predict(v, 4);
    CHECK(p.at(0, 2) + p.at(0, 3) < p.at(0, 0));
    CHECK(p.at(0, 2) < p.at(0, 0));
    CHECK(p.at(0, 3) < p.at(0, 0));
}

TEST_CASE("full-domain voter changes nothing") {
    std::mt19937_64 gen(31);
    const int k = 3;
    VoteMatrix base = random_single_votes(gen, 25, 3, k, /*allow_abstain=*/true);
    VoteMatrix extended(base.n_rows(), base.n_cols() + 1);
    for (std::size_t i = 0; i < base.n_rows(); ++i) {
        for (std::size_t j = 0; j < base.n_cols(); ++j) extended.at(i, j) = base.at(i, j);
        extended.at(i, base.n_cols()) = Vote(std::vector<int>{1, 2, 3});
    }
    ProbLabels without = partial_label_fit_predict(base, k);
    ProbLabels with = partial_label_fit_predict(extended, k);
    for (std::size_t i = 0; i < base.n_rows(); ++i)
        for (int c = 0; c < k; ++c) CHECK(std::abs(without.at(i, c) - with.at(i, c)) < 1e-9);
}

TEST_CASE("singleton-vote partial model agrees with naive bayes") {
    std::mt19937_64 gen(37);
    for (int trial = 0; trial < 20; ++trial) {
        const int k = 2 + static_cast<int>(bounded_u64(gen, 2));
        const std::size_t m = 2 + bounded_u64(gen, 2);
        // sample until every LF voted every class at least once
        VoteMatrix v;
        while (true) {
            v = random_single_votes(gen, 60, m, k);
            bool full = true;
            for (std::size_t j = 0; j < m && full; ++j)
                for (int c = 1; c <= k && full; ++c) {
                    bool found = false;
                    for (std::size_t i = 0; i < v.n_rows(); ++i)
                        if (!v.at(i, j).is_abstain() && v.at(i, j).single() == c) found = true;
                    full = found;
                }
            if (full) break;
        }
        ProbLabels nb = naive_bayes_predict(v, naive_bayes_fit(v, k));
        ProbLabels pl = partial_label_fit_predict(v, k);
        for (std::size_t i = 0; i < v.n_rows(); ++i)
            for (int c = 0; c < k; ++c) CHECK(std::abs(nb.at(i, c) - pl.at(i, c)) < 1e-6);
    }
}

namespace {

// Emission reconstructed independently from the observed vocabulary: with
// probability gamma a set containing y (uniform over those), else a set
// excluding y (uniform over those). Abstains carry the propensity factor.
double partial_emission(const VoteMatrix& votes, const PartialParams& params, std::size_t i,
                        std::size_t j, int y) {
    const Vote& s = votes.at(i, j);
    if (s.is_abstain()) return 1.0 - params.propensity[j];
    std::vector<Vote> vocab;
    for (std::size_t r = 0; r < votes.n_rows(); ++r) {
        const Vote& w = votes.at(r, j);
        if (w.is_abstain()) continue;
        if (std::find(vocab.begin(), vocab.end(), w) == vocab.end()) vocab.push_back(w);
    }
    int with_y = 0;
    for (const Vote& w : vocab)
        if (w.contains(y)) ++with_y;
    const int without_y = static_cast<int>(vocab.size()) - with_y;
    const double g = params.accuracy[j];
    if (s.contains(y)) return params.propensity[j] * g / with_y;
    return params.propensity[j] * (1.0 - g) / without_y;
}

}  // namespace

TEST_CASE("partial posterior matches the brute-force reference") {
    // coarse + fine voters over a small instance, checked by joint enumeration
    VoteMatrix v(4, 2);
    v.at(0, 0) = Vote(std::vector<int>{1, 2});
    v.at(0, 1) = Vote(1);
    v.at(1, 0) = Vote(std::vector<int>{2, 3});
    v.at(1, 1) = Vote(3);
    v.at(2, 0) = Vote(std::vector<int>{1, 2});
    v.at(2, 1) = Vote(2);
    v.at(3, 0) = Vote::abstain();
    v.at(3, 1) = Vote(1);
    const int k = 3;

    PartialParams params;
    ProbLabels posterior = partial_label_fit_predict(v, k, {}, nullptr, &params);
    ProbLabels reference = oracles::brute_force_posterior(
        v.n_rows(), v.n_cols(), k, params.prior, [&](std::size_t i, std::size_t j, int y) {
            return partial_emission(v, params, i, j, y);
        });
    for (std::size_t i = 0; i < v.n_rows(); ++i)
        for (int c = 0; c < k; ++c) CHECK(std::abs(posterior.at(i, c) - reference.at(i, c)) < 1e-9);
}

TEST_CASE("probabilistic label exports") {
    ProbLabels p(2, 2);
    p.at(0, 0) = 0.25;
    p.at(0, 1) = 0.75;
    p.at(1, 0) = 1.0;
    std::ostringstream csv;
    p.write_csv(csv, {"ham", "spam"});
    CHECK(csv.str() == "id,p_ham,p_spam\n0,0.25,0.75\n1,1,0\n");
    std::ostringstream jsonl;
    p.write_jsonl(jsonl, {"ham", "spam"});
    CHECK(jsonl.str() == "{\"id\":0,\"p\":{\"ham\":0.25,\"spam\":0.75}}\n"
                         "{\"id\":1,\"p\":{\"ham\":1.0,\"spam\":0.0}}\n");
}
