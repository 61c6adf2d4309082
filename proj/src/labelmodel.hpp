#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "votes.hpp"

namespace pws {

// n x k row-stochastic matrix of probabilistic labels.
class ProbLabels {
public:
    ProbLabels() = default;
    ProbLabels(std::size_t n, std::size_t k);

    std::size_t n_rows() const { return n_; }
    std::size_t n_classes() const { return k_; }
    double& at(std::size_t row, std::size_t cls);
    double at(std::size_t row, std::size_t cls) const;

    // argmax with ties broken toward the lowest class index; returns 1-based
    int top1(std::size_t row) const;
    void normalize_rows();
    // rows sum to 1 +/- 1e-9, entries within [0,1]
    void check() const;

    // header "id,p_<class>..."; one row per example
    void write_csv(std::ostream& out, const std::vector<std::string>& class_names) const;
    // one JSON object per line: {"id":i,"p":{class:prob,...}}
    void write_jsonl(std::ostream& out, const std::vector<std::string>& class_names) const;

private:
    std::size_t n_ = 0;
    std::size_t k_ = 0;
    std::vector<double> p_;
};

// Per-example class-count average; partial votes spread 1/|S| per member and
// all-abstain rows fall back to the uniform distribution.
ProbLabels majority_vote(const VoteMatrix& votes, int k);

struct NBParams {
    std::vector<double> prior;        // pi over k classes
    std::vector<double> accuracy;     // alpha_j = P(vote == Y | non-abstain)
    std::vector<double> propensity;   // beta_j = P(non-abstain)
    bool degenerate = false;          // all-abstain input; prior-only

    int n_classes() const { return static_cast<int>(prior.size()); }
};

struct EmOptions {
    std::size_t max_iters = 100;
    double tol = 1e-6;
    std::uint64_t seed = 0;  // reserved; fitting is deterministic
};

struct FitTrace {
    std::vector<double> log_likelihood;  // one entry per EM iteration
    std::size_t iterations = 0;
};

// EM for the one-coin-per-LF generative model: abstain w.p. 1-beta_j; else
// the true class w.p. alpha_j, any other class uniformly. The log-likelihood
// is non-decreasing across iterations.
NBParams naive_bayes_fit(const VoteMatrix& votes, int k, const EmOptions& options = {},
                         FitTrace* trace = nullptr);
ProbLabels naive_bayes_predict(const VoteMatrix& votes, const NBParams& params);

struct TripletParams {
    std::vector<double> accuracies;  // a_j = E[v_j * Y | both non-abstain], in (0,1)
    double class_balance = 0.5;      // P(Y = +1)
};

// Signed binary votes: n rows, m columns, entries in {-1, 0, +1}.
using SignedVotes = std::vector<std::vector<int>>;

// M[j][l] = mean of v_j * v_l over rows where both are non-abstain.
std::vector<std::vector<double>> pairwise_moments(const SignedVotes& votes);

// Method-of-moments accuracies: a_j = median over triplets (j,l,s) of
// sqrt(|M_jl * M_js / M_ls|), clamped to [0.01, 0.99]. Triplets with
// |M_ls| < 1e-8 are skipped; an LF with no usable triplet is unidentifiable.
TripletParams triplet_from_moments(const std::vector<std::vector<double>>& moments,
                                   double class_balance = 0.5);
TripletParams triplet_fit(const SignedVotes& votes, double class_balance = 0.5);

// Two-class posterior (columns: P(+1), P(-1)) under per-LF correctness
// (1 + a_j) / 2.
ProbLabels triplet_predict(const SignedVotes& votes, const TripletParams& params);

// VoteMatrix bridge for two-class tasks: class 1 -> +1, class 2 -> -1.
SignedVotes to_signed_votes(const VoteMatrix& votes);

struct PartialParams {
    std::vector<double> prior;      // pi over k classes
    std::vector<double> accuracy;   // gamma_j = P(y in S | S emitted)
    std::vector<double> propensity; // beta_j
};

// EM over class-set votes: an LF emits a set containing the true class w.p.
// gamma_j (uniform over its observed such sets), else a set excluding it.
// Returns the per-row posterior after fitting; fitted params on request.
ProbLabels partial_label_fit_predict(const VoteMatrix& votes, int k,
                                     const EmOptions& options = {}, FitTrace* trace = nullptr,
                                     PartialParams* fitted = nullptr);

}  // namespace pws
