#include "labelmodel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>

#include "canonical.hpp"
#include "error.hpp"

namespace pws {

ProbLabels::ProbLabels(std::size_t n, std::size_t k) : n_(n), k_(k), p_(n * k, 0.0) {}

double& ProbLabels::at(std::size_t row, std::size_t cls) {
    if (row >= n_ || cls >= k_) throw Error(ErrorCode::InvalidArgument, "prob index out of range");
    return p_[row * k_ + cls];
}

double ProbLabels::at(std::size_t row, std::size_t cls) const {
    if (row >= n_ || cls >= k_) throw Error(ErrorCode::InvalidArgument, "prob index out of range");
    return p_[row * k_ + cls];
}

int ProbLabels::top1(std::size_t row) const {
    std::size_t best = 0;
    for (std::size_t c = 1; c < k_; ++c)
        if (at(row, c) > at(row, best)) best = c;
    return static_cast<int>(best) + 1;
}

void ProbLabels::normalize_rows() {
    for (std::size_t i = 0; i < n_; ++i) {
        double sum = 0.0;
        for (std::size_t c = 0; c < k_; ++c) sum += p_[i * k_ + c];
        if (sum <= 0.0) {
            for (std::size_t c = 0; c < k_; ++c) p_[i * k_ + c] = 1.0 / static_cast<double>(k_);
        } else {
            for (std::size_t c = 0; c < k_; ++c) p_[i * k_ + c] /= sum;
        }
    }
}

void ProbLabels::check() const {
    for (std::size_t i = 0; i < n_; ++i) {
        double sum = 0.0;
        for (std::size_t c = 0; c < k_; ++c) {
            const double v = at(i, c);
            if (v < 0.0 || v > 1.0)
                throw Error(ErrorCode::Internal, "probability outside [0,1]");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw Error(ErrorCode::Internal,
                        "row " + std::to_string(i) + " sums to " + std::to_string(sum));
    }
}

namespace {

std::string render_prob(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) throw Error(ErrorCode::Internal, "probability rendering failed");
    return std::string(buf, end);
}

}  // namespace

void ProbLabels::write_csv(std::ostream& out, const std::vector<std::string>& class_names) const {
    if (class_names.size() != k_)
        throw Error(ErrorCode::InvalidArgument, "one class name per column required");
    out << "id";
    for (const auto& name : class_names) out << ",p_" << name;
    out << "\n";
    for (std::size_t i = 0; i < n_; ++i) {
        out << i;
        for (std::size_t c = 0; c < k_; ++c) out << "," << render_prob(at(i, c));
        out << "\n";
    }
}

void ProbLabels::write_jsonl(std::ostream& out, const std::vector<std::string>& class_names) const {
    if (class_names.size() != k_)
        throw Error(ErrorCode::InvalidArgument, "one class name per column required");
    for (std::size_t i = 0; i < n_; ++i) {
        Json j;
        j["id"] = i;
        Json probs;
        for (std::size_t c = 0; c < k_; ++c) probs[class_names[c]] = at(i, c);
        j["p"] = std::move(probs);
        out << canonical_dump(j) << "\n";
    }
}

ProbLabels majority_vote(const VoteMatrix& votes, int k) {
    if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
    votes.check_within(k);
    ProbLabels out(votes.n_rows(), static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < votes.n_rows(); ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < votes.n_cols(); ++j) {
            const Vote& v = votes.at(i, j);
            if (v.is_abstain()) continue;
            const double share = 1.0 / static_cast<double>(v.classes().size());
            for (int c : v.classes()) out.at(i, static_cast<std::size_t>(c - 1)) += share;
            total += 1.0;
        }
        if (total == 0.0) {
            for (int c = 0; c < k; ++c) out.at(i, static_cast<std::size_t>(c)) = 1.0 / k;
        } else {
            for (int c = 0; c < k; ++c) out.at(i, static_cast<std::size_t>(c)) /= total;
        }
    }
    return out;
}

namespace {

constexpr double kClampLow = 0.01;
constexpr double kClampHigh = 0.99;
constexpr double kInitAgreementLow = 0.55;
constexpr double kInitAgreementHigh = 0.95;

double clamp(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

struct EmProblem {
    // per-row, per-class log emission sum over non-abstain LFs; beta and
    // abstain factors are constant in y and enter only the likelihood offset
    virtual double log_emission(std::size_t row, int y) const = 0;
    virtual ~EmProblem() = default;
};

// Log-likelihood offset that is constant across EM iterations: abstain and
// propensity factors.
double propensity_offset(const VoteMatrix& votes, const std::vector<double>& beta) {
    double offset = 0.0;
    for (std::size_t j = 0; j < votes.n_cols(); ++j) {
        std::size_t non_abstain = 0;
        for (std::size_t i = 0; i < votes.n_rows(); ++i)
            if (!votes.at(i, j).is_abstain()) ++non_abstain;
        const std::size_t abstains = votes.n_rows() - non_abstain;
        if (non_abstain > 0) offset += static_cast<double>(non_abstain) * std::log(beta[j]);
        if (abstains > 0) offset += static_cast<double>(abstains) * std::log(1.0 - beta[j]);
    }
    return offset;
}

std::vector<double> empirical_propensity(const VoteMatrix& votes) {
    std::vector<double> beta(votes.n_cols(), 0.0);
    if (votes.n_rows() == 0) return beta;
    for (std::size_t j = 0; j < votes.n_cols(); ++j) {
        std::size_t cnt = 0;
        for (std::size_t i = 0; i < votes.n_rows(); ++i)
            if (!votes.at(i, j).is_abstain()) ++cnt;
        beta[j] = static_cast<double>(cnt) / static_cast<double>(votes.n_rows());
    }
    return beta;
}

}  // namespace

NBParams naive_bayes_fit(const VoteMatrix& votes, int k, const EmOptions& options,
                         FitTrace* trace) {
    if (k < 2) throw Error(ErrorCode::InvalidArgument, "naive_bayes_fit needs k >= 2");
    votes.check_within(k);
    if (!votes.all_single_or_abstain())
        throw Error(ErrorCode::InvalidArgument,
                    "naive_bayes_fit expects single-class votes; use the partial label model");
    const std::size_t n = votes.n_rows();
    const std::size_t m = votes.n_cols();
    if (n < 1 || m < 1) throw Error(ErrorCode::InvalidArgument, "empty vote matrix");

    NBParams params;
    params.prior.assign(static_cast<std::size_t>(k), 1.0 / k);
    params.propensity = empirical_propensity(votes);

    const double alpha_lo = 1.0 / k + 0.01;
    const double alpha_hi = kClampHigh;

    std::vector<std::size_t> counts(m, 0);
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t i = 0; i < n; ++i)
            if (!votes.at(i, j).is_abstain()) ++counts[j];

    if (std::all_of(counts.begin(), counts.end(), [](std::size_t c) { return c == 0; })) {
        params.accuracy.assign(m, clamp(0.75, alpha_lo, alpha_hi));
        params.degenerate = true;
        if (trace) trace->iterations = 0;
        return params;
    }

    // init accuracies from soft majority-vote agreement
    const ProbLabels mv = majority_vote(votes, k);
    params.accuracy.assign(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        if (counts[j] == 0) {
            params.accuracy[j] = clamp(0.75, alpha_lo, alpha_hi);
            continue;
        }
        double agree = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const Vote& v = votes.at(i, j);
            if (!v.is_abstain()) agree += mv.at(i, static_cast<std::size_t>(v.single() - 1));
        }
        agree /= static_cast<double>(counts[j]);
        params.accuracy[j] =
            clamp(clamp(agree, kInitAgreementLow, kInitAgreementHigh), alpha_lo, alpha_hi);
    }

    const double offset = propensity_offset(votes, params.propensity);
    ProbLabels post(n, static_cast<std::size_t>(k));
    double prev_ll = -std::numeric_limits<double>::infinity();

    for (std::size_t iter = 0; iter < options.max_iters; ++iter) {
        // E-step and log-likelihood
        double ll = offset;
        for (std::size_t i = 0; i < n; ++i) {
            double mx = -std::numeric_limits<double>::infinity();
            std::vector<double> logw(static_cast<std::size_t>(k),
                                     -std::numeric_limits<double>::infinity());
            for (int y = 0; y < k; ++y) {
                if (params.prior[static_cast<std::size_t>(y)] <= 0.0) continue;
                double w = std::log(params.prior[static_cast<std::size_t>(y)]);
                for (std::size_t j = 0; j < m; ++j) {
                    const Vote& v = votes.at(i, j);
                    if (v.is_abstain()) continue;
                    const double a = params.accuracy[j];
                    w += std::log(v.single() == y + 1 ? a : (1.0 - a) / (k - 1));
                }
                logw[static_cast<std::size_t>(y)] = w;
                mx = std::max(mx, w);
            }
            double sum = 0.0;
            for (int y = 0; y < k; ++y)
                sum += std::exp(logw[static_cast<std::size_t>(y)] - mx);
            ll += mx + std::log(sum);
            for (int y = 0; y < k; ++y)
                post.at(i, static_cast<std::size_t>(y)) =
                    std::exp(logw[static_cast<std::size_t>(y)] - mx) / sum;
        }
        if (trace) trace->log_likelihood.push_back(ll);
        if (ll < prev_ll - 1e-7 * (1.0 + std::abs(prev_ll)))
            throw Error(ErrorCode::Internal, "EM log-likelihood decreased");
        prev_ll = ll;

        // M-step
        double delta = 0.0;
        for (int y = 0; y < k; ++y) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += post.at(i, static_cast<std::size_t>(y));
            s /= static_cast<double>(n);
            delta = std::max(delta, std::abs(s - params.prior[static_cast<std::size_t>(y)]));
            params.prior[static_cast<std::size_t>(y)] = s;
        }
        for (std::size_t j = 0; j < m; ++j) {
            if (counts[j] == 0) continue;
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const Vote& v = votes.at(i, j);
                if (!v.is_abstain()) s += post.at(i, static_cast<std::size_t>(v.single() - 1));
            }
            const double updated = clamp(s / static_cast<double>(counts[j]), alpha_lo, alpha_hi);
            delta = std::max(delta, std::abs(updated - params.accuracy[j]));
            params.accuracy[j] = updated;
        }
        if (trace) trace->iterations = iter + 1;
        if (delta < options.tol) break;
    }
    return params;
}

ProbLabels naive_bayes_predict(const VoteMatrix& votes, const NBParams& params) {
    const int k = params.n_classes();
    if (k < 2) throw Error(ErrorCode::InvalidArgument, "params need k >= 2");
    votes.check_within(k);
    if (!votes.all_single_or_abstain())
        throw Error(ErrorCode::InvalidArgument, "naive_bayes_predict expects single-class votes");
    if (params.accuracy.size() != votes.n_cols())
        throw Error(ErrorCode::InvalidArgument, "params cover a different number of LFs");

    const std::size_t n = votes.n_rows();
    ProbLabels post(n, static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> logw(static_cast<std::size_t>(k),
                                 -std::numeric_limits<double>::infinity());
        double mx = -std::numeric_limits<double>::infinity();
        for (int y = 0; y < k; ++y) {
            if (params.prior[static_cast<std::size_t>(y)] <= 0.0) continue;
            double w = std::log(params.prior[static_cast<std::size_t>(y)]);
            for (std::size_t j = 0; j < votes.n_cols(); ++j) {
                const Vote& v = votes.at(i, j);
                if (v.is_abstain()) continue;
                const double a = params.accuracy[j];
                w += std::log(v.single() == y + 1 ? a : (1.0 - a) / (k - 1));
            }
            logw[static_cast<std::size_t>(y)] = w;
            mx = std::max(mx, w);
        }
        if (!std::isfinite(mx)) {
            for (int y = 0; y < k; ++y)
                post.at(i, static_cast<std::size_t>(y)) = 1.0 / k;
            continue;
        }
        double sum = 0.0;
        for (int y = 0; y < k; ++y) sum += std::exp(logw[static_cast<std::size_t>(y)] - mx);
        for (int y = 0; y < k; ++y)
            post.at(i, static_cast<std::size_t>(y)) =
                std::exp(logw[static_cast<std::size_t>(y)] - mx) / sum;
    }
    post.check();
    return post;
}

std::vector<std::vector<double>> pairwise_moments(const SignedVotes& votes) {
    const std::size_t n = votes.size();
    const std::size_t m = n == 0 ? 0 : votes[0].size();
    for (const auto& row : votes) {
        if (row.size() != m) throw Error(ErrorCode::InvalidArgument, "ragged vote matrix");
        for (int v : row)
            if (v < -1 || v > 1)
                throw Error(ErrorCode::InvalidArgument, "signed votes must be -1, 0 or +1");
    }
    std::vector<std::vector<double>> moments(m, std::vector<double>(m, 0.0));
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t l = j + 1; l < m; ++l) {
            double sum = 0.0;
            std::size_t cnt = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (votes[i][j] != 0 && votes[i][l] != 0) {
                    sum += static_cast<double>(votes[i][j] * votes[i][l]);
                    ++cnt;
                }
            }
            const double mjl = cnt == 0 ? 0.0 : sum / static_cast<double>(cnt);
            moments[j][l] = mjl;
            moments[l][j] = mjl;
        }
    }
    return moments;
}

TripletParams triplet_from_moments(const std::vector<std::vector<double>>& moments,
                                   double class_balance) {
    const std::size_t m = moments.size();
    if (m < 3) throw Error(ErrorCode::InvalidArgument, "triplet method needs at least 3 LFs");
    for (const auto& row : moments)
        if (row.size() != m) throw Error(ErrorCode::InvalidArgument, "moment matrix must be square");
    if (!(class_balance > 0.0 && class_balance < 1.0))
        throw Error(ErrorCode::InvalidArgument, "class balance must be in (0,1)");

    TripletParams params;
    params.class_balance = class_balance;
    params.accuracies.assign(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        std::vector<double> estimates;
        for (std::size_t l = 0; l < m; ++l) {
            if (l == j) continue;
            for (std::size_t s = l + 1; s < m; ++s) {
                if (s == j) continue;
                if (std::abs(moments[l][s]) < 1e-8) continue;  // unusable triplet
                const double sq = std::abs(moments[j][l] * moments[j][s] / moments[l][s]);
                estimates.push_back(clamp(std::sqrt(sq), kClampLow, kClampHigh));
            }
        }
        if (estimates.empty())
            throw Error(ErrorCode::InvalidArgument,
                        "unidentifiable: no usable triplet for LF " + std::to_string(j));
        std::sort(estimates.begin(), estimates.end());
        const std::size_t mid = estimates.size() / 2;
        params.accuracies[j] = estimates.size() % 2 == 1
                                   ? estimates[mid]
                                   : 0.5 * (estimates[mid - 1] + estimates[mid]);
    }
    return params;
}

TripletParams triplet_fit(const SignedVotes& votes, double class_balance) {
    return triplet_from_moments(pairwise_moments(votes), class_balance);
}

ProbLabels triplet_predict(const SignedVotes& votes, const TripletParams& params) {
    const std::size_t n = votes.size();
    const std::size_t m = params.accuracies.size();
    ProbLabels out(n, 2);
    const double p = params.class_balance;
    for (std::size_t i = 0; i < n; ++i) {
        if (votes[i].size() != m)
            throw Error(ErrorCode::InvalidArgument, "params cover a different number of LFs");
        double log_pos = std::log(p);
        double log_neg = std::log(1.0 - p);
        for (std::size_t j = 0; j < m; ++j) {
            const int v = votes[i][j];
            if (v == 0) continue;
            const double correct = (1.0 + params.accuracies[j]) / 2.0;
            if (v > 0) {
                log_pos += std::log(correct);
                log_neg += std::log(1.0 - correct);
            } else {
                log_pos += std::log(1.0 - correct);
                log_neg += std::log(correct);
            }
        }
        const double mx = std::max(log_pos, log_neg);
        const double zp = std::exp(log_pos - mx);
        const double zn = std::exp(log_neg - mx);
        out.at(i, 0) = zp / (zp + zn);
        out.at(i, 1) = zn / (zp + zn);
    }
    out.check();
    return out;
}

SignedVotes to_signed_votes(const VoteMatrix& votes) {
    votes.check_within(2);
    SignedVotes out(votes.n_rows(), std::vector<int>(votes.n_cols(), 0));
    for (std::size_t i = 0; i < votes.n_rows(); ++i) {
        for (std::size_t j = 0; j < votes.n_cols(); ++j) {
            const Vote& v = votes.at(i, j);
            if (v.is_abstain()) continue;
            if (!v.is_single())
                throw Error(ErrorCode::InvalidArgument,
                            "signed votes require single-class entries");
            out[i][j] = v.single() == 1 ? 1 : -1;
        }
    }
    return out;
}

ProbLabels partial_label_fit_predict(const VoteMatrix& votes, int k, const EmOptions& options,
                                     FitTrace* trace, PartialParams* fitted) {
    if (k < 2) throw Error(ErrorCode::InvalidArgument, "partial label model needs k >= 2");
    votes.check_within(k);
    const std::size_t n = votes.n_rows();
    const std::size_t m = votes.n_cols();
    if (n < 1 || m < 1) throw Error(ErrorCode::InvalidArgument, "empty vote matrix");

    // observed vocabulary of vote sets per LF
    std::vector<std::vector<Vote>> vocab(m);
    std::vector<std::size_t> counts(m, 0);
    for (std::size_t j = 0; j < m; ++j) {
        std::map<Vote, bool> seen;
        for (std::size_t i = 0; i < n; ++i) {
            const Vote& v = votes.at(i, j);
            if (v.is_abstain()) continue;
            ++counts[j];
            if (!seen.count(v)) {
                seen.emplace(v, true);
                vocab[j].push_back(v);
            }
        }
    }
    // members-per-class bookkeeping: how many observed sets contain y
    std::vector<std::vector<int>> contain(m, std::vector<int>(static_cast<std::size_t>(k), 0));
    for (std::size_t j = 0; j < m; ++j)
        for (const Vote& s : vocab[j])
            for (int c : s.classes()) contain[j][static_cast<std::size_t>(c - 1)] += 1;

    std::vector<double> beta = empirical_propensity(votes);
    std::vector<double> prior(static_cast<std::size_t>(k), 1.0 / k);

    const double gamma_lo = 1.0 / k + 0.01;
    const double gamma_hi = kClampHigh;

    if (std::all_of(counts.begin(), counts.end(), [](std::size_t c) { return c == 0; })) {
        ProbLabels out(n, static_cast<std::size_t>(k));
        for (std::size_t i = 0; i < n; ++i)
            for (int y = 0; y < k; ++y) out.at(i, static_cast<std::size_t>(y)) = 1.0 / k;
        if (trace) trace->iterations = 0;
        return out;
    }

    // init from soft majority-vote agreement; full-domain sets carry no
    // information and are ignored for initialization
    VoteMatrix informative(n, m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            const Vote& v = votes.at(i, j);
            informative.at(i, j) =
                static_cast<int>(v.classes().size()) == k ? Vote::abstain() : v;
        }
    const ProbLabels mv = majority_vote(informative, k);
    std::vector<double> gamma(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        if (counts[j] == 0) {
            gamma[j] = clamp(0.75, gamma_lo, gamma_hi);
            continue;
        }
        double agree = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const Vote& v = votes.at(i, j);
            if (v.is_abstain()) continue;
            double mass = 0.0;
            for (int c : v.classes()) mass += mv.at(i, static_cast<std::size_t>(c - 1));
            agree += mass;
        }
        agree /= static_cast<double>(counts[j]);
        gamma[j] = clamp(clamp(agree, kInitAgreementLow, kInitAgreementHigh), gamma_lo, gamma_hi);
    }

    // emission g_j(S | y) over the observed vocabulary
    auto log_emission = [&](std::size_t j, const Vote& s, int y) {
        const int plus = contain[j][static_cast<std::size_t>(y - 1)];
        const int minus = static_cast<int>(vocab[j].size()) - plus;
        if (s.contains(y)) return std::log(gamma[j] / static_cast<double>(plus));
        return std::log((1.0 - gamma[j]) / static_cast<double>(minus));
    };

    const double offset = propensity_offset(votes, beta);
    ProbLabels post(n, static_cast<std::size_t>(k));

    auto e_step = [&]() {
        double ll = offset;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> logw(static_cast<std::size_t>(k),
                                     -std::numeric_limits<double>::infinity());
            double mx = -std::numeric_limits<double>::infinity();
            for (int y = 0; y < k; ++y) {
                if (prior[static_cast<std::size_t>(y)] <= 0.0) continue;
                double w = std::log(prior[static_cast<std::size_t>(y)]);
                for (std::size_t j = 0; j < m; ++j) {
                    const Vote& v = votes.at(i, j);
                    if (v.is_abstain()) continue;
                    w += log_emission(j, v, y + 1);
                }
                logw[static_cast<std::size_t>(y)] = w;
                mx = std::max(mx, w);
            }
            double sum = 0.0;
            for (int y = 0; y < k; ++y) sum += std::exp(logw[static_cast<std::size_t>(y)] - mx);
            ll += mx + std::log(sum);
            for (int y = 0; y < k; ++y)
                post.at(i, static_cast<std::size_t>(y)) =
                    std::exp(logw[static_cast<std::size_t>(y)] - mx) / sum;
        }
        return ll;
    };

    double prev_ll = -std::numeric_limits<double>::infinity();
    for (std::size_t iter = 0; iter < options.max_iters; ++iter) {
        const double ll = e_step();
        if (trace) trace->log_likelihood.push_back(ll);
        if (ll < prev_ll - 1e-7 * (1.0 + std::abs(prev_ll)))
            throw Error(ErrorCode::Internal, "EM log-likelihood decreased");
        prev_ll = ll;

        double delta = 0.0;
        for (int y = 0; y < k; ++y) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += post.at(i, static_cast<std::size_t>(y));
            s /= static_cast<double>(n);
            delta = std::max(delta, std::abs(s - prior[static_cast<std::size_t>(y)]));
            prior[static_cast<std::size_t>(y)] = s;
        }
        for (std::size_t j = 0; j < m; ++j) {
            if (counts[j] == 0) continue;
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const Vote& v = votes.at(i, j);
                if (v.is_abstain()) continue;
                for (int c : v.classes()) s += post.at(i, static_cast<std::size_t>(c - 1));
            }
            const double updated = clamp(s / static_cast<double>(counts[j]), gamma_lo, gamma_hi);
            delta = std::max(delta, std::abs(updated - gamma[j]));
            gamma[j] = updated;
        }
        if (trace) trace->iterations = iter + 1;
        if (delta < options.tol) break;
    }
    e_step();  // posterior at the final parameters
    if (fitted) {
        fitted->prior = prior;
        fitted->accuracy = gamma;
        fitted->propensity = beta;
    }
    post.check();
    return post;
}

}  // namespace pws
