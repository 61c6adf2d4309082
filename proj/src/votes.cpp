#include "votes.hpp"

#include <algorithm>

#include "error.hpp"

namespace pws {

Vote::Vote(int class_id) {
    if (class_id < 1) throw Error(ErrorCode::InvalidArgument, "class ids are 1-based");
    classes_ = {class_id};
}

Vote::Vote(std::vector<int> class_set) : classes_(std::move(class_set)) {
    for (int c : classes_)
        if (c < 1) throw Error(ErrorCode::InvalidArgument, "class ids are 1-based");
    std::sort(classes_.begin(), classes_.end());
    classes_.erase(std::unique(classes_.begin(), classes_.end()), classes_.end());
}

int Vote::single() const {
    if (classes_.size() != 1)
        throw Error(ErrorCode::InvalidArgument, "vote is not a single class");
    return classes_[0];
}

bool Vote::contains(int class_id) const {
    return std::binary_search(classes_.begin(), classes_.end(), class_id);
}

std::string Vote::render() const {
    if (classes_.empty()) return "0";
    std::string out;
    for (std::size_t i = 0; i < classes_.size(); ++i) {
        if (i) out.push_back('|');
        out += std::to_string(classes_[i]);
    }
    return out;
}

Vote Vote::parse(const std::string& text) {
    if (text.empty()) throw Error(ErrorCode::Parse, "empty vote");
    if (text == "0") return Vote();
    std::vector<int> classes;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto bar = text.find('|', start);
        const std::string part = text.substr(start, bar == std::string::npos ? bar : bar - start);
        try {
            std::size_t used = 0;
            const int v = std::stoi(part, &used);
            if (used != part.size()) throw std::invalid_argument(part);
            classes.push_back(v);
        } catch (const std::exception&) {
            throw Error(ErrorCode::Parse, "bad vote token: \"" + part + "\"");
        }
        if (bar == std::string::npos) break;
        start = bar + 1;
    }
    return Vote(std::move(classes));
}

void Vote::check_within(int k) const {
    for (int c : classes_)
        if (c < 1 || c > k)
            throw Error(ErrorCode::InvalidArgument,
                        "class " + std::to_string(c) + " outside 1.." + std::to_string(k));
}

VoteMatrix::VoteMatrix(std::size_t n_rows, std::size_t n_cols)
    : n_rows_(n_rows), n_cols_(n_cols), votes_(n_rows * n_cols) {}

Vote& VoteMatrix::at(std::size_t row, std::size_t col) {
    if (row >= n_rows_ || col >= n_cols_)
        throw Error(ErrorCode::InvalidArgument, "vote index out of range");
    return votes_[row * n_cols_ + col];
}

const Vote& VoteMatrix::at(std::size_t row, std::size_t col) const {
    if (row >= n_rows_ || col >= n_cols_)
        throw Error(ErrorCode::InvalidArgument, "vote index out of range");
    return votes_[row * n_cols_ + col];
}

void VoteMatrix::check_within(int k) const {
    for (const Vote& v : votes_) v.check_within(k);
}

bool VoteMatrix::all_single_or_abstain() const {
    return std::all_of(votes_.begin(), votes_.end(),
                       [](const Vote& v) { return !v.is_partial(); });
}

}  // namespace pws
