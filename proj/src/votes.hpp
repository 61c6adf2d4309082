#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pws {

// One label vote: empty = abstain, one class = a vote, several classes = a
// partial vote narrowing the label set. Class ids are 1-based; members are
// kept sorted and unique.
class Vote {
public:
    Vote() = default;
    explicit Vote(int class_id);
    explicit Vote(std::vector<int> class_set);

    static Vote abstain() { return Vote(); }

    bool is_abstain() const { return classes_.empty(); }
    bool is_single() const { return classes_.size() == 1; }
    bool is_partial() const { return classes_.size() > 1; }
    int single() const;  // throws unless exactly one class
    const std::vector<int>& classes() const { return classes_; }
    bool contains(int class_id) const;

    // "0" for abstain, "2" for a class, "1|3" for a set.
    std::string render() const;
    static Vote parse(const std::string& text);

    void check_within(int k) const;  // all ids in 1..k

    bool operator==(const Vote&) const = default;
    auto operator<=>(const Vote&) const = default;

private:
    std::vector<int> classes_;
};

// n_examples x n_voters matrix of votes, row-major.
class VoteMatrix {
public:
    VoteMatrix() = default;
    VoteMatrix(std::size_t n_rows, std::size_t n_cols);

    std::size_t n_rows() const { return n_rows_; }
    std::size_t n_cols() const { return n_cols_; }
    Vote& at(std::size_t row, std::size_t col);
    const Vote& at(std::size_t row, std::size_t col) const;

    // every vote is abstain or within 1..k
    void check_within(int k) const;
    bool all_single_or_abstain() const;

    bool operator==(const VoteMatrix&) const = default;

private:
    std::size_t n_rows_ = 0;
    std::size_t n_cols_ = 0;
    std::vector<Vote> votes_;
};

}  // namespace pws
