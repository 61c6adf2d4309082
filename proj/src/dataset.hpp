#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace pws {

enum class ColumnKind { text, integer, real, image_ref };

const char* column_kind_name(ColumnKind kind);
ColumnKind column_kind_from_name(const std::string& name);

// Homogeneous column. Text and image_ref values live in `text`; numeric
// columns use their typed vector.
struct TypedColumn {
    ColumnKind kind = ColumnKind::text;
    std::vector<std::string> text;
    std::vector<std::int64_t> integers;
    std::vector<double> reals;

    std::size_t size() const;
    // Canonical rendering: integers in decimal, reals shortest-round-trip.
    std::string render(std::size_t row) const;

    bool operator==(const TypedColumn&) const = default;
};

// Immutable columnar table of unlabeled examples. All columns share the same
// length; rows are addressed by index. Safe to share across threads.
class Dataset {
public:
    Dataset() = default;

    // Validates: unique nonempty names, equal column lengths.
    static Dataset from_columns(std::vector<std::pair<std::string, TypedColumn>> columns);

    std::size_t n_rows() const { return n_rows_; }
    std::size_t n_columns() const { return names_.size(); }
    const std::vector<std::string>& column_names() const { return names_; }
    bool has_column(const std::string& name) const;
    const TypedColumn& column(const std::string& name) const;
    std::string cell_text(std::size_t row, const std::string& name) const;

    Dataset take(const std::vector<std::size_t>& rows) const;

    bool operator==(const Dataset&) const = default;

private:
    std::vector<std::string> names_;
    std::vector<TypedColumn> columns_;
    std::size_t n_rows_ = 0;
};

// Unhinted columns default to text; with infer_unhinted they follow
// infer_column_kind instead.
Dataset load_csv(const std::string& path,
                 const std::map<std::string, ColumnKind>& type_hints = {},
                 bool infer_unhinted = false);

// integer iff every cell parses as an integer, else real iff every cell
// parses as a real, else text. Empty columns stay text.
ColumnKind infer_column_kind(const std::vector<std::string>& cells);
Dataset load_json(const std::string& path);
void write_csv(const Dataset& d, const std::string& path);

// Deterministic shuffle by seed; returns (ceil(fraction*n), rest). The two
// parts are disjoint, cover the input, and keep original row order.
std::pair<Dataset, Dataset> split(const Dataset& d, double fraction, std::uint64_t seed);

}  // namespace pws
