#include "dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include "canonical.hpp"
#include "error.hpp"
#include "rng.hpp"

namespace pws {

const char* column_kind_name(ColumnKind kind) {
    switch (kind) {
        case ColumnKind::text: return "text";
        case ColumnKind::integer: return "integer";
        case ColumnKind::real: return "real";
        case ColumnKind::image_ref: return "image_ref";
    }
    return "text";
}

ColumnKind column_kind_from_name(const std::string& name) {
    if (name == "text") return ColumnKind::text;
    if (name == "integer") return ColumnKind::integer;
    if (name == "real") return ColumnKind::real;
    if (name == "image_ref") return ColumnKind::image_ref;
    throw Error(ErrorCode::Config, "unknown column kind: " + name);
}

std::size_t TypedColumn::size() const {
    switch (kind) {
        case ColumnKind::integer: return integers.size();
        case ColumnKind::real: return reals.size();
        default: return text.size();
    }
}

std::string render_real(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) throw Error(ErrorCode::Internal, "real rendering failed");
    return std::string(buf, end);
}

std::string TypedColumn::render(std::size_t row) const {
    switch (kind) {
        case ColumnKind::integer: return std::to_string(integers.at(row));
        case ColumnKind::real: return render_real(reals.at(row));
        default: return text.at(row);
    }
}

Dataset Dataset::from_columns(std::vector<std::pair<std::string, TypedColumn>> columns) {
    Dataset d;
    std::unordered_set<std::string> seen;
    for (auto& [name, col] : columns) {
        if (name.empty()) throw Error(ErrorCode::InvalidArgument, "empty column name");
        if (!seen.insert(name).second)
            throw Error(ErrorCode::InvalidArgument, "duplicate column name: " + name);
        if (!d.names_.empty() && col.size() != d.n_rows_)
            throw Error(ErrorCode::InvalidArgument,
                        "column " + name + " has length " + std::to_string(col.size()) +
                            ", expected " + std::to_string(d.n_rows_));
        if (d.names_.empty()) d.n_rows_ = col.size();
        d.names_.push_back(name);
        d.columns_.push_back(std::move(col));
    }
    return d;
}

bool Dataset::has_column(const std::string& name) const {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
}

const TypedColumn& Dataset::column(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw Error(ErrorCode::InvalidArgument, "no such column: " + name);
    return columns_[static_cast<std::size_t>(it - names_.begin())];
}

std::string Dataset::cell_text(std::size_t row, const std::string& name) const {
    if (row >= n_rows_)
        throw Error(ErrorCode::InvalidArgument,
                    "row " + std::to_string(row) + " out of range (n_rows=" +
                        std::to_string(n_rows_) + ")");
    return column(name).render(row);
}

Dataset Dataset::take(const std::vector<std::size_t>& rows) const {
    std::vector<std::pair<std::string, TypedColumn>> out;
    out.reserve(names_.size());
    for (std::size_t c = 0; c < names_.size(); ++c) {
        const TypedColumn& src = columns_[c];
        TypedColumn col;
        col.kind = src.kind;
        for (std::size_t r : rows) {
            if (r >= n_rows_) throw Error(ErrorCode::InvalidArgument, "row index out of range");
            switch (src.kind) {
                case ColumnKind::integer: col.integers.push_back(src.integers[r]); break;
                case ColumnKind::real: col.reals.push_back(src.reals[r]); break;
                default: col.text.push_back(src.text[r]); break;
            }
        }
        out.emplace_back(names_[c], std::move(col));
    }
    return from_columns(std::move(out));
}

namespace {

bool parse_integer(const std::string& s, std::int64_t& out) {
    if (s.empty()) return false;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (*first == '+') ++first;  // from_chars accepts '-' but not '+'
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && first != last;
}

bool parse_real(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && first != last && std::isfinite(out);
}

TypedColumn make_column(ColumnKind kind, const std::vector<std::string>& cells,
                        const std::string& name) {
    TypedColumn col;
    col.kind = kind;
    switch (kind) {
        case ColumnKind::integer:
            col.integers.reserve(cells.size());
            for (std::size_t i = 0; i < cells.size(); ++i) {
                std::int64_t v;
                if (!parse_integer(cells[i], v))
                    throw Error(ErrorCode::Parse, "column " + name + ", row " + std::to_string(i) +
                                                      ": not an integer: \"" + cells[i] + "\"");
                col.integers.push_back(v);
            }
            break;
        case ColumnKind::real:
            col.reals.reserve(cells.size());
            for (std::size_t i = 0; i < cells.size(); ++i) {
                double v;
                if (!parse_real(cells[i], v))
                    throw Error(ErrorCode::Parse, "column " + name + ", row " + std::to_string(i) +
                                                      ": not a real: \"" + cells[i] + "\"");
                col.reals.push_back(v);
            }
            break;
        default:
            col.text = cells;
            break;
    }
    return col;
}

// RFC-4180 reader. Returns records of fields; quoted fields may contain
// commas, quotes ("" escape) and line breaks. Record numbers are 1-based
// with the header as record 1.
std::vector<std::vector<std::string>> read_csv_records(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open file: " + path);
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started_quoted = false;
    std::size_t i = 0;
    const std::size_t n = data.size();
    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_started_quoted = false;
    };
    auto end_record = [&] {
        end_field();
        records.push_back(std::move(record));
        record.clear();
    };
    while (i < n) {
        char c = data[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < n && data[i + 1] == '"') {
                    field.push_back('"');
                    i += 2;
                } else {
                    in_quotes = false;
                    ++i;
                }
            } else {
                field.push_back(c);
                ++i;
            }
            continue;
        }
        switch (c) {
            case '"':
                if (field.empty() && !field_started_quoted) {
                    in_quotes = true;
                    field_started_quoted = true;
                } else {
                    field.push_back(c);  // lenient: bare quote inside unquoted field
                }
                ++i;
                break;
            case ',':
                end_field();
                ++i;
                break;
            case '\r':
                if (i + 1 < n && data[i + 1] == '\n') ++i;
                end_record();
                ++i;
                break;
            case '\n':
                end_record();
                ++i;
                break;
            default:
                field.push_back(c);
                ++i;
                break;
        }
    }
    if (in_quotes)
        throw Error(ErrorCode::Parse, path + ": unterminated quoted field at record " +
                                          std::to_string(records.size() + 1));
    if (!field.empty() || !record.empty() || field_started_quoted) end_record();
    return records;
}

}  // namespace

ColumnKind infer_column_kind(const std::vector<std::string>& cells) {
    if (cells.empty()) return ColumnKind::text;
    bool all_int = true, all_real = true;
    std::int64_t iv;
    double rv;
    for (const auto& c : cells) {
        if (all_int && !parse_integer(c, iv)) all_int = false;
        if (!all_int && !parse_real(c, rv)) {
            all_real = false;
            break;
        }
    }
    if (all_int) return ColumnKind::integer;
    if (all_real) return ColumnKind::real;
    return ColumnKind::text;
}

Dataset load_csv(const std::string& path, const std::map<std::string, ColumnKind>& type_hints,
                 bool infer_unhinted) {
    auto records = read_csv_records(path);
    if (records.empty()) throw Error(ErrorCode::Parse, path + ": no header");

    const auto& header = records[0];
    std::unordered_set<std::string> seen;
    for (const auto& h : header) {
        if (h.empty()) throw Error(ErrorCode::Parse, path + ": empty header name");
        if (!seen.insert(h).second)
            throw Error(ErrorCode::Parse, path + ": duplicate header: " + h);
    }
    for (const auto& [name, kind] : type_hints) {
        if (!seen.count(name))
            throw Error(ErrorCode::Config, path + ": type hint for unknown column: " + name);
    }

    std::vector<std::vector<std::string>> cells(header.size());
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != header.size())
            throw Error(ErrorCode::Parse,
                        path + ": record " + std::to_string(r + 1) + " has " +
                            std::to_string(records[r].size()) + " fields, expected " +
                            std::to_string(header.size()));
        for (std::size_t c = 0; c < header.size(); ++c)
            cells[c].push_back(std::move(records[r][c]));
    }

    std::vector<std::pair<std::string, TypedColumn>> cols;
    cols.reserve(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) {
        auto hint = type_hints.find(header[c]);
        ColumnKind kind = hint != type_hints.end()
                              ? hint->second
                              : (infer_unhinted ? infer_column_kind(cells[c]) : ColumnKind::text);
        cols.emplace_back(header[c], make_column(kind, cells[c], header[c]));
    }
    return Dataset::from_columns(std::move(cols));
}

Dataset load_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open file: " + path);
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw Error(ErrorCode::Parse, path + ": " + e.what());
    }
    if (!j.is_array()) throw Error(ErrorCode::Parse, path + ": expected an array of objects");
    if (j.empty()) return Dataset();

    if (!j[0].is_object()) throw Error(ErrorCode::Parse, path + ": expected an array of objects");
    std::vector<std::string> keys;
    for (auto it = j[0].begin(); it != j[0].end(); ++it) keys.push_back(it.key());

    enum class JKind { unset, text, integer, real };
    std::vector<JKind> kinds(keys.size(), JKind::unset);
    std::vector<std::vector<std::string>> str_cells(keys.size());
    std::vector<std::vector<std::int64_t>> int_cells(keys.size());
    std::vector<std::vector<double>> real_cells(keys.size());

    for (std::size_t r = 0; r < j.size(); ++r) {
        const Json& obj = j[r];
        if (!obj.is_object())
            throw Error(ErrorCode::Parse, path + ": element " + std::to_string(r) + " is not an object");
        if (obj.size() != keys.size()) {
            std::string missing;
            for (const auto& k : keys)
                if (!obj.contains(k)) missing += (missing.empty() ? "" : ", ") + k;
            throw Error(ErrorCode::Parse, path + ": element " + std::to_string(r) +
                                              ": inconsistent keys" +
                                              (missing.empty() ? "" : " (missing: " + missing + ")"));
        }
        for (std::size_t c = 0; c < keys.size(); ++c) {
            if (!obj.contains(keys[c]))
                throw Error(ErrorCode::Parse, path + ": element " + std::to_string(r) +
                                                  ": inconsistent keys (missing: " + keys[c] + ")");
            const Json& v = obj[keys[c]];
            if (v.is_object() || v.is_array())
                throw Error(ErrorCode::Parse, path + ": element " + std::to_string(r) + ", key " +
                                                  keys[c] + ": nested values are not supported");
            JKind want;
            if (v.is_string())
                want = JKind::text;
            else if (v.is_number_integer() || v.is_number_unsigned())
                want = JKind::integer;
            else if (v.is_number_float())
                want = JKind::real;
            else
                throw Error(ErrorCode::Parse, path + ": element " + std::to_string(r) + ", key " +
                                                  keys[c] + ": unsupported value type");
            JKind& k = kinds[c];
            if (k == JKind::unset) k = want;
            if (k == JKind::integer && want == JKind::real) k = JKind::real;  // promote
            else if (k == JKind::real && want == JKind::integer) want = JKind::real;
            if ((k == JKind::text) != (want == JKind::text))
                throw Error(ErrorCode::Parse, path + ": element " + std::to_string(r) + ", key " +
                                                  keys[c] + ": mixed string and numeric values");
            if (v.is_string())
                str_cells[c].push_back(v.get<std::string>());
            else if (v.is_number_float())
                real_cells[c].push_back(v.get<double>());
            else {
                int_cells[c].push_back(v.get<std::int64_t>());
                real_cells[c].push_back(v.get<double>());
            }
        }
    }

    std::vector<std::pair<std::string, TypedColumn>> cols;
    for (std::size_t c = 0; c < keys.size(); ++c) {
        TypedColumn col;
        switch (kinds[c]) {
            case JKind::integer:
                col.kind = ColumnKind::integer;
                col.integers = std::move(int_cells[c]);
                break;
            case JKind::real:
                col.kind = ColumnKind::real;
                col.reals = std::move(real_cells[c]);
                break;
            default:
                col.kind = ColumnKind::text;
                col.text = std::move(str_cells[c]);
                break;
        }
        cols.emplace_back(keys[c], std::move(col));
    }
    return Dataset::from_columns(std::move(cols));
}

namespace {

std::string csv_escape(const std::string& s) {
    bool needs_quotes = s.find_first_of(",\"\r\n") != std::string::npos;
    if (!needs_quotes) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace

void write_csv(const Dataset& d, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot open file for writing: " + path);
    const auto& names = d.column_names();
    for (std::size_t c = 0; c < names.size(); ++c)
        out << (c ? "," : "") << csv_escape(names[c]);
    out << "\n";
    for (std::size_t r = 0; r < d.n_rows(); ++r) {
        for (std::size_t c = 0; c < names.size(); ++c)
            out << (c ? "," : "") << csv_escape(d.column(names[c]).render(r));
        out << "\n";
    }
    if (!out) throw Error(ErrorCode::Io, "write failed: " + path);
}

std::pair<Dataset, Dataset> split(const Dataset& d, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw Error(ErrorCode::InvalidArgument, "fraction must be in (0,1)");
    const std::size_t n = d.n_rows();
    if (n < 2) throw Error(ErrorCode::InvalidArgument, "split needs at least 2 rows");

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 gen(seed);
    for (std::size_t i = n - 1; i > 0; --i)
        std::swap(idx[i], idx[bounded_u64(gen, i + 1)]);

    const auto head_size = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
    std::vector<std::size_t> head(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(head_size));
    std::vector<std::size_t> tail(idx.begin() + static_cast<std::ptrdiff_t>(head_size), idx.end());
    std::sort(head.begin(), head.end());
    std::sort(tail.begin(), tail.end());
    return {d.take(head), d.take(tail)};
}

}  // namespace pws
