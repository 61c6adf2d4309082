#include "templates.hpp"

#include <algorithm>
#include <unordered_set>

#include "error.hpp"

namespace pws {

namespace {

bool is_key_char(char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
}

}  // namespace

TemplateText::TemplateText(std::string source) : source_(std::move(source)) {
    std::string literal;
    std::size_t i = 0;
    const std::size_t n = source_.size();
    while (i < n) {
        if (source_.compare(i, 4, "[[[[") == 0) {
            literal += "[[";
            i += 4;
            continue;
        }
        if (source_.compare(i, 2, "[[") == 0) {
            std::size_t j = i + 2;
            std::size_t start = j;
            while (j < n && is_key_char(source_[j])) ++j;
            if (j == start)
                throw Error(ErrorCode::Config,
                            "template: empty or invalid placeholder key at offset " +
                                std::to_string(i));
            if (source_.compare(j, 2, "]]") != 0)
                throw Error(ErrorCode::Config,
                            "template: unterminated placeholder \"" +
                                source_.substr(i, std::min<std::size_t>(12, n - i)) + "\"");
            const std::string key = source_.substr(start, j - start);
            auto it = std::find(keys_.begin(), keys_.end(), key);
            int idx;
            if (it == keys_.end()) {
                idx = static_cast<int>(keys_.size());
                keys_.push_back(key);
            } else {
                idx = static_cast<int>(it - keys_.begin());
            }
            pieces_.push_back({std::move(literal), idx});
            literal.clear();
            i = j + 2;
            continue;
        }
        literal.push_back(source_[i]);
        ++i;
    }
    pieces_.push_back({std::move(literal), -1});
}

std::string TemplateText::render_with(const std::vector<std::string>& values) const {
    if (values.size() != keys_.size())
        throw Error(ErrorCode::InvalidArgument, "template: wrong number of values");
    std::string out;
    for (const auto& p : pieces_) {
        out += p.literal;
        if (p.key_index >= 0) out += values[static_cast<std::size_t>(p.key_index)];
    }
    return out;
}

std::string TemplateText::render(const Dataset& d, std::size_t row) const {
    std::vector<std::string> values;
    values.reserve(keys_.size());
    for (const auto& key : keys_) {
        if (!d.has_column(key))
            throw Error(ErrorCode::InvalidArgument, "missing key: " + key);
        values.push_back(d.cell_text(row, key));
    }
    return render_with(values);
}

StringTemplate::StringTemplate(std::string tmpl,
                               std::optional<std::vector<std::string>> choices,
                               GenParams gen_params)
    : text(std::move(tmpl)), gen(gen_params) {
    if (choices) {
        if (choices->empty())
            throw Error(ErrorCode::Config, "answer_choices must be nonempty when present");
        std::vector<TemplateText> parsed;
        parsed.reserve(choices->size());
        for (auto& c : *choices) parsed.emplace_back(std::move(c));
        answer_choices = std::move(parsed);
    }
}

ImageTemplate::ImageTemplate(
    std::vector<std::pair<std::string, std::vector<std::string>>> slot_values,
    std::string caption_template, std::string image_col)
    : slots(std::move(slot_values)), caption(std::move(caption_template)),
      image_column(std::move(image_col)) {
    std::unordered_set<std::string> names;
    for (const auto& [name, values] : slots) {
        if (!names.insert(name).second)
            throw Error(ErrorCode::Config, "duplicate slot: " + name);
        if (values.empty())
            throw Error(ErrorCode::Config, "slot " + name + " has no fill values");
    }
    for (const auto& key : caption.keys()) {
        if (!names.count(key))
            throw Error(ErrorCode::Config, "caption placeholder has no slot: " + key);
    }
    if (expand_candidates().empty())
        throw Error(ErrorCode::Config, "caption expansion is empty");
}

std::vector<std::string> ImageTemplate::expand_candidates() const {
    // Cartesian product in slot-declaration order, first slot outermost.
    std::vector<std::size_t> pick(slots.size(), 0);
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    while (true) {
        std::vector<std::string> values;
        values.reserve(caption.keys().size());
        for (const auto& key : caption.keys()) {
            for (std::size_t s = 0; s < slots.size(); ++s) {
                if (slots[s].first == key) {
                    values.push_back(slots[s].second[pick[s]]);
                    break;
                }
            }
        }
        std::string cand = caption.render_with(values);
        if (seen.insert(cand).second) out.push_back(std::move(cand));
        // odometer over slots, last slot fastest
        std::size_t s = slots.size();
        while (s > 0) {
            --s;
            if (++pick[s] < slots[s].second.size()) break;
            pick[s] = 0;
            if (s == 0) return out;
        }
        if (slots.empty()) return out;
    }
}

Query apply(const StringTemplate& t, const Dataset& d, std::size_t row) {
    std::string prompt = t.text.render(d, row);
    if (!t.answer_choices) {
        CompletionQuery q;
        q.prompt = std::move(prompt);
        q.gen = t.gen;
        Query out = std::move(q);
        validate(out);
        return out;
    }
    RankedQuery q;
    q.payload = Payload::from_text(std::move(prompt));
    q.candidates.reserve(t.answer_choices->size());
    for (const auto& choice : *t.answer_choices) q.candidates.push_back(choice.render(d, row));
    Query out = std::move(q);
    validate(out);
    return out;
}

RankedQuery apply_image(const ImageTemplate& t, const Dataset& d, std::size_t row) {
    if (!d.has_column(t.image_column))
        throw Error(ErrorCode::InvalidArgument, "missing key: " + t.image_column);
    const TypedColumn& col = d.column(t.image_column);
    if (col.kind != ColumnKind::image_ref && col.kind != ColumnKind::text)
        throw Error(ErrorCode::InvalidArgument,
                    "column " + t.image_column + " is not an image reference column");
    RankedQuery q;
    q.payload = Payload::from_image_file(col.render(row));
    q.candidates = t.expand_candidates();
    validate(Query{q});
    return q;
}

Query apply(const Template& t, const Dataset& d, std::size_t row) {
    if (const auto* s = std::get_if<StringTemplate>(&t)) return apply(*s, d, row);
    return apply_image(std::get<ImageTemplate>(t), d, row);
}

std::vector<Query> apply_to_dataset(const Template& t, const Dataset& d) {
    std::vector<Query> out;
    out.reserve(d.n_rows());
    for (std::size_t i = 0; i < d.n_rows(); ++i) {
        try {
            out.push_back(apply(t, d, i));
        } catch (const Error& e) {
            throw Error(e.code(), "row " + std::to_string(i) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace pws
