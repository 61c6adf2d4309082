#pragma once

#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "dataset.hpp"
#include "query.hpp"

namespace pws {

// A parsed prompt template. Placeholders are written "[[key]]" with key in
// [A-Za-z0-9_]+; a literal "[[" is escaped as "[[[[". Substitution is one
// left-to-right pass over the original template; substituted values are
// never re-scanned.
class TemplateText {
public:
    explicit TemplateText(std::string source);

    const std::string& source() const { return source_; }
    const std::vector<std::string>& keys() const { return keys_; }

    // Renders with values drawn from the dataset row.
    std::string render(const Dataset& d, std::size_t row) const;
    // Renders with an explicit substitution function.
    std::string render_with(const std::vector<std::string>& values) const;

private:
    struct Piece {
        std::string literal;  // emitted before the placeholder
        int key_index = -1;   // -1: no placeholder follows (tail piece)
    };
    std::string source_;
    std::vector<Piece> pieces_;
    std::vector<std::string> keys_;  // distinct, in order of first appearance
};

// Text template; yields a RankedQuery iff answer_choices is present.
// Placeholders are allowed inside answer choices and resolve per row.
struct StringTemplate {
    TemplateText text;
    std::optional<std::vector<TemplateText>> answer_choices;
    GenParams gen;

    StringTemplate(std::string tmpl,
                   std::optional<std::vector<std::string>> choices = std::nullopt,
                   GenParams gen_params = {});
};

// Caption template for image payloads: the cartesian expansion of the slots
// over the caption text yields the ranked candidates.
struct ImageTemplate {
    std::vector<std::pair<std::string, std::vector<std::string>>> slots;
    TemplateText caption;
    std::string image_column = "image";

    ImageTemplate(std::vector<std::pair<std::string, std::vector<std::string>>> slot_values,
                  std::string caption_template, std::string image_col = "image");

    // Candidate captions in slot-declaration order.
    std::vector<std::string> expand_candidates() const;
};

using Template = std::variant<StringTemplate, ImageTemplate>;

Query apply(const StringTemplate& t, const Dataset& d, std::size_t row);
RankedQuery apply_image(const ImageTemplate& t, const Dataset& d, std::size_t row);
Query apply(const Template& t, const Dataset& d, std::size_t row);

// Row i of the dataset produces query i; the first failing row aborts with
// its index.
std::vector<Query> apply_to_dataset(const Template& t, const Dataset& d);

}  // namespace pws
