#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dataset.hpp"
#include "error.hpp"
#include "templates.hpp"
#include "test_util.hpp"

using namespace pws;
using testutil::TempDir;

namespace {

Dataset one_row(std::vector<std::pair<std::string, std::string>> cells) {
    std::vector<std::pair<std::string, TypedColumn>> cols;
    for (auto& [name, value] : cells)
        cols.emplace_back(name, TypedColumn{ColumnKind::text, {value}, {}, {}});
    return Dataset::from_columns(std::move(cols));
}

}  // namespace

TEST_CASE("string template with answer choices yields a ranked query") {
    StringTemplate t("Context: [[text]]\n\nIs the above text about weather?",
                     std::vector<std::string>{"Yes", "No"});
    Dataset d = one_row({{"text", "A pleasant day with a sunny sky."}});
    Query q = apply(t, d, 0);
    const auto& r = std::get<RankedQuery>(q);
    CHECK(r.payload.text ==
          "Context: A pleasant day with a sunny sky.\n\nIs the above text about weather?");
    CHECK(r.candidates == std::vector<std::string>{"Yes", "No"});
}

TEST_CASE("string template without choices yields a completion query") {
    StringTemplate t("Hello");
    Dataset d = one_row({{"text", "ignored"}});
    Query q = apply(t, d, 0);
    const auto& c = std::get<CompletionQuery>(q);
    CHECK(c.prompt == "Hello");
    CHECK(c.gen.max_tokens == 16);
    CHECK(c.gen.temperature == 0.0);
    CHECK_FALSE(c.gen.stop.has_value());
}

TEST_CASE("repeated placeholder substitutes each occurrence") {
    StringTemplate t("[[a]][[a]]");
    Dataset d = one_row({{"a", "x"}});
    CHECK(std::get<CompletionQuery>(apply(t, d, 0)).prompt == "xx");
}

TEST_CASE("literal double bracket escape") {
    StringTemplate t("a [[[[ b [[k]]");
    Dataset d = one_row({{"k", "v"}});
    CHECK(std::get<CompletionQuery>(apply(t, d, 0)).prompt == "a [[ b v");
}

TEST_CASE("substituted values are not re-scanned") {
    StringTemplate t("[[a]] end");
    Dataset d = one_row({{"a", "[[b]]"}});
    CHECK(std::get<CompletionQuery>(apply(t, d, 0)).prompt == "[[b]] end");
}

TEST_CASE("malformed placeholders are construction errors") {
    CHECK_THROWS_AS(StringTemplate("[[a b]]"), Error);
    CHECK_THROWS_AS(StringTemplate("[[]]"), Error);
    CHECK_THROWS_AS(StringTemplate("open [[abc"), Error);
}

TEST_CASE("missing key errors name the key") {
    StringTemplate t("[[nope]]");
    Dataset d = one_row({{"text", "x"}});
    CHECK_THROWS_WITH_AS(apply(t, d, 0), doctest::Contains("missing key: nope"), Error);
}

TEST_CASE("integer columns render canonically in prompts") {
    TypedColumn num{ColumnKind::integer, {}, {7}, {}};
    Dataset d = Dataset::from_columns({{"n", num}});
    StringTemplate t("n=[[n]]");
    CHECK(std::get<CompletionQuery>(apply(t, d, 0)).prompt == "n=7");
}

TEST_CASE("answer choices may contain per-row placeholders") {
    StringTemplate t("Pick for [[text]]", std::vector<std::string>{"[[opt1]]", "[[opt2]]"});
    Dataset d = one_row({{"text", "t"}, {"opt1", "alpha"}, {"opt2", "beta"}});
    const auto& r = std::get<RankedQuery>(apply(t, d, 0));
    CHECK(r.candidates == std::vector<std::string>{"alpha", "beta"});
}

TEST_CASE("image template expands the slot cartesian product in order") {
    TempDir tmp;
    const auto img = tmp.write("cat.png", "fakebytes");
    TypedColumn col{ColumnKind::image_ref, {img}, {}, {}};
    Dataset d = Dataset::from_columns({{"image", col}});

    ImageTemplate t({{"label", {"cat", "dog"}}}, "A photo of [[label]].");
    RankedQuery q = apply_image(t, d, 0);
    CHECK(q.payload.kind == Payload::Kind::image);
    CHECK_FALSE(q.payload.image_sha256.empty());
    CHECK(q.candidates == std::vector<std::string>{"A photo of cat.", "A photo of dog."});
}

TEST_CASE("single-value slot yields one candidate") {
    TempDir tmp;
    const auto img = tmp.write("x.png", "bytes");
    TypedColumn col{ColumnKind::image_ref, {img}, {}, {}};
    Dataset d = Dataset::from_columns({{"image", col}});
    ImageTemplate t({{"a", {"x"}}}, "[[a]]");
    CHECK(apply_image(t, d, 0).candidates == std::vector<std::string>{"x"});
}

TEST_CASE("two slots expand with the first slot outermost") {
    ImageTemplate t({{"a", {"1", "2"}}, {"b", {"p", "q"}}}, "[[a]],[[b]]");
    CHECK(t.expand_candidates() ==
          std::vector<std::string>{"1,p", "1,q", "2,p", "2,q"});
}

TEST_CASE("image template requires the image column") {
    Dataset d = one_row({{"text", "x"}});
    ImageTemplate t({{"a", {"x"}}}, "[[a]]", "image");
    CHECK_THROWS_WITH_AS(apply_image(t, d, 0), doctest::Contains("missing key: image"), Error);
}

TEST_CASE("apply_to_dataset preserves order and reports the failing row") {
    TempDir tmp;
    Dataset d = load_csv(tmp.write("d.csv", "text\nfirst\nsecond\nthird\n"));
    StringTemplate t("Say [[text]]");

    auto queries = apply_to_dataset(Template{t}, d);
    REQUIRE(queries.size() == 3);
    CHECK(std::get<CompletionQuery>(queries[1]).prompt == "Say second");
    for (std::size_t i = 0; i < d.n_rows(); ++i)
        CHECK(queries[i] == apply(Template{t}, d, i));

    Dataset empty = load_csv(tmp.write("e.csv", "text\n"));
    CHECK(apply_to_dataset(Template{t}, empty).empty());

    // a per-row failure carries the row index: row 2 holds an empty image path
    const auto f1 = tmp.write("a.png", "1");
    const auto f2 = tmp.write("b.png", "2");
    TypedColumn imgs2{ColumnKind::image_ref, {f1, f2, ""}, {}, {}};
    Dataset dimg = Dataset::from_columns({{"image", imgs2}});
    ImageTemplate it({{"a", {"x", "y"}}}, "[[a]]");
    CHECK_THROWS_WITH_AS(apply_to_dataset(Template{it}, dimg), doctest::Contains("row 2"), Error);
}

TEST_CASE("template skeleton is recoverable from the rendered prompt") {
    // substitution is literal: replacing values back recovers the skeleton
    StringTemplate t("A [[x]] B [[y]] C");
    Dataset d = one_row({{"x", "XVAL"}, {"y", "YVAL"}});
    std::string prompt = std::get<CompletionQuery>(apply(t, d, 0)).prompt;
    CHECK(prompt == "A XVAL B YVAL C");
    auto replace_once = [](std::string s, const std::string& from, const std::string& to) {
        const auto pos = s.find(from);
        REQUIRE(pos != std::string::npos);
        return s.replace(pos, from.size(), to);
    };
    prompt = replace_once(prompt, "XVAL", "[[x]]");
    prompt = replace_once(prompt, "YVAL", "[[y]]");
    CHECK(prompt == t.text.source());
}
