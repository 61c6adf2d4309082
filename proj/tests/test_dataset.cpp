#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "dataset.hpp"
#include "error.hpp"
#include "test_util.hpp"

using namespace pws;
using testutil::TempDir;

TEST_CASE("load_csv parses a simple table") {
    TempDir tmp;
    const auto p = tmp.write("d.csv", "text,label\na,0\nb,1\n");
    Dataset d = load_csv(p);
    CHECK(d.n_rows() == 2);
    CHECK(d.column_names() == std::vector<std::string>{"text", "label"});
    CHECK(d.column("text").kind == ColumnKind::text);
    // untyped columns default to text
    CHECK(d.column("label").kind == ColumnKind::text);
    CHECK(d.cell_text(0, "text") == "a");
    CHECK(d.cell_text(1, "label") == "1");
}

TEST_CASE("load_csv honors type hints") {
    TempDir tmp;
    const auto p = tmp.write("d.csv", "text,label\na,0\nb,1\n");
    Dataset d = load_csv(p, {{"label", ColumnKind::integer}});
    CHECK(d.column("label").kind == ColumnKind::integer);
    CHECK(d.column("label").integers == std::vector<std::int64_t>{0, 1});
}

TEST_CASE("load_csv rejects an empty file") {
    TempDir tmp;
    const auto p = tmp.write("empty.csv", "");
    CHECK_THROWS_WITH_AS(load_csv(p), doctest::Contains("no header"), Error);
}

TEST_CASE("load_csv handles quoted fields with commas") {
    TempDir tmp;
    const auto p = tmp.write("q.csv", "a,b\n\"x, y\",z\n");
    Dataset d = load_csv(p);
    CHECK(d.cell_text(0, "a") == "x, y");
    CHECK(d.cell_text(0, "b") == "z");
}

TEST_CASE("load_csv handles quote escapes and embedded newlines") {
    TempDir tmp;
    const auto p = tmp.write("q.csv", "a\n\"he said \"\"hi\"\"\"\n\"line1\nline2\"\n");
    Dataset d = load_csv(p);
    CHECK(d.n_rows() == 2);
    CHECK(d.cell_text(0, "a") == "he said \"hi\"");
    CHECK(d.cell_text(1, "a") == "line1\nline2");
}

TEST_CASE("load_csv reports ragged rows with their record number") {
    TempDir tmp;
    const auto p = tmp.write("r.csv", "a,b\n1,2\n3\n");
    CHECK_THROWS_WITH_AS(load_csv(p), doctest::Contains("record 3"), Error);
}

TEST_CASE("load_csv rejects duplicate headers") {
    TempDir tmp;
    const auto p = tmp.write("dup.csv", "a,a\n1,2\n");
    CHECK_THROWS_WITH_AS(load_csv(p), doctest::Contains("duplicate header"), Error);
}

TEST_CASE("csv round-trip preserves values") {
    TempDir tmp;
    const auto p = tmp.write("d.csv",
                             "text,score\n\"comma, field\",1.5\n\"quote \"\" inside\",-2\nplain,0.25\n");
    Dataset d = load_csv(p, {{"score", ColumnKind::real}});
    const auto out = tmp.file("out.csv");
    write_csv(d, out);
    Dataset d2 = load_csv(out, {{"score", ColumnKind::real}});
    CHECK(d == d2);
}

TEST_CASE("load_json builds columns from flat objects") {
    TempDir tmp;
    const auto p = tmp.write("d.json", R"([{"text":"a"},{"text":"b"}])");
    Dataset d = load_json(p);
    CHECK(d.n_rows() == 2);
    CHECK(d.cell_text(1, "text") == "b");
}

TEST_CASE("load_json of an empty array yields an empty dataset") {
    TempDir tmp;
    const auto p = tmp.write("d.json", "[]");
    Dataset d = load_json(p);
    CHECK(d.n_rows() == 0);
    CHECK(d.n_columns() == 0);
}

TEST_CASE("load_json rejects inconsistent keys") {
    TempDir tmp;
    const auto p = tmp.write("d.json", R"([{"a":1},{"b":2}])");
    CHECK_THROWS_WITH_AS(load_json(p), doctest::Contains("inconsistent keys"), Error);
}

TEST_CASE("load_json rejects nested objects") {
    TempDir tmp;
    const auto p = tmp.write("d.json", R"([{"a":{"b":1}}])");
    CHECK_THROWS_WITH_AS(load_json(p), doctest::Contains("nested"), Error);
}

TEST_CASE("load_json types numeric columns") {
    TempDir tmp;
    const auto p = tmp.write("d.json", R"([{"i":1,"r":1.5,"s":"x"},{"i":2,"r":2,"s":"y"}])");
    Dataset d = load_json(p);
    CHECK(d.column("i").kind == ColumnKind::integer);
    CHECK(d.column("r").kind == ColumnKind::real);
    CHECK(d.column("s").kind == ColumnKind::text);
}

TEST_CASE("split produces ceil-sized deterministic partitions") {
    TempDir tmp;
    std::string csv = "x\n";
    for (int i = 0; i < 10; ++i) csv += std::to_string(i) + "\n";
    Dataset d = load_csv(tmp.write("d.csv", csv));

    auto [head, tail] = split(d, 0.2, 7);
    CHECK(head.n_rows() == 2);
    CHECK(tail.n_rows() == 8);

    auto [head2, tail2] = split(d, 0.2, 7);
    CHECK(head == head2);
    CHECK(tail == tail2);

    auto [small, rest] = split(d, 0.05, 3);
    CHECK(small.n_rows() == 1);  // ceil(0.5)
    CHECK(rest.n_rows() == 9);
}

TEST_CASE("split is a partition of the row multiset") {
    TempDir tmp;
    std::string csv = "x\n";
    for (int i = 0; i < 23; ++i) csv += std::to_string(i % 7) + "\n";
    Dataset d = load_csv(tmp.write("d.csv", csv));

    for (std::uint64_t seed : {0ull, 1ull, 42ull, 1234567ull}) {
        auto [a, b] = split(d, 0.3, seed);
        std::multiset<std::string> all, parts;
        for (std::size_t i = 0; i < d.n_rows(); ++i) all.insert(d.cell_text(i, "x"));
        for (std::size_t i = 0; i < a.n_rows(); ++i) parts.insert(a.cell_text(i, "x"));
        for (std::size_t i = 0; i < b.n_rows(); ++i) parts.insert(b.cell_text(i, "x"));
        CHECK(all == parts);
        CHECK(a.n_rows() + b.n_rows() == d.n_rows());
    }
}

TEST_CASE("split rejects bad fractions") {
    TempDir tmp;
    Dataset d = load_csv(tmp.write("d.csv", "x\n1\n2\n"));
    CHECK_THROWS_AS(split(d, 0.0, 1), Error);
    CHECK_THROWS_AS(split(d, 1.0, 1), Error);
    CHECK_THROWS_AS(split(d, -0.5, 1), Error);
}

TEST_CASE("columns must be rectangular with unique names") {
    TypedColumn a{ColumnKind::text, {"x", "y"}, {}, {}};
    TypedColumn b{ColumnKind::text, {"z"}, {}, {}};
    CHECK_THROWS_AS(Dataset::from_columns({{"a", a}, {"b", b}}), Error);
    CHECK_THROWS_AS(Dataset::from_columns({{"a", a}, {"a", a}}), Error);
    CHECK_THROWS_AS(Dataset::from_columns({{"", a}}), Error);
}

TEST_CASE("type inference prefers integer then real then text") {
    CHECK(infer_column_kind({"1", "-2", "+3"}) == ColumnKind::integer);
    CHECK(infer_column_kind({"1", "2.5"}) == ColumnKind::real);
    CHECK(infer_column_kind({"1", "3e-1"}) == ColumnKind::real);
    CHECK(infer_column_kind({"1", "x"}) == ColumnKind::text);
    CHECK(infer_column_kind({}) == ColumnKind::text);
    CHECK(infer_column_kind({""}) == ColumnKind::text);

    TempDir tmp;
    const auto p = tmp.write("d.csv", "i,r,t\n1,1.5,x\n-2,2,y\n+3,3e-1,z\n");
    Dataset d = load_csv(p, {}, /*infer_unhinted=*/true);
    CHECK(d.column("i").integers == std::vector<std::int64_t>{1, -2, 3});
    CHECK(d.column("r").reals[2] == doctest::Approx(0.3));
    CHECK(d.column("t").kind == ColumnKind::text);
}
