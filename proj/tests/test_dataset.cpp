#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "gammkit/dataset.hpp"
#include "gammkit/error.hpp"
#include "gammkit/simlab.hpp"

using namespace gammkit;
using data::ColumnKind;

TEST_CASE("smallest valid input") {
    const auto d = data::parse_csv("y,x\n1,2\n3,4\n5,6.5\n");
    CHECK(d.n_rows() == 3);
    CHECK(d.n_cols() == 2);
    CHECK(d.column("y").kind == ColumnKind::numeric);
    CHECK(d.column("x").numeric == std::vector<double>{2, 4, 6.5});
}

TEST_CASE("factor levels in first-appearance order") {
    const auto d = data::parse_csv("f\nb\na\nb\n");
    const auto& f = d.column("f");
    CHECK(f.kind == ColumnKind::factor);
    CHECK(f.levels == std::vector<std::string>{"b", "a"});
    CHECK(f.codes == std::vector<int>{0, 1, 0});
    const auto e = data::parse_csv("f\na\nb\na\n");
    CHECK(e.column("f").levels == std::vector<std::string>{"a", "b"});
}

TEST_CASE("booleans, quoting and BOM") {
    const auto d = data::parse_csv("\xEF\xBB\xBFname,flag\n\"a, \"\"quoted\"\"\",TRUE\nplain,FALSE\r\n");
    CHECK(d.column("name").levels.front() == "a, \"quoted\"");
    CHECK(d.column("flag").kind == ColumnKind::boolean);
    CHECK(d.column("flag").codes == std::vector<int>{1, 0});
}

TEST_CASE("ingestion errors") {
    CHECK_THROWS_AS((void)data::parse_csv(""), DataError);
    CHECK_THROWS_AS((void)data::parse_csv("a,b\n1\n"), DataError);
    CHECK_THROWS_AS((void)data::parse_csv("a,b\n1,\n"), DataError);
    CHECK_THROWS_AS((void)data::parse_csv("a\n1\ninf\n"), DataError);
    CHECK_THROWS_AS((void)data::parse_csv("a,a\n1,2\n"), DataError);
    CHECK_THROWS_WITH_AS((void)data::parse_csv("a\n1\n", data::parse_schema(R"({"zzz": {"kind": "factor"}})")),
                         doctest::Contains("zzz"), DataError);
    CHECK_THROWS_AS((void)data::load_csv("/nonexistent/file.csv"), DataError);
}

TEST_CASE("schema overrides") {
    const auto schema = data::parse_schema(R"({
        "g": {"levels": ["lo", "mid", "hi"]},
        "x": {"range": [0, 10], "standardize": true},
        "n": {"kind": "factor"}
    })");
    const auto d = data::parse_csv("g,x,n\nmid,1,1\nhi,20,2\nlo,3,1\nhi,5,2\n", schema);
    CHECK(d.n_rows() == 3);  // x=20 filtered
    const auto& g = d.column("g");
    CHECK(g.kind == ColumnKind::ordered_factor);
    CHECK(g.levels == std::vector<std::string>{"lo", "mid", "hi"});
    CHECK(g.codes == std::vector<int>{1, 0, 2});
    const auto& x = d.column("x");
    double mean = 0.0;
    for (double v : x.numeric) mean += v;
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(d.column("n").kind == ColumnKind::factor);
    CHECK_THROWS_AS((void)data::parse_csv("g\nzzz\n", data::parse_schema(R"({"g": {"levels": ["a"]}})")), DataError);
}

TEST_CASE("csv round trip is lossless") {
    const std::vector<double> v = {0.1, 1.0 / 3.0, -2.5e-300, 123456789.123456789, 6.02214076e23};
    const data::Dataset d({data::Column::make_numeric("v", v),
                           data::Column::make_factor("f", std::vector<std::string>{"a", "b,c", "a", "d", "e"}),
                           data::Column::make_boolean("s", {true, false, false, true, false})});
    const auto text = data::to_csv(d);
    const auto back = data::parse_csv(text);
    CHECK(back.column("v").numeric == v);
    CHECK(back.column("f").levels == d.column("f").levels);
    CHECK(back.column("s").kind == ColumnKind::boolean);
    CHECK(data::to_csv(back) == text);
}

TEST_CASE("series index from flags") {
    const auto idx = data::build_series_index(std::vector<bool>{true, false, false, true, false});
    CHECK(idx.series_id == std::vector<int>{0, 0, 0, 1, 1});
    CHECK(idx.series_lengths == std::vector<std::size_t>{3, 2});
    CHECK(idx.series_starts() == std::vector<std::size_t>{0, 3});

    const auto all = data::build_series_index(std::vector<bool>(4, true));
    CHECK(all.n_series() == 4);
    CHECK(all.series_lengths == std::vector<std::size_t>{1, 1, 1, 1});

    CHECK_THROWS_AS((void)data::build_series_index(std::vector<bool>{false, true}), DataError);
    const auto d = data::parse_csv("x,s\n1,2\n2,3\n");
    CHECK_THROWS_AS((void)data::build_series_index(d, "s"), DataError);
    CHECK_THROWS_AS((void)data::build_series_index(d, "missing"), DataError);
}

TEST_CASE("series index on the naming scenario") {
    const auto sim = simlab::generate(simlab::naming_scenario(1));
    const auto idx = data::build_series_index(sim.data, "NewTimeSeries");
    CHECK(idx.n_series() == 20);
    for (auto len : idx.series_lengths) CHECK(len == 150);
}

TEST_CASE("pitch CSV loads with a boolean start column") {
    const auto sim = simlab::generate(simlab::pitch_scenario(2));
    const auto path = std::filesystem::temp_directory_path() / "gammkit_test_pitch.csv";
    data::write_csv(sim.data, path);
    const auto d = data::load_csv(path);
    std::filesystem::remove(path);
    CHECK(d.n_rows() == 48000);
    CHECK(d.column("NewTimeSeries").kind == ColumnKind::boolean);
    const auto idx = data::build_series_index(d, "NewTimeSeries");
    CHECK(idx.n_series() == 480);
    std::size_t total = 0;
    for (auto len : idx.series_lengths) total += len;
    CHECK(total == d.n_rows());
}

TEST_CASE("filter and extend") {
    const auto d = data::parse_csv("y,f\n1,a\n2,b\n3,a\n");
    const auto kept = d.filter_rows({true, false, true});
    CHECK(kept.n_rows() == 2);
    CHECK(kept.column("y").numeric == std::vector<double>{1, 3});
    const auto more = d.with_column(data::Column::make_numeric("z", {0, 0, 1}));
    CHECK(more.n_cols() == 3);
    CHECK_THROWS_AS((void)d.with_column(data::Column::make_numeric("z", {0})), DataError);
}
