#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "scadaguard/dataio.hpp"
#include "scadaguard/errors.hpp"

using namespace scadaguard;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    const std::string path = (std::filesystem::temp_directory_path() / name).string();
    std::ofstream out(path, std::ios::trunc);
    out << content;
    return path;
}

ColumnMap labeled_map() {
    ColumnMap m;
    m.label_column = "ATT_FLAG";
    return m;
}

// Fixture: three hourly rows, two channels, labels 0/0/1.
std::string three_row_csv() {
    return "DATETIME,L_T1,F_PU1,ATT_FLAG\n"
           "2017-01-01 00:00:00,2.0,60.0,0\n"
           "2017-01-01 01:00:00,4.0,61.5,0\n"
           "2017-01-01 02:00:00,3.0,59.0,1\n";
}

}  // namespace

TEST_CASE("timestamp parsing accepts three spellings") {
    const std::int64_t epoch_day_h9 = parse_timestamp("1970-01-01 09:00:00");
    CHECK(epoch_day_h9 == 9);
    CHECK(parse_timestamp("1970-01-01 09:00") == 9);
    // BATADAL "DD/MM/YY HH"; two-digit years always map into 20xx
    CHECK(parse_timestamp("04/07/16 0") == parse_timestamp("2016-07-04 00:00:00"));
    CHECK(parse_timestamp("01/01/70 9") == parse_timestamp("2070-01-01 09:00:00"));
    // Bare hour index
    CHECK(parse_timestamp("42") == 42);
    CHECK_THROWS_AS(parse_timestamp("yesterday"), DataError);

    // Round trip through the formatter.
    const std::int64_t t = parse_timestamp("2017-03-15 07:00:00");
    CHECK(format_timestamp(t) == "2017-03-15 07:00:00");
    CHECK(parse_timestamp(format_timestamp(t)) == t);
}

TEST_CASE("csv loading: happy path") {
    const std::string path = write_temp("sg_dataio_ok.csv", three_row_csv());
    ScadaDataset ds = load_csv(path, labeled_map());
    CHECK(ds.rows() == 3);
    CHECK(ds.channel_names == std::vector<std::string>{"L_T1", "F_PU1"});
    CHECK(ds.at(0, 0) == 2.0);
    CHECK(ds.at(1, 1) == 61.5);
    CHECK(ds.timestamps[1] - ds.timestamps[0] == 1);
    REQUIRE(ds.has_labels());
    CHECK(ds.labels[0] == HourLabel::Normal);
    CHECK(ds.labels[2] == HourLabel::Attack);
    CHECK(ds.channel_index("F_PU1") == 1);
    CHECK_THROWS_AS(ds.channel_index("F_PU9"), DataError);
    std::remove(path.c_str());
}

TEST_CASE("csv loading: unlabeled file and explicit channel subset") {
    const std::string path = write_temp("sg_dataio_nolabel.csv",
                                        "DATETIME,A,B,C\n"
                                        "0,1,2,3\n"
                                        "1,4,5,6\n");
    ColumnMap m;
    m.channel_columns = {"C", "A"};
    ScadaDataset ds = load_csv(path, m);
    CHECK_FALSE(ds.has_labels());
    CHECK(ds.channel_names == std::vector<std::string>{"C", "A"});
    CHECK(ds.at(1, 0) == 6.0);
    CHECK(ds.at(1, 1) == 4.0);
    std::remove(path.c_str());
}

TEST_CASE("csv loading: each malformation is named with its row") {
    auto load = [](const std::string& body) {
        const std::string path = write_temp("sg_dataio_bad.csv", body);
        ScadaDataset ds = load_csv(path, labeled_map());
        std::remove(path.c_str());
        return ds;
    };

    SUBCASE("hourly gap names both timestamps") {
        CHECK_THROWS_WITH_AS(load("DATETIME,L_T1,ATT_FLAG\n"
                                  "2017-01-01 00:00:00,1,0\n"
                                  "2017-01-01 03:00:00,2,0\n"),
                             doctest::Contains("row 3: non-hourly gap between 2017-01-01 "
                                               "00:00:00 and 2017-01-01 03:00:00"),
                             DataError);
    }
    SUBCASE("duplicate timestamp") {
        CHECK_THROWS_WITH_AS(load("DATETIME,L_T1,ATT_FLAG\n"
                                  "2017-01-01 00:00:00,1,0\n"
                                  "2017-01-01 00:00:00,2,0\n"),
                             doctest::Contains("row 3: duplicate timestamp"), DataError);
    }
    SUBCASE("missing mapped column") {
        CHECK_THROWS_WITH_AS(load("WHEN,L_T1,ATT_FLAG\n0,1,0\n"),
                             doctest::Contains("missing column 'DATETIME'"), DataError);
    }
    SUBCASE("unparseable number names row and column") {
        CHECK_THROWS_WITH_AS(load("DATETIME,L_T1,ATT_FLAG\n"
                                  "0,1,0\n"
                                  "1,oops,0\n"),
                             doctest::Contains("row 3: unparseable number 'oops' in column "
                                               "'L_T1'"),
                             DataError);
    }
    SUBCASE("unknown label value") {
        CHECK_THROWS_WITH_AS(load("DATETIME,L_T1,ATT_FLAG\n0,1,7\n"),
                             doctest::Contains("row 2: unknown label value '7'"), DataError);
    }
    SUBCASE("ragged row") {
        CHECK_THROWS_WITH_AS(load("DATETIME,L_T1,ATT_FLAG\n0,1\n"),
                             doctest::Contains("row 2"), DataError);
    }
    SUBCASE("header only") {
        CHECK_THROWS_AS(load("DATETIME,L_T1,ATT_FLAG\n"), DataError);
    }
}

TEST_CASE("column map json: nested schema and defaults") {
    ColumnMap m = ColumnMap::from_json_text(R"({
        "timestamp": "TS",
        "channels": ["X", "Y"],
        "label": {"column": "LAB", "attack": ["bad"], "normal": ["ok"], "unlabeled": ["?"]}
    })");
    CHECK(m.timestamp_column == "TS");
    CHECK(m.channel_columns == std::vector<std::string>{"X", "Y"});
    REQUIRE(m.label_column.has_value());
    CHECK(*m.label_column == "LAB");
    CHECK(m.attack_values == std::set<std::string>{"bad"});
    CHECK(m.normal_values == std::set<std::string>{"ok"});
    CHECK(m.unlabeled_values == std::set<std::string>{"?"});

    ColumnMap d = ColumnMap::from_json_text("{}");
    CHECK(d.timestamp_column == "DATETIME");
    CHECK_FALSE(d.label_column.has_value());

    CHECK_THROWS_AS(ColumnMap::from_json_text("{nope"), ConfigError);
    CHECK_THROWS_AS(ColumnMap::from_json_file("/no/such/map.json"), ConfigError);
}

TEST_CASE("channel statistics and z-scoring") {
    ScadaDataset ds;
    ds.channel_names = {"a", "b"};
    ds.timestamps = {0, 1};
    ds.values = {2.0, 7.0, 4.0, 7.0};  // a: {2,4}; b constant 7

    ChannelStats st = fit_stats(ds);
    CHECK(st.mean[0] == 3.0);
    CHECK(st.std[0] == 1.0);  // population std of {2,4}
    CHECK(st.mean[1] == 7.0);
    CHECK(st.std[1] == 1e-6);  // constant channel floored

    ScadaDataset z = normalize(ds, st);
    CHECK(z.at(0, 0) == -1.0);
    CHECK(z.at(1, 0) == 1.0);
    CHECK(z.at(0, 1) == 0.0);

    // Normalized columns are centered.
    for (std::size_t c = 0; c < 2; ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < 2; ++r) mean += z.at(r, c);
        CHECK(std::abs(mean / 2.0) < 1e-9);
    }

    ChannelStats wrong;
    wrong.mean = {0.0};
    wrong.std = {1.0};
    CHECK_THROWS_AS(normalize(ds, wrong), DataError);
    CHECK_THROWS_AS(fit_stats(ds, RowRange{2, 2}), DataError);
}

TEST_CASE("windowing: counts, contents and labels") {
    ScadaDataset ds;
    ds.channel_names = {"a"};
    for (std::int64_t t = 0; t < 6; ++t) {
        ds.timestamps.push_back(t);
        ds.values.push_back(static_cast<double>(t) * 10.0);
    }
    ds.labels = {HourLabel::Normal, HourLabel::Normal, HourLabel::Attack,
                 HourLabel::Normal, HourLabel::Normal, HourLabel::Normal};

    WindowBatch wb = make_windows(ds, 3);
    CHECK(wb.count() == 4);  // T - W + 1
    CHECK(wb.windows.shape == std::vector<std::size_t>{4, 1, 3});
    // Second window covers hours 1..3.
    CHECK(wb.windows.at(1, 0, 0) == 10.0);
    CHECK(wb.windows.at(1, 0, 2) == 30.0);
    CHECK(wb.window_end_timestamps[1] == 3);
    // Attack at hour 2 marks every window containing it.
    CHECK(wb.window_labels[0] == HourLabel::Attack);
    CHECK(wb.window_labels[1] == HourLabel::Attack);
    CHECK(wb.window_labels[2] == HourLabel::Attack);
    CHECK(wb.window_labels[3] == HourLabel::Normal);

    Tensor one = wb.window(2);
    CHECK(one.shape == std::vector<std::size_t>{1, 1, 3});
    CHECK(one.at(0, 0, 0) == 20.0);

    // Exact fit gives one window; shorter data refuses.
    CHECK(make_windows(ds, 6).count() == 1);
    CHECK_THROWS_AS(make_windows(ds, 7), DataError);
    CHECK_THROWS_AS(make_windows(ds, 0), ConfigError);

    // Stride 2 keeps every other window.
    WindowBatch strided = make_windows(ds, 3, 2);
    CHECK(strided.count() == 2);
    CHECK(strided.window_end_timestamps == std::vector<std::int64_t>{2, 4});
}

TEST_CASE("window count property across sizes") {
    for (std::size_t T = 24; T <= 60; T += 7) {
        ScadaDataset ds;
        ds.channel_names = {"a"};
        for (std::size_t t = 0; t < T; ++t) {
            ds.timestamps.push_back(static_cast<std::int64_t>(t));
            ds.values.push_back(0.0);
        }
        CHECK(make_windows(ds, 24).count() == T - 24 + 1);
    }
}

TEST_CASE("chronological split") {
    ScadaDataset ds;
    ds.channel_names = {"a"};
    for (std::int64_t t = 0; t < 240; ++t) {
        ds.timestamps.push_back(t);
        ds.values.push_back(static_cast<double>(t));
    }
    auto [train, holdout] = split(ds, 0.9, 24);
    CHECK(train.begin == 0);
    CHECK(train.end == 216);
    CHECK(holdout.begin == 216);
    CHECK(holdout.end == 240);
    CHECK(train.size() + holdout.size() == 240);

    ScadaDataset head = slice_rows(ds, train);
    ScadaDataset tail = slice_rows(ds, holdout);
    CHECK(head.rows() == 216);
    CHECK(tail.rows() == 24);
    CHECK(tail.at(0, 0) == 216.0);
    CHECK(tail.timestamps.front() == 216);

    CHECK_THROWS_AS(split(ds, 0.99, 24), DataError);  // holdout < window
    CHECK_THROWS_AS(split(ds, 0.0, 24), ConfigError);
    CHECK_THROWS_AS(split(ds, 1.0, 24), ConfigError);
    CHECK_THROWS_AS(slice_rows(ds, RowRange{50, 40}), DataError);
}
