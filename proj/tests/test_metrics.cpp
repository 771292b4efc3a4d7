#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>

#include "evfl/metrics.hpp"
#include "support.hpp"

using namespace evfl;
using test_support::TempDir;
using test_support::read_csv;

TEST_CASE("prequential window: hand-enumerated series") {
    PrequentialWindow w(3);
    // T T F | T F F | T   (T = correct, F = error)
    for (bool c : {true, true, false, true, false, false, true}) w.record(c);
    REQUIRE(w.series().size() == 2);
    CHECK(w.series()[0].samples_seen == 3);
    CHECK(w.series()[0].error_rate == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(w.series()[0].partial == false);
    CHECK(w.series()[1].samples_seen == 6);
    CHECK(w.series()[1].error_rate == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

    w.flush_tail();
    REQUIRE(w.series().size() == 3);
    CHECK(w.series()[2].samples_seen == 7);
    CHECK(w.series()[2].error_rate == 0.0);
    CHECK(w.series()[2].partial == true);

    CHECK(w.total_seen() == 7);
    CHECK(w.total_errors() == 3);
    CHECK(w.accumulated_error_rate() == doctest::Approx(3.0 / 7.0).epsilon(1e-15));

    // Flushing with nothing pending adds no point.
    w.flush_tail();
    CHECK(w.series().size() == 3);
}

TEST_CASE("prequential window: empty cases") {
    PrequentialWindow w(5);
    CHECK_THROWS_AS(w.accumulated_error_rate(), DimError);
    w.flush_tail();
    CHECK(w.series().empty());
    CHECK_THROWS_AS(PrequentialWindow(0), DimError);
}

TEST_CASE("format_double round trips") {
    for (double v : {1.0 / 3.0, 0.1, 1e-17, 123456789.123456789, -2.5e300, 0.0}) {
        std::string s = format_double(v);
        CHECK(std::strtod(s.c_str(), nullptr) == v);
    }
}

TEST_CASE("runtime error csv writer") {
    TempDir tmp;
    std::vector<WindowPoint> pts{{100, 0.25, false}, {150, 0.5, true}};
    const std::string path = tmp.file("runtime_error.csv");
    write_runtime_error_csv(path, pts);
    auto rows = read_csv(path);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0] == std::vector<std::string>{"samples_seen", "window_error_rate", "partial"});
    CHECK(rows[1][0] == "100");
    CHECK(std::strtod(rows[1][1].c_str(), nullptr) == 0.25);
    CHECK(rows[1][2] == "0");
    CHECK(rows[2][2] == "1");
}

TEST_CASE("summary csv writer covers every field with per-client columns") {
    TempDir tmp;
    SessionSummary s;
    s.rounds = 1000;
    s.accumulated_error_rate = 0.125;
    s.mean_loss = 0.5;
    s.bytes_up = 1024 * 1024;
    s.bytes_down = 512 * 1024;
    s.comm_mb_up = 1.0;
    s.comm_mb_down = 0.5;
    s.comm_mb_total = 1.5;
    s.comm_mb_mean_direction = 0.75;
    s.activation_freq = {0.5, 0.75};
    s.empty_activation_rounds = 42;
    s.server_fwd = 1000;
    s.server_bwd = 1000;
    s.client_fwd = {1000, 1000};
    s.client_bwd = {500, 750};
    const std::string path = tmp.file("summary.csv");
    write_summary_csv(path, s);
    auto rows = read_csv(path);
    REQUIRE(rows.size() == 2);
    REQUIRE(rows[0].size() == rows[1].size());
    // Find a few columns by header name.
    auto col = [&](const std::string& name) {
        for (std::size_t i = 0; i < rows[0].size(); ++i)
            if (rows[0][i] == name) return rows[1][i];
        FAIL("missing column ", name);
        return std::string();
    };
    CHECK(col("rounds") == "1000");
    CHECK(std::strtod(col("comm_mb_mean_direction").c_str(), nullptr) == 0.75);
    CHECK(std::strtod(col("activation_freq_client2").c_str(), nullptr) == 0.75);
    CHECK(col("bwd_client2") == "750");
    CHECK(col("empty_activation_rounds") == "42");
}

TEST_CASE("timing csv writer") {
    TempDir tmp;
    SessionTiming t;
    t.server_seconds = 1.5;
    t.client_seconds = {0.25, 0.75};
    const std::string path = tmp.file("timing.csv");
    write_timing_csv(path, t);
    auto rows = read_csv(path);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0] == std::vector<std::string>{"participant", "compute_seconds"});
    CHECK(rows[1][0] == "server");
    CHECK(rows[2][0] == "client1");
    CHECK(rows[3][0] == "client2");
    CHECK(std::strtod(rows[3][1].c_str(), nullptr) == 0.75);
}

TEST_CASE("series csv writer") {
    TempDir tmp;
    const std::string path = tmp.file("series.csv");
    write_series_csv(path, "dlr", {{10, 1.5}, {100, 7.25}});
    auto rows = read_csv(path);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0] == std::vector<std::string>{"T", "dlr"});
    CHECK(rows[2][0] == "100");
    CHECK(std::strtod(rows[2][1].c_str(), nullptr) == 7.25);
}

TEST_CASE("csv writers fail loudly on unwritable paths") {
    CHECK_THROWS_AS(write_runtime_error_csv("/nonexistent-dir/x.csv", {}), IoError);
    CHECK_THROWS_AS(write_series_csv("/nonexistent-dir/x.csv", "v", {}), IoError);
}
