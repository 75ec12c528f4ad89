#include "amm/calibrate.hpp"

#include "doctest.h"

#include <cmath>
#include <sstream>

using namespace amm;

TEST_SUITE("calibrate") {

TEST_CASE("well-formed file") {
    std::istringstream in(
        "timestamp,s,z,side,size\n"
        "1000,2820,2819,buy,300\n"
        "2000,2821,2820,sell,300\n"
        "3000,2822,2821,none,0\n");
    const TickLoad load = load_ticks(in);
    CHECK(load.records.size() == 3);
    CHECK(load.issues.empty());
    CHECK_FALSE(load.has_y);
    CHECK(load.records[0].side == TradeSide::buy);
    CHECK(load.records[1].side == TradeSide::sell);
}

TEST_CASE("negative price is skipped and reported") {
    std::istringstream in(
        "timestamp,s,z,side,size\n"
        "1000,2820,2819,buy,300\n"
        "2000,-5,2820,sell,300\n");
    const TickLoad load = load_ticks(in);
    CHECK(load.records.size() == 1);
    REQUIRE(load.issues.size() == 1);
    CHECK(load.issues[0].line == 3);

    std::istringstream again(
        "timestamp,s,z,side,size\n"
        "2000,-5,2820,sell,300\n");
    CHECK_THROWS_AS(load_ticks(again, true), FormatError);
}

TEST_CASE("out-of-order timestamps are sorted stably") {
    std::istringstream in(
        "side,size,z,s,timestamp,y\n"
        "buy,300,2800,2801,3000,50000\n"
        "sell,300,2800,2802,1000,50000\n"
        "buy,300,2800,2803,1000,50000\n");
    const TickLoad load = load_ticks(in);
    REQUIRE(load.records.size() == 3);
    CHECK(load.has_y);
    CHECK(load.records[0].s == 2802);
    CHECK(load.records[1].s == 2803);
    CHECK(load.records[2].timestamp_ms == 3000);
    CHECK(*load.records[0].y == 50000);
}

TEST_CASE("format errors") {
    std::istringstream empty("");
    CHECK_THROWS_AS(load_ticks(empty), FormatError);
    std::istringstream missing("timestamp,s,z,size\n1,2,3,4\n");
    CHECK_THROWS_AS(load_ticks(missing), FormatError);
}

TEST_CASE("six buys in one window") {
    std::vector<TickRecord> ticks;
    for (int k = 0; k < 6; ++k) ticks.push_back({k * 1000, 2820, 2815, TradeSide::buy, 300, {}});
    const auto b = bucketize(ticks, 10);
    REQUIRE(b.size() == 1);
    CHECK(b[0].lambda_minus_hat == doctest::Approx(864));
    CHECK(b[0].lambda_plus_hat == 0);
    CHECK(b[0].mean_mispricing == doctest::Approx(5));
}

TEST_CASE("quiet windows carry the mispricing forward") {
    std::vector<TickRecord> ticks = {{0, 2825, 2820, TradeSide::none, 0, {}},
                                     {1'800'000, 2825, 2820, TradeSide::none, 0, {}}};
    const auto b = bucketize(ticks, 10);
    REQUIRE(b.size() == 4);
    for (const auto& w : b) {
        CHECK(w.lambda_minus_hat == 0);
        CHECK(w.lambda_plus_hat == 0);
        CHECK(w.mean_mispricing == doctest::Approx(5));
    }
    CHECK(b[1].carried_forward);
    CHECK(b[2].carried_forward);
    CHECK_FALSE(b[3].carried_forward);
    CHECK(b[1].window_start == 600'000);
}

TEST_CASE("stacked OLS with HC1 errors") {
    const std::vector<double> m = {-8, -5, -3, -1, 0, 1, 2, 4, 6, 7, 9, -6.5};
    const std::vector<double> lm = {40, 70, 100, 130, 150, 150, 170, 200, 230, 240, 270, 60};
    const std::vector<double> lp = {250, 210, 180, 160, 140, 130, 120, 90, 60, 50, 20, 230};
    std::vector<TradeBucket> buckets(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
        buckets[i].window_start = static_cast<std::int64_t>(i) * 600'000;
        buckets[i].mean_mispricing = m[i];
        buckets[i].lambda_minus_hat = lm[i];
        buckets[i].lambda_plus_hat = lp[i];
        buckets[i].n_ticks = 1;
        buckets[i].mean_y = std::nan("");
    }
    const CalibrationResult r = fit_intensities(buckets);
    // reference values from an independent OLS package, HC1 covariance
    CHECK(r.a1_hat == doctest::Approx(143.75).epsilon(1e-9));
    CHECK(r.a3_hat == doctest::Approx(13.57958873).epsilon(1e-8));
    CHECK(r.se_a1 == doctest::Approx(0.75436418).epsilon(1e-7));
    CHECK(r.se_a3 == doctest::Approx(0.13270312).epsilon(1e-7));
    CHECK(r.n_buckets == 12);
    CHECK(r.boundary_d == doctest::Approx(143.75 / 13.57958873));
    CHECK(r.violations_left == 0);
    CHECK(r.violations_right == 0);

    CalibrationResult narrow = r;
    count_violations(buckets, 6.0, narrow);
    CHECK(narrow.violations_left == 2);
    CHECK(narrow.violations_right == 2);
    CHECK(narrow.violation_fraction == doctest::Approx(4.0 / 12));
}

TEST_CASE("degenerate regressor") {
    std::vector<TradeBucket> flat(20);
    for (auto& b : flat) b.mean_mispricing = 3;
    CHECK_THROWS_AS(fit_intensities(flat), CalibrationError);
    CHECK_THROWS_AS(fit_intensities(std::vector<TradeBucket>(5)), CalibrationError);
}

TEST_CASE("synthetic round trip") {
    const auto ticks = synthetic_ticks(142.7, 13.6, 17000, 10.0, 11);
    const auto buckets = bucketize(ticks, 10);
    CHECK(buckets.size() == 17000);
    const CalibrationResult r = fit_intensities(buckets);
    CHECK(std::fabs(r.a1_hat - 142.7) <= 2 * r.se_a1);
    CHECK(std::fabs(r.a3_hat - 13.6) <= 2 * r.se_a3);
}

TEST_CASE("depth regressor") {
    std::vector<TradeBucket> buckets;
    for (int i = 0; i < 40; ++i) {
        TradeBucket b;
        b.mean_mispricing = (i % 9) - 4.0;
        b.mean_y = 40000.0 + 500.0 * (i % 7);
        const double base = 100.0 + 1e-3 * b.mean_y;
        b.lambda_minus_hat = base + 12.0 * b.mean_mispricing;
        b.lambda_plus_hat = base - 12.0 * b.mean_mispricing;
        buckets.push_back(b);
    }
    const CalibrationResult r = fit_intensities(buckets, FitOptions{true});
    CHECK(r.fitted_a2);
    CHECK(r.a1_hat == doctest::Approx(100).epsilon(1e-8));
    CHECK(r.a2_hat == doctest::Approx(1e-3).epsilon(1e-8));
    CHECK(r.a3_hat == doctest::Approx(12).epsilon(1e-8));
}

TEST_CASE("JSON and CSV writers") {
    const auto ticks = synthetic_ticks(142.7, 13.6, 30, 10.0, 1);
    const auto buckets = bucketize(ticks, 10);
    const CalibrationResult r = fit_intensities(buckets);
    const std::string json = calibration_json(r);
    CHECK(json.find("\"a1_hat\"") != std::string::npos);
    CHECK(json.find("\"a3_hat\"") != std::string::npos);
    std::stringstream csv;
    write_ticks_csv(csv, ticks);
    const TickLoad back = load_ticks(csv);
    CHECK(back.records.size() == ticks.size());
    CHECK(back.issues.empty());
}

}
