#include "amm/model.hpp"

#include "doctest.h"

#include <cmath>

using namespace amm;

TEST_SUITE("model") {

TEST_CASE("level curve and marginal price") {
    CHECK(level_x(7.05e12, 5.0e4) == doctest::Approx(1.41e8));
    CHECK(level_x(100, 10) == doctest::Approx(10));
    CHECK(level_x(1, 1) == doctest::Approx(1));
    CHECK(marginal_price(7.05e12, 5.0e4) == doctest::Approx(2820));
    CHECK(marginal_price(1, 1) == doctest::Approx(1));
    // c / y'^2 after one 300 ETH buy
    CHECK(std::fabs(marginal_price(7.05e12, 49700) - 2854.15) < 0.01);
    CHECK_THROWS_AS(level_x(0, 1), std::domain_error);
    CHECK_THROWS_AS(marginal_price(1, -1), std::domain_error);
}

TEST_CASE("pool from price") {
    const PoolState pool = PoolState::from_price(50000, 2820);
    CHECK(pool.x == doctest::Approx(1.41e8));
    CHECK(pool.c == doctest::Approx(7.05e12));
    CHECK_THROWS_AS(PoolState::from_price(0, 2820), std::domain_error);
}

TEST_CASE("LT trades move along the level curve") {
    const PoolState pool = PoolState::from_price(50000, 2820);
    const auto buy = apply_lt_trade(pool, Side::buy, 300);
    REQUIRE(buy);
    CHECK(buy->y == 49700);
    CHECK(std::fabs(buy->z - 2854.15) < 0.01);
    CHECK(buy->c == pool.c);
    CHECK(buy->x * buy->y == doctest::Approx(pool.c).epsilon(1e-14));
    CHECK(buy->z == doctest::Approx(pool.c / (49700.0 * 49700.0)).epsilon(1e-14));

    const auto sell = apply_lt_trade(pool, Side::sell, 300);
    REQUIRE(sell);
    CHECK(sell->y == 50300);
    CHECK(std::fabs(sell->z - 2786.46) < 0.01);

    CHECK_FALSE(apply_lt_trade(PoolState::from_price(300, 2820), Side::buy, 300));
    CHECK(apply_lt_trade(PoolState::from_price(300, 2820), Side::sell, 300));
}

TEST_CASE("LP flow keeps the price") {
    const PoolState pool = PoolState::from_price(50000, 2820);
    const PoolState after = apply_lp_flow(pool, 100);
    CHECK(after.y == 50100);
    CHECK(after.x == doctest::Approx(1.41282e8));
    CHECK(after.x / after.y == doctest::Approx(2820).epsilon(1e-14));
    CHECK(after.z == 2820);
    CHECK(after.c == doctest::Approx(after.x * after.y));

    const PoolState same = apply_lp_flow(pool, 0);
    CHECK(same.x == pool.x);
    CHECK(same.y == pool.y);
    CHECK(same.c == pool.c);

    PoolState unit;
    unit.x = unit.y = unit.z = unit.c = 1;
    CHECK_THROWS_AS(apply_lp_flow(unit, -1), std::domain_error);
}

TEST_CASE("intensities") {
    ModelParams p;
    p.a1 = 142.7;
    p.a2 = 0;
    p.a3 = 13.6;
    p.a0 = 1e-3;
    IntensityPair l = intensities(p, 2830, 50000, 2820);
    CHECK(l.lambda_minus == doctest::Approx(6.7));
    CHECK(l.lambda_plus == doctest::Approx(278.7));

    l = intensities(p, 2831, 50000, 2820);
    CHECK(l.lambda_minus == p.a0);
    CHECK(l.lambda_plus == doctest::Approx(292.3));

    ModelParams flat;
    flat.a1 = flat.a2 = flat.a3 = 0;
    flat.a0 = 5;
    l = intensities(flat, 1000, 1, 3000);
    CHECK(l.lambda_minus == 5);
    CHECK(l.lambda_plus == 5);

    ModelParams depth;
    depth.a2 = 1e-5;
    l = intensities(depth, 2820, 50000, 2820);
    CHECK(l.lambda_minus == doctest::Approx(142.7 + 0.5));
    CHECK(l.lambda_plus == doctest::Approx(142.7 + 0.5));
}

TEST_CASE("jump deltas") {
    JumpDeltas d = jump_deltas(2820, 50000, 2820, 300);
    CHECK(std::fabs(d.minus - 5106.6) < 0.1);
    CHECK(std::fabs(d.plus - 5045.7) < 0.1);
    CHECK(d.minus_defined);

    const double z = 2820;
    const double y = 50000;
    d = jump_deltas(z, y, z * y / (y + 300), 300);
    CHECK(std::fabs(d.plus) < 1e-9);

    d = jump_deltas(2820, 50000, 2820, 1e-6);
    CHECK(std::fabs(d.minus) < 1e-9);
    CHECK(std::fabs(d.plus) < 1e-9);

    d = jump_deltas(2820, 300, 2820, 300);
    CHECK_FALSE(d.minus_defined);
    CHECK(d.minus == 0);
}

TEST_CASE("parameter validation names the field") {
    ModelParams p;
    CHECK_NOTHROW(p.validate());
    p.eta = 0;
    try {
        p.validate();
        FAIL("expected invalid_argument");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("eta") != std::string::npos);
    }
    ModelParams q = ModelParams::noise_trading();
    CHECK(q.a2 == 1e-5);
    CHECK(q.impact_a == 5e-6);
    CHECK(q.fee_r == doctest::Approx(8460));
}

}
