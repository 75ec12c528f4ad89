#include "amm/model.hpp"

#include <algorithm>
#include <cmath>

namespace amm {

namespace {

void require(bool ok, const char* field, const char* rule) {
    if (!ok) {
        throw std::invalid_argument(std::string("ModelParams.") + field + " must be " + rule);
    }
}

}  // namespace

void ModelParams::validate() const {
    require(std::isfinite(sigma) && sigma > 0, "sigma", "> 0");
    require(std::isfinite(eta) && eta > 0, "eta", "> 0");
    require(std::isfinite(xi) && xi > 0, "xi", "> 0");
    require(std::isfinite(impact_a) && impact_a > 0, "impact_a", "> 0");
    require(std::isfinite(fee_r) && fee_r > 0, "fee_r", "> 0");
    require(std::isfinite(gamma) && gamma > 0, "gamma", "> 0");
    require(std::isfinite(zeta) && zeta >= 0, "zeta", ">= 0");
    require(std::isfinite(horizon_T) && horizon_T > 0, "horizon_T", "> 0");
    require(std::isfinite(nu_max) && nu_max > 0, "nu_max", "> 0");
    require(std::isfinite(a0) && a0 > 0, "a0", "> 0");
    require(std::isfinite(a1) && a1 >= 0, "a1", ">= 0");
    require(std::isfinite(a2) && a2 >= 0, "a2", ">= 0");
    require(std::isfinite(a3) && a3 >= 0, "a3", ">= 0");
}

ModelParams ModelParams::baseline() { return ModelParams{}; }

ModelParams ModelParams::noise_trading() {
    ModelParams p;
    p.a2 = 1e-5;
    p.impact_a = 5e-6;
    return p;
}

PoolState PoolState::from_price(double y, double z) {
    if (!(y > 0) || !(z > 0)) {
        throw std::domain_error("PoolState::from_price: y and z must be positive");
    }
    PoolState pool;
    pool.y = y;
    pool.z = z;
    pool.x = z * y;
    pool.c = pool.x * y;
    return pool;
}

double level_x(double c, double y) {
    if (!(c > 0) || !(y > 0)) {
        throw std::domain_error("level_x: c and y must be positive");
    }
    return c / y;
}

double marginal_price(double c, double y) {
    if (!(c > 0) || !(y > 0)) {
        throw std::domain_error("marginal_price: c and y must be positive");
    }
    return c / (y * y);
}

std::optional<PoolState> apply_lt_trade(const PoolState& pool, Side side, double xi) {
    if (side == Side::buy && !(pool.y > xi)) {
        return std::nullopt;
    }
    const double y_new = side == Side::buy ? pool.y - xi : pool.y + xi;
    const double ratio = pool.y / y_new;
    PoolState out;
    out.c = pool.c;
    out.y = y_new;
    out.x = pool.c / y_new;
    out.z = pool.z * ratio * ratio;
    return out;
}

PoolState apply_lp_flow(const PoolState& pool, double dy) {
    const double y_new = pool.y + dy;
    const double x_new = pool.x + pool.z * dy;
    if (!(y_new > 0) || !(x_new > 0)) {
        throw std::domain_error("apply_lp_flow: reserves would become non-positive");
    }
    PoolState out;
    out.y = y_new;
    out.x = x_new;
    out.z = pool.z;
    out.c = x_new * y_new;
    return out;
}

IntensityPair intensities(const ModelParams& p, double z, double y, double s) {
    const double base = p.a1 + p.a2 * y;
    const double tilt = p.a3 * (z - s);
    return {std::max(p.a0, base - tilt), std::max(p.a0, base + tilt)};
}

JumpDeltas jump_deltas(double z, double y, double s, double xi) {
    JumpDeltas d;
    d.plus = xi * (s - z * (y / (y + xi)));
    if (y > xi) {
        d.minus = -xi * (s - z * (y / (y - xi)));
    } else {
        d.minus = 0.0;
        d.minus_defined = false;
    }
    return d;
}

}  // namespace amm
