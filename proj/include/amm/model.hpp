#pragma once

// Constant-product pool mechanics, LP/LT jump accounting and the
// order-arrival intensity model.
//
// Units: prices in USDC/ETH, quantities in ETH, time in days.

#include <optional>
#include <stdexcept>
#include <string>

namespace amm {

/// All scalar model parameters. Defaults are the a2 = 0 baseline
/// calibrated on ETH-USDC (S0 = 2820).
struct ModelParams {
    double sigma = 0.0569 * 2820.0;   // external midprice vol, USDC/sqrt(day)
    double eta = 1e-10;               // other-LP noise, ETH/sqrt(day)
    double xi = 300.0;                // LT trade size, ETH
    double impact_a = 1e-14;          // external temporary impact
    double fee_r = 0.01 * 300.0 * 2820.0;  // venue fee per jump, USDC
    double gamma = 1e-18;             // LP risk aversion, 1/USDC
    double zeta = 1e-6;               // venue risk aversion, 1/USDC
    double horizon_T = 1.0;           // days
    double nu_max = 1e6;              // LP speed cap, ETH/day
    double a0 = 1e-3;                 // intensity floor, jumps/day
    double a1 = 142.7;                // baseline intensity, jumps/day
    double a2 = 0.0;                  // depth sensitivity
    double a3 = 13.6;                 // mispricing sensitivity

    /// Throws std::invalid_argument naming the first offending field.
    void validate() const;

    /// a2 = 0 baseline used for the violation and collapse experiments.
    static ModelParams baseline();
    /// Noise-trading regime: a2 = 1e-5, impact_a = 5e-6.
    static ModelParams noise_trading();
};

/// Reserves of a constant-product pool. c = x*y, z = x/y = c/y^2.
struct PoolState {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double c = 0.0;

    /// Builds a consistent pool from ETH reserves and marginal price.
    static PoolState from_price(double y, double z);
};

struct MarketState {
    double t = 0.0;
    double s = 0.0;
    PoolState pool;
};

struct IntensityPair {
    double lambda_minus = 0.0;
    double lambda_plus = 0.0;
};

enum class Side { buy, sell };

struct JumpDeltas {
    double minus = 0.0;
    double plus = 0.0;
    bool minus_defined = true;  // false when y <= xi (buy suppressed)
};

/// X reserves on the level curve of depth c: c / y.
double level_x(double c, double y);

/// Marginal pool price -phi_c'(y) = c / y^2.
double marginal_price(double c, double y);

/// Moves the pool along its level curve by one LT trade of size xi.
/// A buy (LT takes ETH out) is rejected when y <= xi; the caller must
/// still count the raw arrival.
std::optional<PoolState> apply_lt_trade(const PoolState& pool, Side side, double xi);

/// Adds dy ETH at the marginal price (z unchanged); c is renormalised
/// to x*y. Throws std::domain_error if the reserves would become non-positive.
PoolState apply_lp_flow(const PoolState& pool, double dy);

/// lambda^{-/+} = max{a0, a1 + a2*y -/+ a3*(z - s)}.
IntensityPair intensities(const ModelParams& p, double z, double y, double s);

/// LP wealth jump per LT trade: +-xi * (s - z*y/(y +- xi)).
JumpDeltas jump_deltas(double z, double y, double s, double xi);

}  // namespace amm
