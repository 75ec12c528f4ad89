#pragma once

// Monte Carlo engine for the equilibrium under the LP's response.
//
// Each step draws two Gaussians (W, B) and two Bernoulli arrivals (N-, N+)
// on a fixed grid. Controls and intensities are read at the left endpoint.

#include "amm/controls.hpp"
#include "amm/model.hpp"
#include "amm/riccati.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace amm {

/// Largest admissible per-step jump probability lambda * dt.
inline constexpr double kMaxJumpProb = 0.1;

enum class Regime { risk_neutral, risk_averse };

/// LP speed actually used in the dynamics. `optimal` is nu_bar(A^B);
/// `zero` is the idle LP used by the supermartingale check.
enum class NuPolicy { optimal, zero };

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SimConfig {
    std::size_t n_steps = 10000;
    std::size_t n_paths = 1;
    std::uint64_t seed = 1;
    Regime regime = Regime::risk_averse;
    std::size_t record_stride = 100;
    double s0 = 2820.0;
    double y0 = 50000.0;
    unsigned threads = 0;  // 0 = hardware concurrency
    NuPolicy nu_policy = NuPolicy::optimal;
    ControlOptions control_options;

    void validate() const;
};

struct PathState {
    double t = 0.0;
    double s = 0.0;
    PoolState pool;
    double p = 0.0;         // contract accrual P_t
    double q = 0.0;         // LP wealth Q_{0,t}
    double cum_nu = 0.0;    // int nu dt
    double ext_fees = 0.0;  // int a nu^2 dt
    long n_minus = 0;
    long n_plus = 0;
    long n_hat_minus = 0;   // raw buy arrivals, suppressed ones included
};

struct StepNoise {
    double eps_w = 0.0;
    double eps_b = 0.0;
    double u_minus = 1.0;  // buy fires iff u_minus < lambda_minus * dt
    double u_plus = 1.0;
};

StepNoise draw_noise(std::mt19937_64& rng);

/// Advances one step of length dt with LP speed nu. Throws ConfigError if
/// either lambda * dt >= kMaxJumpProb.
PathState step(const PathState& state, const ContractControls& a, double nu, const ModelParams& p,
               double dt, const StepNoise& noise);

struct PathRecord {
    double t, s, y, z, c, nu, p, q_lp, cum_nu, ext_fees;
    long n_minus, n_plus, n_hat_minus;
};

struct SimPath {
    std::vector<PathRecord> records;  // every record_stride nodes, plus t = T
    double reward = 0.0;              // R = P_T
    double venue_pnl = 0.0;           // r (N- + N+) - P_T
    double fee_income = 0.0;          // r (N- + N+)
    double cum_nu = 0.0;
    double ext_fees = 0.0;
    long n_minus = 0;
    long n_plus = 0;
    long n_hat_minus = 0;
    long n_substepped = 0;  // sub-steps taken inside grid intervals that were too coarse
};

/// Counter-based stream seed for path `index` under master `seed`.
std::uint64_t path_seed(std::uint64_t seed, std::uint64_t index);

/// `sol` is required for the risk-averse regime and ignored otherwise.
/// A grid interval whose left-endpoint intensity breaks the step() guard is
/// split into sub-steps with lambda * h <= kMaxJumpProb / 2, controls
/// re-evaluated at each sub-step. Records stay on the fixed grid.
SimPath simulate_path(const ModelParams& p, const RiccatiSolution* sol, const SimConfig& cfg,
                      double p0, std::uint64_t path_index);

struct SeriesStats {
    std::vector<double> mean, std, q05, q95;
};

struct Histogram {
    double lo = 0.0;
    double hi = 0.0;
    std::vector<std::size_t> counts;  // 50 equal-width bins on [lo, hi]
};

Histogram histogram(const std::vector<double>& values, std::size_t bins = 50);

struct EnsembleSummary {
    std::vector<double> times;
    std::vector<std::pair<std::string, SeriesStats>> series;
    double p0 = 0.0;
    double mean_reward = 0.0, se_reward = 0.0;
    double mean_venue_pnl = 0.0, se_venue_pnl = 0.0;
    double mean_fee_income = 0.0;
    double mean_cum_nu = 0.0, se_cum_nu = 0.0;
    double mean_ext_fees = 0.0, se_ext_fees = 0.0;
    double mean_jumps = 0.0, var_jumps = 0.0;
    Histogram reward_hist;
    Histogram venue_pnl_hist;

    const SeriesStats& get(const std::string& name) const;
};

struct Ensemble {
    SimConfig cfg;
    std::vector<SimPath> paths;
    EnsembleSummary summary;
};

Ensemble run_ensemble(const ModelParams& p, const RiccatiSolution* sol, const SimConfig& cfg,
                      double p0 = 0.0);

EnsembleSummary summarize(const std::vector<SimPath>& paths, double p0);

/// P0* = E[r N]/2 - E[P_T^{0,A}], using linearity in P0.
double equal_split_p0(const Ensemble& ensemble);

/// Fraction of recorded (S - Z) samples with |S - Z| > d, over all paths
/// and all recorded nodes after t = 0.
double violation_fraction(const Ensemble& ensemble, double d);

/// Neumaier-compensated mean.
double compensated_mean(const std::vector<double>& values);

void write_path_csv(std::ostream& out, const SimPath& path);
void write_series_csv(std::ostream& out, const std::vector<double>& times, const SeriesStats& s);
void write_terminal_csv(std::ostream& out, const Ensemble& ensemble);
std::string summary_json(const Ensemble& ensemble, int indent = 2);

}  // namespace amm
