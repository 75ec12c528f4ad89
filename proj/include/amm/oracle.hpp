#pragma once

// Independent verifiers: brute-force grid search over the HJB objectives,
// direct substitution of the ansatz into the approximated PDE, Monte Carlo
// supermartingale checks and closed-form arithmetic.

#include "amm/model.hpp"
#include "amm/riccati.hpp"
#include "amm/simulate.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace amm {

struct OracleReport {
    std::string name;
    std::string metric;  // what `value` measures
    double value = 0.0;
    double tolerance = 0.0;
    double max_abs_error = 0.0;
    double max_rel_error = 0.0;
    std::string worst_case_input;
    std::string note;
    bool pass = false;
};

std::string to_json_line(const OracleReport& r);
void write_json_lines(std::ostream& out, const std::vector<OracleReport>& reports);

// Scalar objectives of the risk-averse HJB (after dividing by zeta V).
// A^B and A^W are minimised, A^- and A^+ maximised.
struct HjbObjectives {
    double z, y, s;
    double v, v_minus, v_plus;  // v_hat at Y, Y - xi, Y + xi (Z fixed)
    double dzv, dyv, dsv;
    ModelParams p;

    double a_b(double a) const;
    double a_w(double a) const;
    double a_minus(double a) const;
    double a_plus(double a) const;
};

HjbObjectives hjb_objectives(const RiccatiNode& node, double z, double y, double s,
                             const ModelParams& p);

struct GridSpec {
    double half_width = 0.5;   // relative to |closed form|
    std::size_t points = 201;  // per level
    int refinements = 2;       // each zooms 10x around the incumbent
};

struct GridOptimum {
    double arg = 0.0;
    double value = 0.0;
    double resolution = 0.0;  // final grid spacing
};

/// Grid search of f over [centre - w, centre + w]; maximises if `maximise`.
GridOptimum grid_optimum(const std::function<double(double)>& f, double centre, double half_width,
                         const GridSpec& spec, bool maximise);

/// Compares controls_risk_averse with grid optima of the four objectives on
/// n_states random states. Metric: max objective gap / scale.
OracleReport hamiltonian_argmax(const RiccatiSolution& sol, const ModelParams& p,
                                std::size_t n_states = 200, std::uint64_t seed = 7,
                                const GridSpec& spec = {});

struct HjbResidual {
    double residual = 0.0;
    double scale = 0.0;  // largest absolute PDE term
};

/// Residual of the approximated risk-averse PDE at grid node `i` with the
/// ansatz substituted. d/dt comes from a 5-point finite difference of the
/// stored coefficients, not from the ODE right-hand side.
HjbResidual hjb_residual_risk_averse(const RiccatiSolution& sol, std::size_t i, double z, double y,
                                     double s, const ModelParams& p);

/// Max relative residual over a 5x5x5x5 (t, Z, Y, S) lattice.
OracleReport hjb_residual_sweep(const RiccatiSolution& sol, const ModelParams& p);

/// Ratio of max residual at n_coarse steps to that at 2 n_coarse steps.
/// Passes without a ratio when the coarse residual is already at round-off.
OracleReport hjb_residual_halving(const ModelParams& p, std::size_t n_coarse);

/// Empirical order per G2(0) entry, log2(|c_n - c_2n| / |c_2n - c_4n|).
/// Entries already exact to round-off are skipped; reports the minimum.
OracleReport riccati_convergence_order(const ModelParams& p, std::size_t n_coarse);

/// E[-exp(-gamma (P + Q))] on the recorded grid under the given LP policy.
/// For `zero` the metric is the largest upward move in standard errors;
/// for `optimal` it is max |m(t) - m(0)| in standard errors.
OracleReport supermartingale_check(const ModelParams& p, const RiccatiSolution* sol,
                                   const SimConfig& cfg, double sigmas = 3.0);

/// Laurent truncations of Y/(Y+-xi), Y^2/(Y+-xi), Y^2/(Y+-xi)^2 and
/// Y^3/(Y+-xi)^2 against C xi^2 / y with C = 8.
OracleReport laurent_error(double y, double xi);

/// nu_hat(0) against a2 r T / a and the closed-form integrals of nu_hat
/// and a nu_hat^2 against numerical quadrature.
OracleReport risk_neutral_limit(const ModelParams& p);

/// Closed forms a2 r T^2 / (2a) and (a2 r)^2 T^3 / (3a).
double closed_form_cum_nu(const ModelParams& p);
double closed_form_ext_fees(const ModelParams& p);

}  // namespace amm
