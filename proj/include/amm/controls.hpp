#pragma once

// Equilibrium contract loadings (A^W, A^B, A^-, A^+) and the LP's best
// response speed nu* = nu_bar(A^B).

#include "amm/model.hpp"
#include "amm/riccati.hpp"

#include <optional>

namespace amm {

struct ContractControls {
    double a_w = 0.0;
    double a_b = 0.0;
    double a_minus = 0.0;
    double a_plus = 0.0;
    double nu_star = 0.0;
    bool clamped = false;  // A^B fell outside [-2 a eta nu_max, 2 a eta nu_max]
};

struct ControlOptions {
    /// Evaluate v^{+-} at the exact post-trade price Z y^2/(y +- xi)^2
    /// instead of the unshifted Z used to derive the ODE system.
    bool exact_shift = false;
    /// Use (zeta eta dv/dY - gamma eta (s+z))/(gamma+zeta) for the
    /// out-of-band A^B branch rather than the zeta gamma form.
    bool derived_clamp_branch = false;
};

/// LP best response to a loading A^B: clamp(A^B / (2 a eta), +-nu_max).
double nu_bar(double a_b, const ModelParams& p);

/// h(nu, A) = -a nu^2 + A^B nu / eta and H(A) = h(nu_bar(A), A).
double lp_hamiltonian(double nu, double a_b, const ModelParams& p);
double lp_hamiltonian_max(double a_b, const ModelParams& p);

/// Approximate dv/dY for the risk-neutral venue: 2 a2 r (T - t).
double risk_neutral_dyv(double t, const ModelParams& p);

/// Closed-form approximate risk-neutral speed
/// (2 a2 r (T-t) - 2 (s+z) gamma a eta^2) / (4 eta^2 a^2 gamma + 2 a).
double risk_neutral_nu_hat(double t, double z, double s, const ModelParams& p);

ContractControls controls_risk_neutral(double t, double z, double y, double s, const ModelParams& p,
                                       std::optional<double> dyv = std::nullopt);

ContractControls controls_risk_averse(double t, double z, double y, double s,
                                      const RiccatiSolution& sol, const ModelParams& p,
                                      const ControlOptions& opts = {});

/// Same as above with the ansatz coefficients already looked up.
ContractControls controls_risk_averse(const RiccatiNode& node, double z, double y, double s,
                                      const ModelParams& p, const ControlOptions& opts = {});

}  // namespace amm
