#include "amm/controls.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace amm {

double nu_bar(double a_b, const ModelParams& p) {
    return std::clamp(a_b / (2.0 * p.impact_a * p.eta), -p.nu_max, p.nu_max);
}

double lp_hamiltonian(double nu, double a_b, const ModelParams& p) {
    return -p.impact_a * nu * nu + a_b * nu / p.eta;
}

double lp_hamiltonian_max(double a_b, const ModelParams& p) {
    return lp_hamiltonian(nu_bar(a_b, p), a_b, p);
}

double risk_neutral_dyv(double t, const ModelParams& p) {
    return 2.0 * p.a2 * p.fee_r * (p.horizon_T - t);
}

double risk_neutral_nu_hat(double t, double z, double s, const ModelParams& p) {
    const double a = p.impact_a;
    const double eta2 = p.eta * p.eta;
    return (2.0 * p.a2 * p.fee_r * (p.horizon_T - t) - 2.0 * (s + z) * p.gamma * a * eta2) /
           (4.0 * eta2 * a * a * p.gamma + 2.0 * a);
}

namespace {

bool within_band(double alpha, const ModelParams& p) {
    const double band = 2.0 * p.impact_a * p.eta * p.nu_max;
    return alpha >= -band && alpha <= band;
}

void check_time(double t, const ModelParams& p) {
    if (!(t >= 0.0 && t <= p.horizon_T)) {
        throw std::domain_error("controls: t outside [0, T]");
    }
}

}  // namespace

ContractControls controls_risk_neutral(double t, double z, double y, double s, const ModelParams& p,
                                       std::optional<double> dyv) {
    check_time(t, p);
    const double dv = dyv.value_or(risk_neutral_dyv(t, p));
    const double a = p.impact_a;
    const double eta = p.eta;
    const double alpha =
        (dv / (a * eta) - 2.0 * (s + z) * p.gamma * eta) / (2.0 * p.gamma + 1.0 / (a * eta * eta));

    const JumpDeltas d = jump_deltas(z, y, s, p.xi);
    ContractControls c;
    c.a_w = -y * p.sigma;
    c.a_minus = y > p.xi ? -d.minus : 0.0;
    c.a_plus = -d.plus;
    if (within_band(alpha, p)) {
        c.a_b = alpha;
    } else {
        c.a_b = -(s + z) * eta;
        c.clamped = true;
    }
    c.nu_star = nu_bar(c.a_b, p);
    return c;
}

ContractControls controls_risk_averse(const RiccatiNode& node, double z, double y, double s,
                                      const ModelParams& p, const ControlOptions& opts) {
    const double a = p.impact_a;
    const double eta = p.eta;
    const double gamma = p.gamma;
    const double zeta = p.zeta;
    const double gz = gamma + zeta;

    const Vec3 here = state_vector(z, y, s);
    const double v = value_hat(node, here);
    const Vec3 grad = grad_value_hat(node, here);
    const double dyv = grad(1);
    const double dsv = grad(2);

    const double alpha = ((1.0 / (a * eta) + 2.0 * zeta * eta) * dyv - 2.0 * gamma * eta * (s + z)) /
                         (2.0 * gz + 1.0 / (a * eta * eta));

    ContractControls c;
    if (within_band(alpha, p)) {
        c.a_b = alpha;
    } else {
        const double load = opts.derived_clamp_branch ? zeta * eta : zeta * gamma;
        c.a_b = (load * dyv - gamma * eta * (s + z)) / gz;
        c.clamped = true;
    }
    c.a_w = p.sigma * (zeta * dsv - gamma * y) / gz;

    const JumpDeltas d = jump_deltas(z, y, s, p.xi);
    auto shifted = [&](double y_new) {
        const double ratio = y / y_new;
        const double z_new = opts.exact_shift ? z * ratio * ratio : z;
        return value_hat(node, state_vector(z_new, y_new, s));
    };
    const double v_plus = shifted(y + p.xi);
    c.a_plus = (-gamma * d.plus + zeta * (v_plus - v + p.fee_r)) / gz;
    if (y > p.xi) {
        const double v_minus = shifted(y - p.xi);
        c.a_minus = (-gamma * d.minus + zeta * (v_minus - v + p.fee_r)) / gz;
    } else {
        c.a_minus = 0.0;
    }
    c.nu_star = nu_bar(c.a_b, p);
    return c;
}

ContractControls controls_risk_averse(double t, double z, double y, double s,
                                      const RiccatiSolution& sol, const ModelParams& p,
                                      const ControlOptions& opts) {
    check_time(t, p);
    return controls_risk_averse(sol.at(t), z, y, s, p, opts);
}

}  // namespace amm
