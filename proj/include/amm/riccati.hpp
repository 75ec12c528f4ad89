#pragma once

// Quadratic ansatz for the risk-averse venue's value function
//
//     v(t, y) = g11(t) + 2 y^T G1(t) + y^T G2(t) y,   y = (Z, Y, S)
//
// and the backward ODE system for its coefficients: a matrix Riccati
// equation for G2, a linear equation for G1 and a quadrature for g11.

#include "amm/model.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace amm {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// State vector ordering used throughout: (Z, Y, S).
inline Vec3 state_vector(double z, double y, double s) { return Vec3(z, y, s); }

/// Constant matrices of the Riccati system plus the time-dependent
/// C(t), E(t) of the linear G1 equation.
struct SystemMatrices {
    Mat3 U = Mat3::Zero();
    Mat3 V = Mat3::Zero();
    Mat3 R = Mat3::Zero();

    // Scalars shared by the ODE right-hand sides.
    double k_y = 0.0;         // (1 + 2a zeta eta^2 - 4a^2 gamma zeta eta^4) / (a (1 + 2a(gamma+zeta) eta^2))
    double rho = 0.0;         // gamma zeta sigma^2 / (gamma + zeta)
    double a2 = 0.0;
    double xi = 0.0;
    double fee_r = 0.0;
    double a1 = 0.0;
    double eta = 0.0;
    double sigma = 0.0;

    /// C(t) = -(G2 U + V^T); G1' = -(C G1 + E).
    Mat3 C(const Mat3& g2) const;
    /// E(t) = (a2 xi^2 (1 - 4 g23), a2 (r + xi^2 g33), 0).
    Vec3 E(const Mat3& g2) const;
};

SystemMatrices build_system(const ModelParams& p);

struct ExistenceDiagnostic {
    bool passes = false;
    double max_eigenvalue = 0.0;
    double norm_inf = 0.0;
    Mat6 theta_sym = Mat6::Zero();
};

/// Assembles Theta + Theta^T = [[-(V + V^T), -U], [-U, 0]] and checks
/// negative semi-definiteness: max eigenvalue <= 1e-9 * ||.||_inf.
ExistenceDiagnostic existence_check(const ModelParams& p);
ExistenceDiagnostic existence_check(const Mat6& theta_sym);

/// Coefficients at a single time.
struct RiccatiNode {
    double g11 = 0.0;
    Vec3 g1 = Vec3::Zero();
    Mat3 g2 = Mat3::Zero();
};

class RiccatiBlowUp : public std::runtime_error {
public:
    RiccatiBlowUp(double t, const std::string& what) : std::runtime_error(what), time_(t) {}
    double time() const { return time_; }

private:
    double time_;
};

/// Time-gridded coefficients; immutable once built.
struct RiccatiSolution {
    std::vector<double> grid;
    std::vector<double> g11;
    std::vector<Vec3> g1;
    std::vector<Mat3> g2;

    std::size_t size() const { return grid.size(); }
    double horizon() const { return grid.back(); }
    RiccatiNode node(std::size_t i) const { return {g11[i], g1[i], g2[i]}; }

    /// Linear interpolation in t; throws std::domain_error outside the grid.
    RiccatiNode at(double t) const;
};

/// Right-hand side d/dt of (g11, G1, G2).
RiccatiNode riccati_rhs(const SystemMatrices& m, const RiccatiNode& node);

/// Integrates backward from G2(T) = 0, G1(T) = 0, g11(T) = 0 with classical
/// RK4 on a uniform grid of n_steps intervals. G2 is symmetrised after
/// every step. Throws RiccatiBlowUp on non-finite values.
RiccatiSolution solve_riccati(const ModelParams& p, std::size_t n_steps = 10000);

double value_hat(const RiccatiNode& node, const Vec3& state);
Vec3 grad_value_hat(const RiccatiNode& node, const Vec3& state);
double value_hat(double t, double z, double y, double s, const RiccatiSolution& sol);
Vec3 grad_value_hat(double t, double z, double y, double s, const RiccatiSolution& sol);

/// CSV: t,g11,g12,g13,g14,g22,g23,g24,g33,g34,g44
void write_riccati_csv(std::ostream& out, const RiccatiSolution& sol);
void write_riccati_csv(const std::string& path, const RiccatiSolution& sol);
RiccatiSolution read_riccati_csv(std::istream& in);
RiccatiSolution read_riccati_csv(const std::string& path);

}  // namespace amm
