#include "amm/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace amm {

Mat3 SystemMatrices::C(const Mat3& g2) const { return -(g2 * U + V.transpose()); }

Vec3 SystemMatrices::E(const Mat3& g2) const {
    return Vec3(a2 * xi * xi * (1.0 - 4.0 * g2(0, 1)), a2 * (fee_r + xi * xi * g2(1, 1)), 0.0);
}

SystemMatrices build_system(const ModelParams& p) {
    const double a = p.impact_a;
    const double eta2 = p.eta * p.eta;
    const double gz = p.gamma + p.zeta;
    const double denom = 1.0 + 2.0 * a * gz * eta2;            // 1 + 2a(gamma+zeta)eta^2
    const double n_zeta = 1.0 + 2.0 * a * p.zeta * eta2;       // 1 + 2a zeta eta^2
    const double k_num = n_zeta - 4.0 * a * a * p.gamma * p.zeta * eta2 * eta2;
    const double rho = p.gamma * p.zeta * p.sigma * p.sigma / gz;
    const double lp_noise = p.gamma * eta2 * n_zeta / denom;   // gamma eta^2 (1+2a zeta eta^2)/(1+2a(gamma+zeta)eta^2)
    const double arb = 2.0 * p.a3 * p.xi;

    SystemMatrices m;
    m.k_y = k_num / (a * denom);
    m.rho = rho;
    m.a1 = p.a1;
    m.a2 = p.a2;
    m.xi = p.xi;
    m.fee_r = p.fee_r;
    m.eta = p.eta;
    m.sigma = p.sigma;

    m.U.diagonal() << 0.0, -m.k_y, 2.0 * rho;

    m.V(1, 0) = -arb + lp_noise;
    m.V(1, 2) = arb + lp_noise;
    m.V(2, 1) = rho;

    m.R(0, 0) = arb + 0.5 * lp_noise;
    m.R(2, 2) = arb + 0.5 * lp_noise;
    m.R(0, 2) = m.R(2, 0) = -arb + 0.5 * lp_noise;
    m.R(1, 1) = 0.5 * rho;
    return m;
}

ExistenceDiagnostic existence_check(const Mat6& theta_sym) {
    ExistenceDiagnostic d;
    d.theta_sym = theta_sym;
    d.norm_inf = theta_sym.cwiseAbs().rowwise().sum().maxCoeff();
    Eigen::SelfAdjointEigenSolver<Mat6> solver(theta_sym, Eigen::EigenvaluesOnly);
    d.max_eigenvalue = solver.eigenvalues().maxCoeff();
    d.passes = d.max_eigenvalue <= 1e-9 * d.norm_inf;
    return d;
}

ExistenceDiagnostic existence_check(const ModelParams& p) {
    const SystemMatrices m = build_system(p);
    Mat6 theta = Mat6::Zero();
    theta.topLeftCorner<3, 3>() = -(m.V + m.V.transpose());
    theta.topRightCorner<3, 3>() = -m.U;
    theta.bottomLeftCorner<3, 3>() = -m.U.transpose();
    return existence_check(theta);
}

RiccatiNode riccati_rhs(const SystemMatrices& m, const RiccatiNode& x) {
    RiccatiNode d;
    d.g2 = x.g2 * m.U * x.g2 + m.V.transpose() * x.g2 + x.g2 * m.V + m.R;
    d.g1 = -(m.C(x.g2) * x.g1 + m.E(x.g2));
    const double g13 = x.g1(1);
    const double g14 = x.g1(2);
    d.g11 = -m.k_y * g13 * g13 + 2.0 * m.rho * g14 * g14
            - (2.0 * m.a1 * m.xi * m.xi + m.eta * m.eta) * x.g2(1, 1)
            - m.sigma * m.sigma * x.g2(2, 2) - 2.0 * m.a1 * m.fee_r;
    return d;
}

namespace {

RiccatiNode axpy(const RiccatiNode& x, double h, const RiccatiNode& k) {
    return {x.g11 + h * k.g11, x.g1 + h * k.g1, x.g2 + h * k.g2};
}

bool finite(const RiccatiNode& x) {
    return std::isfinite(x.g11) && x.g1.allFinite() && x.g2.allFinite();
}

}  // namespace

RiccatiSolution solve_riccati(const ModelParams& p, std::size_t n_steps) {
    p.validate();
    if (n_steps == 0) {
        throw std::invalid_argument("solve_riccati: n_steps must be >= 1");
    }
    const SystemMatrices m = build_system(p);
    const double T = p.horizon_T;
    const double h = T / static_cast<double>(n_steps);

    RiccatiSolution sol;
    sol.grid.resize(n_steps + 1);
    sol.g11.resize(n_steps + 1);
    sol.g1.resize(n_steps + 1);
    sol.g2.resize(n_steps + 1);
    for (std::size_t i = 0; i <= n_steps; ++i) {
        sol.grid[i] = i == n_steps ? T : h * static_cast<double>(i);
    }

    RiccatiNode x;  // zero terminal condition
    sol.g11[n_steps] = x.g11;
    sol.g1[n_steps] = x.g1;
    sol.g2[n_steps] = x.g2;

    // Backward in time: dx/dt = f(x), step of -h.
    for (std::size_t i = n_steps; i > 0; --i) {
        const RiccatiNode k1 = riccati_rhs(m, x);
        const RiccatiNode k2 = riccati_rhs(m, axpy(x, -0.5 * h, k1));
        const RiccatiNode k3 = riccati_rhs(m, axpy(x, -0.5 * h, k2));
        const RiccatiNode k4 = riccati_rhs(m, axpy(x, -h, k3));
        x.g11 -= h / 6.0 * (k1.g11 + 2.0 * k2.g11 + 2.0 * k3.g11 + k4.g11);
        x.g1 -= h / 6.0 * (k1.g1 + 2.0 * k2.g1 + 2.0 * k3.g1 + k4.g1);
        x.g2 -= h / 6.0 * (k1.g2 + 2.0 * k2.g2 + 2.0 * k3.g2 + k4.g2);
        x.g2 = 0.5 * (x.g2 + x.g2.transpose()).eval();
        if (!finite(x)) {
            std::ostringstream msg;
            msg << "Riccati solution blew up at t = " << sol.grid[i - 1];
            throw RiccatiBlowUp(sol.grid[i - 1], msg.str());
        }
        sol.g11[i - 1] = x.g11;
        sol.g1[i - 1] = x.g1;
        sol.g2[i - 1] = x.g2;
    }
    return sol;
}

RiccatiNode RiccatiSolution::at(double t) const {
    if (grid.empty()) {
        throw std::domain_error("RiccatiSolution::at: empty solution");
    }
    if (!(t >= grid.front() && t <= grid.back())) {
        throw std::domain_error("RiccatiSolution::at: t outside [0, T]");
    }
    auto it = std::upper_bound(grid.begin(), grid.end(), t);
    if (it == grid.end()) {
        return node(grid.size() - 1);
    }
    const std::size_t hi = static_cast<std::size_t>(it - grid.begin());
    const std::size_t lo = hi - 1;
    const double w = (t - grid[lo]) / (grid[hi] - grid[lo]);
    if (w == 0.0) {
        return node(lo);
    }
    return {(1.0 - w) * g11[lo] + w * g11[hi], (1.0 - w) * g1[lo] + w * g1[hi],
            (1.0 - w) * g2[lo] + w * g2[hi]};
}

double value_hat(const RiccatiNode& node, const Vec3& y) {
    return node.g11 + 2.0 * y.dot(node.g1) + y.dot(node.g2 * y);
}

Vec3 grad_value_hat(const RiccatiNode& node, const Vec3& y) {
    return 2.0 * node.g1 + 2.0 * node.g2 * y;
}

double value_hat(double t, double z, double y, double s, const RiccatiSolution& sol) {
    return value_hat(sol.at(t), state_vector(z, y, s));
}

Vec3 grad_value_hat(double t, double z, double y, double s, const RiccatiSolution& sol) {
    return grad_value_hat(sol.at(t), state_vector(z, y, s));
}

void write_riccati_csv(std::ostream& out, const RiccatiSolution& sol) {
    out << "t,g11,g12,g13,g14,g22,g23,g24,g33,g34,g44\n";
    out << std::setprecision(17);
    for (std::size_t i = 0; i < sol.size(); ++i) {
        const Mat3& g2 = sol.g2[i];
        out << sol.grid[i] << ',' << sol.g11[i] << ',' << sol.g1[i](0) << ',' << sol.g1[i](1) << ','
            << sol.g1[i](2) << ',' << g2(0, 0) << ',' << g2(0, 1) << ',' << g2(0, 2) << ','
            << g2(1, 1) << ',' << g2(1, 2) << ',' << g2(2, 2) << '\n';
    }
}

void write_riccati_csv(const std::string& path, const RiccatiSolution& sol) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open " + path + " for writing");
    }
    write_riccati_csv(out, sol);
}

RiccatiSolution read_riccati_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("t,g11,", 0) != 0) {
        throw std::runtime_error("Riccati CSV: missing or unexpected header");
    }
    RiccatiSolution sol;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        std::istringstream row(line);
        std::string cell;
        double v[11];
        for (int k = 0; k < 11; ++k) {
            if (!std::getline(row, cell, ',')) {
                throw std::runtime_error("Riccati CSV: short row at line " + std::to_string(line_no));
            }
            v[k] = std::stod(cell);
        }
        Mat3 g2;
        g2 << v[5], v[6], v[7], v[6], v[8], v[9], v[7], v[9], v[10];
        sol.grid.push_back(v[0]);
        sol.g11.push_back(v[1]);
        sol.g1.emplace_back(v[2], v[3], v[4]);
        sol.g2.push_back(g2);
    }
    if (sol.grid.size() < 2 || !std::is_sorted(sol.grid.begin(), sol.grid.end())) {
        throw std::runtime_error("Riccati CSV: need at least two increasing time nodes");
    }
    return sol;
}

RiccatiSolution read_riccati_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path);
    }
    return read_riccati_csv(in);
}

}  // namespace amm
