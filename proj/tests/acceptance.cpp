// Acceptance suite. Usage: acceptance [N ...] runs criteria N (default 1-10)
// and prints one PASS/FAIL line per criterion. Exit status 0 iff all pass.

#include "amm/calibrate.hpp"
#include "amm/controls.hpp"
#include "amm/oracle.hpp"
#include "amm/riccati.hpp"
#include "amm/simulate.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <string>
#include <vector>

using namespace amm;

namespace {

// Pinned tolerances and sizes.
constexpr double kExistenceTol = 1e-9;
constexpr double kSymmetryTol = 1e-10;
constexpr double kMinOrder = 3.5;
constexpr double kSolveSeconds = 5.0;
constexpr std::size_t kOrderCoarse = 16;
constexpr double kResidualTol = 1e-6;
constexpr double kResidualSeconds = 30.0;
constexpr std::size_t kHalvingCoarse = 4;
constexpr double kLimitTol = 1e-6;
constexpr double kReportedCumNu = 8000.0;
constexpr double kReportedFees = 500.0;
constexpr double kReportedRelTol = 0.10;
constexpr std::size_t kPaths = 1000;
constexpr std::size_t kSteps = 10000;
constexpr double kCumNuLo = 6000.0, kCumNuHi = 10000.0;
constexpr double kFeesLo = 375.0, kFeesHi = 625.0;
constexpr double kMcSeconds = 300.0;
constexpr double kCollapseFrac = 0.01;
constexpr std::size_t kCalibBuckets = 17131;
constexpr double kCalibMispricing = 10.0;
constexpr int kCalibSeeds = 20;
constexpr int kCalibRequired = 19;
constexpr double kCalibSe = 2.0;
constexpr std::size_t kArgmaxStates = 200;
constexpr std::size_t kMartPaths = 20000;
constexpr std::size_t kMartSteps = 1000;
constexpr double kMartSigmas = 3.0;
constexpr std::size_t kPoissonPaths = 5000;
constexpr double kPoissonSigmas = 4.0;

struct Outcome {
    bool pass = true;
    std::vector<std::string> lines;

    void check(bool ok, const std::string& what) {
        pass = pass && ok;
        lines.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
    }
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Ensemble noise_ensemble(double& p0, double& secs) {
    const auto t0 = std::chrono::steady_clock::now();
    const ModelParams p = ModelParams::noise_trading();
    const RiccatiSolution sol = solve_riccati(p, kSteps);
    SimConfig cfg;
    cfg.n_paths = kPaths;
    cfg.n_steps = kSteps;
    cfg.seed = 1;
    p0 = equal_split_p0(run_ensemble(p, &sol, cfg, 0.0));
    Ensemble e = run_ensemble(p, &sol, cfg, p0);
    secs = seconds_since(t0);
    return e;
}

Outcome criterion1() {
    Outcome o;
    const ModelParams p = ModelParams::baseline();
    const auto t0 = std::chrono::steady_clock::now();
    const ExistenceDiagnostic d = existence_check(p);
    const RiccatiSolution sol = solve_riccati(p, kSteps);
    const double secs = seconds_since(t0);
    const double scaled = d.max_eigenvalue / d.norm_inf;
    o.check(d.passes && scaled <= kExistenceTol,
            fmt("existence: max eigenvalue %.4g, scaled %.4g (tol %.0e)", d.max_eigenvalue, scaled,
                kExistenceTol));
    double asym = 0.0;
    double scale = 0.0;
    for (const Mat3& g : sol.g2) {
        asym = std::max(asym, (g - g.transpose()).cwiseAbs().maxCoeff());
        scale = std::max(scale, g.cwiseAbs().maxCoeff());
    }
    o.check(sol.size() == kSteps + 1 && sol.grid.front() == 0.0 && sol.grid.back() == 1.0,
            "solve completes on [0, 1]");
    o.check(asym <= kSymmetryTol * scale, fmt("G2 asymmetry %.3g (tol %.0e x %.3g)", asym, kSymmetryTol, scale));
    const OracleReport order = riccati_convergence_order(p, kOrderCoarse);
    o.check(order.value >= kMinOrder,
            fmt("empirical order %.3f at n = %.0f/%.0f/%.0f", order.value, kOrderCoarse, 2 * kOrderCoarse,
                4 * kOrderCoarse) + fmt(" (min %.1f), worst entry ", kMinOrder) + order.worst_case_input);
    o.check(secs <= kSolveSeconds, fmt("runtime %.3f s (max %.0f)", secs, kSolveSeconds));
    return o;
}

Outcome criterion2() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    for (const auto& [name, p] : {std::pair{"baseline", ModelParams::baseline()},
                                  std::pair{"noise trading", ModelParams::noise_trading()}}) {
        const RiccatiSolution sol = solve_riccati(p, kSteps);
        const OracleReport r = hjb_residual_sweep(sol, p);
        o.check(r.value <= kResidualTol,
                std::string(name) + fmt(": max relative residual %.3g (tol %.0e)", r.value, kResidualTol));
    }
    const OracleReport h = hjb_residual_halving(ModelParams::baseline(), kHalvingCoarse);
    o.check(h.pass, fmt("baseline halving ratio n=%.0f->%.0f: %.3f", kHalvingCoarse, 2 * kHalvingCoarse, h.value) +
                        fmt(" (band [%.2f, %.2f])", 16.0 / 1.5, 16.0 * 1.5));
    const double secs = seconds_since(t0);
    o.check(secs <= kResidualSeconds, fmt("runtime %.2f s (max %.0f)", secs, kResidualSeconds));
    return o;
}

Outcome criterion3() {
    Outcome o;
    const ModelParams p = ModelParams::noise_trading();
    const double nu0 = risk_neutral_nu_hat(0.0, 2820, 2820, p);
    const double rel = std::fabs(nu0 * p.impact_a / (p.a2 * p.fee_r * p.horizon_T) - 1.0);
    o.check(rel <= kLimitTol, fmt("nu_hat(0) = %.6f, relative gap to a2 r T / a %.3g (tol %.0e)", nu0, rel, kLimitTol));
    const OracleReport lim = risk_neutral_limit(p);
    o.check(lim.pass, fmt("closed-form integrals vs quadrature: %.3g (tol %.0e)", lim.value, lim.tolerance));
    const double cum = closed_form_cum_nu(p);
    const double fees = closed_form_ext_fees(p);
    o.check(std::fabs(cum - 8460.0) <= 1e-9 * 8460.0, fmt("int nu dt = %.6f ETH", cum));
    o.check(std::fabs(cum / kReportedCumNu - 1) <= kReportedRelTol,
            fmt("vs reported %.0f ETH: %.2f%% (max %.0f%%)", kReportedCumNu, 100 * std::fabs(cum / kReportedCumNu - 1),
                100 * kReportedRelTol));
    o.check(std::fabs(fees / kReportedFees - 1) <= kReportedRelTol,
            fmt("int a nu^2 dt = %.3f USDC vs reported %.0f: %.2f%% (max %.0f%%)", fees, kReportedFees,
                100 * std::fabs(fees / kReportedFees - 1), 100 * kReportedRelTol));
    return o;
}

Outcome criterion4() {
    Outcome o;
    double p0 = 0;
    double secs = 0;
    const Ensemble e = noise_ensemble(p0, secs);
    const EnsembleSummary& s = e.summary;
    o.check(s.mean_cum_nu >= kCumNuLo && s.mean_cum_nu <= kCumNuHi,
            fmt("mean int nu dt = %.2f ETH (se %.2g), band [%.0f, %.0f]", s.mean_cum_nu, s.se_cum_nu, kCumNuLo,
                kCumNuHi));
    o.check(s.mean_ext_fees >= kFeesLo && s.mean_ext_fees <= kFeesHi,
            fmt("mean external fees = %.3f USDC (se %.2g), band [%.0f, %.0f]", s.mean_ext_fees, s.se_ext_fees,
                kFeesLo, kFeesHi));
    o.check(s.mean_reward > 0, fmt("mean R = %.6g (se %.3g), P0 = %.6g", s.mean_reward, s.se_reward, p0));
    o.check(s.mean_venue_pnl > 0, fmt("mean venue pnl = %.6g (se %.3g)", s.mean_venue_pnl, s.se_venue_pnl));
    // reward + venue_pnl = r N up to the rounding of one subtraction
    double worst = 0;
    for (const SimPath& path : e.paths) {
        const double fees = ModelParams::noise_trading().fee_r * static_cast<double>(path.n_minus + path.n_plus);
        const double ulp = std::numeric_limits<double>::epsilon() * std::max(std::fabs(path.reward), fees);
        worst = std::max(worst, std::fabs(path.reward + path.venue_pnl - fees) / ulp);
    }
    o.check(worst <= 4.0, fmt("accounting identity: max |R + venue - r N| = %.2f eps-units (max 4) over %.0f paths",
                              worst, static_cast<double>(e.paths.size())));
    o.check(secs <= kMcSeconds, fmt("runtime %.1f s (max %.0f)", secs, kMcSeconds));
    return o;
}

Outcome criterion5() {
    Outcome o;
    double p0 = 0;
    double secs = 0;
    const double reference = noise_ensemble(p0, secs).summary.mean_cum_nu;
    const double limit = kCollapseFrac * std::fabs(reference);
    for (double a : {1e-13, 1e-12}) {
        ModelParams p = ModelParams::baseline();
        p.impact_a = a;
        const RiccatiSolution sol = solve_riccati(p, kSteps);
        SimConfig cfg;
        cfg.n_paths = kPaths;
        cfg.n_steps = kSteps;
        const Ensemble e = run_ensemble(p, &sol, cfg);
        const SeriesStats& cum = e.summary.get("cum_nu");
        double worst = 0;
        double at = 0;
        for (std::size_t k = 0; k < cum.mean.size(); ++k) {
            if (std::fabs(cum.mean[k]) > worst) {
                worst = std::fabs(cum.mean[k]);
                at = e.summary.times[k];
            }
        }
        o.check(worst <= limit, fmt("a = %.0e: max_t |mean int nu dt| = %.2f ETH at t = %.2f (max %.2f)", a, worst,
                                    at, limit));
    }
    o.lines.push_back(fmt("     reference (criterion 4) mean int nu dt = %.2f ETH", reference));
    return o;
}

Outcome criterion6() {
    Outcome o;
    const ModelParams p = ModelParams::baseline();
    const RiccatiSolution sol = solve_riccati(p, kSteps);
    SimConfig cfg;
    cfg.n_paths = kPaths;
    cfg.n_steps = kSteps;
    const Ensemble e = run_ensemble(p, &sol, cfg);
    const double d = p.a1 / p.a3;
    const double frac = violation_fraction(e, d);
    o.check(frac == 0.0, fmt("fraction of recorded |S - Z| > %.4f: %.4f (required 0)", d, frac));
    return o;
}

Outcome criterion7() {
    Outcome o;
    int hits = 0;
    double worst_a1 = 0;
    double worst_a3 = 0;
    for (int seed = 1; seed <= kCalibSeeds; ++seed) {
        const auto ticks = synthetic_ticks(142.7, 13.6, kCalibBuckets, kCalibMispricing, seed);
        const CalibrationResult r = fit_intensities(bucketize(ticks, 10.0));
        const double z1 = std::fabs(r.a1_hat - 142.7) / r.se_a1;
        const double z3 = std::fabs(r.a3_hat - 13.6) / r.se_a3;
        worst_a1 = std::max(worst_a1, z1);
        worst_a3 = std::max(worst_a3, z3);
        if (z1 <= kCalibSe && z3 <= kCalibSe) ++hits;
    }
    o.check(hits >= kCalibRequired, fmt("seeds with both estimates within %.0f SE: %.0f/%.0f (need %.0f)", kCalibSe,
                                        hits, kCalibSeeds, kCalibRequired));
    o.lines.push_back(fmt("     worst |a1 error| %.2f SE, worst |a3 error| %.2f SE, %.0f buckets", worst_a1, worst_a3,
                          static_cast<double>(kCalibBuckets)));
    return o;
}

Outcome criterion8() {
    Outcome o;
    for (const auto& [name, p] : {std::pair{"baseline", ModelParams::baseline()},
                                  std::pair{"noise trading", ModelParams::noise_trading()}}) {
        const RiccatiSolution sol = solve_riccati(p, kSteps);
        const OracleReport r = hamiltonian_argmax(sol, p, kArgmaxStates);
        o.check(r.pass, std::string(name) + fmt(": max objective gap / scale %.3g (tol %.0e)", r.value, r.tolerance) +
                            "; " + r.note);
    }
    return o;
}

Outcome criterion9() {
    Outcome o;
    const ModelParams p = ModelParams::noise_trading();
    const RiccatiSolution sol = solve_riccati(p, kMartSteps);
    SimConfig cfg;
    cfg.n_paths = kMartPaths;
    cfg.n_steps = kMartSteps;
    cfg.record_stride = kMartSteps / 10;
    for (NuPolicy policy : {NuPolicy::zero, NuPolicy::optimal}) {
        cfg.nu_policy = policy;
        const OracleReport r = supermartingale_check(p, &sol, cfg, kMartSigmas);
        o.check(r.pass, r.name + fmt(": %.3f SE (max %.0f)", r.value, kMartSigmas) + " at " + r.worst_case_input +
                            "; " + r.note);
    }
    return o;
}

Outcome criterion10() {
    Outcome o;
    ModelParams p = ModelParams::baseline();
    p.a2 = 0;
    p.a3 = 0;
    SimConfig cfg;
    cfg.n_paths = kPoissonPaths;
    cfg.n_steps = kSteps;
    cfg.regime = Regime::risk_neutral;
    cfg.nu_policy = NuPolicy::zero;
    const Ensemble e = run_ensemble(p, nullptr, cfg);
    const double target = p.a1 * p.horizon_T;
    for (const bool buys : {true, false}) {
        std::vector<double> n;
        for (const SimPath& path : e.paths) {
            n.push_back(static_cast<double>(buys ? path.n_hat_minus : path.n_plus));
        }
        const double m = compensated_mean(n);
        double m2 = 0;
        double m4 = 0;
        for (double x : n) {
            m2 += (x - m) * (x - m);
            m4 += std::pow(x - m, 4);
        }
        const double count = static_cast<double>(n.size());
        const double var = m2 / (count - 1);
        const double se_mean = std::sqrt(var / count);
        const double se_var = std::sqrt((m4 / count - var * var) / count);
        const char* side = buys ? "buys " : "sells";
        o.check(std::fabs(m - target) <= kPoissonSigmas * se_mean,
                std::string(side) + fmt(": mean %.3f vs a1 T = %.1f, %.2f SE (max %.0f)", m, target,
                                        std::fabs(m - target) / se_mean, kPoissonSigmas));
        o.check(std::fabs(var - target) <= kPoissonSigmas * se_var,
                std::string(side) + fmt(": variance %.3f vs a1 T = %.1f, %.2f SE (max %.0f)", var, target,
                                        std::fabs(var - target) / se_var, kPoissonSigmas));
    }
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::function<Outcome()>> criteria = {criterion1, criterion2, criterion3, criterion4,
                                                            criterion5, criterion6, criterion7, criterion8,
                                                            criterion9, criterion10};
    std::vector<int> chosen;
    for (int i = 1; i < argc; ++i) {
        const int n = std::atoi(argv[i]);
        if (n < 1 || n > 10) {
            std::fprintf(stderr, "usage: acceptance [1-10 ...]\n");
            return 2;
        }
        chosen.push_back(n);
    }
    if (chosen.empty()) {
        for (int n = 1; n <= 10; ++n) chosen.push_back(n);
    }
    bool all = true;
    for (int n : chosen) {
        Outcome o;
        try {
            o = criteria[n - 1]();
        } catch (const std::exception& e) {
            o.check(false, std::string("exception: ") + e.what());
        }
        std::printf("%s criterion %d\n", o.pass ? "PASS" : "FAIL", n);
        for (const auto& line : o.lines) std::printf("  %s\n", line.c_str());
        std::fflush(stdout);
        all = all && o.pass;
    }
    return all ? 0 : 1;
}
