#include "cli.hpp"

#include "amm/calibrate.hpp"
#include "amm/oracle.hpp"
#include "amm/riccati.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace fs = std::filesystem;

namespace amm::cli {

namespace {

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> paths;
    std::optional<std::size_t> steps;
    std::optional<unsigned> threads;
    std::string out;
    std::string ticks;
    std::optional<double> window;
    bool strict = false;
    bool fit_a2 = false;
    std::vector<std::string> settings;
};

std::ofstream open_out(const fs::path& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    return f;
}

void write_text(const fs::path& path, const std::string& text) {
    auto f = open_out(path);
    f << text << '\n';
}

fs::path riccati_path(const RunConfig& cfg) { return fs::path(cfg.out_dir) / "riccati.csv"; }

RiccatiSolution load_solution(const RunConfig& cfg) {
    const fs::path path = riccati_path(cfg);
    if (!fs::exists(path)) {
        throw InputError("missing " + path.string() + "; run `amm-lab solve` first");
    }
    return read_riccati_csv(path.string());
}

int cmd_calibrate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    if (cfg.ticks_path.empty()) throw InputError("calibrate needs --ticks or `ticks = ...` in the config");
    if (!fs::exists(cfg.ticks_path)) throw InputError("ticks file not found: " + cfg.ticks_path);
    TickLoad load;
    try {
        load = load_ticks(cfg.ticks_path, cfg.strict);
    } catch (const FormatError& e) {
        throw InputError(e.what());
    }
    for (const auto& issue : load.issues) {
        err << cfg.ticks_path << ":" << issue.line << ": skipped: " << issue.message << '\n';
    }
    if (load.records.empty()) throw InputError(cfg.ticks_path + ": no usable records");
    const auto buckets = bucketize(load.records, cfg.window_minutes);
    CalibrationResult r;
    try {
        r = fit_intensities(buckets, FitOptions{cfg.fit_a2});
    } catch (const CalibrationError& e) {
        throw InputError(cfg.ticks_path + ": " + e.what());
    }
    write_text(fs::path(cfg.out_dir) / "calibration.json", calibration_json(r));
    auto resid = open_out(fs::path(cfg.out_dir) / "residuals.csv");
    write_residual_csv(resid, buckets, r);
    out << std::setprecision(6) << "a1_hat = " << r.a1_hat << " (se " << r.se_a1 << ")\n"
        << "a3_hat = " << r.a3_hat << " (se " << r.se_a3 << ")\n"
        << "boundary d = " << r.boundary_d << " USDC\n"
        << "violations: " << r.violations_left << " left, " << r.violations_right << " right, fraction "
        << 100.0 * r.violation_fraction << "%\n";
    return ok;
}

int cmd_solve(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const ExistenceDiagnostic d = existence_check(cfg.params);
    out << "existence: " << (d.passes ? "PASS" : "FAIL") << " (max eigenvalue " << std::setprecision(6)
        << d.max_eigenvalue << ", ||.||_inf " << d.norm_inf << ")\n";
    if (!d.passes) {
        err << "warning: Theta + Theta^T is not negative semi-definite; the sufficient condition for "
               "existence does not hold, integrating anyway\n";
    }
    RiccatiSolution sol;
    try {
        sol = solve_riccati(cfg.params, cfg.solve_steps);
    } catch (const RiccatiBlowUp& e) {
        err << "error: " << e.what() << '\n';
        return verification_failed;
    }
    write_riccati_csv(riccati_path(cfg).string(), sol);
    out << "G2(0) =\n" << std::setprecision(10) << sol.g2.front() << '\n';
    out << "G1(0) = " << sol.g1.front().transpose() << "\ng11(0) = " << sol.g11.front() << '\n';
    out << "wrote " << riccati_path(cfg).string() << '\n';
    return ok;
}

void write_mispricing(const Ensemble& e, const fs::path& path) {
    std::vector<double> samples;
    for (const auto& p : e.paths) {
        for (const auto& r : p.records) {
            if (r.t > 0.0) samples.push_back(r.s - r.z);
        }
    }
    const Histogram h = histogram(samples);
    auto f = open_out(path);
    f << "bin_lo,bin_hi,count\n" << std::setprecision(12);
    const double w = (h.hi - h.lo) / static_cast<double>(h.counts.size());
    for (std::size_t k = 0; k < h.counts.size(); ++k) {
        f << h.lo + w * k << ',' << h.lo + w * (k + 1) << ',' << h.counts[k] << '\n';
    }
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out, std::ostream&) {
    std::optional<RiccatiSolution> sol;
    if (cfg.sim.regime == Regime::risk_averse) sol = load_solution(cfg);
    const RiccatiSolution* ptr = sol ? &*sol : nullptr;

    double p0 = 0.0;
    Ensemble e;
    if (cfg.p0) {
        p0 = *cfg.p0;
        e = run_ensemble(cfg.params, ptr, cfg.sim, p0);
    } else {
        // linearity in P0: one pass at 0, then the same randomness at P0*
        const Ensemble zero = run_ensemble(cfg.params, ptr, cfg.sim, 0.0);
        p0 = equal_split_p0(zero);
        e = run_ensemble(cfg.params, ptr, cfg.sim, p0);
    }
    const fs::path dir(cfg.out_dir);
    const double d = cfg.params.a3 > 0 ? cfg.params.a1 / cfg.params.a3 : 0.0;
    nlohmann::json summary = nlohmann::json::parse(summary_json(e));
    summary["violation_boundary_d"] = d;
    summary["violation_fraction"] = cfg.params.a3 > 0 ? violation_fraction(e, d) : 0.0;
    write_text(dir / "summary.json", summary.dump(2));
    for (const auto& [name, stats] : e.summary.series) {
        auto f = open_out(dir / ("series_" + name + ".csv"));
        write_series_csv(f, e.summary.times, stats);
    }
    {
        auto f = open_out(dir / "terminal.csv");
        write_terminal_csv(f, e);
    }
    {
        auto f = open_out(dir / "path_0.csv");
        write_path_csv(f, e.paths.front());
    }
    write_mispricing(e, dir / "mispricing_hist.csv");
    out << std::setprecision(8) << "P0 = " << p0 << (cfg.p0 ? "" : " (equal split)") << '\n'
        << "mean reward = " << e.summary.mean_reward << " (se " << e.summary.se_reward << ")\n"
        << "mean venue pnl = " << e.summary.mean_venue_pnl << " (se " << e.summary.se_venue_pnl << ")\n"
        << "mean int nu dt = " << e.summary.mean_cum_nu << " ETH\n"
        << "mean external fees = " << e.summary.mean_ext_fees << " USDC\n";
    return ok;
}

OracleReport existence_report(const ModelParams& p) {
    const ExistenceDiagnostic d = existence_check(p);
    OracleReport r;
    r.name = "riccati_existence";
    r.metric = "max eigenvalue of Theta + Theta^T / ||.||_inf";
    r.value = d.norm_inf > 0 ? d.max_eigenvalue / d.norm_inf : d.max_eigenvalue;
    r.tolerance = 1e-9;
    r.max_abs_error = d.max_eigenvalue;
    r.pass = d.passes;
    return r;
}

int cmd_verify(const RunConfig& cfg, std::ostream& out, std::ostream&) {
    const ModelParams& p = cfg.params;
    std::vector<OracleReport> reports;
    reports.push_back(laurent_error(cfg.sim.y0, p.xi));
    reports.push_back(risk_neutral_limit(p));
    reports.push_back(existence_report(p));
    reports.push_back(riccati_convergence_order(p, 16));
    const RiccatiSolution sol = solve_riccati(p, cfg.solve_steps);
    reports.push_back(hjb_residual_sweep(sol, p));
    reports.push_back(hjb_residual_halving(p, 4));
    reports.push_back(hamiltonian_argmax(sol, p));

    const RiccatiSolution coarse = solve_riccati(p, cfg.verify_steps);
    SimConfig mc = cfg.sim;
    mc.regime = Regime::risk_averse;
    mc.n_paths = cfg.verify_paths;
    mc.n_steps = cfg.verify_steps;
    mc.record_stride = std::max<std::size_t>(1, cfg.verify_steps / 10);
    mc.nu_policy = NuPolicy::zero;
    reports.push_back(supermartingale_check(p, &coarse, mc));
    mc.nu_policy = NuPolicy::optimal;
    reports.push_back(supermartingale_check(p, &coarse, mc));

    auto f = open_out(fs::path(cfg.out_dir) / "verify.jsonl");
    write_json_lines(f, reports);
    bool all = true;
    for (const auto& r : reports) {
        out << (r.pass ? "PASS " : "FAIL ") << r.name << ": " << r.metric << " = " << r.value
            << " (tolerance " << r.tolerance << ")\n";
        all = all && r.pass;
    }
    return all ? ok : verification_failed;
}

void copy_series(const fs::path& from, const fs::path& to) {
    if (!fs::exists(from)) throw InputError("missing " + from.string() + "; run `amm-lab simulate` first");
    fs::copy_file(from, to, fs::copy_options::overwrite_existing);
}

void histogram_csv(const nlohmann::json& h, const fs::path& path) {
    auto f = open_out(path);
    f << "bin_lo,bin_hi,count\n" << std::setprecision(12);
    const double lo = h.at("lo");
    const double hi = h.at("hi");
    const auto counts = h.at("counts").get<std::vector<std::size_t>>();
    const double w = (hi - lo) / static_cast<double>(counts.size());
    for (std::size_t k = 0; k < counts.size(); ++k) {
        f << lo + w * k << ',' << lo + w * (k + 1) << ',' << counts[k] << '\n';
    }
}

int cmd_report(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const fs::path dir(cfg.out_dir);
    const fs::path summary_path = dir / "summary.json";
    if (!fs::exists(summary_path)) {
        throw InputError("missing " + summary_path.string() + "; run `amm-lab simulate` first");
    }
    std::ifstream in(summary_path);
    const nlohmann::json summary = nlohmann::json::parse(in);
    const fs::path rep = dir / "report";
    fs::create_directories(rep);

    const fs::path resid = dir / "residuals.csv";
    if (fs::exists(resid)) {
        std::ifstream r(resid);
        std::string line;
        std::getline(r, line);
        std::vector<double> mis;
        while (std::getline(r, line)) {
            mis.push_back(std::stod(line.substr(line.find(',') + 1)));
        }
        const Histogram h = histogram(mis);
        histogram_csv({{"lo", h.lo}, {"hi", h.hi}, {"counts", h.counts}}, rep / "fig1_empirical_mispricing_hist.csv");
    } else {
        err << "note: no residuals.csv; skipping the empirical mispricing histogram (run `amm-lab calibrate`)\n";
    }
    copy_series(dir / "mispricing_hist.csv", rep / "fig2_simulated_mispricing_hist.csv");
    copy_series(dir / "series_y.csv", rep / "fig3_inventory_band.csv");
    copy_series(dir / "series_z.csv", rep / "fig3_pool_price_band.csv");
    copy_series(dir / "series_s.csv", rep / "fig3_external_price_band.csv");
    copy_series(dir / "series_nu.csv", rep / "fig4_speed_band.csv");
    copy_series(dir / "series_cum_nu.csv", rep / "fig4_cumulative_liquidity_band.csv");
    copy_series(dir / "path_0.csv", rep / "fig5_sample_path.csv");
    histogram_csv(summary.at("reward_hist"), rep / "fig6_reward_hist.csv");
    copy_series(dir / "series_p.csv", rep / "fig7_contract_band.csv");
    copy_series(dir / "series_ext_fees.csv", rep / "fig8_external_fees_band.csv");
    histogram_csv(summary.at("venue_pnl_hist"), rep / "fig9_venue_pnl_hist.csv");
    out << "wrote " << rep.string() << '\n';
    return ok;
}

RunConfig build_config(const Flags& f) {
    RunConfig cfg = f.config.empty() ? RunConfig{} : load_config(f.config);
    for (const auto& kv : f.settings) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw InputError("--set expects key=value, got '" + kv + "'");
        apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (f.seed) cfg.sim.seed = *f.seed;
    if (f.paths) {
        cfg.sim.n_paths = *f.paths;
        cfg.verify_paths = *f.paths;
    }
    if (f.steps) {
        cfg.sim.n_steps = *f.steps;
        cfg.solve_steps = *f.steps;
    }
    if (f.threads) cfg.sim.threads = *f.threads;
    if (!f.ticks.empty()) cfg.ticks_path = f.ticks;
    if (f.window) cfg.window_minutes = *f.window;
    if (f.strict) cfg.strict = true;
    if (f.fit_a2) cfg.fit_a2 = true;
    if (!f.out.empty()) {
        cfg.out_dir = f.out;
    } else if (cfg.out_dir.empty()) {
        const char* env = std::getenv("AMM_LAB_OUT");
        cfg.out_dir = env != nullptr && *env != '\0' ? env : "out";
    }
    try {
        cfg.params.validate();
        cfg.sim.validate();
    } catch (const std::exception& e) {
        throw InputError(e.what());
    }
    fs::create_directories(cfg.out_dir);
    return cfg;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"AMM venue / liquidity provider equilibrium toolkit", "amm-lab"};
    app.require_subcommand(1);
    app.fallthrough();
    Flags f;
    app.add_option("--config", f.config, "key = value configuration file");
    app.add_option("--seed", f.seed, "master RNG seed");
    app.add_option("--paths", f.paths, "Monte Carlo paths");
    app.add_option("--steps", f.steps, "time steps for solve and simulate");
    app.add_option("--threads", f.threads, "worker threads (0 = all cores)");
    app.add_option("--out", f.out, "output directory (default $AMM_LAB_OUT or ./out)");
    app.add_option("--set", f.settings, "override one config key, key=value")->take_all();

    auto* calibrate = app.add_subcommand("calibrate", "fit a1, a3 from a ticks CSV");
    calibrate->add_option("--ticks", f.ticks, "CSV with timestamp,s,z,side,size[,y]");
    calibrate->add_option("--window", f.window, "bucket length in minutes");
    calibrate->add_flag("--strict", f.strict, "abort on the first malformed row");
    calibrate->add_flag("--fit-a2", f.fit_a2, "also regress on pool depth y");
    auto* solve = app.add_subcommand("solve", "existence check and Riccati solve");
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo ensemble with equal-split P0");
    auto* verify = app.add_subcommand("verify", "run the oracle suite");
    auto* report = app.add_subcommand("report", "assemble per-figure CSV bundles");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? ok : input_error;
    }

    try {
        const RunConfig cfg = build_config(f);
        if (calibrate->parsed()) return cmd_calibrate(cfg, out, err);
        if (solve->parsed()) return cmd_solve(cfg, out, err);
        if (simulate->parsed()) return cmd_simulate(cfg, out, err);
        if (verify->parsed()) return cmd_verify(cfg, out, err);
        if (report->parsed()) return cmd_report(cfg, out, err);
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return input_error;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return input_error;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return verification_failed;
    }
    return input_error;
}

}  // namespace amm::cli
