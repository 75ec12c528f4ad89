#include "amm/simulate.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <thread>

namespace amm {

void SimConfig::validate() const {
    if (n_steps < 1) throw ConfigError("n_steps must be >= 1");
    if (n_paths < 1) throw ConfigError("n_paths must be >= 1");
    if (record_stride < 1) throw ConfigError("record_stride must be >= 1");
    if (!(s0 > 0) || !(y0 > 0)) throw ConfigError("s0 and y0 must be positive");
}

StepNoise draw_noise(std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif;
    StepNoise n;
    n.eps_w = normal(rng);
    n.eps_b = normal(rng);
    n.u_minus = unif(rng);
    n.u_plus = unif(rng);
    return n;
}

PathState step(const PathState& st, const ContractControls& a, double nu, const ModelParams& p,
               double dt, const StepNoise& noise) {
    const double s = st.s;
    const double z = st.pool.z;
    const double y = st.pool.y;
    const IntensityPair lam = intensities(p, z, y, s);
    if (lam.lambda_minus * dt >= kMaxJumpProb || lam.lambda_plus * dt >= kMaxJumpProb) {
        throw ConfigError("lambda * dt >= 0.1 at t=" + std::to_string(st.t) + " z=" + std::to_string(z) +
                          " y=" + std::to_string(y) + " s=" + std::to_string(s) +
                          " lambda-=" + std::to_string(lam.lambda_minus) +
                          " lambda+=" + std::to_string(lam.lambda_plus) + "; increase n_steps");
    }
    const JumpDeltas d = jump_deltas(z, y, s, p.xi);
    const double sq = std::sqrt(dt);
    const double g = p.gamma;

    // exp(-gamma x) compensator divided by gamma, stable for tiny gamma x.
    auto comp = [g](double x) { return -std::expm1(-g * x) / g; };
    const double h_max = lp_hamiltonian_max(a.a_b, p);
    const double vw = a.a_w + p.sigma * y;
    const double vb = a.a_b + p.eta * (s + z);
    const double drift = 0.5 * g * (vw * vw + vb * vb) -
                         lam.lambda_minus * comp(a.a_minus + d.minus) -
                         lam.lambda_plus * comp(a.a_plus + d.plus) - h_max + a.a_b * nu / p.eta;

    PathState out = st;
    out.t = st.t + dt;
    out.s = s + p.sigma * sq * noise.eps_w;
    out.p += drift * dt + a.a_w * sq * noise.eps_w + a.a_b * sq * noise.eps_b;
    out.q += -p.impact_a * nu * nu * dt + p.eta * (s + z) * sq * noise.eps_b +
             p.sigma * y * sq * noise.eps_w;
    out.cum_nu += nu * dt;
    out.ext_fees += p.impact_a * nu * nu * dt;

    out.pool = apply_lp_flow(st.pool, nu * dt + p.eta * sq * noise.eps_b);

    if (noise.u_minus < lam.lambda_minus * dt) {
        ++out.n_hat_minus;
        if (auto moved = apply_lt_trade(out.pool, Side::buy, p.xi); moved && d.minus_defined) {
            out.pool = *moved;
            ++out.n_minus;
            out.p += a.a_minus;
            out.q += d.minus;
        } else {
            out.p += a.a_minus;  // suppressed arrival still pays A^- 1{Y <= xi}
        }
    }
    if (noise.u_plus < lam.lambda_plus * dt) {
        out.pool = *apply_lt_trade(out.pool, Side::sell, p.xi);
        ++out.n_plus;
        out.p += a.a_plus;
        out.q += d.plus;
    }
    return out;
}

std::uint64_t path_seed(std::uint64_t seed, std::uint64_t index) {
    // splitmix64 over the (seed, index) pair
    std::uint64_t x = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

namespace {

PathRecord make_record(const PathState& st, double nu) {
    return {st.t,      st.s,       st.pool.y,    st.pool.z, st.pool.c,  nu,         st.p,
            st.q,      st.cum_nu,  st.ext_fees,  st.n_minus, st.n_plus, st.n_hat_minus};
}

ContractControls controls_at(const ModelParams& p, const RiccatiSolution* sol, const SimConfig& cfg,
                             std::size_t i, double t, const PathState& st) {
    if (cfg.regime == Regime::risk_neutral) {
        return controls_risk_neutral(t, st.pool.z, st.pool.y, st.s, p);
    }
    const RiccatiNode node = sol->size() == cfg.n_steps + 1 ? sol->node(i) : sol->at(t);
    return controls_risk_averse(node, st.pool.z, st.pool.y, st.s, p, cfg.control_options);
}

ContractControls substep_controls(const ModelParams& p, const RiccatiSolution* sol,
                                  const SimConfig& cfg, const PathState& st) {
    if (cfg.regime == Regime::risk_neutral) {
        return controls_risk_neutral(st.t, st.pool.z, st.pool.y, st.s, p);
    }
    return controls_risk_averse(sol->at(st.t), st.pool.z, st.pool.y, st.s, p, cfg.control_options);
}

}  // namespace

SimPath simulate_path(const ModelParams& p, const RiccatiSolution* sol, const SimConfig& cfg,
                      double p0, std::uint64_t path_index) {
    cfg.validate();
    if (cfg.regime == Regime::risk_averse && sol == nullptr) {
        throw ConfigError("risk_averse regime requires a Riccati solution");
    }
    std::mt19937_64 rng(path_seed(cfg.seed, path_index));
    const double dt = p.horizon_T / static_cast<double>(cfg.n_steps);

    PathState st;
    st.s = cfg.s0;
    st.pool = PoolState::from_price(cfg.y0, cfg.s0);
    st.p = p0;

    SimPath path;
    path.records.reserve(cfg.n_steps / cfg.record_stride + 2);
    double nu = 0.0;
    for (std::size_t i = 0; i < cfg.n_steps; ++i) {
        const double t = p.horizon_T * static_cast<double>(i) / static_cast<double>(cfg.n_steps);
        st.t = t;
        const ContractControls a = controls_at(p, sol, cfg, i, t, st);
        nu = cfg.nu_policy == NuPolicy::optimal ? a.nu_star : 0.0;
        if (i % cfg.record_stride == 0) {
            path.records.push_back(make_record(st, nu));
        }
        const IntensityPair lam = intensities(p, st.pool.z, st.pool.y, st.s);
        if (std::max(lam.lambda_minus, lam.lambda_plus) * dt < kMaxJumpProb) {
            st = step(st, a, nu, p, dt, draw_noise(rng));
            continue;
        }
        // Interval too coarse for the current intensity: split it so that
        // every sub-step satisfies the step() precondition.
        const double t_end = t + dt;
        while (t_end - st.t > 1e-12 * dt) {
            const double rem = t_end - st.t;
            const IntensityPair l = intensities(p, st.pool.z, st.pool.y, st.s);
            const double h = std::min(rem, 0.5 * kMaxJumpProb / std::max(l.lambda_minus, l.lambda_plus));
            const ContractControls as = substep_controls(p, sol, cfg, st);
            const double nu_s = cfg.nu_policy == NuPolicy::optimal ? as.nu_star : 0.0;
            const double t_next = h == rem ? t_end : st.t + h;
            st = step(st, as, nu_s, p, h, draw_noise(rng));
            st.t = t_next;
            ++path.n_substepped;
        }
    }
    st.t = p.horizon_T;
    path.records.push_back(make_record(st, nu));

    path.n_minus = st.n_minus;
    path.n_plus = st.n_plus;
    path.n_hat_minus = st.n_hat_minus;
    path.reward = st.p;
    path.fee_income = p.fee_r * static_cast<double>(st.n_minus + st.n_plus);
    path.venue_pnl = path.fee_income - path.reward;
    path.cum_nu = st.cum_nu;
    path.ext_fees = st.ext_fees;
    return path;
}

double compensated_mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double sum = 0.0;
    double comp = 0.0;
    for (double x : v) {
        const double t = sum + x;
        comp += std::fabs(sum) >= std::fabs(x) ? (sum - t) + x : (x - t) + sum;
        sum = t;
    }
    return (sum + comp) / static_cast<double>(v.size());
}

namespace {

double sample_var(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    std::vector<double> sq(v.size());
    std::transform(v.begin(), v.end(), sq.begin(), [mean](double x) { return (x - mean) * (x - mean); });
    return compensated_mean(sq) * static_cast<double>(v.size()) / static_cast<double>(v.size() - 1);
}

double quantile(std::vector<double>& v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

template <typename F>
SeriesStats series_stats(const std::vector<SimPath>& paths, std::size_t n_nodes, F field) {
    SeriesStats s;
    std::vector<double> col(paths.size());
    for (std::size_t k = 0; k < n_nodes; ++k) {
        for (std::size_t j = 0; j < paths.size(); ++j) col[j] = field(paths[j].records[k]);
        const double m = compensated_mean(col);
        s.mean.push_back(m);
        s.std.push_back(std::sqrt(sample_var(col, m)));
        s.q05.push_back(quantile(col, 0.05));
        s.q95.push_back(quantile(col, 0.95));
    }
    return s;
}

template <typename F>
std::vector<double> terminal(const std::vector<SimPath>& paths, F field) {
    std::vector<double> out(paths.size());
    std::transform(paths.begin(), paths.end(), out.begin(), field);
    return out;
}

double std_err(const std::vector<double>& v, double mean) {
    return std::sqrt(sample_var(v, mean) / static_cast<double>(v.size()));
}

}  // namespace

Histogram histogram(const std::vector<double>& values, std::size_t bins) {
    Histogram h;
    h.counts.assign(bins, 0);
    if (values.empty()) return h;
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    h.lo = *lo;
    h.hi = *hi;
    const double width = (h.hi - h.lo) / static_cast<double>(bins);
    for (double v : values) {
        std::size_t b = width > 0 ? static_cast<std::size_t>((v - h.lo) / width) : 0;
        h.counts[std::min(b, bins - 1)]++;
    }
    return h;
}

const SeriesStats& EnsembleSummary::get(const std::string& name) const {
    for (const auto& [key, stats] : series) {
        if (key == name) return stats;
    }
    throw std::out_of_range("no series named " + name);
}

EnsembleSummary summarize(const std::vector<SimPath>& paths, double p0) {
    EnsembleSummary s;
    s.p0 = p0;
    if (paths.empty()) return s;
    const std::size_t n_nodes = paths.front().records.size();
    for (const auto& r : paths.front().records) s.times.push_back(r.t);

    s.series.emplace_back("s", series_stats(paths, n_nodes, [](const PathRecord& r) { return r.s; }));
    s.series.emplace_back("y", series_stats(paths, n_nodes, [](const PathRecord& r) { return r.y; }));
    s.series.emplace_back("z", series_stats(paths, n_nodes, [](const PathRecord& r) { return r.z; }));
    s.series.emplace_back("c", series_stats(paths, n_nodes, [](const PathRecord& r) { return r.c; }));
    s.series.emplace_back("mispricing",
                          series_stats(paths, n_nodes, [](const PathRecord& r) { return r.s - r.z; }));
    s.series.emplace_back("nu", series_stats(paths, n_nodes, [](const PathRecord& r) { return r.nu; }));
    s.series.emplace_back("cum_nu",
                          series_stats(paths, n_nodes, [](const PathRecord& r) { return r.cum_nu; }));
    s.series.emplace_back("ext_fees",
                          series_stats(paths, n_nodes, [](const PathRecord& r) { return r.ext_fees; }));
    s.series.emplace_back("p", series_stats(paths, n_nodes, [](const PathRecord& r) { return r.p; }));
    s.series.emplace_back("q_lp", series_stats(paths, n_nodes, [](const PathRecord& r) { return r.q_lp; }));
    s.series.emplace_back("n_jumps", series_stats(paths, n_nodes, [](const PathRecord& r) {
                              return static_cast<double>(r.n_minus + r.n_plus);
                          }));

    const auto reward = terminal(paths, [](const SimPath& x) { return x.reward; });
    const auto venue = terminal(paths, [](const SimPath& x) { return x.venue_pnl; });
    const auto fees = terminal(paths, [](const SimPath& x) { return x.fee_income; });
    const auto cum_nu = terminal(paths, [](const SimPath& x) { return x.cum_nu; });
    const auto ext = terminal(paths, [](const SimPath& x) { return x.ext_fees; });
    const auto jumps = terminal(paths, [](const SimPath& x) { return double(x.n_minus + x.n_plus); });

    s.mean_reward = compensated_mean(reward);
    s.se_reward = std_err(reward, s.mean_reward);
    s.mean_venue_pnl = compensated_mean(venue);
    s.se_venue_pnl = std_err(venue, s.mean_venue_pnl);
    s.mean_fee_income = compensated_mean(fees);
    s.mean_cum_nu = compensated_mean(cum_nu);
    s.se_cum_nu = std_err(cum_nu, s.mean_cum_nu);
    s.mean_ext_fees = compensated_mean(ext);
    s.se_ext_fees = std_err(ext, s.mean_ext_fees);
    s.mean_jumps = compensated_mean(jumps);
    s.var_jumps = sample_var(jumps, s.mean_jumps);
    s.reward_hist = histogram(reward);
    s.venue_pnl_hist = histogram(venue);
    return s;
}

Ensemble run_ensemble(const ModelParams& p, const RiccatiSolution* sol, const SimConfig& cfg,
                      double p0) {
    cfg.validate();
    p.validate();
    Ensemble e;
    e.cfg = cfg;
    e.paths.resize(cfg.n_paths);

    unsigned workers = cfg.threads != 0 ? cfg.threads : std::thread::hardware_concurrency();
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(cfg.n_paths)));

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto work = [&] {
        for (std::size_t i = next++; i < cfg.n_paths; i = next++) {
            try {
                e.paths[i] = simulate_path(p, sol, cfg, p0, i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mu);
                if (!failure) failure = std::current_exception();
                next = cfg.n_paths;
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);

    e.summary = summarize(e.paths, p0);
    return e;
}

double equal_split_p0(const Ensemble& e) {
    const double p_zero = e.summary.mean_reward - e.summary.p0;
    return 0.5 * e.summary.mean_fee_income - p_zero;
}

double violation_fraction(const Ensemble& e, double d) {
    std::size_t total = 0;
    std::size_t hits = 0;
    for (const auto& path : e.paths) {
        for (const auto& r : path.records) {
            if (r.t <= 0.0) continue;
            ++total;
            if (std::fabs(r.s - r.z) > d) ++hits;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

void write_path_csv(std::ostream& out, const SimPath& path) {
    out << "t,s,y,z,c,nu,p,q_lp,cum_nu,ext_fees,n_minus,n_plus,n_hat_minus\n" << std::setprecision(17);
    for (const auto& r : path.records) {
        out << r.t << ',' << r.s << ',' << r.y << ',' << r.z << ',' << r.c << ',' << r.nu << ',' << r.p
            << ',' << r.q_lp << ',' << r.cum_nu << ',' << r.ext_fees << ',' << r.n_minus << ','
            << r.n_plus << ',' << r.n_hat_minus << '\n';
    }
}

void write_series_csv(std::ostream& out, const std::vector<double>& times, const SeriesStats& s) {
    out << "t,mean,std,q05,q95\n" << std::setprecision(17);
    for (std::size_t k = 0; k < times.size(); ++k) {
        out << times[k] << ',' << s.mean[k] << ',' << s.std[k] << ',' << s.q05[k] << ',' << s.q95[k]
            << '\n';
    }
}

void write_terminal_csv(std::ostream& out, const Ensemble& e) {
    out << "path,reward,venue_pnl,fee_income,cum_nu,ext_fees,n_minus,n_plus,n_hat_minus\n"
        << std::setprecision(17);
    for (std::size_t i = 0; i < e.paths.size(); ++i) {
        const SimPath& x = e.paths[i];
        out << i << ',' << x.reward << ',' << x.venue_pnl << ',' << x.fee_income << ',' << x.cum_nu
            << ',' << x.ext_fees << ',' << x.n_minus << ',' << x.n_plus << ',' << x.n_hat_minus
            << '\n';
    }
}

namespace {

nlohmann::json hist_json(const Histogram& h) {
    return {{"lo", h.lo}, {"hi", h.hi}, {"bins", h.counts.size()}, {"counts", h.counts}};
}

}  // namespace

std::string summary_json(const Ensemble& e, int indent) {
    const EnsembleSummary& s = e.summary;
    nlohmann::json j;
    j["n_paths"] = e.cfg.n_paths;
    j["n_steps"] = e.cfg.n_steps;
    j["seed"] = e.cfg.seed;
    j["regime"] = e.cfg.regime == Regime::risk_averse ? "risk_averse" : "risk_neutral";
    j["p0"] = s.p0;
    j["equal_split_p0"] = equal_split_p0(e);
    j["mean_reward"] = s.mean_reward;
    j["se_reward"] = s.se_reward;
    j["mean_venue_pnl"] = s.mean_venue_pnl;
    j["se_venue_pnl"] = s.se_venue_pnl;
    j["mean_fee_income"] = s.mean_fee_income;
    j["mean_cum_nu"] = s.mean_cum_nu;
    j["se_cum_nu"] = s.se_cum_nu;
    j["mean_ext_fees"] = s.mean_ext_fees;
    j["se_ext_fees"] = s.se_ext_fees;
    j["mean_jumps"] = s.mean_jumps;
    j["var_jumps"] = s.var_jumps;
    j["reward_hist"] = hist_json(s.reward_hist);
    j["venue_pnl_hist"] = hist_json(s.venue_pnl_hist);
    nlohmann::json bands;
    for (const auto& [name, st] : s.series) {
        bands[name] = {{"mean", st.mean}, {"q05", st.q05}, {"q95", st.q95}};
    }
    j["times"] = s.times;
    j["bands"] = bands;
    return j.dump(indent);
}

}  // namespace amm
