#include "cli.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <map>

namespace amm::cli {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size()) throw InputError(key + ": not a number: '" + v + "'");
    return x;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
    if (v.empty() || !std::all_of(v.begin(), v.end(), [](unsigned char c) { return std::isdigit(c); })) {
        throw InputError(key + ": not a non-negative integer: '" + v + "'");
    }
    return std::stoull(v);
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw InputError(key + ": expected true/false, got '" + v + "'");
}

}  // namespace

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
    using Setter = std::function<void(const std::string&)>;
    ModelParams& p = cfg.params;
    SimConfig& s = cfg.sim;
    auto num = [&](double& field) { return Setter([&, key](const std::string& v) { field = to_double(key, v); }); };
    auto count = [&](std::size_t& field) {
        return Setter([&, key](const std::string& v) { field = static_cast<std::size_t>(to_uint(key, v)); });
    };
    const std::map<std::string, Setter> table = {
        {"sigma", num(p.sigma)},
        {"eta", num(p.eta)},
        {"xi", num(p.xi)},
        {"impact_a", num(p.impact_a)},
        {"fee_r", num(p.fee_r)},
        {"gamma", num(p.gamma)},
        {"zeta", num(p.zeta)},
        {"horizon_T", num(p.horizon_T)},
        {"nu_max", num(p.nu_max)},
        {"a0", num(p.a0)},
        {"a1", num(p.a1)},
        {"a2", num(p.a2)},
        {"a3", num(p.a3)},
        {"n_steps", count(s.n_steps)},
        {"n_paths", count(s.n_paths)},
        {"record_stride", count(s.record_stride)},
        {"seed", [&](const std::string& v) { s.seed = to_uint("seed", v); }},
        {"threads", [&](const std::string& v) { s.threads = static_cast<unsigned>(to_uint("threads", v)); }},
        {"s0", num(s.s0)},
        {"y0", num(s.y0)},
        {"regime",
         [&](const std::string& v) {
             if (v == "risk_averse") s.regime = Regime::risk_averse;
             else if (v == "risk_neutral") s.regime = Regime::risk_neutral;
             else throw InputError("regime: expected risk_averse or risk_neutral, got '" + v + "'");
         }},
        {"exact_shift", [&](const std::string& v) { s.control_options.exact_shift = to_bool("exact_shift", v); }},
        {"solve_steps", count(cfg.solve_steps)},
        {"ticks", [&](const std::string& v) { cfg.ticks_path = v; }},
        {"out", [&](const std::string& v) { cfg.out_dir = v; }},
        {"window_minutes", num(cfg.window_minutes)},
        {"strict", [&](const std::string& v) { cfg.strict = to_bool("strict", v); }},
        {"fit_a2", [&](const std::string& v) { cfg.fit_a2 = to_bool("fit_a2", v); }},
        {"p0",
         [&](const std::string& v) {
             if (v == "equal_split") cfg.p0.reset();
             else cfg.p0 = to_double("p0", v);
         }},
        {"verify_paths", count(cfg.verify_paths)},
        {"verify_steps", count(cfg.verify_steps)},
    };
    const auto it = table.find(key);
    if (it == table.end()) throw InputError("unknown setting '" + key + "'");
    it->second(value);
}

RunConfig parse_config(std::istream& in, const std::string& origin) {
    RunConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw InputError(origin + ":" + std::to_string(line_no) + ": expected key = value");
        }
        try {
            apply_setting(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const InputError& e) {
            throw InputError(origin + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config " + path);
    return parse_config(in, path);
}

}  // namespace amm::cli
