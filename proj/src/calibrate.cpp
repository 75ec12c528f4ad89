#include "amm/calibrate.hpp"

#include "json.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <random>
#include <sstream>

namespace amm {

namespace {

std::string trim(std::string s) {
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream row(line);
    while (std::getline(row, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && std::isfinite(out);
}

bool parse_int(const std::string& s, std::int64_t& out) {
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_side(std::string s, TradeSide& out) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "buy") out = TradeSide::buy;
    else if (s == "sell") out = TradeSide::sell;
    else if (s == "none" || s.empty()) out = TradeSide::none;
    else return false;
    return true;
}

}  // namespace

TickLoad load_ticks(std::istream& in, bool strict) {
    TickLoad load;
    std::string line;
    if (!std::getline(in, line) || trim(line).empty()) {
        throw FormatError("empty input: missing header");
    }
    const auto header = split_csv(trim(line));
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
    for (const char* name : {"timestamp", "s", "z", "side", "size"}) {
        if (!col.count(name)) throw FormatError(std::string("missing column: ") + name);
    }
    load.has_y = col.count("y") > 0;

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split_csv(trim(line));
        auto fail = [&](const std::string& why) {
            if (strict) throw FormatError("line " + std::to_string(line_no) + ": " + why);
            load.issues.push_back({line_no, why});
        };
        if (cells.size() < header.size()) {
            fail("expected " + std::to_string(header.size()) + " fields");
            continue;
        }
        TickRecord r;
        if (!parse_int(cells[col["timestamp"]], r.timestamp_ms)) {
            fail("bad timestamp");
            continue;
        }
        if (!parse_double(cells[col["s"]], r.s) || !parse_double(cells[col["z"]], r.z)) {
            fail("bad price");
            continue;
        }
        if (!(r.s > 0) || !(r.z > 0)) {
            fail("non-positive price");
            continue;
        }
        if (!parse_side(cells[col["side"]], r.side)) {
            fail("bad side");
            continue;
        }
        if (!parse_double(cells[col["size"]], r.size) || r.size < 0) {
            fail("bad size");
            continue;
        }
        if (load.has_y) {
            double y = 0.0;
            if (!parse_double(cells[col["y"]], y) || !(y > 0)) {
                fail("bad y");
                continue;
            }
            r.y = y;
        }
        load.records.push_back(r);
    }
    std::stable_sort(load.records.begin(), load.records.end(),
                     [](const TickRecord& a, const TickRecord& b) { return a.timestamp_ms < b.timestamp_ms; });
    return load;
}

TickLoad load_ticks(const std::string& path, bool strict) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path);
    try {
        return load_ticks(in, strict);
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

std::vector<TradeBucket> bucketize(const std::vector<TickRecord>& records, double window_minutes) {
    std::vector<TradeBucket> out;
    if (records.empty()) return out;
    if (!(window_minutes > 0)) throw std::invalid_argument("window_minutes must be > 0");
    const auto w = static_cast<std::int64_t>(std::llround(window_minutes * 60000.0));
    const double per_day = 1440.0 / window_minutes;
    auto floor_div = [](std::int64_t a, std::int64_t b) { return a / b - ((a % b != 0) && ((a < 0) != (b < 0))); };
    const std::int64_t first = floor_div(records.front().timestamp_ms, w);
    const std::int64_t last = floor_div(records.back().timestamp_ms, w);

    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::size_t k = 0;
    double prev_mis = 0.0;
    double prev_y = nan;
    for (std::int64_t b = first; b <= last; ++b) {
        TradeBucket bucket;
        bucket.window_start = b * w;
        const std::int64_t end = bucket.window_start + w;
        double mis_sum = 0.0;
        double y_sum = 0.0;
        std::size_t y_n = 0;
        long buys = 0;
        long sells = 0;
        for (; k < records.size() && records[k].timestamp_ms < end; ++k) {
            const TickRecord& r = records[k];
            ++bucket.n_ticks;
            mis_sum += r.s - r.z;
            if (r.y) {
                y_sum += *r.y;
                ++y_n;
            }
            if (r.side == TradeSide::buy) ++buys;
            if (r.side == TradeSide::sell) ++sells;
        }
        bucket.lambda_minus_hat = static_cast<double>(buys) * per_day;
        bucket.lambda_plus_hat = static_cast<double>(sells) * per_day;
        if (bucket.n_ticks > 0) {
            bucket.mean_mispricing = mis_sum / static_cast<double>(bucket.n_ticks);
            prev_mis = bucket.mean_mispricing;
        } else {
            bucket.mean_mispricing = prev_mis;
            bucket.carried_forward = true;
        }
        bucket.mean_y = y_n > 0 ? y_sum / static_cast<double>(y_n) : prev_y;
        prev_y = bucket.mean_y;
        out.push_back(bucket);
    }
    return out;
}

namespace {

// OLS with HC1 standard errors. Columns of X are regressors.
struct Ols {
    Eigen::VectorXd beta;
    Eigen::VectorXd se;
};

Ols ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    const Eigen::Index n = X.rows();
    const Eigen::Index k = X.cols();
    const Eigen::MatrixXd xtx = X.transpose() * X;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(xtx);
    if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-14) {
        throw CalibrationError("degenerate regressors");
    }
    Ols fit;
    fit.beta = ldlt.solve(X.transpose() * y);
    const Eigen::VectorXd resid = y - X * fit.beta;
    const Eigen::MatrixXd inv = ldlt.solve(Eigen::MatrixXd::Identity(k, k));
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        meat += resid(i) * resid(i) * X.row(i).transpose() * X.row(i);
    }
    const double dof = static_cast<double>(n) / static_cast<double>(n - k);
    const Eigen::MatrixXd cov = dof * inv * meat * inv;
    fit.se = cov.diagonal().cwiseSqrt();
    return fit;
}

LinearFit to_fit(const Ols& f, bool with_a2) {
    LinearFit out;
    out.a1 = f.beta(0);
    out.se_a1 = f.se(0);
    out.a3 = f.beta(1);
    out.se_a3 = f.se(1);
    if (with_a2) {
        out.a2 = f.beta(2);
        out.se_a2 = f.se(2);
    }
    return out;
}

Ols fit_side(const std::vector<TradeBucket>& b, double sign, bool minus_side) {
    const auto n = static_cast<Eigen::Index>(b.size());
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = sign * b[i].mean_mispricing;
        y(i) = minus_side ? b[i].lambda_minus_hat : b[i].lambda_plus_hat;
    }
    return ols(X, y);
}

}  // namespace

void count_violations(const std::vector<TradeBucket>& buckets, double d, CalibrationResult& out) {
    out.boundary_d = d;
    out.violations_left = 0;
    out.violations_right = 0;
    for (const auto& b : buckets) {
        if (b.mean_mispricing < -d) ++out.violations_left;
        if (b.mean_mispricing > d) ++out.violations_right;
    }
    out.violation_fraction =
        buckets.empty() ? 0.0
                        : static_cast<double>(out.violations_left + out.violations_right) /
                              static_cast<double>(buckets.size());
}

CalibrationResult fit_intensities(const std::vector<TradeBucket>& buckets, const FitOptions& opts) {
    if (buckets.size() < 10) throw CalibrationError("need at least 10 buckets");
    double mean = 0.0;
    for (const auto& b : buckets) mean += b.mean_mispricing;
    mean /= static_cast<double>(buckets.size());
    double var = 0.0;
    for (const auto& b : buckets) var += (b.mean_mispricing - mean) * (b.mean_mispricing - mean);
    if (!(var > 0.0)) throw CalibrationError("mispricing has zero variance");
    if (opts.fit_a2) {
        for (const auto& b : buckets) {
            if (!std::isfinite(b.mean_y)) throw CalibrationError("a2 fit needs a y column");
        }
    }

    const auto n = static_cast<Eigen::Index>(buckets.size());
    const Eigen::Index k = opts.fit_a2 ? 3 : 2;
    Eigen::MatrixXd X(2 * n, k);
    Eigen::VectorXd y(2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const TradeBucket& b = buckets[static_cast<std::size_t>(i)];
        X(2 * i, 0) = 1.0;
        X(2 * i, 1) = b.mean_mispricing;
        y(2 * i) = b.lambda_minus_hat;
        X(2 * i + 1, 0) = 1.0;
        X(2 * i + 1, 1) = -b.mean_mispricing;
        y(2 * i + 1) = b.lambda_plus_hat;
        if (opts.fit_a2) {
            X(2 * i, 2) = b.mean_y;
            X(2 * i + 1, 2) = b.mean_y;
        }
    }
    const Ols stacked = ols(X, y);
    const LinearFit f = to_fit(stacked, opts.fit_a2);

    CalibrationResult r;
    r.a1_hat = f.a1;
    r.se_a1 = f.se_a1;
    r.a3_hat = f.a3;
    r.se_a3 = f.se_a3;
    r.a2_hat = f.a2;
    r.se_a2 = f.se_a2;
    r.fitted_a2 = opts.fit_a2;
    r.n_buckets = buckets.size();
    r.buy_side = to_fit(fit_side(buckets, 1.0, true), false);
    r.sell_side = to_fit(fit_side(buckets, -1.0, false), false);
    if (!(r.a1_hat > 0) || !(r.a3_hat > 0)) {
        throw CalibrationError("fitted a1 and a3 must be positive to form the boundary d");
    }
    count_violations(buckets, r.a1_hat / r.a3_hat, r);
    return r;
}

std::vector<TickRecord> synthetic_ticks(double a1, double a3, std::size_t n_buckets,
                                        double max_mispricing, std::uint64_t seed,
                                        double window_minutes, double a0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> mis(-max_mispricing, max_mispricing);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto w = static_cast<std::int64_t>(std::llround(window_minutes * 60000.0));
    const double scale = window_minutes / 1440.0;
    std::vector<TickRecord> out;
    for (std::size_t b = 0; b < n_buckets; ++b) {
        const std::int64_t start = static_cast<std::int64_t>(b) * w;
        const double x = mis(rng);  // S - Z
        const double s = 2820.0 + x;
        const double z = 2820.0;
        out.push_back({start, s, z, TradeSide::none, 0.0, std::nullopt});
        const double lam_minus = std::max(a0, a1 + a3 * x);
        const double lam_plus = std::max(a0, a1 - a3 * x);
        std::poisson_distribution<long> buys(lam_minus * scale);
        std::poisson_distribution<long> sells(lam_plus * scale);
        const long nb = buys(rng);
        const long ns = sells(rng);
        for (long j = 0; j < nb + ns; ++j) {
            const auto offset = static_cast<std::int64_t>(unit(rng) * static_cast<double>(w - 1)) + 1;
            out.push_back({start + offset, s, z, j < nb ? TradeSide::buy : TradeSide::sell, 300.0,
                           std::nullopt});
        }
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const TickRecord& a, const TickRecord& b) { return a.timestamp_ms < b.timestamp_ms; });
    return out;
}

std::string calibration_json(const CalibrationResult& r, int indent) {
    auto side = [](const LinearFit& f) {
        return nlohmann::json{{"a1", f.a1}, {"se_a1", f.se_a1}, {"a3", f.a3}, {"se_a3", f.se_a3}};
    };
    nlohmann::json j = {{"a1_hat", r.a1_hat},
                        {"se_a1", r.se_a1},
                        {"a3_hat", r.a3_hat},
                        {"se_a3", r.se_a3},
                        {"n_buckets", r.n_buckets},
                        {"boundary_d", r.boundary_d},
                        {"violations_left", r.violations_left},
                        {"violations_right", r.violations_right},
                        {"violation_fraction", r.violation_fraction},
                        {"buy_side", side(r.buy_side)},
                        {"sell_side", side(r.sell_side)}};
    if (r.fitted_a2) {
        j["a2_hat"] = r.a2_hat;
        j["se_a2"] = r.se_a2;
    }
    return j.dump(indent);
}

void write_residual_csv(std::ostream& out, const std::vector<TradeBucket>& buckets,
                        const CalibrationResult& r) {
    out << "window_start,mean_mispricing,lambda_minus_hat,lambda_plus_hat,resid_minus,resid_plus,"
           "carried_forward\n"
        << std::setprecision(12);
    for (const auto& b : buckets) {
        const double extra = r.fitted_a2 ? r.a2_hat * b.mean_y : 0.0;
        const double fit_minus = r.a1_hat + extra + r.a3_hat * b.mean_mispricing;
        const double fit_plus = r.a1_hat + extra - r.a3_hat * b.mean_mispricing;
        out << b.window_start << ',' << b.mean_mispricing << ',' << b.lambda_minus_hat << ','
            << b.lambda_plus_hat << ',' << b.lambda_minus_hat - fit_minus << ','
            << b.lambda_plus_hat - fit_plus << ',' << (b.carried_forward ? 1 : 0) << '\n';
    }
}

void write_ticks_csv(std::ostream& out, const std::vector<TickRecord>& records) {
    const bool with_y = !records.empty() && records.front().y.has_value();
    out << "timestamp,s,z,side,size" << (with_y ? ",y" : "") << '\n' << std::setprecision(12);
    for (const auto& r : records) {
        const char* side = r.side == TradeSide::buy ? "buy" : r.side == TradeSide::sell ? "sell" : "none";
        out << r.timestamp_ms << ',' << r.s << ',' << r.z << ',' << side << ',' << r.size;
        if (with_y) out << ',' << r.y.value_or(0.0);
        out << '\n';
    }
}

}  // namespace amm
