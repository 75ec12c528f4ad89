#pragma once

// Intensity calibration from external midprice / pool trade data.
//
// Trades are bucketed into fixed windows, counts are scaled to jumps per
// day, and one stacked OLS fits lambda = a1 + a3 x with x = +(S - Z) for
// buys and x = -(S - Z) for sells.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace amm {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CalibrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class TradeSide { buy, sell, none };

struct TickRecord {
    std::int64_t timestamp_ms = 0;
    double s = 0.0;
    double z = 0.0;
    TradeSide side = TradeSide::none;
    double size = 0.0;
    std::optional<double> y;  // pool ETH reserves, only if the file has a y column
};

struct LoadIssue {
    std::size_t line = 0;
    std::string message;
};

struct TickLoad {
    std::vector<TickRecord> records;
    std::vector<LoadIssue> issues;
    bool has_y = false;
};

/// CSV header must contain timestamp,s,z,side,size (any order; optional y).
/// Malformed rows are skipped and reported; in strict mode the first one
/// throws FormatError. Records are stably sorted by timestamp.
TickLoad load_ticks(std::istream& in, bool strict = false);
TickLoad load_ticks(const std::string& path, bool strict = false);

struct TradeBucket {
    std::int64_t window_start = 0;  // ms
    double lambda_minus_hat = 0.0;  // buys, jumps/day
    double lambda_plus_hat = 0.0;   // sells, jumps/day
    double mean_mispricing = 0.0;   // mean(S - Z)
    double mean_y = 0.0;            // NaN when the input has no y column
    std::size_t n_ticks = 0;
    bool carried_forward = false;   // empty window, mispricing taken from the previous one
};

/// Half-open windows [start, start + w); empty windows are emitted with
/// zero counts.
std::vector<TradeBucket> bucketize(const std::vector<TickRecord>& records,
                                   double window_minutes = 10.0);

struct LinearFit {
    double a1 = 0.0, se_a1 = 0.0;
    double a3 = 0.0, se_a3 = 0.0;
    double a2 = 0.0, se_a2 = 0.0;  // only with FitOptions::fit_a2
};

struct CalibrationResult {
    double a1_hat = 0.0, se_a1 = 0.0;
    double a3_hat = 0.0, se_a3 = 0.0;
    double a2_hat = 0.0, se_a2 = 0.0;
    bool fitted_a2 = false;
    std::size_t n_buckets = 0;
    double boundary_d = 0.0;
    std::size_t violations_left = 0;   // mean(S - Z) < -d
    std::size_t violations_right = 0;  // mean(S - Z) > d
    double violation_fraction = 0.0;
    LinearFit buy_side;                // per-side diagnostics
    LinearFit sell_side;
};

struct FitOptions {
    bool fit_a2 = false;  // add mean_y as a regressor
};

/// Needs >= 10 buckets and non-zero mispricing variance. Standard errors
/// are heteroskedasticity-robust (HC1).
CalibrationResult fit_intensities(const std::vector<TradeBucket>& buckets, const FitOptions& opts = {});

/// Violation counts for an arbitrary boundary d.
void count_violations(const std::vector<TradeBucket>& buckets, double d, CalibrationResult& out);

/// Synthetic ticks: one price tick per window with S - Z ~ U(-m, m), plus
/// Poisson(lambda * w / 1440) buys and sells at lambda = max(a0, a1 +- a3 x).
std::vector<TickRecord> synthetic_ticks(double a1, double a3, std::size_t n_buckets,
                                        double max_mispricing, std::uint64_t seed,
                                        double window_minutes = 10.0, double a0 = 1e-3);

std::string calibration_json(const CalibrationResult& r, int indent = 2);
void write_residual_csv(std::ostream& out, const std::vector<TradeBucket>& buckets,
                        const CalibrationResult& r);
void write_ticks_csv(std::ostream& out, const std::vector<TickRecord>& records);

}  // namespace amm
