#pragma once

#include "amm/model.hpp"
#include "amm/simulate.hpp"

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>

namespace amm::cli {

/// Bad configuration, flags or missing input files. Maps to exit code 2.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum Exit : int { ok = 0, verification_failed = 1, input_error = 2 };

struct RunConfig {
    ModelParams params = ModelParams::noise_trading();
    SimConfig sim;
    std::size_t solve_steps = 10000;
    std::string ticks_path;
    std::string out_dir;
    double window_minutes = 10.0;
    bool strict = false;
    bool fit_a2 = false;
    std::optional<double> p0;  // unset: equal split
    std::size_t verify_paths = 20000;
    std::size_t verify_steps = 1000;
};

/// Applies one `key = value` setting; unknown keys throw InputError.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

/// Flat key = value lines; `#` starts a comment.
RunConfig parse_config(std::istream& in, const std::string& origin = "<config>");
RunConfig load_config(const std::string& path);

/// Entry point shared by the binary and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace amm::cli
