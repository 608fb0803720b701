#pragma once

// Command implementations behind the fesim executable. Each returns a
// process exit code:
//   0 ok, 1 domain violation, 2 input error, 3 output error.

#include "fesim/engine.hpp"

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fesim::cli {

enum ExitCode : int { ok = 0, domain_violation = 1, input_error = 2, output_error = 3 };

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Nominal supply endpoints the active flyback model was built from.
struct SupplyEndpoints {
    double v_low = 3.5;
    double v_high = 120.0;
};

struct LoadedConfig {
    SimConfig sim;
    std::string flyback_name = "paper_120";
    SupplyEndpoints endpoints;
};

/// Parses a JSON config document. Sections (all optional): protocol,
/// flyback, load, timing, engine, regulation. Throws ConfigError.
LoadedConfig parse_config(const std::string& text);
LoadedConfig load_config(const std::string& path);

/// Replaces the flyback model with a named preset. Throws ConfigError for
/// unknown names.
void apply_preset(LoadedConfig& cfg, const std::string& name);

struct CommonOptions {
    std::optional<std::string> config_path;
    std::optional<std::string> out_path;
    std::optional<std::string> preset;
    bool ascii = false;
};

int cmd_validate(const CommonOptions& opt, std::ostream& out, std::ostream& err);
int cmd_simulate(const CommonOptions& opt, std::ostream& out, std::ostream& err);

struct CheckRow {
    std::string name;
    std::string measured;
    std::string expected;
    bool pass = false;
};

/// Built-in acceptance scenarios against the device ratings.
std::vector<CheckRow> run_spec_checks(const LoadedConfig& cfg);
int cmd_spec_check(const CommonOptions& opt, std::ostream& out, std::ostream& err);

/// Range syntax: "start:stop:step" (inclusive), "a,b,c", or "" for none.
/// Throws ConfigError on malformed input.
std::vector<double> parse_range(const std::string& spec);

/// One row per sweep point. v_out_V and i_peak_mA are peaks over the train,
/// i_final_mA is the phase-1 current of the last pulse and charges are summed
/// over all pulses.
inline constexpr std::string_view sweep_csv_header =
    "value,status,code,v_out_V,i_peak_mA,i_final_mA,q1_uC,q2_uC,q_net_uC,rise_time_s,period_s,final_code,saturated";

int cmd_sweep(const CommonOptions& opt, const std::string& param, const std::string& range, std::ostream& out,
              std::ostream& err);

}  // namespace fesim::cli
