#pragma once

// Stimulation protocol parameters, device-rating validation and per-phase
// planning (amplitude split and width compensation).

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fesim {

enum class Topology { monophasic, biphasic };
enum class PulseMode { symmetric, asym_1_2, asym_2_1 };

std::string_view to_string(Topology t);
std::string_view to_string(PulseMode m);
std::optional<Topology> parse_topology(std::string_view s);
std::optional<PulseMode> parse_pulse_mode(std::string_view s);

/// Device rating envelope. Values are the published ratings of the
/// stimulator this library models.
namespace rating {
inline constexpr double min_frequency_hz = 1.0;
inline constexpr double max_frequency_hz = 10'000.0;
inline constexpr double max_output_voltage = 135.0;
inline constexpr double max_output_current = 20e-3;
inline constexpr int max_code = 127;
inline constexpr double max_rise_time = 20e-9;
}  // namespace rating

inline constexpr double default_interphase_gap = 50e-6;
inline constexpr double default_recovery_gap = 10e-6;

/// User-facing stimulation parameters. Amplitude is an IDAC code; volts are
/// derived through the flyback model. All quantities in SI units.
struct StimProtocol {
    Topology topology = Topology::biphasic;
    PulseMode mode = PulseMode::symmetric;
    int voltage_code = 0;
    std::optional<double> target_current;  // amps; enables regulation
    double frequency = 50.0;               // Hz
    double phase1_width = 300e-6;          // s
    double interphase_gap = default_interphase_gap;
    double recovery_gap = default_recovery_gap;
    int train_length = 1;
};

/// Width of the second phase implied by the mode (t1 * v1 / v2).
double phase2_width(const StimProtocol& p);

/// Total active time per period: phases plus gaps.
double period_budget_used(const StimProtocol& p);

struct Violation {
    std::string field;
    std::string limit;
    std::string rating;  // device rating row the limit derives from
    std::string detail;
};

struct ValidationReport {
    std::vector<Violation> violations;
    std::vector<std::string> warnings;

    [[nodiscard]] bool ok() const { return violations.empty(); }
    [[nodiscard]] bool has_violation(std::string_view field) const;
};

/// Checks a protocol against the rating envelope. Never throws; every
/// problem is reported as data.
ValidationReport validate_protocol(const StimProtocol& p);

/// Phase amplitudes and widths for one pulse. Phase 1 drives positive load
/// current, phase 2 negative.
struct PhasePlan {
    double v1 = 0.0;
    double v2 = 0.0;
    double t1 = 0.0;
    double t2 = 0.0;
    double interphase_gap = 0.0;
    double recovery_gap = 0.0;
    PulseMode mode = PulseMode::symmetric;
    Topology topology = Topology::biphasic;

    [[nodiscard]] bool biphasic() const { return topology == Topology::biphasic; }
};

/// Splits the full stack voltage between the two phases and compensates the
/// phase-2 width so that v1*t1 == v2*t2. Throws std::invalid_argument when
/// v_out <= 0.
PhasePlan plan_phases(const StimProtocol& p, double v_out);

}  // namespace fesim
