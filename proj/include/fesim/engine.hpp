#pragma once

// Event-driven transient simulation of the stimulator output.
//
// Between switch events the output network (switch on-resistance, output
// parasitic capacitance, load) is linear time-invariant, so each interval is
// solved in closed form from its initial state. With both phase switches
// open the electrodes are shorted through the passive recovery path: the
// output node sits at 0 V and a Randles load relaxes through r_s || r_p.
//
// Samples are placed on two time scales: densely just after every closing
// edge, and on a coarse grid everywhere else.

#include "fesim/control.hpp"
#include "fesim/flyback.hpp"
#include "fesim/load.hpp"
#include "fesim/params.hpp"
#include "fesim/sc_core.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fesim {

enum class Phase { idle, phase1, gap, phase2, recovery };
std::string_view to_string(Phase p);

struct Sample {
    double t = 0.0;
    double v_out = 0.0;   // HV stack (flyback output)
    double v_load = 0.0;  // output node, across the load
    double i_load = 0.0;  // amps, phase-1 direction positive
    Phase phase = Phase::idle;
    bool s1 = false;
    bool s2 = false;
    bool k1 = false;
    bool k2 = false;
};

struct Waveform {
    std::vector<Sample> samples;
};

/// Zero means "derive from the protocol and timing".
struct SamplePolicy {
    double dense_edge_window = 0.0;  // default 20 * r_on * c_par
    double dense_dt = 0.0;           // default r_on * c_par / 20
    double bulk_dt = 0.0;            // default min phase width / 20
    double idle_dt = 0.0;            // default max(bulk_dt, period / 200)
};

struct SimConfig {
    StimProtocol protocol;
    FlybackModel flyback = *flyback_preset("paper_120");
    LoadModel load = *load_preset("low_impedance");
    SwitchTiming timing;
    SamplePolicy sampling;
    double c_unit = 10e-6;
    double regulation_gain = 1.0;
    /// Stack voltage before the first pulse; defaults to the settled value
    /// of the starting code.
    std::optional<double> initial_stack;
    /// Holds the stack at a fixed voltage, bypassing the flyback model.
    std::optional<double> fixed_stack;
};

/// Sampling parameters after defaults are applied.
struct ResolvedSampling {
    double dense_edge_window;
    double dense_dt;
    double bulk_dt;
    double idle_dt;
};

/// Throws std::invalid_argument when an explicit setting violates
/// dense_edge_window >= 10 * tau_edge or bulk_dt <= phase width / 20.
ResolvedSampling resolve_sampling(const SimConfig& cfg);

struct PulseStats {
    int index = 0;
    double t_start = 0.0;
    int code = 0;
    double v_stack = 0.0;
    double q1 = 0.0;     // charge in phase 1 (C)
    double q2 = 0.0;     // charge in phase 2 (C, negative)
    double q_net = 0.0;  // over the whole period
    double i_peak = 0.0;         // max |i_load|
    double i_peak_phase1 = 0.0;  // regulation input
};

struct SummaryStats {
    std::vector<PulseStats> pulses;
    double peak_current = 0.0;
    double peak_v_out = 0.0;
    std::optional<double> rise_time;
    bool regulated = false;
    std::optional<int> final_code;
    bool saturated = false;
    bool compliance_limited = false;
    std::string compliance_message;
};

struct SimResult {
    Waveform waveform;
    SummaryStats stats;
};

/// Protocol rejected by validate_protocol.
class ProtocolError : public std::invalid_argument {
public:
    explicit ProtocolError(ValidationReport report);
    [[nodiscard]] const ValidationReport& report() const { return report_; }

private:
    ValidationReport report_;
};

class EdgeNotResolved : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Runs the pulse train. Throws ProtocolError for invalid protocols and
/// std::invalid_argument for invalid timing or sampling. A requested current
/// the supply cannot reach is reported through compliance_limited.
SimResult simulate(const SimConfig& cfg);

/// 0-90% rise of the first phase-1 edge, from the switch-closing instant to
/// the interpolated 90% crossing of the end-of-phase load voltage. Throws
/// EdgeNotResolved if fewer than four samples cover the transition.
double measure_rise_time(const Waveform& w);

/// Fastest time constant of any network configuration the config visits.
double fastest_time_constant(const SimConfig& cfg);

/// Test oracle: same schedule and sample grid, but each interval integrated
/// with the fixed-step trapezoidal rule. Throws std::invalid_argument when
/// dt > fastest_time_constant(cfg) / 50.
Waveform oracle_simulate(const SimConfig& cfg, double dt);

}  // namespace fesim
