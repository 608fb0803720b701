#pragma once

// Per-pulse current regulation through the flyback IDAC code.
//
// The controller integrates in code space. Each pulse it refers the current
// error back to the stack voltage that would have produced the target
// (i scales with V_stack for a fixed load), converts that to a code through
// the flyback law, and moves a fraction `loop_gain` of the way there,
// rounded to whole codes. Lower codes mean higher voltage.

#include "fesim/flyback.hpp"
#include "fesim/params.hpp"

#include <deque>
#include <optional>

namespace fesim {

struct RegulatorState {
    static constexpr std::size_t history_length = 16;

    double target_i = 0.0;  // amps
    IdacCode code{};
    double loop_gain = 1.0;
    std::deque<double> error_history;  // target - measured, newest last
    bool saturated = false;
};

/// One controller update from the measured peak phase-1 current (amps).
/// `v_stack_applied` is the stack voltage the measurement was taken at; when
/// absent the nominal voltage of the current code is used. Throws
/// std::invalid_argument for negative or non-finite measurements.
RegulatorState regulate_step(const RegulatorState& st, double i_measured, const FlybackModel& fb,
                             std::optional<double> v_stack_applied = std::nullopt);

/// Fraction of the stack voltage driving phase 1 for a mode.
double phase1_fraction(PulseMode mode);

/// Phase-1 load current for a code into a resistive load of r_dc ohms.
/// Returns 0 for an infinite resistance.
double phase1_current(const FlybackModel& fb, IdacCode code, double r_dc, PulseMode mode);

/// Best-code residual (target - achieved, amps). Throws std::domain_error
/// ("unreachable") when the target exceeds the compliance limit by more
/// than half a quantization step.
double steady_state_error(const FlybackModel& fb, double r_dc, PulseMode mode, double target_i);

}  // namespace fesim
