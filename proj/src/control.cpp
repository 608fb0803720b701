#include "fesim/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fesim {

RegulatorState regulate_step(const RegulatorState& st, double i_measured, const FlybackModel& fb,
                             std::optional<double> v_stack_applied) {
    if (!(i_measured >= 0.0) || !std::isfinite(i_measured))
        throw std::invalid_argument("regulate_step: i_measured must be finite and >= 0");

    RegulatorState next = st;
    const double err = st.target_i - i_measured;
    next.error_history.push_back(err);
    while (next.error_history.size() > RegulatorState::history_length) next.error_history.pop_front();

    const int code = st.code.value();
    // Continuous code that would have hit the target.
    double wanted = code;
    if (err == 0.0) {
        wanted = code;
    } else if (i_measured > 0.0) {
        const double v_now = v_stack_applied.value_or(code_to_voltage(fb, st.code));
        const double v_needed = v_now * st.target_i / i_measured;
        wanted = (fb.midpoint() - v_needed) / step_resolution(fb);
    } else {
        // Open circuit or no conduction yet: push toward maximum voltage.
        wanted = -std::numeric_limits<double>::infinity();
    }

    long long raw = code;
    if (std::isinf(wanted)) {
        raw = wanted < 0 ? -2LL * IdacCode::max : 2LL * IdacCode::max;
    } else {
        const double delta = std::clamp(st.loop_gain * (wanted - code), -1e6, 1e6);
        raw = code + std::llround(delta);
    }
    next.code = IdacCode::clamped(raw);

    const double lim = IdacCode::max + 0.5;
    const bool clamped = raw != next.code.value();
    const bool beyond = (next.code.value() == -IdacCode::max && wanted < -lim) ||
                        (next.code.value() == IdacCode::max && wanted > lim);
    next.saturated = clamped || beyond;
    return next;
}

double phase1_fraction(PulseMode mode) {
    switch (mode) {
    case PulseMode::symmetric: return 0.5;
    case PulseMode::asym_1_2: return 1.0 / 3.0;
    case PulseMode::asym_2_1: return 2.0 / 3.0;
    }
    return 0.5;
}

double phase1_current(const FlybackModel& fb, IdacCode code, double r_dc, PulseMode mode) {
    if (std::isinf(r_dc)) return 0.0;
    return phase1_fraction(mode) * code_to_voltage(fb, code) / r_dc;
}

double steady_state_error(const FlybackModel& fb, double r_dc, PulseMode mode, double target_i) {
    const double i_max = phase1_current(fb, IdacCode(-IdacCode::max), r_dc, mode);
    const double i_step = phase1_fraction(mode) * step_resolution(fb) / r_dc;
    if (target_i - i_max > 0.5 * i_step) throw std::domain_error("steady_state_error: unreachable (compliance-limited)");

    double best = std::numeric_limits<double>::infinity();
    for (int c = -IdacCode::max; c <= IdacCode::max; ++c) {
        const double e = target_i - phase1_current(fb, IdacCode(c), r_dc, mode);
        if (std::abs(e) < std::abs(best)) best = e;
    }
    return best;
}

}  // namespace fesim
