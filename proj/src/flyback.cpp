#include "fesim/flyback.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fesim {

IdacCode::IdacCode(int code) : code_(code) {
    if (code < -max || code > max)
        throw std::out_of_range("IdacCode: " + std::to_string(code) + " outside [-127, 127]");
}

IdacCode IdacCode::clamped(long long code) {
    return IdacCode(static_cast<int>(std::clamp<long long>(code, -max, max)));
}

FlybackModel calibrate_from_endpoints(double v_low, double v_high, double i_fs, double v_ref) {
    if (!(i_fs > 0.0) || !(v_ref > 0.0))
        throw std::invalid_argument("calibrate_from_endpoints: i_fs and v_ref must be > 0");
    if (!(v_high > v_low))
        throw std::invalid_argument("calibrate_from_endpoints: inconsistent endpoints (v_high must exceed v_low)");

    // V(+i_fs) = v_low, V(-i_fs) = v_high: the difference fixes R1, the mean
    // fixes the zero-current midpoint and hence R2.
    const double r1 = (v_high - v_low) / (2.0 * i_fs);
    const double mid = 0.5 * (v_high + v_low);
    if (!(mid > v_ref))
        throw std::invalid_argument("calibrate_from_endpoints: inconsistent endpoints (midpoint not above v_ref)");
    const double r2 = v_ref * r1 / (mid - v_ref);

    FlybackModel m;
    m.v_ref = v_ref;
    m.r1 = r1;
    m.r2 = r2;
    m.i_dac_full_scale = i_fs;
    return m;
}

std::optional<FlybackModel> flyback_preset(std::string_view name) {
    if (name == "paper_120") return calibrate_from_endpoints(3.5, 120.0, 200e-6, 1.23);
    if (name == "table1_135") return calibrate_from_endpoints(3.5, 135.0, 200e-6, 1.23);
    return std::nullopt;
}

double code_to_voltage(const FlybackModel& m, IdacCode c) {
    const double i_dac = c.value() * m.i_dac_full_scale / IdacCode::max;
    // Written as v_ref + R1*(v_ref/R2 - I) so the endpoints back-substitute exactly.
    const double v = m.v_ref + m.r1 * (m.v_ref / m.r2 - i_dac);
    return std::clamp(v, 0.0, m.v_out_max_clamp);
}

double step_resolution(const FlybackModel& m) {
    return m.r1 * m.i_dac_full_scale / IdacCode::max;
}

IdacCode voltage_to_code(const FlybackModel& m, double v_out) {
    const double code = (m.midpoint() - v_out) / step_resolution(m);
    if (!std::isfinite(code)) return IdacCode::clamped(code > 0 ? IdacCode::max : -IdacCode::max);
    return IdacCode::clamped(std::llround(std::clamp(code, -1e6, 1e6)));
}

double settle(const FlybackModel& m, double v_now, double v_target, double dt) {
    if (dt < 0.0) throw std::invalid_argument("settle: dt must be >= 0");
    if (m.settle_tau <= 0.0) return v_target;
    return v_target + (v_now - v_target) * std::exp(-dt / m.settle_tau);
}

}  // namespace fesim
