#pragma once

// Behavioral model of the flyback HV supply: a resistive feedback divider
// whose tap is held at V_ref, with a current DAC sourcing into or sinking
// from the tap to move the regulated output.
//
//   V_out = V_ref * (1 + R1/R2) - R1 * I_dac
//
// Positive I_dac (sourcing) lowers V_out, negative (sinking) raises it.

#include <optional>
#include <string_view>

namespace fesim {

/// Signed 7-bit IDAC code. Positive sources current into the feedback node.
class IdacCode {
public:
    static constexpr int max = 127;

    constexpr IdacCode() = default;
    /// Throws std::out_of_range when |code| > 127.
    explicit IdacCode(int code);

    /// Saturates to [-127, 127].
    static IdacCode clamped(long long code);

    [[nodiscard]] constexpr int value() const { return code_; }
    friend constexpr bool operator==(IdacCode, IdacCode) = default;

private:
    int code_ = 0;
};

struct FlybackModel {
    double v_ref = 1.23;
    double r1 = 0.0;
    double r2 = 0.0;
    double i_dac_full_scale = 200e-6;
    double v_out_max_clamp = 135.0;
    double settle_tau = 100e-6;

    // Informational only; the converter is modeled as a regulated source.
    double v_in = 12.0;
    double turns_ratio = 5.0;

    /// Tap-balanced output with zero IDAC current.
    [[nodiscard]] double midpoint() const { return v_ref * (1.0 + r1 / r2); }
};

/// Solves R1, R2 so that full-scale sourcing gives v_low and full-scale
/// sinking gives v_high. Throws std::invalid_argument if the endpoints
/// would force R1 <= 0 or R2 <= 0.
FlybackModel calibrate_from_endpoints(double v_low, double v_high, double i_fs, double v_ref = 1.23);

/// Named presets: "paper_120" (3.5 V .. 120 V) and "table1_135" (3.5 V .. 135 V).
std::optional<FlybackModel> flyback_preset(std::string_view name);

/// Regulated output for a code, clamped to [0, v_out_max_clamp].
double code_to_voltage(const FlybackModel& m, IdacCode c);

/// Output change per unit code step, R1 * I_fs / 127.
double step_resolution(const FlybackModel& m);

/// Nearest code for a requested output voltage (saturating).
IdacCode voltage_to_code(const FlybackModel& m, double v_out);

/// First-order approach of the output toward v_target over dt.
double settle(const FlybackModel& m, double v_now, double v_target, double dt);

}  // namespace fesim
