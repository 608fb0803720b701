#pragma once

// Electrode-tissue loads: a pure resistance, or a simplified Randles cell
// (access resistance r_s in series with r_p || c_dl). The double-layer
// voltage v_c is the only state and is carried explicitly by value.

#include <optional>
#include <string_view>

namespace fesim {

enum class LoadKind { resistive, randles };

class LoadModel {
public:
    /// Throws std::invalid_argument unless r_s > 0.
    static LoadModel resistive(double r_s);
    /// Throws std::invalid_argument unless r_s, r_p, c_dl > 0.
    static LoadModel randles(double r_s, double r_p, double c_dl, double v_c = 0.0);

    [[nodiscard]] LoadKind kind() const { return kind_; }
    [[nodiscard]] double r_s() const { return r_s_; }
    [[nodiscard]] double r_p() const { return r_p_; }
    [[nodiscard]] double c_dl() const { return c_dl_; }
    [[nodiscard]] double v_c() const { return v_c_; }

    [[nodiscard]] LoadModel with_v_c(double v_c) const;
    [[nodiscard]] LoadModel with_r_s(double r_s) const;

    /// Time constant of the double layer discharging through r_p alone.
    [[nodiscard]] double tau_open() const;
    /// Energy held in the double layer.
    [[nodiscard]] double stored_energy() const;

private:
    LoadModel() = default;

    LoadKind kind_ = LoadKind::resistive;
    double r_s_ = 1.0;
    double r_p_ = 0.0;
    double c_dl_ = 0.0;
    double v_c_ = 0.0;
};

/// DC resistance: r_s, or r_s + r_p for the Randles cell.
double dc_resistance(const LoadModel& m);

/// Presets: "low_impedance" (1 kOhm resistive) and "high_impedance"
/// (Randles 2 kOhm + 50 kOhm || 100 nF).
std::optional<LoadModel> load_preset(std::string_view name);

struct LoadResponse {
    double i_load = 0.0;  // amps, positive into the load
    LoadModel state;
};

/// Exact update for a constant source v_applied behind r_source held for dt.
/// The current is evaluated from the updated state. Throws
/// std::invalid_argument unless dt > 0 and r_source >= 0.
LoadResponse current_response(const LoadModel& m, double v_applied, double r_source, double dt);

/// Charge delivered over the same interval (integral of i_load).
double charge_delivered(const LoadModel& m, double v_applied, double r_source, double dt);

}  // namespace fesim
