#include "fesim/load.hpp"

#include <cmath>
#include <stdexcept>

namespace fesim {

LoadModel LoadModel::resistive(double r_s) {
    if (!(r_s > 0.0) || !std::isfinite(r_s)) throw std::invalid_argument("LoadModel: r_s must be > 0");
    LoadModel m;
    m.kind_ = LoadKind::resistive;
    m.r_s_ = r_s;
    return m;
}

LoadModel LoadModel::randles(double r_s, double r_p, double c_dl, double v_c) {
    if (!(r_s > 0.0) || !std::isfinite(r_s)) throw std::invalid_argument("LoadModel: r_s must be > 0");
    if (!(r_p > 0.0) || !std::isfinite(r_p)) throw std::invalid_argument("LoadModel: r_p must be > 0");
    if (!(c_dl > 0.0) || !std::isfinite(c_dl)) throw std::invalid_argument("LoadModel: c_dl must be > 0");
    LoadModel m;
    m.kind_ = LoadKind::randles;
    m.r_s_ = r_s;
    m.r_p_ = r_p;
    m.c_dl_ = c_dl;
    m.v_c_ = v_c;
    return m;
}

LoadModel LoadModel::with_v_c(double v_c) const {
    LoadModel m = *this;
    if (kind_ == LoadKind::randles) m.v_c_ = v_c;
    return m;
}

LoadModel LoadModel::with_r_s(double r_s) const {
    if (!(r_s > 0.0)) throw std::invalid_argument("LoadModel: r_s must be > 0");
    LoadModel m = *this;
    m.r_s_ = r_s;
    return m;
}

double LoadModel::tau_open() const {
    return kind_ == LoadKind::randles ? r_p_ * c_dl_ : 0.0;
}

double LoadModel::stored_energy() const {
    return kind_ == LoadKind::randles ? 0.5 * c_dl_ * v_c_ * v_c_ : 0.0;
}

double dc_resistance(const LoadModel& m) {
    return m.kind() == LoadKind::randles ? m.r_s() + m.r_p() : m.r_s();
}

std::optional<LoadModel> load_preset(std::string_view name) {
    if (name == "low_impedance") return LoadModel::resistive(1e3);
    if (name == "high_impedance") return LoadModel::randles(2e3, 50e3, 100e-9);
    return std::nullopt;
}

namespace {

void check_args(double r_source, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("current_response: dt must be > 0");
    if (!(r_source >= 0.0)) throw std::invalid_argument("current_response: r_source must be >= 0");
}

// Thevenin view of the double layer: v_c relaxes toward v_inf with tau.
struct Relaxation {
    double v_inf;
    double tau;
};

Relaxation relaxation(const LoadModel& m, double v_applied, double r_series) {
    const double g = 1.0 / r_series + 1.0 / m.r_p();
    return {v_applied / r_series / g, m.c_dl() / g};
}

}  // namespace

LoadResponse current_response(const LoadModel& m, double v_applied, double r_source, double dt) {
    check_args(r_source, dt);
    const double r_series = r_source + m.r_s();
    if (m.kind() == LoadKind::resistive) return {v_applied / r_series, m};

    const auto [v_inf, tau] = relaxation(m, v_applied, r_series);
    const double v_c = v_inf + (m.v_c() - v_inf) * std::exp(-dt / tau);
    return {(v_applied - v_c) / r_series, m.with_v_c(v_c)};
}

double charge_delivered(const LoadModel& m, double v_applied, double r_source, double dt) {
    check_args(r_source, dt);
    const double r_series = r_source + m.r_s();
    if (m.kind() == LoadKind::resistive) return v_applied / r_series * dt;

    const auto [v_inf, tau] = relaxation(m, v_applied, r_series);
    // integral of v_c over dt, then i = (v - v_c)/r
    const double v_c_integral = v_inf * dt - (m.v_c() - v_inf) * tau * std::expm1(-dt / tau);
    return (v_applied * dt - v_c_integral) / r_series;
}

}  // namespace fesim
