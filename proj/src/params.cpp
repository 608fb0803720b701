#include "fesim/params.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace fesim {

std::string_view to_string(Topology t) {
    return t == Topology::monophasic ? "monophasic" : "biphasic";
}

std::string_view to_string(PulseMode m) {
    switch (m) {
    case PulseMode::symmetric: return "symmetric";
    case PulseMode::asym_1_2: return "asym_1_2";
    case PulseMode::asym_2_1: return "asym_2_1";
    }
    return "?";
}

std::optional<Topology> parse_topology(std::string_view s) {
    if (s == "monophasic") return Topology::monophasic;
    if (s == "biphasic") return Topology::biphasic;
    return std::nullopt;
}

std::optional<PulseMode> parse_pulse_mode(std::string_view s) {
    if (s == "symmetric") return PulseMode::symmetric;
    if (s == "asym_1_2") return PulseMode::asym_1_2;
    if (s == "asym_2_1") return PulseMode::asym_2_1;
    return std::nullopt;
}

double phase2_width(const StimProtocol& p) {
    if (p.topology == Topology::monophasic) return 0.0;
    switch (p.mode) {
    case PulseMode::symmetric: return p.phase1_width;
    case PulseMode::asym_1_2: return p.phase1_width / 2.0;
    case PulseMode::asym_2_1: return p.phase1_width * 2.0;
    }
    return p.phase1_width;
}

double period_budget_used(const StimProtocol& p) {
    if (p.topology == Topology::monophasic) return p.phase1_width + p.recovery_gap;
    return p.phase1_width + p.interphase_gap + phase2_width(p) + p.recovery_gap;
}

bool ValidationReport::has_violation(std::string_view field) const {
    for (const auto& v : violations)
        if (v.field == field) return true;
    return false;
}

namespace {

std::string num(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

}  // namespace

ValidationReport validate_protocol(const StimProtocol& p) {
    ValidationReport r;
    auto add = [&r](std::string field, std::string limit, std::string rating, std::string detail) {
        r.violations.push_back({std::move(field), std::move(limit), std::move(rating), std::move(detail)});
    };

    const bool freq_ok = std::isfinite(p.frequency) && p.frequency >= rating::min_frequency_hz &&
                         p.frequency <= rating::max_frequency_hz;
    if (!freq_ok)
        add("frequency", "1 Hz .. 10 kHz", "Pulse Frequency: programmable from 1 Hz to 10 kHz",
            "frequency = " + num(p.frequency) + " Hz");

    if (p.voltage_code < -rating::max_code || p.voltage_code > rating::max_code)
        add("voltage_code", "-127 .. +127", "Output Voltage: 0 to 135 V, 7 bit resolution",
            "voltage_code = " + std::to_string(p.voltage_code));

    if (p.target_current) {
        const double i = *p.target_current;
        if (!std::isfinite(i) || i < 0.0 || i > rating::max_output_current)
            add("target_current", "0 .. 20 mA", "Output Current: 0 to 20 mA, 7 bit resolution",
                "target_current = " + num(i * 1e3) + " mA");
    }

    const bool width_ok = std::isfinite(p.phase1_width) && p.phase1_width > 0.0;
    if (!width_ok)
        add("phase1_width", "> 0 s", "Pulse timing", "phase1_width = " + num(p.phase1_width) + " s");
    if (!std::isfinite(p.interphase_gap) || p.interphase_gap < 0.0)
        add("interphase_gap", ">= 0 s", "Pulse timing", "interphase_gap = " + num(p.interphase_gap) + " s");
    if (!std::isfinite(p.recovery_gap) || p.recovery_gap < 0.0)
        add("recovery_gap", ">= 0 s", "Pulse timing", "recovery_gap = " + num(p.recovery_gap) + " s");
    if (p.train_length < 0)
        add("train_length", ">= 0 pulses", "Pulse timing", "train_length = " + std::to_string(p.train_length));

    if (p.mode != PulseMode::symmetric && p.topology != Topology::biphasic)
        add("mode", "asymmetric modes require biphasic topology",
            "Topology: programmable monophasic / biphasic",
            std::string("mode = ") + std::string(to_string(p.mode)) + " with monophasic topology");

    if (freq_ok && width_ok) {
        const double period = 1.0 / p.frequency;
        const double used = period_budget_used(p);
        if (used > period)
            add("period budget", "phases + gaps <= 1/frequency = " + num(period * 1e6) + " us",
                "Pulse Frequency: programmable from 1 Hz to 10 kHz",
                "t1 + t2 + gaps = " + num(used * 1e6) + " us");
    }

    if (p.topology == Topology::monophasic)
        r.warnings.emplace_back("charge-imbalanced: monophasic pulses deliver net charge every pulse");
    return r;
}

PhasePlan plan_phases(const StimProtocol& p, double v_out) {
    if (!(v_out > 0.0)) throw std::invalid_argument("plan_phases: v_out must be > 0");

    PhasePlan plan;
    plan.mode = p.mode;
    plan.topology = p.topology;
    plan.t1 = p.phase1_width;
    plan.interphase_gap = p.interphase_gap;
    plan.recovery_gap = p.recovery_gap;

    if (p.topology == Topology::monophasic) {
        // The monophasic pulse uses the phase-1 tap of the symmetric divider.
        plan.v1 = v_out / 2.0;
        plan.interphase_gap = 0.0;
        return plan;
    }
    switch (p.mode) {
    case PulseMode::symmetric:
        plan.v1 = v_out / 2.0;
        plan.v2 = v_out / 2.0;
        break;
    case PulseMode::asym_1_2:
        plan.v1 = v_out / 3.0;
        plan.v2 = 2.0 * v_out / 3.0;
        break;
    case PulseMode::asym_2_1:
        plan.v1 = 2.0 * v_out / 3.0;
        plan.v2 = v_out / 3.0;
        break;
    }
    plan.t2 = phase2_width(p);
    return plan;
}

}  // namespace fesim
