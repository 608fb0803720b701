#include "fesim/sc_core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace fesim {

void SwitchTiming::validate() const {
    if (!(r_on > 0.0)) throw std::invalid_argument("SwitchTiming: r_on must be > 0");
    if (!(pullup_r > 0.0) || !(pulldown_r > 0.0))
        throw std::invalid_argument("SwitchTiming: gate driver resistances must be > 0");
    if (!(c_par >= 0.0)) throw std::invalid_argument("SwitchTiming: c_par must be >= 0");
    if (!(gate_delay_on > 0.0) || !(gate_delay_off > 0.0))
        throw std::invalid_argument("SwitchTiming: gate delays must be > 0");
    if (gate_delay_on >= 20e-9 || gate_delay_off >= 20e-9)
        throw std::invalid_argument("SwitchTiming: gate delays must be < 20 ns");
}

bool within_parasitic_envelope(const SwitchTiming& t) {
    return t.r_on <= parasitic_envelope::max_r_on && t.c_par <= parasitic_envelope::max_c_par;
}

std::string_view to_string(SwitchId id) {
    switch (id) {
    case SwitchId::s1: return "S1";
    case SwitchId::s2: return "S2";
    case SwitchId::k1: return "K1";
    case SwitchId::k2: return "K2";
    }
    return "?";
}

ScState::ScState(bool s1, bool s2, bool k1, bool k2, double v_stack, double c_unit)
    : s1_(s1), s2_(s2), k1_(k1), k2_(k2), v_stack_(v_stack), c_unit_(c_unit) {
    if (s1 && s2) throw std::invalid_argument("ScState: shoot-through (S1 and S2 both closed)");
    if (k1 && k2) throw std::invalid_argument("ScState: mode conflict (K1 and K2 both on)");
    if (!(v_stack >= 0.0)) throw std::invalid_argument("ScState: v_stack must be >= 0");
    if (!(c_unit > 0.0)) throw std::invalid_argument("ScState: c_unit must be > 0");
}

double ScState::v_tap() const {
    return divider_split(k1_, k2_, v_stack_, c_unit_).v1;
}

ScState ScState::with_stack(double v_stack) const {
    return ScState(s1_, s2_, k1_, k2_, v_stack, c_unit_);
}

DividerSplit divider_split(bool k1, bool k2, double v_stack, double c_unit) {
    if (k1 && k2) throw std::invalid_argument("divider_split: mode conflict (K1 and K2 both on)");
    const double c_lower = c_unit * (k1 ? 2.0 : 1.0);
    const double c_upper = c_unit * (k2 ? 2.0 : 1.0);
    // Series capacitors share charge; each arm voltage is inverse to its C.
    const double v1 = v_stack * (c_upper / (c_lower + c_upper));
    return {v1, v_stack - v1};
}

RelaySetting relays_for(PulseMode mode) {
    switch (mode) {
    case PulseMode::symmetric: return {false, false};
    case PulseMode::asym_1_2: return {true, false};
    case PulseMode::asym_2_1: return {false, true};
    }
    return {};
}

std::optional<PhaseSource> phase_source(const ScState& state, const SwitchTiming& timing) {
    if (state.s1() && state.s2()) throw std::invalid_argument("phase_source: shoot-through (S1 and S2)");
    if (!state.s1() && !state.s2()) return std::nullopt;
    const auto split = divider_split(state.k1(), state.k2(), state.v_stack(), state.c_unit());
    if (state.s1()) return PhaseSource{split.v1, timing.r_on};
    return PhaseSource{-split.v2, timing.r_on};
}

SwitchSequencer::SwitchSequencer(SwitchTiming timing, ScState initial)
    : timing_(timing), k1_(initial.k1()), k2_(initial.k2()) {
    s1_.closed_final = initial.s1();
    s2_.closed_final = initial.s2();
}

void SwitchSequencer::cancel(Track& tr) {
    if (!tr.pending) return;
    live_[*tr.pending] = false;
    tr.closed_final = !events_[*tr.pending].close;
    tr.pending.reset();
}

std::vector<SwitchEvent> SwitchSequencer::command(double t, const SwitchCommand& cmd) {
    if (t < now_) throw std::invalid_argument("SwitchSequencer: command issued out of time order");
    if (cmd.s1 && cmd.s2) throw std::invalid_argument("SwitchSequencer: shoot-through (S1 and S2)");
    if (cmd.k1 && cmd.k2) throw std::invalid_argument("SwitchSequencer: mode conflict (K1 and K2)");

    for (Track* tr : {&s1_, &s2_})
        if (tr->pending && events_[*tr->pending].time <= t) tr->pending.reset();

    const bool relay_change = cmd.k1 != k1_ || cmd.k2 != k2_;
    if (relay_change && (cmd.s1 || cmd.s2 || s1_.closed_final || s2_.closed_final || s1_.pending || s2_.pending))
        throw std::invalid_argument("SwitchSequencer: relay change (K1/K2) while S1/S2 engaged");
    now_ = t;

    std::vector<SwitchEvent> out;
    auto schedule = [&](Track& tr, SwitchEvent ev) {
        tr.pending = events_.size();
        tr.closed_final = ev.close;
        if (!ev.close) tr.last_open = ev.time;
        events_.push_back(ev);
        live_.push_back(true);
        out.push_back(ev);
    };

    const std::pair<SwitchId, bool> wanted[] = {{SwitchId::s1, cmd.s1}, {SwitchId::s2, cmd.s2}};

    // Openings first so closings can see the opposite switch's release time.
    for (auto [id, want_closed] : wanted) {
        if (want_closed) continue;
        Track& tr = track(id);
        if (tr.pending && events_[*tr.pending].close) cancel(tr);
        if (tr.closed_final && !tr.pending) schedule(tr, {t + timing_.gate_delay_off, id, false, 0.0});
    }
    for (auto [id, want_closed] : wanted) {
        if (!want_closed) continue;
        Track& tr = track(id);
        if (tr.pending && !events_[*tr.pending].close) {
            cancel(tr);  // still closed; the pending opening is withdrawn
            continue;
        }
        if (tr.closed_final) continue;
        const Track& other = id == SwitchId::s1 ? s2_ : s1_;
        double t_close = t + timing_.gate_delay_on;
        if (other.last_open)
            t_close = std::max(t_close, *other.last_open + timing_.gate_delay_off + timing_.gate_delay_on);
        schedule(tr, {t_close, id, true, timing_.edge_tau()});
    }

    if (cmd.k1 != k1_) {
        SwitchEvent ev{t, SwitchId::k1, cmd.k1, 0.0};
        events_.push_back(ev);
        live_.push_back(true);
        out.push_back(ev);
    }
    if (cmd.k2 != k2_) {
        SwitchEvent ev{t, SwitchId::k2, cmd.k2, 0.0};
        events_.push_back(ev);
        live_.push_back(true);
        out.push_back(ev);
    }
    k1_ = cmd.k1;
    k2_ = cmd.k2;
    return out;
}

std::vector<SwitchEvent> SwitchSequencer::timeline() const {
    std::vector<SwitchEvent> out;
    for (std::size_t i = 0; i < events_.size(); ++i)
        if (live_[i]) out.push_back(events_[i]);
    std::stable_sort(out.begin(), out.end(),
                     [](const SwitchEvent& a, const SwitchEvent& b) { return a.time < b.time; });
    return out;
}

std::vector<SwitchEvent> transition(const ScState& state, const SwitchCommand& command,
                                    const SwitchTiming& timing) {
    SwitchSequencer seq(timing, state);
    return seq.command(0.0, command);
}

double rise_time_90(const SwitchTiming& timing, const LoadModel& load) {
    const double r_dc = dc_resistance(load);
    const double r_par = timing.r_on * r_dc / (timing.r_on + r_dc);
    return std::numbers::ln10 * r_par * timing.c_par;
}

}  // namespace fesim
