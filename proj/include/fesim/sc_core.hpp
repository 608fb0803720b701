#pragma once

// Switched-capacitor output stage.
//
// The four equal capacitors form a series divider across the HV stack. C1
// (lower arm) and C2 (upper arm) are always in circuit; relay K1 parallels
// C3 onto the lower arm and K2 parallels C4 onto the upper arm. Phase 1
// (S1 closed) drives the load from the lower arm voltage V1, phase 2 (S2
// closed) drives it in reverse from the upper arm voltage V2:
//
//   K1 K2   lower:upper C    V1 : V2
//   0  0        1 : 1         1 : 1
//   1  0        2 : 1         1 : 2
//   0  1        1 : 2         2 : 1
//
// S1/S2 are high-side NMOS switches behind a gate driver; they are modeled
// as an on-resistance with fixed turn-on/turn-off latencies, and the output
// node carries a lumped parasitic capacitance.

#include "fesim/load.hpp"
#include "fesim/params.hpp"

#include <optional>
#include <string_view>
#include <vector>

namespace fesim {

struct SwitchTiming {
    double pullup_r = 2.2;  // gate driver, informational
    double pulldown_r = 1.0;
    double gate_delay_on = 3e-9;
    double gate_delay_off = 2e-9;
    double r_on = 1.0;
    double c_par = 5.28e-9;

    /// Throws std::invalid_argument on non-positive resistances or delays,
    /// negative c_par, or gate delays >= 20 ns.
    void validate() const;
    [[nodiscard]] double edge_tau() const { return r_on * c_par; }
};

/// Parasitic envelope inside which the 0-90% edge stays under the 20 ns
/// rating for any load: r_on <= 1.5 Ohm and c_par <= 5.5 nF.
namespace parasitic_envelope {
inline constexpr double max_r_on = 1.5;
inline constexpr double max_c_par = 5.5e-9;
}  // namespace parasitic_envelope

bool within_parasitic_envelope(const SwitchTiming& t);

enum class SwitchId { s1, s2, k1, k2 };
std::string_view to_string(SwitchId id);

/// Switch and relay configuration together with the stack it is applied to.
class ScState {
public:
    ScState() = default;
    /// Throws std::invalid_argument on S1+S2 (shoot-through), K1+K2 (mode
    /// conflict), or a negative stack voltage.
    ScState(bool s1, bool s2, bool k1, bool k2, double v_stack, double c_unit = 10e-6);

    [[nodiscard]] bool s1() const { return s1_; }
    [[nodiscard]] bool s2() const { return s2_; }
    [[nodiscard]] bool k1() const { return k1_; }
    [[nodiscard]] bool k2() const { return k2_; }
    [[nodiscard]] double c_unit() const { return c_unit_; }
    [[nodiscard]] double v_stack() const { return v_stack_; }
    /// Divider midpoint measured from the stack bottom (equals V1).
    [[nodiscard]] double v_tap() const;

    [[nodiscard]] ScState with_stack(double v_stack) const;

private:
    bool s1_ = false;
    bool s2_ = false;
    bool k1_ = false;
    bool k2_ = false;
    double v_stack_ = 0.0;
    double c_unit_ = 10e-6;
};

struct DividerSplit {
    double v1;
    double v2;
};

/// Arm voltages of the capacitive divider. Throws std::invalid_argument on
/// K1+K2.
DividerSplit divider_split(bool k1, bool k2, double v_stack, double c_unit = 10e-6);

/// Relay setting that realizes a pulse mode.
struct RelaySetting {
    bool k1 = false;
    bool k2 = false;
};
RelaySetting relays_for(PulseMode mode);

/// Thevenin source seen by the load; phase-1 current is positive.
struct PhaseSource {
    double emf;
    double r_series;
};

/// nullopt when both switches are open.
std::optional<PhaseSource> phase_source(const ScState& state, const SwitchTiming& timing);

/// Requested target configuration.
struct SwitchCommand {
    bool s1 = false;
    bool s2 = false;
    bool k1 = false;
    bool k2 = false;

    static SwitchCommand open(RelaySetting r = {}) { return {false, false, r.k1, r.k2}; }
    static SwitchCommand phase1(RelaySetting r = {}) { return {true, false, r.k1, r.k2}; }
    static SwitchCommand phase2(RelaySetting r = {}) { return {false, true, r.k1, r.k2}; }
};

struct SwitchEvent {
    double time;
    SwitchId sw;
    bool close;
    double edge_tau;  // r_on * c_par on S1/S2 closings, 0 otherwise
};

/// Applies commands in time order and schedules the resulting switch events
/// with break-before-make: a switch closes no earlier than
/// gate_delay_off + gate_delay_on after the opposite switch opened.
/// Relays may only change while both S1 and S2 are (and will stay) open.
class SwitchSequencer {
public:
    explicit SwitchSequencer(SwitchTiming timing, ScState initial = {});

    /// Returns the events scheduled by this command. A command issued before
    /// a pending event of the same switch fires supersedes it. Throws
    /// std::invalid_argument naming the offending pair for S1+S2 or K1+K2,
    /// for relay changes with a phase switch engaged, and for commands
    /// issued out of time order.
    std::vector<SwitchEvent> command(double t, const SwitchCommand& cmd);

    /// Every live event, sorted by time.
    [[nodiscard]] std::vector<SwitchEvent> timeline() const;
    [[nodiscard]] const SwitchTiming& timing() const { return timing_; }

private:
    struct Track {
        bool closed_final = false;            // state after all live events
        std::optional<std::size_t> pending;  // index into events_ of a future event
        std::optional<double> last_open;      // time of latest live opening
    };

    Track& track(SwitchId id) { return id == SwitchId::s1 ? s1_ : s2_; }
    void cancel(Track& tr);

    SwitchTiming timing_;
    Track s1_;
    Track s2_;
    bool k1_ = false;
    bool k2_ = false;
    double now_ = -1e300;
    std::vector<SwitchEvent> events_;
    std::vector<bool> live_;
};

/// Events produced by one command from a quiescent state, with times
/// relative to the command.
std::vector<SwitchEvent> transition(const ScState& state, const SwitchCommand& command,
                                    const SwitchTiming& timing);

/// 0-90% rise of the output edge: ln(10) * (r_on || R_dc) * c_par.
double rise_time_90(const SwitchTiming& timing, const LoadModel& load);

}  // namespace fesim
