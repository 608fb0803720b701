#include <catch_amalgamated.hpp>

#include "fesim/sc_core.hpp"

#include <cmath>
#include <random>

using namespace fesim;
using Catch::Approx;

TEST_CASE("divider split examples") {
    const auto sym = divider_split(false, false, 100.0);
    CHECK(sym.v1 == 50.0);
    CHECK(sym.v2 == 50.0);
    const auto k1 = divider_split(true, false, 120.0);
    CHECK(k1.v1 == Approx(40.0).epsilon(1e-14));
    CHECK(k1.v2 == Approx(80.0).epsilon(1e-14));
    const auto k2 = divider_split(false, true, 120.0);
    CHECK(k2.v1 == Approx(80.0).epsilon(1e-14));
    CHECK(k2.v2 == Approx(40.0).epsilon(1e-14));
    CHECK_THROWS_AS(divider_split(true, true, 50.0), std::invalid_argument);
}

TEST_CASE("divider ratios hold for any stack") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(0.0, 135.0);
    for (int i = 0; i < 10'000; ++i) {
        double v = u(rng);
        if (v == 0.0) v = 135.0;
        const auto s = divider_split(false, false, v);
        const auto a = divider_split(true, false, v);
        const auto b = divider_split(false, true, v);
        REQUIRE(std::abs(s.v1 / s.v2 - 1.0) < 1e-12);
        REQUIRE(std::abs(a.v2 / a.v1 - 2.0) < 1e-12);
        REQUIRE(std::abs(b.v1 / b.v2 - 2.0) < 1e-12);
        REQUIRE(std::abs(a.v1 + a.v2 - v) <= 1e-12 * v);
    }
}

TEST_CASE("divider split ignores the unit capacitance") {
    for (double c : {1e-9, 10e-6, 1e-3}) {
        const auto a = divider_split(true, false, 90.0, c);
        CHECK(a.v1 == Approx(30.0).epsilon(1e-14));
    }
}

TEST_CASE("state invariants") {
    CHECK_THROWS_AS(ScState(true, true, false, false, 10.0), std::invalid_argument);
    CHECK_THROWS_AS(ScState(false, false, true, true, 10.0), std::invalid_argument);
    CHECK_THROWS_AS(ScState(false, false, false, false, -1.0), std::invalid_argument);
    const ScState s(false, false, true, false, 120.0);
    CHECK(s.v_tap() == Approx(40.0));
    CHECK(s.with_stack(60.0).v_tap() == Approx(20.0));
}

TEST_CASE("phase sources") {
    const SwitchTiming t;
    const auto p1 = phase_source(ScState(true, false, false, false, 120.0), t);
    REQUIRE(p1);
    CHECK(p1->emf == Approx(60.0));
    CHECK(p1->r_series == t.r_on);
    const auto p2 = phase_source(ScState(false, true, true, false, 120.0), t);
    REQUIRE(p2);
    CHECK(p2->emf == Approx(-80.0));
    CHECK_FALSE(phase_source(ScState(false, false, false, false, 120.0), t));
}

TEST_CASE("relays per mode") {
    CHECK_FALSE(relays_for(PulseMode::symmetric).k1);
    CHECK_FALSE(relays_for(PulseMode::symmetric).k2);
    CHECK(relays_for(PulseMode::asym_1_2).k1);
    CHECK(relays_for(PulseMode::asym_2_1).k2);
}

TEST_CASE("single transitions") {
    const SwitchTiming t;
    const ScState idle;

    const auto on = transition(idle, SwitchCommand::phase1(), t);
    REQUIRE(on.size() == 1);
    CHECK(on[0].sw == SwitchId::s1);
    CHECK(on[0].close);
    CHECK(on[0].time == Approx(t.gate_delay_on));
    CHECK(on[0].edge_tau == Approx(t.r_on * t.c_par));

    const ScState p1(true, false, false, false, 0.0);
    const auto swap = transition(p1, SwitchCommand::phase2(), t);
    REQUIRE(swap.size() == 2);
    CHECK(swap[0].sw == SwitchId::s1);
    CHECK_FALSE(swap[0].close);
    CHECK(swap[1].sw == SwitchId::s2);
    CHECK(swap[1].close);
    CHECK(swap[1].time - swap[0].time >= t.gate_delay_off + t.gate_delay_on - 1e-18);

    CHECK(transition(p1, SwitchCommand::phase1(), t).empty());
}

TEST_CASE("sequencer rejects illegal commands") {
    SwitchSequencer seq(SwitchTiming{});
    CHECK_THROWS_AS(seq.command(0.0, {true, true, false, false}), std::invalid_argument);
    CHECK_THROWS_AS(seq.command(0.0, {false, false, true, true}), std::invalid_argument);
    seq.command(1e-6, SwitchCommand::phase1());
    CHECK_THROWS_AS(seq.command(0.5e-6, SwitchCommand::open()), std::invalid_argument);
    CHECK_THROWS_AS(seq.command(2e-6, SwitchCommand::phase1({true, false})), std::invalid_argument);
    try {
        seq.command(3e-6, SwitchCommand::phase2({false, true}));
        FAIL("expected a relay error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("K1/K2") != std::string::npos);
    }
}

namespace {

struct Replay {
    bool s[2] = {false, false};
    bool k1 = false;
    bool k2 = false;
};

// Replays a timeline and checks every safety property. Returns the final
// state.
Replay check_timeline(const std::vector<SwitchEvent>& tl, const SwitchTiming& t) {
    Replay st;
    std::optional<double> last_open[2];
    bool ever_closed[2] = {false, false};
    const double guard = t.gate_delay_off + t.gate_delay_on;

    std::size_t i = 0;
    while (i < tl.size()) {
        std::size_t j = i;
        while (j < tl.size() && tl[j].time == tl[i].time) ++j;
        for (int pass = 0; pass < 2; ++pass) {  // openings before closings at the same instant
            for (std::size_t k = i; k < j; ++k) {
                const auto& ev = tl[k];
                const bool relay = ev.sw == SwitchId::k1 || ev.sw == SwitchId::k2;
                // relays replay in issue order; phase switches open before they close
                if (relay ? pass != 0 : (pass == 0) == ev.close) continue;
                if (relay) {
                    INFO("relay moved with a phase switch closed at t=" << ev.time);
                    REQUIRE_FALSE(st.s[0]);
                    REQUIRE_FALSE(st.s[1]);
                    (ev.sw == SwitchId::k1 ? st.k1 : st.k2) = ev.close;
                    REQUIRE_FALSE((st.k1 && st.k2));
                    continue;
                }
                const int me = ev.sw == SwitchId::s1 ? 0 : 1;
                const int other = 1 - me;
                REQUIRE(st.s[me] != ev.close);  // every event is a real change
                if (ev.close) {
                    REQUIRE(ev.edge_tau == Approx(t.edge_tau()));
                    REQUIRE_FALSE(st.s[other]);
                    if (ever_closed[other]) {
                        REQUIRE(last_open[other]);
                        REQUIRE(ev.time - *last_open[other] >= guard - 1e-18);
                    }
                    ever_closed[me] = true;
                } else {
                    REQUIRE(ev.edge_tau == 0.0);
                    last_open[me] = ev.time;
                }
                st.s[me] = ev.close;
                REQUIRE_FALSE((st.s[0] && st.s[1]));
            }
        }
        i = j;
    }
    return st;
}

struct Explorer {
    SwitchTiming timing;
    std::vector<SwitchCommand> commands;
    std::vector<double> spacings;
    long long visited = 0;
    long long rejected = 0;

    void walk(const SwitchSequencer& seq, double t, const SwitchCommand& last, bool last_relays_ok, int depth) {
        if (depth == 0) return;
        for (const auto& cmd : commands) {
            for (double dt : spacings) {
                SwitchSequencer next = seq;
                const double tc = t + dt;
                try {
                    const auto evs = next.command(tc, cmd);
                    for (const auto& ev : evs) {
                        REQUIRE(ev.time >= tc);
                        if (ev.sw == SwitchId::s1 || ev.sw == SwitchId::s2)
                            REQUIRE(ev.time >= tc + std::min(timing.gate_delay_on, timing.gate_delay_off));
                    }
                } catch (const std::invalid_argument&) {
                    // only relay moves may be refused, and only when the relays differ
                    REQUIRE((cmd.k1 != last.k1 || cmd.k2 != last.k2));
                    ++rejected;
                    continue;
                }
                ++visited;
                const auto st = check_timeline(next.timeline(), timing);
                REQUIRE(st.s[0] == cmd.s1);
                REQUIRE(st.s[1] == cmd.s2);
                REQUIRE(st.k1 == cmd.k1);
                REQUIRE(st.k2 == cmd.k2);
                walk(next, tc, cmd, last_relays_ok, depth - 1);
            }
        }
    }
};

}  // namespace

TEST_CASE("sequencer model check over short command sequences") {
    Explorer ex;
    ex.commands = {SwitchCommand::open(), SwitchCommand::phase1(), SwitchCommand::phase2(),
                   SwitchCommand::open({true, false})};
    // shorter than, between and longer than the gate delays
    ex.spacings = {0.0, 1e-9, 4e-9, 20e-9};
    SwitchSequencer seq(ex.timing);
    ex.walk(seq, 0.0, SwitchCommand::open(), true, 6);
    CHECK(ex.visited > 1000);
    CHECK(ex.rejected > 0);
}

TEST_CASE("sequencer model check with asymmetric delays") {
    Explorer ex;
    ex.timing.gate_delay_on = 1e-9;
    ex.timing.gate_delay_off = 7e-9;
    ex.commands = {SwitchCommand::open(), SwitchCommand::phase1(), SwitchCommand::phase2(),
                   SwitchCommand::open({false, true})};
    ex.spacings = {0.5e-9, 3e-9, 12e-9};
    SwitchSequencer seq(ex.timing);
    ex.walk(seq, 0.0, SwitchCommand::open(), true, 5);
    CHECK(ex.visited > 1000);
}

TEST_CASE("timing validation") {
    SwitchTiming t;
    CHECK_NOTHROW(t.validate());
    t.r_on = 0.0;
    CHECK_THROWS_AS(t.validate(), std::invalid_argument);
    t = {};
    t.c_par = -1e-12;
    CHECK_THROWS_AS(t.validate(), std::invalid_argument);
    t = {};
    t.gate_delay_on = 25e-9;
    CHECK_THROWS_AS(t.validate(), std::invalid_argument);
}

namespace {

// 90% point of a first-order step found by bisection on the response itself.
double bisect_rise(double tau) {
    double lo = 0.0;
    double hi = 100.0 * tau;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (1.0 - std::exp(-mid / tau) < 0.9 ? lo : hi) = mid;
    }
    return lo;
}

}  // namespace

TEST_CASE("rise time model") {
    const SwitchTiming t;
    const auto load = LoadModel::resistive(1e3);
    const double rt = rise_time_90(t, load);
    CHECK(rt == Approx(12.15e-9).epsilon(0.01));
    const double tau = (1.0 * 1e3 / 1001.0) * 5.28e-9;
    CHECK(rt == Approx(bisect_rise(tau)).epsilon(1e-9));

    SwitchTiming ideal = t;
    ideal.c_par = 0.0;
    CHECK(rise_time_90(ideal, load) == 0.0);
    SwitchTiming doubled = t;
    doubled.c_par *= 2.0;
    CHECK(rise_time_90(doubled, load) == Approx(2.0 * rt).epsilon(1e-12));
}

TEST_CASE("parasitic envelope keeps edges under 20 ns") {
    SwitchTiming corner;
    corner.r_on = parasitic_envelope::max_r_on;
    corner.c_par = parasitic_envelope::max_c_par;
    CHECK(within_parasitic_envelope(corner));
    // worst case is an open load, where the edge sees r_on alone
    CHECK(rise_time_90(corner, LoadModel::resistive(1e12)) < 20e-9);

    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        SwitchTiming t;
        t.r_on = 1e-3 + u(rng) * (parasitic_envelope::max_r_on - 1e-3);
        t.c_par = u(rng) * parasitic_envelope::max_c_par;
        const auto load = LoadModel::resistive(std::exp(std::log(10.0) + u(rng) * std::log(1e7)));
        CHECK(rise_time_90(t, load) < 20e-9);
    }

    SwitchTiming big;
    big.c_par = 20e-9;
    CHECK_FALSE(within_parasitic_envelope(big));
}
