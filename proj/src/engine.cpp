#include "fesim/engine.hpp"

#include "fesim/lti.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

namespace fesim {

std::string_view to_string(Phase p) {
    switch (p) {
    case Phase::idle: return "idle";
    case Phase::phase1: return "phase1";
    case Phase::gap: return "gap";
    case Phase::phase2: return "phase2";
    case Phase::recovery: return "recovery";
    }
    return "?";
}

namespace {

std::string describe(const ValidationReport& r) {
    std::ostringstream os;
    os << "invalid protocol:";
    for (const auto& v : r.violations) os << " [" << v.field << ": " << v.detail << ", limit " << v.limit << "]";
    return os.str();
}

// Boundaries closer than this are treated as simultaneous.
constexpr double time_eps = 1e-13;

}  // namespace

ProtocolError::ProtocolError(ValidationReport report)
    : std::invalid_argument(describe(report)), report_(std::move(report)) {}

ResolvedSampling resolve_sampling(const SimConfig& cfg) {
    const auto& p = cfg.protocol;
    const auto& s = cfg.sampling;
    const double tau_edge = cfg.timing.edge_tau();
    const double t2 = phase2_width(p);
    const double min_width = t2 > 0.0 ? std::min(p.phase1_width, t2) : p.phase1_width;

    ResolvedSampling r{};
    r.dense_edge_window = s.dense_edge_window > 0.0 ? s.dense_edge_window : 20.0 * tau_edge;
    r.dense_dt = s.dense_dt > 0.0 ? s.dense_dt : tau_edge / 20.0;
    r.bulk_dt = s.bulk_dt > 0.0 ? s.bulk_dt : min_width / 20.0;
    r.idle_dt = s.idle_dt > 0.0 ? s.idle_dt : std::max(r.bulk_dt, 1.0 / p.frequency / 200.0);

    if (s.dense_edge_window > 0.0 && s.dense_edge_window < 10.0 * tau_edge)
        throw std::invalid_argument("sampling: dense_edge_window must be >= 10 * tau_edge");
    if (s.bulk_dt > 0.0 && s.bulk_dt > min_width / 20.0 * (1.0 + 1e-12))
        throw std::invalid_argument("sampling: bulk_dt must be <= phase width / 20");
    if (s.dense_dt < 0.0 || s.bulk_dt < 0.0 || s.idle_dt < 0.0 || s.dense_edge_window < 0.0)
        throw std::invalid_argument("sampling: negative step");
    return r;
}

namespace {

// ---------------------------------------------------------------------------
// Schedule: switch timeline and labelled intervals for the whole train.

struct Interval {
    double t0;
    double t1;
    bool s1, s2, k1, k2;
    Phase phase;
    int pulse;
    bool edge;  // starts at an S1/S2 closing
};

struct Schedule {
    std::vector<Interval> intervals;
    double t_end = 0.0;
};

Schedule build_schedule(const SimConfig& cfg) {
    const auto& p = cfg.protocol;
    Schedule sch;
    const int n = p.train_length;
    if (n <= 0) return sch;

    const bool biphasic = p.topology == Topology::biphasic;
    const double t1 = p.phase1_width;
    const double t2 = phase2_width(p);
    const RelaySetting rel = relays_for(biphasic ? p.mode : PulseMode::symmetric);
    sch.t_end = n / p.frequency;

    SwitchSequencer seq(cfg.timing);
    std::vector<double> bounds{0.0, sch.t_end};
    std::vector<double> starts(n);
    std::vector<double> rec_end(n);

    seq.command(0.0, SwitchCommand::open(rel));
    for (int k = 0; k < n; ++k) {
        const double t0 = k / p.frequency;
        starts[k] = t0;
        double t = t0;
        seq.command(t, SwitchCommand::phase1(rel));
        bounds.push_back(t);
        t += t1;
        seq.command(t, SwitchCommand::open(rel));
        bounds.push_back(t);
        if (biphasic) {
            t += p.interphase_gap;
            seq.command(t, SwitchCommand::phase2(rel));
            bounds.push_back(t);
            t += t2;
            seq.command(t, SwitchCommand::open(rel));
            bounds.push_back(t);
        }
        rec_end[k] = t + p.recovery_gap;
        bounds.push_back(rec_end[k]);
    }
    const auto events = seq.timeline();
    for (const auto& ev : events) bounds.push_back(ev.time);

    std::erase_if(bounds, [&](double b) { return b < 0.0 || b > sch.t_end; });
    std::sort(bounds.begin(), bounds.end());
    std::vector<double> merged;
    for (double b : bounds)
        if (merged.empty() || b - merged.back() > time_eps) merged.push_back(b);
    if (merged.back() < sch.t_end) merged.back() = sch.t_end;  // absorb a near-duplicate end

    bool s1 = false, s2 = false, k1 = false, k2 = false;
    std::size_t ev_i = 0;
    int pulse = 0;
    bool seen1 = false, seen2 = false;
    for (std::size_t i = 0; i + 1 < merged.size(); ++i) {
        const double a = merged[i];
        bool edge = false;
        while (ev_i < events.size() && events[ev_i].time <= a + time_eps) {
            const auto& ev = events[ev_i++];
            switch (ev.sw) {
            case SwitchId::s1: s1 = ev.close; break;
            case SwitchId::s2: s2 = ev.close; break;
            case SwitchId::k1: k1 = ev.close; break;
            case SwitchId::k2: k2 = ev.close; break;
            }
            if (ev.close && (ev.sw == SwitchId::s1 || ev.sw == SwitchId::s2)) edge = true;
        }
        while (pulse + 1 < n && starts[pulse + 1] <= a + time_eps) {
            ++pulse;
            seen1 = seen2 = false;
        }

        Phase ph = Phase::idle;
        if (s1) {
            ph = Phase::phase1;
            seen1 = true;
        } else if (s2) {
            ph = Phase::phase2;
            seen2 = true;
        } else if (biphasic && seen1 && !seen2) {
            ph = Phase::gap;
        } else if ((seen2 || (!biphasic && seen1)) && a < rec_end[pulse] - time_eps) {
            ph = Phase::recovery;
        }
        sch.intervals.push_back({a, merged[i + 1], s1, s2, k1, k2, ph, pulse, edge});
    }
    return sch;
}

// ---------------------------------------------------------------------------
// Output network for one interval and the two ways of solving it.

struct NodeState {
    double v_node = 0.0;
    double v_c = 0.0;  // Randles double layer
};

struct Network {
    std::optional<PhaseSource> source;  // nullopt: electrodes shorted
    double c_par = 0.0;
    LoadModel load = LoadModel::resistive(1.0);
};

struct Output {
    NodeState x;
    double i = 0.0;
};

class IntervalSolver {
public:
    virtual ~IntervalSolver() = default;
    virtual void begin(const Network& net, const NodeState& x0) = 0;
    /// Offsets must be non-decreasing within one interval.
    virtual Output at(double tau) = 0;
    /// Charge delivered between the interval start and the last at() offset.
    virtual double charge() const = 0;
};

// Load current through a Randles cell at zero elapsed time.
double randles_current_now(const LoadModel& load, double v, double r_src) {
    return (v - load.v_c()) / (r_src + load.r_s());
}

class ClosedFormSolver final : public IntervalSolver {
public:
    void begin(const Network& net, const NodeState& x0) override {
        net_ = net;
        x0_ = x0;
        tau_ = 0.0;
        lti_.reset();
        const bool randles = net.load.kind() == LoadKind::randles;
        if (!net.source || net.c_par <= 0.0) return;

        const double e = net.source->emf;
        const double r = net.source->r_series;
        const double cp = net.c_par;
        if (!randles) {
            const double rl = net.load.r_s();
            lti_ = LtiSection::scalar(-(1.0 / r + 1.0 / rl) / cp, e / (r * cp), x0.v_node);
        } else {
            const double rs = net.load.r_s();
            const double rp = net.load.r_p();
            const double cdl = net.load.c_dl();
            LtiSection::Mat a{{{-(1.0 / r + 1.0 / rs) / cp, 1.0 / (rs * cp)},
                               {1.0 / (rs * cdl), -(1.0 / rs + 1.0 / rp) / cdl}}};
            lti_ = LtiSection::pair(a, {e / (r * cp), 0.0}, {x0.v_node, x0.v_c});
        }
    }

    Output at(double tau) override {
        tau_ = tau;
        const bool randles = net_.load.kind() == LoadKind::randles;
        const LoadModel load = net_.load.with_v_c(x0_.v_c);
        if (!net_.source) {
            if (!randles) return {{0.0, 0.0}, 0.0};
            if (tau <= 0.0) return {{0.0, x0_.v_c}, randles_current_now(load, 0.0, 0.0)};
            const auto resp = current_response(load, 0.0, 0.0, tau);
            return {{0.0, resp.state.v_c()}, resp.i_load};
        }
        const double e = net_.source->emf;
        const double r = net_.source->r_series;
        if (lti_) {
            const auto x = lti_->state(tau);
            if (!randles) return {{x[0], 0.0}, x[0] / net_.load.r_s()};
            return {{x[0], x[1]}, (x[0] - x[1]) / net_.load.r_s()};
        }
        if (!randles) {
            const double i = e / (r + net_.load.r_s());
            return {{i * net_.load.r_s(), 0.0}, i};
        }
        double i = 0.0;
        double v_c = x0_.v_c;
        if (tau <= 0.0) {
            i = randles_current_now(load, e, r);
        } else {
            const auto resp = current_response(load, e, r, tau);
            i = resp.i_load;
            v_c = resp.state.v_c();
        }
        return {{e - i * r, v_c}, i};
    }

    double charge() const override {
        if (tau_ <= 0.0) return 0.0;
        const bool randles = net_.load.kind() == LoadKind::randles;
        const LoadModel load = net_.load.with_v_c(x0_.v_c);
        if (!net_.source) return randles ? charge_delivered(load, 0.0, 0.0, tau_) : 0.0;
        if (lti_) {
            const auto q = lti_->integral(tau_);
            return randles ? (q[0] - q[1]) / net_.load.r_s() : q[0] / net_.load.r_s();
        }
        return charge_delivered(load, net_.source->emf, net_.source->r_series, tau_);
    }

private:
    Network net_;
    NodeState x0_;
    double tau_ = 0.0;
    std::optional<LtiSection> lti_;
};

// Fixed-step trapezoidal integration of the nodal equations, written
// directly from KCL so it shares no algebra with the closed form.
class TrapezoidSolver final : public IntervalSolver {
public:
    explicit TrapezoidSolver(double dt) : dt_(dt) {}

    void begin(const Network& net, const NodeState& x0) override {
        net_ = net;
        x_ = x0;
        if (!net.source) x_.v_node = 0.0;
        tau_ = 0.0;
        q_ = 0.0;
        if (net.load.kind() == LoadKind::resistive) x_.v_c = 0.0;
        algebraic_node();
    }

    Output at(double tau) override {
        const double span = tau - tau_;
        if (span > 0.0) {
            const auto steps = static_cast<long long>(std::ceil(span / dt_ - 1e-9));
            const double h = span / static_cast<double>(std::max<long long>(steps, 1));
            for (long long k = 0; k < std::max<long long>(steps, 1); ++k) step(h);
            tau_ = tau;
        }
        return {x_, current(x_)};
    }

    double charge() const override { return q_; }

private:
    bool randles() const { return net_.load.kind() == LoadKind::randles; }
    bool node_dynamic() const { return net_.source && net_.c_par > 0.0; }

    // Current into the load for a given state (node voltage already set).
    double current(const NodeState& x) const {
        if (!randles()) return x.v_node / net_.load.r_s();
        return (x.v_node - x.v_c) / net_.load.r_s();
    }

    // Node voltage when it carries no capacitance.
    void algebraic_node() {
        if (!net_.source) {
            x_.v_node = 0.0;
            return;
        }
        if (net_.c_par > 0.0) return;
        const double e = net_.source->emf;
        const double r = net_.source->r_series;
        const double g_load = 1.0 / net_.load.r_s();
        // (e - v)/r = (v - v_c) g_load
        x_.v_node = (e / r + x_.v_c * g_load) / (1.0 / r + g_load);
    }

    NodeState derivative(const NodeState& x) const {
        NodeState d;
        const double i_load = current(x);
        if (node_dynamic()) {
            const double i_switch = (net_.source->emf - x.v_node) / net_.source->r_series;
            d.v_node = (i_switch - i_load) / net_.c_par;
        }
        if (randles()) d.v_c = (i_load - x.v_c / net_.load.r_p()) / net_.load.c_dl();
        return d;
    }

    void step(double h) {
        if (!node_dynamic() && !randles()) {
            q_ += current(x_) * h;
            return;
        }
        // f is affine: f(x) = J x + f0. Probe it and solve
        // (I - h/2 J) x1 = x0 + h/2 (f(x0) + f0).
        const bool dyn = node_dynamic();
        auto f = [&](NodeState x) {
            NodeState y = x;
            if (!dyn) {
                std::swap(x_, y);
                algebraic_node();
                std::swap(x_, y);
            }
            return std::pair{y, derivative(y)};
        };
        const NodeState f0 = f(NodeState{}).second;
        const auto [x0, fx0] = f(x_);
        const double i0 = current(x0);

        if (dyn && randles()) {
            const auto [_, fa] = f({1.0, 0.0});
            const auto [__, fb] = f({0.0, 1.0});
            const double j00 = fa.v_node - f0.v_node, j01 = fb.v_node - f0.v_node;
            const double j10 = fa.v_c - f0.v_c, j11 = fb.v_c - f0.v_c;
            const double m00 = 1.0 - 0.5 * h * j00, m01 = -0.5 * h * j01;
            const double m10 = -0.5 * h * j10, m11 = 1.0 - 0.5 * h * j11;
            const double r0 = x0.v_node + 0.5 * h * (fx0.v_node + f0.v_node);
            const double r1 = x0.v_c + 0.5 * h * (fx0.v_c + f0.v_c);
            const double det = m00 * m11 - m01 * m10;
            x_.v_node = (r0 * m11 - m01 * r1) / det;
            x_.v_c = (m00 * r1 - m10 * r0) / det;
        } else if (dyn) {
            const auto [_, fa] = f({1.0, 0.0});
            const double j = fa.v_node - f0.v_node;
            x_.v_node = (x0.v_node + 0.5 * h * (fx0.v_node + f0.v_node)) / (1.0 - 0.5 * h * j);
        } else {
            const auto [_, fb] = f({0.0, 1.0});
            const double j = fb.v_c - f0.v_c;
            x_.v_c = (x0.v_c + 0.5 * h * (fx0.v_c + f0.v_c)) / (1.0 - 0.5 * h * j);
            algebraic_node();
        }
        q_ += 0.5 * h * (i0 + current(x_));
    }

    double dt_;
    Network net_;
    NodeState x_;
    double tau_ = 0.0;
    double q_ = 0.0;
};

// ---------------------------------------------------------------------------

struct RunOutput {
    Waveform waveform;
    SummaryStats stats;
};

double initial_stack(const SimConfig& cfg, int code) {
    if (cfg.fixed_stack) return *cfg.fixed_stack;
    if (cfg.initial_stack) return *cfg.initial_stack;
    return code_to_voltage(cfg.flyback, IdacCode(code));
}

RunOutput run(const SimConfig& cfg, IntervalSolver& solver) {
    const auto report = validate_protocol(cfg.protocol);
    if (!report.ok()) throw ProtocolError(report);
    cfg.timing.validate();
    if (!(cfg.c_unit > 0.0)) throw std::invalid_argument("simulate: c_unit must be > 0");
    if (cfg.fixed_stack && !(*cfg.fixed_stack >= 0.0))
        throw std::invalid_argument("simulate: fixed_stack must be >= 0");

    RunOutput out;
    const auto& p = cfg.protocol;
    if (p.train_length <= 0) return out;

    const ResolvedSampling smp = resolve_sampling(cfg);
    const Schedule sch = build_schedule(cfg);
    const double period = 1.0 / p.frequency;

    std::optional<RegulatorState> reg;
    if (p.target_current) {
        RegulatorState st;
        st.target_i = *p.target_current;
        st.code = IdacCode(p.voltage_code);
        st.loop_gain = cfg.regulation_gain;
        reg = st;
        out.stats.regulated = true;
    }

    int code = p.voltage_code;
    double v_stack = initial_stack(cfg, code);
    NodeState x{0.0, cfg.load.v_c()};
    LoadModel load = cfg.load;

    auto& samples = out.waveform.samples;
    auto& stats = out.stats;
    stats.pulses.push_back({0, 0.0, code, v_stack});
    stats.peak_v_out = v_stack;

    auto finish_pulse = [&](PulseStats& ps) {
        if (!reg) return;
        reg = regulate_step(*reg, std::max(ps.i_peak_phase1, 0.0), cfg.flyback, v_stack);
    };

    for (std::size_t idx = 0; idx < sch.intervals.size(); ++idx) {
        const Interval& iv = sch.intervals[idx];
        if (iv.pulse != static_cast<int>(stats.pulses.size()) - 1) {
            finish_pulse(stats.pulses.back());
            if (reg) code = reg->code.value();
            const double target = code_to_voltage(cfg.flyback, IdacCode(code));
            v_stack = cfg.fixed_stack ? *cfg.fixed_stack : settle(cfg.flyback, v_stack, target, period);
            stats.pulses.push_back({iv.pulse, iv.pulse / p.frequency, code, v_stack});
            stats.peak_v_out = std::max(stats.peak_v_out, v_stack);
        }
        PulseStats& ps = stats.pulses.back();

        Network net;
        net.c_par = cfg.timing.c_par;
        net.load = load;
        if (iv.s1 || iv.s2) {
            const ScState sc(iv.s1, iv.s2, iv.k1, iv.k2, v_stack, cfg.c_unit);
            net.source = phase_source(sc, cfg.timing);
        } else {
            x.v_node = 0.0;
        }
        solver.begin(net, x);

        const double len = iv.t1 - iv.t0;
        const bool closed = iv.s1 || iv.s2;
        auto record = [&](double tau) {
            const Output o = solver.at(tau);
            samples.push_back({iv.t0 + tau, v_stack, o.x.v_node, o.i, iv.phase, iv.s1, iv.s2, iv.k1, iv.k2});
            const double ai = std::abs(o.i);
            ps.i_peak = std::max(ps.i_peak, ai);
            stats.peak_current = std::max(stats.peak_current, ai);
            if (iv.phase == Phase::phase1) ps.i_peak_phase1 = std::max(ps.i_peak_phase1, o.i);
        };

        const double limit = len - time_eps;
        record(0.0);
        double base = 0.0;
        if (iv.edge && net.c_par > 0.0 && smp.dense_dt > 0.0) {
            for (long long j = 1;; ++j) {
                const double tau = j * smp.dense_dt;
                if (tau >= smp.dense_edge_window || tau >= limit) break;
                record(tau);
            }
            base = smp.dense_edge_window;
            if (base < limit) record(base);
        }
        const double step = closed ? smp.bulk_dt : smp.idle_dt;
        for (long long j = 1;; ++j) {
            const double tau = base + j * step;
            if (tau >= limit) break;
            record(tau);
        }

        const Output end = solver.at(len);
        const double q = solver.charge();
        ps.q_net += q;
        if (iv.phase == Phase::phase1) ps.q1 += q;
        if (iv.phase == Phase::phase2) ps.q2 += q;
        x = end.x;
        load = load.with_v_c(x.v_c);

        if (idx + 1 == sch.intervals.size()) {
            samples.push_back({sch.t_end, v_stack, end.x.v_node, end.i, iv.phase, iv.s1, iv.s2, iv.k1, iv.k2});
            finish_pulse(ps);
        }
    }

    if (reg) {
        stats.final_code = reg->code.value();
        stats.saturated = reg->saturated;
        if (reg->saturated && reg->code.value() == -IdacCode::max) {
            stats.compliance_limited = true;
            std::ostringstream os;
            os << "compliance limit: target " << reg->target_i * 1e3 << " mA needs more than "
               << code_to_voltage(cfg.flyback, IdacCode(-IdacCode::max)) << " V";
            stats.compliance_message = os.str();
        }
    }
    return out;
}

}  // namespace

SimResult simulate(const SimConfig& cfg) {
    ClosedFormSolver solver;
    auto out = run(cfg, solver);
    SimResult res{std::move(out.waveform), std::move(out.stats)};
    if (!res.waveform.samples.empty()) {
        try {
            res.stats.rise_time = measure_rise_time(res.waveform);
        } catch (const EdgeNotResolved&) {
            res.stats.rise_time.reset();
        }
    }
    return res;
}

double measure_rise_time(const Waveform& w) {
    const auto& s = w.samples;
    std::size_t i0 = 0;
    while (i0 < s.size() && s[i0].phase != Phase::phase1) ++i0;
    if (i0 == s.size()) throw EdgeNotResolved("measure_rise_time: no phase-1 edge in waveform");
    std::size_t end = i0;
    while (end + 1 < s.size() && s[end + 1].phase == Phase::phase1) ++end;

    const double settled = std::abs(s[end].v_load);
    if (!(settled > 0.0)) throw EdgeNotResolved("measure_rise_time: phase 1 has no voltage swing");
    const double level = 0.9 * settled;
    if (std::abs(s[i0].v_load) >= level) return 0.0;

    std::size_t k = i0 + 1;
    while (k <= end && std::abs(s[k].v_load) < level) ++k;
    if (k > end || k - i0 < 4) throw EdgeNotResolved("measure_rise_time: edge not resolved by samples");

    const double va = std::abs(s[k - 1].v_load);
    const double vb = std::abs(s[k].v_load);
    const double t = s[k - 1].t + (level - va) / (vb - va) * (s[k].t - s[k - 1].t);
    return t - s[i0].t;
}

double fastest_time_constant(const SimConfig& cfg) {
    const auto& load = cfg.load;
    const double r_on = cfg.timing.r_on;
    const double c_par = cfg.timing.c_par;
    double best = std::numeric_limits<double>::infinity();
    if (load.kind() == LoadKind::randles) {
        auto par = [](double a, double b) { return a * b / (a + b); };
        best = std::min(best, load.c_dl() * par(load.r_s(), load.r_p()));
        best = std::min(best, load.c_dl() * par(r_on + load.r_s(), load.r_p()));
        if (c_par > 0.0) {
            const double rs = load.r_s(), rp = load.r_p(), cdl = load.c_dl();
            LtiSection::Mat a{{{-(1.0 / r_on + 1.0 / rs) / c_par, 1.0 / (rs * c_par)},
                               {1.0 / (rs * cdl), -(1.0 / rs + 1.0 / rp) / cdl}}};
            best = std::min(best, LtiSection::pair(a, {0.0, 0.0}, {0.0, 0.0}).tau_fast());
        }
    } else if (c_par > 0.0) {
        best = std::min(best, c_par * r_on * load.r_s() / (r_on + load.r_s()));
    }
    return best;
}

Waveform oracle_simulate(const SimConfig& cfg, double dt) {
    const double tau_min = fastest_time_constant(cfg);
    if (!(dt > 0.0) || dt > tau_min / 50.0)
        throw std::invalid_argument("oracle_simulate: dt must be in (0, tau_min / 50]");
    TrapezoidSolver solver(dt);
    return run(cfg, solver).waveform;
}

}  // namespace fesim
