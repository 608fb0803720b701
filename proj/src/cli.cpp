#include "fesim/cli.hpp"

#include "fesim/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <ostream>
#include <set>
#include <sstream>

namespace fesim::cli {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Config parsing

void check_keys(const json& section, std::string_view name, std::initializer_list<std::string_view> allowed) {
    if (!section.is_object()) throw ConfigError("config: section '" + std::string(name) + "' must be an object");
    for (const auto& [key, _] : section.items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ConfigError("config: unknown key '" + std::string(name) + "." + key + "'");
}

double get_number(const json& section, const char* key, double fallback) {
    if (!section.contains(key)) return fallback;
    const auto& v = section.at(key);
    if (!v.is_number()) throw ConfigError(std::string("config: '") + key + "' must be a number");
    return v.get<double>();
}

int get_int(const json& section, const char* key, int fallback) {
    if (!section.contains(key)) return fallback;
    const auto& v = section.at(key);
    if (!v.is_number_integer()) throw ConfigError(std::string("config: '") + key + "' must be an integer");
    return v.get<int>();
}

std::string get_string(const json& section, const char* key, std::string fallback) {
    if (!section.contains(key)) return fallback;
    const auto& v = section.at(key);
    if (!v.is_string()) throw ConfigError(std::string("config: '") + key + "' must be a string");
    return v.get<std::string>();
}

SupplyEndpoints preset_endpoints(const std::string& name) {
    if (name == "table1_135") return {3.5, 135.0};
    return {3.5, 120.0};
}

void parse_protocol(const json& j, StimProtocol& p) {
    check_keys(j, "protocol",
               {"topology", "mode", "voltage_code", "target_current", "frequency", "phase1_width", "interphase_gap",
                "recovery_gap", "train_length"});
    const auto topo = parse_topology(get_string(j, "topology", std::string(to_string(p.topology))));
    if (!topo) throw ConfigError("config: protocol.topology must be monophasic or biphasic");
    const auto mode = parse_pulse_mode(get_string(j, "mode", std::string(to_string(p.mode))));
    if (!mode) throw ConfigError("config: protocol.mode must be symmetric, asym_1_2 or asym_2_1");
    p.topology = *topo;
    p.mode = *mode;
    p.voltage_code = get_int(j, "voltage_code", p.voltage_code);
    if (j.contains("target_current") && !j.at("target_current").is_null())
        p.target_current = get_number(j, "target_current", 0.0) * 1e-3;  // mA in the file
    p.frequency = get_number(j, "frequency", p.frequency);
    p.phase1_width = get_number(j, "phase1_width", p.phase1_width);
    p.interphase_gap = get_number(j, "interphase_gap", p.interphase_gap);
    p.recovery_gap = get_number(j, "recovery_gap", p.recovery_gap);
    p.train_length = get_int(j, "train_length", p.train_length);
}

void parse_flyback(const json& j, LoadedConfig& cfg) {
    check_keys(j, "flyback", {"preset", "v_low", "v_high", "i_fs", "v_ref", "settle_tau", "v_out_max_clamp"});
    const bool custom = j.contains("v_low") || j.contains("v_high");
    if (custom && j.contains("preset")) throw ConfigError("config: flyback takes either a preset or endpoints");
    if (custom) {
        const double lo = get_number(j, "v_low", 3.5);
        const double hi = get_number(j, "v_high", 120.0);
        try {
            cfg.sim.flyback =
                calibrate_from_endpoints(lo, hi, get_number(j, "i_fs", 200e-6), get_number(j, "v_ref", 1.23));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config: flyback: ") + e.what());
        }
        cfg.flyback_name = "custom";
        cfg.endpoints = {lo, hi};
    } else {
        apply_preset(cfg, get_string(j, "preset", "paper_120"));
    }
    cfg.sim.flyback.settle_tau = get_number(j, "settle_tau", cfg.sim.flyback.settle_tau);
    cfg.sim.flyback.v_out_max_clamp = get_number(j, "v_out_max_clamp", cfg.sim.flyback.v_out_max_clamp);
}

void parse_load(const json& j, SimConfig& sim) {
    check_keys(j, "load", {"preset", "kind", "r_s", "r_p", "c_dl", "v_c"});
    try {
        if (j.contains("preset")) {
            const auto name = get_string(j, "preset", "");
            const auto m = load_preset(name);
            if (!m) throw ConfigError("config: unknown load preset '" + name + "'");
            sim.load = *m;
            return;
        }
        const auto kind = get_string(j, "kind", "resistive");
        if (kind == "resistive") {
            sim.load = LoadModel::resistive(get_number(j, "r_s", 1e3));
        } else if (kind == "randles") {
            sim.load = LoadModel::randles(get_number(j, "r_s", 2e3), get_number(j, "r_p", 50e3),
                                          get_number(j, "c_dl", 100e-9), get_number(j, "v_c", 0.0));
        } else {
            throw ConfigError("config: load.kind must be resistive or randles");
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: load: ") + e.what());
    }
}

void parse_timing(const json& j, SwitchTiming& t) {
    check_keys(j, "timing", {"r_on", "c_par", "gate_delay_on", "gate_delay_off", "pullup_r", "pulldown_r"});
    t.r_on = get_number(j, "r_on", t.r_on);
    t.c_par = get_number(j, "c_par", t.c_par);
    t.gate_delay_on = get_number(j, "gate_delay_on", t.gate_delay_on);
    t.gate_delay_off = get_number(j, "gate_delay_off", t.gate_delay_off);
    t.pullup_r = get_number(j, "pullup_r", t.pullup_r);
    t.pulldown_r = get_number(j, "pulldown_r", t.pulldown_r);
    try {
        t.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: timing: ") + e.what());
    }
}

void parse_engine(const json& j, SimConfig& sim) {
    check_keys(j, "engine",
               {"dense_edge_window", "dense_dt", "bulk_dt", "idle_dt", "c_unit", "fixed_stack", "initial_stack"});
    sim.sampling.dense_edge_window = get_number(j, "dense_edge_window", 0.0);
    sim.sampling.dense_dt = get_number(j, "dense_dt", 0.0);
    sim.sampling.bulk_dt = get_number(j, "bulk_dt", 0.0);
    sim.sampling.idle_dt = get_number(j, "idle_dt", 0.0);
    sim.c_unit = get_number(j, "c_unit", sim.c_unit);
    if (j.contains("fixed_stack")) sim.fixed_stack = get_number(j, "fixed_stack", 0.0);
    if (j.contains("initial_stack")) sim.initial_stack = get_number(j, "initial_stack", 0.0);
}

void print_report(std::ostream& out, const ValidationReport& r) {
    if (r.ok()) out << "protocol ok\n";
    for (const auto& v : r.violations)
        out << "violation: " << v.field << ": " << v.detail << " (limit " << v.limit << "; rating: " << v.rating
            << ")\n";
    for (const auto& w : r.warnings) out << "warning: " << w << '\n';
}

}  // namespace

LoadedConfig parse_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: malformed JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config: top level must be an object");
    check_keys(doc, "config", {"protocol", "flyback", "load", "timing", "engine", "regulation"});

    LoadedConfig cfg;
    apply_preset(cfg, "paper_120");
    try {
        if (doc.contains("protocol")) parse_protocol(doc["protocol"], cfg.sim.protocol);
        if (doc.contains("flyback")) parse_flyback(doc["flyback"], cfg);
        if (doc.contains("load")) parse_load(doc["load"], cfg.sim);
        if (doc.contains("timing")) parse_timing(doc["timing"], cfg.sim.timing);
        if (doc.contains("engine")) parse_engine(doc["engine"], cfg.sim);
        if (doc.contains("regulation")) {
            check_keys(doc["regulation"], "regulation", {"gain"});
            cfg.sim.regulation_gain = get_number(doc["regulation"], "gain", cfg.sim.regulation_gain);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return cfg;
}

LoadedConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

void apply_preset(LoadedConfig& cfg, const std::string& name) {
    const auto m = flyback_preset(name);
    if (!m) throw ConfigError("unknown flyback preset '" + name + "' (expected paper_120 or table1_135)");
    const double tau = cfg.sim.flyback.settle_tau;
    cfg.sim.flyback = *m;
    cfg.sim.flyback.settle_tau = tau;
    cfg.flyback_name = name;
    cfg.endpoints = preset_endpoints(name);
}

namespace {

// Loads --config (or defaults) and applies --preset.
LoadedConfig resolve(const CommonOptions& opt) {
    LoadedConfig cfg = opt.config_path ? load_config(*opt.config_path) : parse_config("{}");
    if (opt.preset) apply_preset(cfg, *opt.preset);
    return cfg;
}

}  // namespace

int cmd_validate(const CommonOptions& opt, std::ostream& out, std::ostream& err) {
    LoadedConfig cfg;
    try {
        if (!opt.config_path) throw ConfigError("validate: --config is required");
        cfg = resolve(opt);
    } catch (const ConfigError& e) {
        err << e.what() << '\n';
        return input_error;
    }
    const auto report = validate_protocol(cfg.sim.protocol);
    print_report(out, report);
    return report.ok() ? ok : domain_violation;
}

int cmd_simulate(const CommonOptions& opt, std::ostream& out, std::ostream& err) {
    LoadedConfig cfg;
    try {
        if (!opt.config_path) throw ConfigError("simulate: --config is required");
        cfg = resolve(opt);
    } catch (const ConfigError& e) {
        err << e.what() << '\n';
        return input_error;
    }

    SimResult res;
    try {
        res = simulate(cfg.sim);
    } catch (const ProtocolError& e) {
        print_report(err, e.report());
        return domain_violation;
    } catch (const std::invalid_argument& e) {
        err << e.what() << '\n';
        return input_error;
    }

    if (opt.out_path) {
        std::ofstream f(*opt.out_path, std::ios::binary | std::ios::trunc);
        if (!f) {
            err << "cannot write '" << *opt.out_path << "'\n";
            return output_error;
        }
        write_waveform_csv(f, res.waveform);
        f.flush();
        if (!f) {
            err << "write failed for '" << *opt.out_path << "'\n";
            return output_error;
        }
    }
    write_summary(out, res, opt.ascii);
    if (!opt.out_path) out << "(no --out given; waveform not written)\n";
    return res.stats.compliance_limited ? domain_violation : ok;
}

// ---------------------------------------------------------------------------
// spec-check

namespace {

std::string fmt(double v, int decimals, std::string_view unit) {
    return format_fixed(v, decimals) + (unit.empty() ? "" : " ") + std::string(unit);
}

double charge_imbalance(const SimResult& r) {
    double worst = 0.0;
    for (const auto& p : r.stats.pulses)
        if (p.q1 != 0.0) worst = std::max(worst, std::abs(p.q_net) / std::abs(p.q1));
    return worst;
}

}  // namespace

std::vector<CheckRow> run_spec_checks(const LoadedConfig& cfg) {
    std::vector<CheckRow> rows;
    const FlybackModel& fb = cfg.sim.flyback;

    const double v_max = code_to_voltage(fb, IdacCode(-127));
    rows.push_back({"max output voltage (code -127)", fmt(v_max, 6, "V"), fmt(cfg.endpoints.v_high, 2, "V"),
                    std::abs(v_max - cfg.endpoints.v_high) < 1e-6});
    const double v_min = code_to_voltage(fb, IdacCode(127));
    rows.push_back({"min output voltage (code +127)", fmt(v_min, 6, "V"), fmt(cfg.endpoints.v_low, 2, "V"),
                    std::abs(v_min - cfg.endpoints.v_low) < 1e-6});

    // The published 0.457 V/code is the 3.5..120 V span over 255 steps;
    // other presets are held to the same rule over their own span.
    const double step = step_resolution(fb);
    const double nominal_step = 0.457 * (cfg.endpoints.v_high - cfg.endpoints.v_low) / (120.0 - 3.5);
    rows.push_back({"step resolution", fmt(step, 4, "V/code"), format_fixed(nominal_step, 3) + " +/- 0.005 V/code",
                    std::abs(step - nominal_step) < 0.005});

    bool monotone = true;
    double peak = 0.0;
    for (int c = -127; c < 127; ++c) {
        monotone = monotone && code_to_voltage(fb, IdacCode(c)) >= code_to_voltage(fb, IdacCode(c + 1));
        peak = std::max(peak, code_to_voltage(fb, IdacCode(c)));
    }
    rows.push_back({"255-code sweep monotone non-increasing", monotone ? "yes" : "no", "yes", monotone});
    rows.push_back({"output within 0..135 V", fmt(peak, 2, "V"), "<= 135 V", peak <= rating::max_output_voltage});

    {
        const auto sym = divider_split(false, false, 120.0);
        const auto a12 = divider_split(true, false, 120.0);
        const auto a21 = divider_split(false, true, 120.0);
        const bool pass = std::abs(sym.v1 / sym.v2 - 1.0) < 1e-12 && std::abs(a12.v2 / a12.v1 - 2.0) < 1e-12 &&
                          std::abs(a21.v1 / a21.v2 - 2.0) < 1e-12;
        std::ostringstream m;
        m << "1:" << format_fixed(sym.v2 / sym.v1, 3) << ", 1:" << format_fixed(a12.v2 / a12.v1, 3) << ", "
          << format_fixed(a21.v1 / a21.v2, 3) << ":1";
        rows.push_back({"divider ratios (sym, K1, K2)", m.str(), "1:1, 1:2, 2:1", pass});
    }

    // Edge on the calibration load.
    {
        SimConfig sim = cfg.sim;
        sim.protocol = StimProtocol{};
        sim.protocol.voltage_code = -127;
        sim.protocol.frequency = 1000.0;
        sim.protocol.phase1_width = 100e-6;
        sim.protocol.train_length = 1;
        sim.load = LoadModel::resistive(1e3);
        sim.sampling = {};
        std::optional<double> rise;
        try {
            rise = simulate(sim).stats.rise_time;
        } catch (const std::exception&) {
        }
        const std::string meas = rise ? fmt(*rise * 1e9, 2, "ns") : "unresolved";
        rows.push_back({"pulse rise time 0-90%", meas, "< 20 ns", rise && *rise < rating::max_rise_time});
        rows.push_back({"rise time vs 12.15 ns measurement", meas, "12.15 ns +/- 5%",
                        rise && std::abs(*rise - 12.15e-9) <= 0.05 * 12.15e-9});
    }

    // Frequency range: pulse spacing within one bulk step of 1/f.
    for (double f : {1.0, 1000.0, 10000.0}) {
        SimConfig sim = cfg.sim;
        sim.protocol = StimProtocol{};
        sim.protocol.voltage_code = 0;
        sim.protocol.frequency = f;
        sim.protocol.phase1_width = 20e-6;
        sim.protocol.interphase_gap = 10e-6;
        sim.protocol.recovery_gap = 10e-6;
        sim.protocol.train_length = 3;
        sim.sampling = {};
        bool pass = false;
        std::string meas = "failed";
        try {
            const auto r = simulate(sim);
            const double bulk = resolve_sampling(sim).bulk_dt;
            const auto starts = pulse_start_times(r.waveform);
            pass = starts.size() == 3;
            double worst = 0.0;
            for (std::size_t k = 0; k < starts.size(); ++k) worst = std::max(worst, std::abs(starts[k] - k / f));
            pass = pass && worst <= bulk;
            if (starts.size() >= 2) meas = format_seconds(starts[1] - starts[0]) + " s";
        } catch (const std::exception&) {
        }
        rows.push_back({"pulse period at " + format_fixed(f, 0) + " Hz", meas, format_seconds(1.0 / f) + " s", pass});
    }
    {
        StimProtocol p;
        p.frequency = 20000.0;
        const bool rejected = validate_protocol(p).has_violation("frequency");
        rows.push_back({"20 kHz rejected", rejected ? "rejected" : "accepted", "rejected", rejected});
        StimProtocol q;
        q.frequency = 10000.0;
        q.mode = PulseMode::asym_1_2;
        q.phase1_width = 60e-6;
        const bool budget = validate_protocol(q).has_violation("period budget");
        rows.push_back({"10 kHz period budget enforced", budget ? "rejected" : "accepted", "rejected", budget});
    }

    // Charge balance per mode into a resistive load.
    for (PulseMode mode : {PulseMode::symmetric, PulseMode::asym_1_2, PulseMode::asym_2_1}) {
        SimConfig sim = cfg.sim;
        sim.protocol = StimProtocol{};
        sim.protocol.mode = mode;
        sim.protocol.voltage_code = -127;
        sim.protocol.train_length = 2;
        sim.load = LoadModel::resistive(5e3);
        sim.sampling = {};
        double imb = 1.0;
        try {
            imb = charge_imbalance(simulate(sim));
        } catch (const std::exception&) {
        }
        rows.push_back({"charge balance " + std::string(to_string(mode)), fmt(imb * 100.0, 5, "%"), "< 0.1 %",
                        imb < 1e-3});
    }
    return rows;
}

int cmd_spec_check(const CommonOptions& opt, std::ostream& out, std::ostream& err) {
    LoadedConfig cfg;
    try {
        cfg = resolve(opt);
    } catch (const ConfigError& e) {
        err << e.what() << '\n';
        return input_error;
    }
    const auto rows = run_spec_checks(cfg);
    bool all = true;
    out << "flyback preset: " << cfg.flyback_name << '\n';
    for (const auto& r : rows) {
        std::string line = r.pass ? (opt.ascii ? "PASS  " : "✔ PASS  ") : (opt.ascii ? "FAIL  " : "✘ FAIL  ");
        line += r.name;
        line.resize(std::max<std::size_t>(line.size() + 1, opt.ascii ? 46 : 50), ' ');
        line += r.measured;
        line.resize(std::max<std::size_t>(line.size() + 1, opt.ascii ? 66 : 70), ' ');
        line += "(expected " + r.expected + ")";
        out << line << '\n';
        all = all && r.pass;
    }
    out << (all ? "all checks passed\n" : "some checks FAILED\n");
    return all ? ok : domain_violation;
}

// ---------------------------------------------------------------------------
// sweep

std::vector<double> parse_range(const std::string& spec) {
    std::vector<double> out;
    auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t");
        const auto b = s.find_last_not_of(" \t");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string s = trim(spec);
    if (s.empty()) return out;
    auto number = [&](const std::string& tok) {
        const std::string t = trim(tok);
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(t, &used);
        } catch (const std::exception&) {
            throw ConfigError("range: bad number '" + t + "'");
        }
        if (used != t.size() || !std::isfinite(v)) throw ConfigError("range: bad number '" + t + "'");
        return v;
    };

    if (s.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(s);
        for (std::string tok; std::getline(ss, tok, ':');) parts.push_back(tok);
        if (parts.size() != 3) throw ConfigError("range: expected start:stop:step");
        const double start = number(parts[0]);
        const double stop = number(parts[1]);
        const double step = number(parts[2]);
        if (!(step > 0.0)) throw ConfigError("range: step must be > 0");
        const double count = std::floor((stop - start) / step + 1e-9);
        if (count > 1e6) throw ConfigError("range: too many points");
        for (long long k = 0; k <= static_cast<long long>(count); ++k) out.push_back(start + k * step);
        return out;
    }
    std::stringstream ss(s);
    for (std::string tok; std::getline(ss, tok, ',');) out.push_back(number(tok));
    return out;
}

namespace {

struct SweepRow {
    std::string text;
    bool valid = true;
};

SweepRow sweep_point(SimConfig sim, const std::string& param, double value) {
    std::ostringstream row;
    if (param == "voltage_code") {
        sim.protocol.voltage_code = static_cast<int>(std::lround(value));
        row << sim.protocol.voltage_code;
    } else if (param == "frequency") {
        sim.protocol.frequency = value;
        row << format_fixed(value, 3);
    } else if (param == "load_r") {
        if (!(value > 0.0)) return {format_fixed(value, 3) + ",invalid,,,,,,,,,,,", false};
        sim.load = sim.load.with_r_s(value);
        row << format_fixed(value, 3);
    } else {  // target_current, mA
        sim.protocol.target_current = value * 1e-3;
        row << format_fixed(value, 3);
    }

    SimResult r;
    try {
        r = simulate(sim);
    } catch (const std::exception&) {
        row << ",invalid,,,,,,,,,,,";
        return {row.str(), false};
    }
    const auto& st = r.stats;
    const auto starts = pulse_start_times(r.waveform);
    double q1 = 0.0, q2 = 0.0, qn = 0.0;
    for (const auto& p : st.pulses) {
        q1 += p.q1;
        q2 += p.q2;
        qn += p.q_net;
    }
    row << ',' << (st.compliance_limited ? "compliance" : "ok") << ','
        << (st.pulses.empty() ? sim.protocol.voltage_code : st.pulses.front().code) << ','
        << format_fixed(st.peak_v_out) << ',' << format_fixed(st.peak_current * 1e3) << ','
        << (st.pulses.empty() ? "" : format_fixed(st.pulses.back().i_peak_phase1 * 1e3)) << ','
        << format_fixed(q1 * 1e6) << ',' << format_fixed(q2 * 1e6) << ',' << format_fixed(qn * 1e6) << ','
        << (st.rise_time ? format_seconds(*st.rise_time) : "") << ','
        << (starts.size() >= 2 ? format_seconds((starts.back() - starts.front()) / double(starts.size() - 1)) : "")
        << ',' << (st.final_code ? std::to_string(*st.final_code) : "") << ',' << int(st.saturated);
    return {row.str(), true};
}

}  // namespace

int cmd_sweep(const CommonOptions& opt, const std::string& param, const std::string& range, std::ostream& out,
              std::ostream& err) {
    static const std::set<std::string> params{"voltage_code", "frequency", "load_r", "target_current"};
    LoadedConfig cfg;
    std::vector<double> values;
    try {
        if (!params.count(param))
            throw ConfigError("sweep: unknown parameter '" + param +
                              "' (expected voltage_code, frequency, load_r or target_current)");
        values = parse_range(range);
        cfg = resolve(opt);
    } catch (const ConfigError& e) {
        err << e.what() << '\n';
        return input_error;
    }

    std::vector<std::future<SweepRow>> jobs;
    jobs.reserve(values.size());
    for (double v : values)
        jobs.push_back(std::async(std::launch::deferred, sweep_point, cfg.sim, param, v));

    std::ofstream file;
    std::ostream* dst = &out;
    if (opt.out_path) {
        file.open(*opt.out_path, std::ios::binary | std::ios::trunc);
        if (!file) {
            err << "cannot write '" << *opt.out_path << "'\n";
            return output_error;
        }
        dst = &file;
    }
    *dst << sweep_csv_header << '\n';
    bool all_valid = true;
    for (auto& j : jobs) {
        const auto row = j.get();
        all_valid = all_valid && row.valid;
        *dst << row.text << '\n';
    }
    dst->flush();
    if (!*dst) {
        err << "write failed\n";
        return output_error;
    }
    return all_valid ? ok : domain_violation;
}

}  // namespace fesim::cli
