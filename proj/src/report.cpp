#include "fesim/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <ostream>
#include <system_error>

namespace fesim {

namespace {

std::string to_chars_str(double v, std::chars_format fmt, int precision) {
    if (v == 0.0) v = 0.0;  // drop the sign of negative zero
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, fmt, precision);
    if (res.ec != std::errc{}) return "nan";
    return std::string(buf, res.ptr);
}

}  // namespace

std::string format_seconds(double t) {
    return to_chars_str(t, std::chars_format::scientific, 8);
}

std::string format_fixed(double v, int decimals) {
    std::string s = to_chars_str(v, std::chars_format::fixed, decimals);
    // "-0.000000" after rounding a tiny negative value
    if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
    return s;
}

void write_waveform_csv(std::ostream& os, const Waveform& w) {
    os << waveform_csv_header << '\n';
    for (const auto& s : w.samples) {
        os << format_seconds(s.t) << ',' << format_fixed(s.v_out) << ',' << format_fixed(s.v_load) << ','
           << format_fixed(s.i_load * 1e3) << ',' << to_string(s.phase) << ',' << int(s.s1) << ',' << int(s.s2)
           << ',' << int(s.k1) << ',' << int(s.k2) << '\n';
    }
}

std::vector<double> pulse_start_times(const Waveform& w) {
    std::vector<double> out;
    bool in_phase1 = false;
    for (const auto& s : w.samples) {
        const bool p1 = s.phase == Phase::phase1;
        if (p1 && !in_phase1) out.push_back(s.t);
        in_phase1 = p1;
    }
    return out;
}

bool plain_ascii_requested() {
    const char* v = std::getenv("FESIM_PLAIN_ASCII");
    return v != nullptr && *v != '\0' && std::string_view(v) != "0";
}

void write_summary(std::ostream& os, const SimResult& r, bool ascii) {
    const auto& st = r.stats;
    const char* micro = ascii ? "u" : "µ";
    os << "pulses: " << st.pulses.size() << '\n';
    os << "peak v_out = " << format_fixed(st.peak_v_out, 2) << " V\n";
    os << "peak i_load = " << format_fixed(st.peak_current * 1e3, 3) << " mA\n";
    if (st.rise_time)
        os << "rise time (0-90%) = " << format_fixed(*st.rise_time * 1e9, 2) << " ns\n";
    else
        os << "rise time (0-90%) = n/a\n";

    if (!st.pulses.empty()) {
        os << "pulse  t_start_s        code  v_stack_V   i_peak_mA  q1_" << micro << "C     q2_" << micro
           << "C     net_" << micro << "C\n";
        for (const auto& p : st.pulses) {
            std::string line = std::to_string(p.index);
            line.resize(7, ' ');
            line += format_seconds(p.t_start);
            line.resize(24, ' ');
            line += std::to_string(p.code);
            line.resize(30, ' ');
            line += format_fixed(p.v_stack, 3);
            line.resize(42, ' ');
            line += format_fixed(p.i_peak * 1e3, 4);
            line.resize(53, ' ');
            line += format_fixed(p.q1 * 1e6, 4);
            line.resize(64, ' ');
            line += format_fixed(p.q2 * 1e6, 4);
            line.resize(75, ' ');
            line += format_fixed(p.q_net * 1e6, 6);
            os << line << '\n';
        }
    }
    if (st.regulated) {
        os << "code trace:";
        for (const auto& p : st.pulses) os << ' ' << p.code;
        os << '\n';
        if (st.final_code) os << "final code = " << *st.final_code << (st.saturated ? " (saturated)" : "") << '\n';
    }
    if (st.compliance_limited) os << st.compliance_message << '\n';
}

}  // namespace fesim
