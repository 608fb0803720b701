#pragma once

// Locale-independent text output: waveform CSV and run summaries.
//
// CSV numbers: seconds in scientific notation with 9 significant digits,
// volts and milliamps fixed with 6 decimals.

#include "fesim/engine.hpp"

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace fesim {

std::string format_seconds(double t);
std::string format_fixed(double v, int decimals = 6);

inline constexpr std::string_view waveform_csv_header = "t_s,v_out_V,v_load_V,i_load_mA,phase,s1,s2,k1,k2";

void write_waveform_csv(std::ostream& os, const Waveform& w);

/// Start time of every phase-1 run in the waveform.
std::vector<double> pulse_start_times(const Waveform& w);

/// True when FESIM_PLAIN_ASCII is set to anything but "0" or empty.
bool plain_ascii_requested();

void write_summary(std::ostream& os, const SimResult& r, bool ascii);

}  // namespace fesim
