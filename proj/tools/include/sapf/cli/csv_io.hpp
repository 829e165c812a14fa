#pragma once

// Waveform, spectrum and summary CSV files. Each starts with a
// "# sapfsim <kind> format_version=1" comment line; numbers are written in
// shortest round-trip form so reading a file back yields the same doubles.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sapf/analysis.hpp"
#include "sapf/engine.hpp"

namespace sapf::cli {

std::string format_double(double x);

struct WaveformTable {
    std::vector<std::string> names;  ///< channel names, without the leading t
    std::vector<double> t;
    std::vector<std::vector<double>> columns;

    std::size_t rows() const noexcept { return t.size(); }
    bool has(std::string_view name) const noexcept;
    /// Throws sapf::Error for unknown channels.
    std::span<const double> channel(std::string_view name) const;
    /// Sample rate from the t column; throws when t is not uniform.
    double sample_rate() const;
};

/// Rows n = 0, decimate, 2·decimate, ... with t = t0 + n·dt.
void write_waveforms(std::ostream& out, const engine::TimeSeries& ts, std::size_t decimate = 1);

/// Throws sapf::Error with a line number on malformed input.
WaveformTable read_waveforms(std::istream& in);

/// Waveform table holding rows n = 0, decimate, ... of `ts`, built the same
/// way a written-then-read csv would be.
WaveformTable decimated_table(const engine::TimeSeries& ts, std::size_t decimate);

void write_spectrum(std::ostream& out, const analysis::HarmonicSpectrum& s);

struct SummaryRow {
    double value = 0.0;
    std::string thd_before;  ///< empty when the run has no before window
    std::string thd_after;
    std::string pf;
    std::string dpf;
    std::string p_pv;
    std::string status;  ///< "ok" or "failed"
};

void write_summary(std::ostream& out, std::span<const SummaryRow> rows);

}  // namespace sapf::cli
