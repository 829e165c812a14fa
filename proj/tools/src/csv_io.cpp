#include "sapf/cli/csv_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>

#include "sapf/error.hpp"

namespace sapf::cli {

namespace {

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) return out;
        start = comma + 1;
    }
}

std::string_view trim_cr(std::string_view s) {
    if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
    return s;
}

double parse_number(std::string_view s, std::size_t line) {
    double v = 0.0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size()) {
        throw Error("line " + std::to_string(line) + ": '" + std::string(s) + "' is not a number");
    }
    return v;
}

}  // namespace

std::string format_double(double x) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

bool WaveformTable::has(std::string_view name) const noexcept {
    return std::find(names.begin(), names.end(), name) != names.end();
}

std::span<const double> WaveformTable::channel(std::string_view name) const {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw Error("channel '" + std::string(name) + "' not found in csv");
    return columns[static_cast<std::size_t>(it - names.begin())];
}

double WaveformTable::sample_rate() const {
    if (t.size() < 2) throw Error("need at least two rows to infer the sample rate");
    const double dt = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
    if (!(dt > 0.0)) throw Error("t column is not increasing");
    for (std::size_t k = 1; k < t.size(); ++k) {
        if (std::abs((t[k] - t[k - 1]) - dt) > 1e-6 * dt) {
            throw Error("t column is not uniformly sampled near row " + std::to_string(k));
        }
    }
    return 1.0 / dt;
}

void write_waveforms(std::ostream& out, const engine::TimeSeries& ts, std::size_t decimate) {
    if (decimate == 0) decimate = 1;
    out << "# sapfsim waveforms format_version=1\n";
    out << "t";
    for (const auto& n : ts.names) out << ',' << n;
    out << '\n';
    std::string line;
    for (std::size_t n = 0; n < ts.size(); n += decimate) {
        line = format_double(ts.t0 + static_cast<double>(n) * ts.dt);
        for (const auto& c : ts.columns) {
            line += ',';
            line += format_double(c[n]);
        }
        line += '\n';
        out << line;
    }
}

WaveformTable read_waveforms(std::istream& in) {
    WaveformTable table;
    std::string raw;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string_view line = trim_cr(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto fields = split(line);
        if (!have_header) {
            if (fields.empty() || fields.front() != "t") {
                throw Error("line " + std::to_string(line_no) + ": header must start with 't'");
            }
            for (std::size_t k = 1; k < fields.size(); ++k) table.names.emplace_back(fields[k]);
            table.columns.resize(table.names.size());
            have_header = true;
            continue;
        }
        if (fields.size() != table.names.size() + 1) {
            throw Error("line " + std::to_string(line_no) + ": expected " + std::to_string(table.names.size() + 1) +
                        " fields, got " + std::to_string(fields.size()));
        }
        const double t = parse_number(fields[0], line_no);
        if (!table.t.empty() && !(t > table.t.back())) {
            throw Error("line " + std::to_string(line_no) + ": t is not increasing");
        }
        table.t.push_back(t);
        for (std::size_t k = 1; k < fields.size(); ++k) table.columns[k - 1].push_back(parse_number(fields[k], line_no));
    }
    if (!have_header) throw Error("csv has no header row");
    return table;
}

WaveformTable decimated_table(const engine::TimeSeries& ts, std::size_t decimate) {
    if (decimate == 0) decimate = 1;
    WaveformTable table;
    table.names = ts.names;
    table.columns.resize(ts.names.size());
    for (std::size_t n = 0; n < ts.size(); n += decimate) {
        table.t.push_back(ts.t0 + static_cast<double>(n) * ts.dt);
        for (std::size_t k = 0; k < ts.columns.size(); ++k) table.columns[k].push_back(ts.columns[k][n]);
    }
    return table;
}

void write_spectrum(std::ostream& out, const analysis::HarmonicSpectrum& s) {
    out << "# sapfsim spectrum format_version=1\n";
    out << "h,freq_hz,magnitude,phase_rad\n";
    for (std::size_t h = 0; h < s.magnitudes.size(); ++h) {
        out << h << ',' << format_double(static_cast<double>(h) * s.f1) << ',' << format_double(s.magnitudes[h])
            << ',' << format_double(s.phases[h]) << '\n';
    }
}

void write_summary(std::ostream& out, std::span<const SummaryRow> rows) {
    out << "# sapfsim sweep-summary format_version=1\n";
    out << "value,thd_before,thd_after,pf,dpf,p_pv,status\n";
    for (const auto& r : rows) {
        out << format_double(r.value) << ',' << r.thd_before << ',' << r.thd_after << ',' << r.pf << ',' << r.dpf
            << ',' << r.p_pv << ',' << r.status << '\n';
    }
}

}  // namespace sapf::cli
