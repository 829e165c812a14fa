#include "sapf/cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

#include "sapf/cli/scenario_io.hpp"
#include "sapf/error.hpp"
#include "sapf/plant.hpp"
#include "sapf/scenarios.hpp"

namespace sapf::cli {

namespace fs = std::filesystem;

namespace {

template <class F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const ValidationError& e) {
        err << "validation error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const RuntimeAbort& e) {
        err << "runtime error: " << e.what() << '\n';
        return kExitRuntime;
    } catch (const AsynchronousWindow& e) {
        err << "analysis window error: " << e.what() << " (requires " << e.required_cycles()
            << " whole cycles)\n";
        return kExitAnalysisWindow;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out = open_out(path);
    out << text;
}

void write_event_log(const fs::path& path, const std::vector<std::string>& log) {
    std::ofstream out = open_out(path);
    out << "# sapfsim events format_version=1\n";
    for (const auto& line : log) out << line << '\n';
}

std::string percent(double ratio) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << 100.0 * ratio << " %";
    return os.str();
}

std::string fixed(double x, int digits) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << x;
    return os.str();
}

/// Phase voltage paired with a current channel: i_sa, i_la, i_fa, i_rect_a, ... → v_sa.
std::optional<std::string> paired_voltage(const std::string& channel) {
    if (channel.size() < 3 || channel.rfind("i_", 0) != 0) return std::nullopt;
    const char phase = channel.back();
    if (phase != 'a' && phase != 'b' && phase != 'c') return std::nullopt;
    return std::string("v_s") + phase;
}

double window_mean(const WaveformTable& table, const std::string& name, std::size_t end_row, std::size_t rows) {
    const auto x = table.channel(name);
    return analysis::mean(x.subspan(end_row - rows, rows));
}

/// Time of the first event switching the filter on, if any.
std::optional<double> enable_time(const engine::Scenario& sc) {
    for (const auto& e : sc.events) {
        if (e.path == "sapf.enabled" && e.value == 1.0) return e.time;
    }
    return std::nullopt;
}

engine::SystemParams after_events(const engine::Scenario& sc, double t) {
    engine::Scenario copy = sc;
    for (const auto& e : sc.events) {
        if (e.time <= t) engine::set_parameter(copy, e.path, e.value);
    }
    return copy.system;
}

// --- plot scripts ------------------------------------------------------------

struct PlotTrace {
    std::string file;
    int x_col;
    std::string y_expr;
    std::string title;
    bool second_axis;
};

std::string plot_script(const std::string& name, const std::string& heading, const std::string& xlabel,
                        const std::string& ylabel, const std::string& y2label, const std::string& xrange,
                        const std::vector<PlotTrace>& traces, bool impulses) {
    std::ostringstream s;
    s << "# " << heading << "\n";
    s << "set datafile separator \",\"\n";
    s << "set datafile commentschars \"#\"\n";
    s << "set terminal pngcairo size 1000,600\n";
    s << "set output \"" << name << ".png\"\n";
    s << "set title \"" << heading << "\"\n";
    s << "set xlabel \"" << xlabel << "\"\n";
    s << "set ylabel \"" << ylabel << "\"\n";
    if (!y2label.empty()) s << "set y2label \"" << y2label << "\"\nset y2tics\nset ytics nomirror\n";
    if (!xrange.empty()) s << "set xrange " << xrange << "\n";
    s << "set grid\n";
    s << "plot ";
    for (std::size_t k = 0; k < traces.size(); ++k) {
        const PlotTrace& t = traces[k];
        if (k > 0) s << ", \\\n     ";
        s << "\"" << t.file << "\" every ::1 using " << t.x_col << ":(" << t.y_expr << ") with "
          << (impulses ? "impulses lw 4" : "lines") << (t.second_axis ? " axes x1y2" : "") << " title \""
          << t.title << "\"";
    }
    s << "\n";
    return s.str();
}

std::vector<std::string> write_plot_scripts(const fs::path& dir, const std::vector<std::string>& record,
                                            double t_enable, double t_end, double thd_before, double thd_after) {
    auto col = [&record](const std::string& name) {
        const auto it = std::find(record.begin(), record.end(), name);
        if (it == record.end()) throw Error("demo record lacks " + name);
        return "$" + std::to_string(static_cast<int>(it - record.begin()) + 2);
    };
    const double cycle = 0.02;
    const std::string before = "[" + fixed(t_enable - 3 * cycle, 3) + ":" + fixed(t_enable, 3) + "]";
    const std::string after = "[" + fixed(t_end - 3 * cycle, 3) + ":" + fixed(t_end, 3) + "]";
    const std::string w = "waveforms.csv";

    struct Script {
        std::string name;
        std::string text;
    };
    const std::vector<Script> scripts{
        {"source_uncompensated",
         plot_script("source_uncompensated", "Source voltage and current without compensation", "t (s)",
                     "voltage (V)", "current (A)", before,
                     {{w, 1, col("v_sa"), "v_sa", false}, {w, 1, col("i_sa"), "i_sa", true}}, false)},
        {"load_current",
         plot_script("load_current", "Load current", "t (s)", "current (A)", "", after,
                     {{w, 1, col("i_la"), "i_la", false},
                      {w, 1, col("i_lb"), "i_lb", false},
                      {w, 1, col("i_lc"), "i_lc", false}},
                     false)},
        {"compensating_current",
         plot_script("compensating_current", "Filter compensating current", "t (s)", "current (A)", "", after,
                     {{w, 1, col("i_fa"), "i_fa", false},
                      {w, 1, col("i_fb"), "i_fb", false},
                      {w, 1, col("i_fc"), "i_fc", false}},
                     false)},
        {"source_compensated",
         plot_script("source_compensated", "Source voltage and current with compensation", "t (s)",
                     "voltage (V)", "current (A)", after,
                     {{w, 1, col("v_sa"), "v_sa", false}, {w, 1, col("i_sa"), "i_sa", true}}, false)},
        {"spectrum_before",
         plot_script("spectrum_before", "Source current spectrum before compensation, THD " + percent(thd_before),
                     "harmonic order", "magnitude (A peak)", "", "[0:50.5]",
                     {{"spectrum_before.csv", 1, "$3", "i_sa", false}}, true)},
        {"spectrum_after",
         plot_script("spectrum_after", "Source current spectrum after compensation, THD " + percent(thd_after),
                     "harmonic order", "magnitude (A peak)", "", "[0:50.5]",
                     {{"spectrum_after.csv", 1, "$3", "i_sa", false}}, true)},
    };
    std::vector<std::string> files;
    for (const auto& s : scripts) {
        write_text(dir / (s.name + ".gp"), s.text);
        files.push_back(s.name + ".gp");
    }
    return files;
}

}  // namespace

// --- building blocks ---------------------------------------------------------

std::size_t row_at(const WaveformTable& table, double t) {
    if (table.t.empty()) return 0;
    const double fs = table.rows() > 1 ? table.sample_rate() : 1.0;
    const double k = std::round((t - table.t.front()) * fs);
    return static_cast<std::size_t>(std::clamp(k, 0.0, static_cast<double>(table.rows())));
}

WindowReport analyze_window(const WaveformTable& table, const std::string& v, const std::string& i,
                            std::size_t end_row, double f1, std::size_t cycles) {
    const double fs = table.sample_rate();
    const auto vx = table.channel(v).first(end_row);
    const auto ix = table.channel(i).first(end_row);
    const auto vw = analysis::last_cycles(vx, cycles, f1, fs);
    const auto iw = analysis::last_cycles(ix, cycles, f1, fs);

    WindowReport r;
    r.start_s = table.t[end_row - vw.size()];
    r.end_s = r.start_s + static_cast<double>(vw.size()) / fs;
    r.power = analysis::power_metrics(vw, iw, f1, fs);
    r.current_spectrum = analysis::dft_spectrum(iw, f1, fs);
    r.settling = analysis::settling_check(ix, f1, fs);
    return r;
}

std::vector<SummaryRow> run_sweep(const engine::Scenario& base, const std::string& parameter,
                                  std::span<const double> values, const fs::path& out_dir, unsigned jobs) {
    std::vector<SummaryRow> rows(values.size());
    std::atomic<std::size_t> next{0};

    auto run_one = [&](std::size_t k) {
        SummaryRow& row = rows[k];
        row.value = values[k];
        std::ostringstream name;
        name << "run_" << std::setw(3) << std::setfill('0') << k;
        const fs::path dir = out_dir / name.str();
        fs::create_directories(dir);
        try {
            engine::Scenario sc = base;
            engine::set_parameter(sc, parameter, values[k]);
            sc.record = {"v_sa", "i_sa"};
            if (sc.system.pv) sc.record.push_back("p_pv");
            const engine::Scenario resolved = engine::resolve(sc);
            write_text(dir / "manifest.json", dump_scenario(resolved));

            const engine::TimeSeries ts = engine::run_scenario(resolved);
            write_event_log(dir / "events.log", ts.event_log);
            const WaveformTable table = decimated_table(ts, 1);
            const double f1 = resolved.system.grid.freq_hz;

            const WindowReport after = analyze_window(table, "v_sa", "i_sa", table.rows(), f1);
            row.thd_after = format_double(after.power.thd_i);
            row.pf = format_double(after.power.pf);
            row.dpf = format_double(after.power.dpf);
            if (table.has("p_pv")) {
                const std::size_t n = table.rows() - row_at(table, after.start_s);
                row.p_pv = format_double(window_mean(table, "p_pv", table.rows(), n));
            }
            if (const auto t_on = enable_time(resolved)) {
                try {
                    const WindowReport before = analyze_window(table, "v_sa", "i_sa", row_at(table, *t_on), f1);
                    row.thd_before = format_double(before.power.thd_i);
                } catch (const AsynchronousWindow&) {
                    // filter enabled too early for a full before window
                }
            }
            row.status = "ok";
        } catch (const std::exception& e) {
            row = SummaryRow{values[k], "", "", "", "", "", "failed"};
            try {
                write_text(dir / "error.txt", std::string(e.what()) + "\n");
            } catch (const std::exception&) {
            }
        }
    };

    if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, values.size()));
    std::vector<std::thread> workers;
    for (unsigned w = 0; w < jobs; ++w) {
        workers.emplace_back([&] {
            for (std::size_t k = next++; k < values.size(); k = next++) run_one(k);
        });
    }
    for (auto& t : workers) t.join();
    return rows;
}

DemoReport run_demo(const fs::path& out_dir, std::size_t decimate) {
    fs::create_directories(out_dir);
    engine::Scenario sc = scenarios::demo();
    sc.record = {"v_sa", "v_sb", "v_sc", "i_sa", "i_sb", "i_sc", "i_la", "i_lb", "i_lc",
                 "i_fa", "i_fb", "i_fc", "v_dc", "v_pv", "i_pv", "p_pv", "duty", "p_source"};
    const engine::Scenario resolved = engine::resolve(sc);
    const engine::TimeSeries ts = engine::run_scenario(resolved);

    DemoReport rep;
    write_text(out_dir / "manifest.json", dump_scenario(resolved));
    write_event_log(out_dir / "events.log", ts.event_log);
    {
        std::ofstream out = open_out(out_dir / "waveforms.csv");
        write_waveforms(out, ts, decimate);
    }
    rep.files = {"manifest.json", "events.log", "waveforms.csv"};

    // Metrics come from the decimated samples, exactly what the csv holds.
    const WaveformTable table = decimated_table(ts, decimate);
    const double f1 = resolved.system.grid.freq_hz;
    const double t_enable = enable_time(resolved).value_or(0.0);
    double t_step = resolved.sim.t_end;
    for (const auto& e : resolved.events) {
        if (e.path == "pv.irradiance") t_step = e.time;
    }

    rep.before = analyze_window(table, "v_sa", "i_sa", row_at(table, t_enable), f1);
    rep.after_mid = analyze_window(table, "v_sa", "i_sa", row_at(table, t_step), f1);
    rep.after = analyze_window(table, "v_sa", "i_sa", table.rows(), f1);
    rep.comparison = analysis::compare_report({rep.before.power, rep.before.current_spectrum},
                                              {rep.after.power, rep.after.current_spectrum});

    const std::size_t window_rows = table.rows() - row_at(table, rep.after.start_s);
    rep.p_pv_mid = window_mean(table, "p_pv", row_at(table, t_step), window_rows);
    rep.p_pv_final = window_mean(table, "p_pv", table.rows(), window_rows);
    rep.p_mpp_mid = plant::pv_mpp_scan(after_events(resolved, t_step - resolved.sim.dt).pv->array).p_mpp;
    rep.p_mpp_final = plant::pv_mpp_scan(after_events(resolved, resolved.sim.t_end).pv->array).p_mpp;

    {
        std::ofstream out = open_out(out_dir / "spectrum_before.csv");
        write_spectrum(out, rep.before.current_spectrum);
    }
    {
        std::ofstream out = open_out(out_dir / "spectrum_after.csv");
        write_spectrum(out, rep.after.current_spectrum);
    }
    rep.files.push_back("spectrum_before.csv");
    rep.files.push_back("spectrum_after.csv");

    const auto& c = rep.comparison;
    std::ostringstream r;
    r << "# sapfsim demo report format_version=1\n";
    r << "window,start_s,end_s,thd_i,pf,dpf,p_phase_a_w,i_rms_a,settled\n";
    auto line = [&r](const char* name, const WindowReport& w) {
        r << name << ',' << fixed(w.start_s, 4) << ',' << fixed(w.end_s, 4) << ',' << fixed(w.power.thd_i, 5) << ','
          << fixed(w.power.pf, 5) << ',' << fixed(w.power.dpf, 5) << ',' << fixed(w.power.p_active, 1) << ','
          << fixed(w.power.i_rms, 3) << ',' << (w.settling.settled ? "yes" : "no") << '\n';
    };
    line("uncompensated", rep.before);
    line("compensated_g1000", rep.after_mid);
    line("compensated_g600", rep.after);
    r << "\nTHD before: " << percent(c.thd_before) << "\n";
    r << "THD after: " << percent(c.thd_after) << "\n";
    r << "reduction factor: " << fixed(c.reduction_factor, 1) << "\n";
    r << "PF before/after: " << fixed(c.pf_before, 4) << " / " << fixed(c.pf_after, 4) << "\n";
    r << "DPF before/after: " << fixed(c.dpf_before, 4) << " / " << fixed(c.dpf_after, 4) << "\n";
    r << "THD <= 5 %: " << (c.ieee519_pass ? "pass" : "fail") << (c.degraded ? " (degraded)" : "") << "\n";
    r << "PV at 1000 W/m^2: " << fixed(rep.p_pv_mid, 0) << " W of " << fixed(rep.p_mpp_mid, 0) << " W ("
      << percent(rep.p_pv_mid / rep.p_mpp_mid) << ")\n";
    r << "PV at 600 W/m^2: " << fixed(rep.p_pv_final, 0) << " W of " << fixed(rep.p_mpp_final, 0) << " W ("
      << percent(rep.p_pv_final / rep.p_mpp_final) << ")\n";
    r << "\nharmonic,before_pct,after_pct\n";
    for (const auto& h : c.harmonics) {
        if (h.h > 25 || h.h % 2 == 0) continue;
        r << h.h << ',' << fixed(100.0 * h.before, 3) << ',' << fixed(100.0 * h.after, 3) << '\n';
    }
    write_text(out_dir / "report.txt", r.str());
    rep.files.push_back("report.txt");

    const auto scripts =
        write_plot_scripts(out_dir, resolved.record, t_enable, resolved.sim.t_end, c.thd_before, c.thd_after);
    rep.files.insert(rep.files.end(), scripts.begin(), scripts.end());
    return rep;
}

// --- commands ------------------------------------------------------------------

int cmd_run(const RunArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (args.decimate == 0) throw ValidationError("--decimate", "must be >= 1");
        engine::Scenario resolved = engine::resolve(load_scenario(args.scenario));
        if (args.ideal_injection) engine::set_ideal_injection(resolved, true);

        fs::create_directories(args.out_dir);
        write_text(args.out_dir / "manifest.json", dump_scenario(resolved));
        const engine::TimeSeries ts = engine::run_scenario(resolved);
        write_event_log(args.out_dir / "events.log", ts.event_log);
        std::ofstream csv = open_out(args.out_dir / "waveforms.csv");
        write_waveforms(csv, ts, args.decimate);
        out << "wrote " << (args.out_dir / "waveforms.csv").string() << " (" << (ts.size() + args.decimate - 1) / args.decimate
            << " rows, dt " << format_double(resolved.sim.dt) << " s)\n";
        return kExitOk;
    });
}

int cmd_analyze(const AnalyzeArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        std::ifstream in(args.waveforms, std::ios::binary);
        if (!in) throw ValidationError(args.waveforms.string(), "cannot read waveform csv");
        WaveformTable table;
        try {
            table = read_waveforms(in);
        } catch (const ValidationError&) {
            throw;
        } catch (const Error& e) {
            throw ValidationError(args.waveforms.string(), e.what());
        }
        if (args.channels.empty()) throw ValidationError("channels", "no channels given");
        for (const auto& c : args.channels) {
            if (!table.has(c)) throw ValidationError(c, "channel not found in csv");
        }
        const double fs = table.sample_rate();
        const std::size_t end_row = args.end_time ? row_at(table, *args.end_time) : table.rows();
        const fs::path dir = args.out_dir.value_or(args.waveforms.parent_path());
        if (!dir.empty()) fs::create_directories(dir);

        std::ostringstream report;
        report << "# sapfsim analysis format_version=1\n";
        report << "channel,start_s,end_s,thd,rms,p_w,q1_var,d_va,s_va,pf,dpf,thd_v,settled\n";
        for (const auto& c : args.channels) {
            const auto x = analysis::last_cycles(table.channel(c).first(end_row), args.cycles, args.f1, fs);
            const analysis::HarmonicSpectrum spec = analysis::dft_spectrum(x, args.f1, fs);
            {
                std::ofstream sp = open_out(dir / ("spectrum_" + c + ".csv"));
                write_spectrum(sp, spec);
            }
            const double start = table.t[end_row - x.size()];
            const double end = start + static_cast<double>(x.size()) / fs;
            const double thd = analysis::thd(spec);
            const auto settle = analysis::settling_check(table.channel(c).first(end_row), args.f1, fs);

            const std::optional<std::string> v = args.voltage ? args.voltage : paired_voltage(c);
            out << c << ": THD " << percent(thd) << ", rms " << fixed(analysis::rms(x), 4);
            report << c << ',' << format_double(start) << ',' << format_double(end) << ',' << format_double(thd) << ','
                   << format_double(analysis::rms(x));
            if (v && table.has(*v) && *v != c) {
                const auto vx = analysis::last_cycles(table.channel(*v).first(end_row), args.cycles, args.f1, fs);
                const analysis::PowerReport p = analysis::power_metrics(vx, x, args.f1, fs);
                out << ", PF " << fixed(p.pf, 4) << ", DPF " << fixed(p.dpf, 4) << " (vs " << *v << ")";
                report << ',' << format_double(p.p_active) << ',' << format_double(p.q_fundamental) << ','
                       << format_double(p.d_distortion) << ',' << format_double(p.s_apparent) << ','
                       << format_double(p.pf) << ',' << format_double(p.dpf) << ',' << format_double(p.thd_v);
            } else {
                report << ",,,,,,,";
            }
            report << ',' << (settle.settled ? "yes" : "no") << '\n';
            if (!settle.settled) out << " [not settled: fundamental varies " << percent(settle.variation) << "]";
            out << '\n';
        }
        write_text(dir / "analysis.txt", report.str());
        return kExitOk;
    });
}

int cmd_sweep(const SweepArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (args.values.empty()) throw ValidationError("values", "empty values list");
        const engine::Scenario base = load_scenario(args.scenario);
        {
            // Unknown or absent parameter paths fail before any run starts.
            engine::Scenario probe = base;
            engine::set_parameter(probe, args.parameter, engine::get_parameter(base, args.parameter));
        }
        fs::create_directories(args.out_dir);
        const std::vector<SummaryRow> rows = run_sweep(base, args.parameter, args.values, args.out_dir, args.jobs);
        {
            std::ofstream csv = open_out(args.out_dir / "summary.csv");
            write_summary(csv, rows);
        }
        bool failed = false;
        for (const auto& r : rows) {
            out << args.parameter << " = " << format_double(r.value) << ": " << r.status;
            if (r.status == "ok") out << ", THD after " << r.thd_after;
            out << '\n';
            failed = failed || r.status != "ok";
        }
        if (failed) err << "one or more sweep runs failed; see run_*/error.txt\n";
        return failed ? kExitRuntime : kExitOk;
    });
}

int cmd_demo(const DemoArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (args.decimate == 0) throw ValidationError("--decimate", "must be >= 1");
        const DemoReport rep = run_demo(args.out_dir, args.decimate);
        const auto& c = rep.comparison;
        out << "THD before: " << percent(c.thd_before) << "\n";
        out << "THD after: " << percent(c.thd_after) << "\n";
        out << "DPF after: " << fixed(c.dpf_after, 4) << ", PF after: " << fixed(c.pf_after, 4) << "\n";
        out << "PV power: " << fixed(rep.p_pv_mid, 0) << " W of " << fixed(rep.p_mpp_mid, 0) << " W, then "
            << fixed(rep.p_pv_final, 0) << " W of " << fixed(rep.p_mpp_final, 0) << " W\n";
        out << "wrote " << rep.files.size() << " files to " << args.out_dir.string() << "\n";
        return kExitOk;
    });
}

}  // namespace sapf::cli
