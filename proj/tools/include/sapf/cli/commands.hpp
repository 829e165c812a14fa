#pragma once

// The four sapfsim subcommands. Each returns a process exit status:
// 0 success, 2 validation, 3 runtime, 4 analysis window (1 for anything else).

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sapf/analysis.hpp"
#include "sapf/cli/csv_io.hpp"
#include "sapf/engine.hpp"

namespace sapf::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitValidation = 2,
    kExitRuntime = 3,
    kExitAnalysisWindow = 4,
};

struct RunArgs {
    std::filesystem::path scenario;
    std::filesystem::path out_dir;
    std::size_t decimate = 1;
    bool ideal_injection = false;
};

struct AnalyzeArgs {
    std::filesystem::path waveforms;
    std::vector<std::string> channels;
    double f1 = 50.0;
    std::size_t cycles = analysis::kDefaultWindowCycles;
    /// Window end time; the window ends at the last row when unset.
    std::optional<double> end_time;
    /// Voltage paired with every channel; by default i_s<x>/i_l<x>/i_f<x> pair with v_s<x>.
    std::optional<std::string> voltage;
    /// Output directory; defaults to the directory holding the csv.
    std::optional<std::filesystem::path> out_dir;
};

struct SweepArgs {
    std::filesystem::path scenario;
    std::string parameter;
    std::vector<double> values;
    std::filesystem::path out_dir;
    unsigned jobs = 0;  ///< 0: hardware concurrency
};

struct DemoArgs {
    std::filesystem::path out_dir;
    std::size_t decimate = 5;
};

int cmd_run(const RunArgs& args, std::ostream& out, std::ostream& err);
int cmd_analyze(const AnalyzeArgs& args, std::ostream& out, std::ostream& err);
int cmd_sweep(const SweepArgs& args, std::ostream& out, std::ostream& err);
int cmd_demo(const DemoArgs& args, std::ostream& out, std::ostream& err);

// --- building blocks shared with the tests -----------------------------------

struct WindowReport {
    double start_s = 0.0;
    double end_s = 0.0;
    analysis::PowerReport power;
    analysis::HarmonicSpectrum current_spectrum;
    analysis::SettlingCheck settling;
};

/// Power report of the `cycles` cycles ending just before row `end_row`.
/// Throws AsynchronousWindow when fewer rows are available.
WindowReport analyze_window(const WaveformTable& table, const std::string& v, const std::string& i,
                            std::size_t end_row, double f1, std::size_t cycles = analysis::kDefaultWindowCycles);

/// Row index at which time `t` starts (rounded to the nearest row).
std::size_t row_at(const WaveformTable& table, double t);

/// Runs each value on a copy of `base`; row k belongs to values[k] whatever
/// order the runs finish in. Per-run manifests go to out_dir/run_<k>/.
std::vector<SummaryRow> run_sweep(const engine::Scenario& base, const std::string& parameter,
                                  std::span<const double> values, const std::filesystem::path& out_dir,
                                  unsigned jobs);

struct DemoReport {
    WindowReport before;     ///< last cycles before the filter is enabled
    WindowReport after_mid;  ///< last cycles before the irradiance step
    WindowReport after;      ///< final cycles of the run
    analysis::ComparisonReport comparison;
    double p_pv_mid = 0.0;
    double p_mpp_mid = 0.0;
    double p_pv_final = 0.0;
    double p_mpp_final = 0.0;
    std::vector<std::string> files;  ///< everything written, relative to out_dir
};

/// Runs the bundled demo and writes its reproduction directory.
DemoReport run_demo(const std::filesystem::path& out_dir, std::size_t decimate);

}  // namespace sapf::cli
