#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sapf/cli/commands.hpp"
#include "sapf/cli/scenario_io.hpp"
#include "sapf/error.hpp"

int main(int argc, char** argv) {
    using namespace sapf::cli;

    CLI::App app{"sapfsim: PV-fed shunt active power filter simulator and power-quality analyzer"};
    app.require_subcommand(1);

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Simulate a scenario file");
    run_cmd->add_option("scenario", run.scenario, "Scenario JSON file")->required();
    run_cmd->add_option("-o,--out", run.out_dir, "Output directory")->required();
    run_cmd->add_option("--decimate", run.decimate, "Write every N-th step")->check(CLI::PositiveNumber);
    run_cmd->add_flag("--ideal-injection", run.ideal_injection, "Filter injects its reference current exactly");

    AnalyzeArgs analyze;
    std::vector<std::string> analyze_channels;
    double end_time = -1.0;
    std::string voltage;
    std::string analyze_out;
    auto* analyze_cmd = app.add_subcommand("analyze", "Harmonic and power analysis of a waveform csv");
    analyze_cmd->add_option("waveforms", analyze.waveforms, "Waveform csv")->required();
    analyze_cmd->add_option("-c,--channels", analyze_channels, "Channels to analyze")->delimiter(',')->required();
    analyze_cmd->add_option("--f1", analyze.f1, "Fundamental frequency (Hz)");
    analyze_cmd->add_option("--cycles", analyze.cycles, "Window length in fundamental cycles");
    analyze_cmd->add_option("--end", end_time, "Window end time (s); default: end of file");
    analyze_cmd->add_option("--voltage", voltage, "Voltage channel paired with every channel");
    analyze_cmd->add_option("-o,--out", analyze_out, "Output directory; default: next to the csv");

    SweepArgs sweep;
    std::vector<std::string> sweep_values;
    auto* sweep_cmd = app.add_subcommand("sweep", "Run a scenario over a list of parameter values");
    sweep_cmd->add_option("scenario", sweep.scenario, "Scenario JSON file")->required();
    sweep_cmd->add_option("-p,--parameter", sweep.parameter, "Parameter path, e.g. pv.irradiance")->required();
    sweep_cmd->add_option("-v,--values", sweep_values, "Comma-separated values")->delimiter(',');
    sweep_cmd->add_option("-o,--out", sweep.out_dir, "Output directory")->required();
    sweep_cmd->add_option("-j,--jobs", sweep.jobs, "Parallel runs (0: all cores)");

    DemoArgs demo;
    auto* demo_cmd = app.add_subcommand("demo", "Run the bundled scenario and write a reproduction directory");
    demo_cmd->add_option("-o,--out", demo.out_dir, "Output directory")->required();
    demo_cmd->add_option("--decimate", demo.decimate, "Write every N-th step")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    if (*run_cmd) return cmd_run(run, std::cout, std::cerr);
    if (*analyze_cmd) {
        analyze.channels = analyze_channels;
        if (end_time >= 0.0) analyze.end_time = end_time;
        if (!voltage.empty()) analyze.voltage = voltage;
        if (!analyze_out.empty()) analyze.out_dir = analyze_out;
        return cmd_analyze(analyze, std::cout, std::cerr);
    }
    if (*sweep_cmd) {
        try {
            for (const auto& v : sweep_values) sweep.values.push_back(parse_parameter_value(sweep.parameter, v));
        } catch (const sapf::ValidationError& e) {
            std::cerr << "validation error: " << e.what() << '\n';
            return kExitValidation;
        }
        return cmd_sweep(sweep, std::cout, std::cerr);
    }
    return cmd_demo(demo, std::cout, std::cerr);
}
