#pragma once

// Fixed-step executor for the micro-grid: stiff source behind R-L impedance,
// rectifier and linear loads, and the shunt active filter (VSC + DC link fed
// by a PV array through a boost converter) at the point of common coupling.
//
// Per step, in order: timed events, source EMF, controllers (on the previous
// PCC voltage), PCC voltage solve, KCL, record, then every state advances by
// forward Euler over [t, t + dt).

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sapf/control.hpp"
#include "sapf/plant.hpp"

namespace sapf::engine {

using phasemath::ThreePhaseSample;

enum class InjectionMode { switched, ideal };
enum class ReferenceMethod { idq, pq };

struct RectifierParams {
    double r_dc = 20.0;
    double l_dc = 50e-3;
    /// Per-phase commutation reactance; 0 selects the ideal bridge.
    double l_ac = 0.0;
};

struct LinearLoadParams {
    double r = 30.0;
    double l = 60e-3;
};

struct PiParams {
    double kp = 0.5;
    double ki = 20.0;
    double out_min = -50.0;
    double out_max = 50.0;
};

struct SapfParams {
    bool enabled = true;
    InjectionMode mode = InjectionMode::switched;
    ReferenceMethod reference = ReferenceMethod::idq;
    double l_f = 3e-3;
    double r_f = 0.05;
    double c_dc = 2200e-6;
    double v_dc_ref = 800.0;
    double v_dc_init = 800.0;
    double lpf_cutoff_hz = 15.0;
    bool angle_filter = true;
    double angle_filter_cutoff_hz = 100.0;
    PiParams pi;
    double half_band = 0.5;
};

struct MpptParams {
    bool enabled = true;
    double step = 0.005;
    double period = 0.01;
};

struct PvParams {
    plant::PVArray array;
    double boost_l = 3e-3;
    double duty_init = 0.6;
    MpptParams mppt;
};

/// Everything an event may change while a run is in progress.
struct SystemParams {
    plant::GridSource grid;
    std::optional<RectifierParams> rectifier;
    std::optional<LinearLoadParams> linear;
    std::optional<SapfParams> sapf;
    std::optional<PvParams> pv;
};

struct SimParams {
    double dt = 5e-6;
    double t_end = 0.6;
};

struct Event {
    double time = 0.0;
    std::string path;
    double value = 0.0;
};

struct Scenario {
    SystemParams system;
    SimParams sim;
    std::vector<Event> events;
    /// Channels to record; empty selects default_channels().
    std::vector<std::string> record;
};

// --- parameter paths ---------------------------------------------------------

enum class ValueKind { real, integer, boolean, choice };

struct ParameterInfo {
    std::string path;
    std::string unit;
    bool event_settable = false;
    ValueKind kind = ValueKind::real;
    /// Labels of a choice parameter, indexed by its numeric value.
    std::vector<std::string> choices;
};

/// Every addressable scalar, e.g. "pv.irradiance", "loads.rectifier.r_dc".
const std::vector<ParameterInfo>& parameters();

/// Sets a parameter by path (booleans and modes take 0/1). Throws
/// ValidationError for unknown paths or absent sections.
void set_parameter(Scenario& sc, std::string_view path, double value);
double get_parameter(const Scenario& sc, std::string_view path);

// --- channels --------------------------------------------------------------

enum class Channel : std::size_t {
    v_sa, v_sb, v_sc,
    e_a, e_b, e_c,
    i_sa, i_sb, i_sc,
    i_la, i_lb, i_lc,
    i_rect_a, i_rect_b, i_rect_c,
    i_lin_a, i_lin_b, i_lin_c,
    i_fa, i_fb, i_fc,
    i_ref_a, i_ref_b, i_ref_c,
    sw_a, sw_b, sw_c,
    theta, i_d, i_q, i_d_mean, i_loss,
    v_dc, i_dc, i_dc_in,
    v_pv, i_pv, p_pv, duty,
    p_source, p_rect, p_lin, p_filter_loss, p_conv, e_storage,
    count_
};

inline constexpr std::size_t kChannelCount = static_cast<std::size_t>(Channel::count_);

/// Values of every channel at one step. Instantaneous channels hold the value
/// at t; power channels (p_*) hold the mean over [t, t + dt).
using Frame = std::array<double, kChannelCount>;

const std::array<std::string_view, kChannelCount>& channel_names();
std::optional<Channel> find_channel(std::string_view name);
const std::vector<std::string>& default_channels();

// --- validation --------------------------------------------------------------

/// Smallest samples-per-cycle rounding: dt snapped so that 1/(f·dt) is an integer.
double snap_dt(double dt, double freq_hz);

/// Validates and returns the scenario with dt snapped and the default record
/// list filled in. Throws ValidationError naming the offending key path.
Scenario resolve(const Scenario& sc);

// --- state ---------------------------------------------------------------------

struct SimState {
    std::int64_t step = 0;
    SystemParams params;
    std::size_t next_event = 0;

    plant::RectifierLoad rectifier;
    plant::LinearLoad linear;
    plant::VscSapf vsc;
    plant::BoostConverter boost;

    ThreePhaseSample v_pcc_prev;
    ThreePhaseSample i_source_prev;
    bool source_continuous = false;  ///< i_source_prev valid for the inductive drop
    bool sapf_was_enabled = false;

    control::IdqControllerState idq;
    phasemath::FirstOrderFilterState pq_filter;
    control::MpptState mppt;
    std::int64_t mppt_counter = 0;
    double mppt_energy = 0.0;
    double mppt_volt_time = 0.0;

    bool warned_low_dc = false;
    std::vector<std::string> log;
};

double time_of(const SimState& s, const Scenario& sc) noexcept;

/// Initial state for a resolved scenario: all currents zero, DC link at
/// v_dc_init, controllers at rest.
SimState initial_state(const Scenario& resolved);

/// Replaces the targeted parameter; state variables are not re-initialized.
void apply_event(SimState& s, const Event& e);

/// Advances one step in place. `frame`, when given, receives the channel
/// values of the step. Throws RuntimeAbort naming time and component.
void step(SimState& s, const Scenario& resolved, Frame* frame = nullptr);

/// Value-semantics wrapper around step().
SimState stepped(const SimState& s, const Scenario& resolved, Frame* frame = nullptr);

std::int64_t total_steps(const Scenario& resolved) noexcept;

/// Step index at which an event at `time` is applied.
std::int64_t event_step(double time, double dt) noexcept;

// --- recording ---------------------------------------------------------------

struct TimeSeries {
    double dt = 0.0;
    double t0 = 0.0;
    double f1 = 50.0;
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns;
    std::vector<std::string> event_log;

    std::size_t size() const noexcept { return columns.empty() ? 0 : columns.front().size(); }
    double fs() const noexcept { return 1.0 / dt; }
    bool has(std::string_view name) const noexcept;
    /// Throws sapf::Error for unknown names.
    std::span<const double> channel(std::string_view name) const;
};

/// Records the scenario's channel list while stepping.
class Recorder {
public:
    Recorder(const Scenario& resolved, std::size_t reserve);
    void push(const Frame& f);
    TimeSeries finish(std::vector<std::string> log) &&;

private:
    TimeSeries series_;
    std::vector<std::size_t> index_;
};

struct RunOptions {
    /// Forces ideal injection regardless of the scenario's sapf.mode.
    bool ideal_injection = false;
};

/// Validates, then runs from t = 0 to t_end. Deterministic: the same
/// scenario yields bit-identical output.
TimeSeries run_scenario(const Scenario& sc, const RunOptions& options = {});

/// Continues from `state` for `n_steps` (handoff between partial runs).
TimeSeries run_steps(SimState& state, const Scenario& resolved, std::int64_t n_steps);

/// Sets sapf.mode = ideal (no-op without a SAPF section).
void set_ideal_injection(Scenario& sc, bool on);

}  // namespace sapf::engine
