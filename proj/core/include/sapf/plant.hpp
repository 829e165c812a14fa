#pragma once

// Continuous-state models of the micro-grid components: stiff source behind
// an R-L impedance, six-pulse diode rectifier, series R-L load, single-diode
// PV array, duty-averaged boost converter and a switched two-level VSC with
// its DC link. Every model is a pure step function over explicit state.

#include <array>
#include <cstdint>

#include "sapf/phasemath.hpp"

namespace sapf::plant {

using phasemath::ThreePhaseSample;

/// 3x3 matrix used for the linearized phase-current derivative of a branch.
using Matrix3 = std::array<std::array<double, 3>, 3>;

/// di/dt = G·v_pcc + h for a branch whose switching state is frozen over a step.
struct BranchAdmittance {
    Matrix3 g{};
    std::array<double, 3> h{};
};

struct GridSource {
    double v_ll_rms = 415.0;
    double freq_hz = 50.0;
    double r_s = 0.1;
    double l_s = 0.5e-3;
};

/// Phase-a EMF is √2·(v_ll_rms/√3)·sin(2πft); b and c lag by 2π/3 and 4π/3.
ThreePhaseSample grid_voltage(const GridSource& src, double t) noexcept;

double phase_peak_voltage(const GridSource& src) noexcept;

// ---------------------------------------------------------------------------
// Six-pulse diode bridge feeding an R-L DC load.
//
// With l_ac == 0 the bridge is ideal: the phase at the highest PCC voltage
// carries +i_dc, the lowest carries −i_dc. With l_ac > 0 each phase has a
// commutation reactance and two (or three) diodes share the current during
// overlap; conduction follows diode current/bias.

struct RectifierLoad {
    double r_dc = 20.0;
    double l_dc = 50e-3;
    double l_ac = 0.0;

    // state
    double i_dc = 0.0;
    ThreePhaseSample i_phase{};
    /// +1: top diode conducts, −1: bottom diode conducts, 0: phase idle.
    std::array<std::int8_t, 3> conduction{0, 0, 0};
};

struct RectifierStep {
    RectifierLoad load;
    ThreePhaseSample currents;
};

RectifierStep rectifier_step(const RectifierLoad& load, const ThreePhaseSample& v_pcc, double dt);

/// Linearized phase-current derivative for the present conduction state.
BranchAdmittance rectifier_admittance(const RectifierLoad& load);

struct LinearLoad {
    double r = 30.0;
    double l = 60e-3;
    ThreePhaseSample i_abc{};
};

struct LinearLoadStep {
    LinearLoad load;
    ThreePhaseSample currents;
};

/// Per phase di/dt = (v − r·i)/l; with l == 0 the load is resistive, i = v/r.
LinearLoadStep linear_load_step(const LinearLoad& load, const ThreePhaseSample& v_pcc, double dt);

BranchAdmittance linear_load_admittance(const LinearLoad& load);

// ---------------------------------------------------------------------------
// Single-diode PV model. Per module:
//   I = I_ph − I_0·(exp((V + I·r_s)/(n·N_cell·V_t)) − 1) − (V + I·r_s)/r_sh
// with I_ph ∝ irradiance and I_0 calibrated so that (0, i_sc) and (v_oc, 0)
// lie on the curve at 1000 W/m², 298.15 K. The array scales V by n_series
// and I by n_parallel.

struct PVArray {
    int n_series = 18;
    int n_parallel = 10;
    double i_sc_module = 8.0;
    double v_oc_module = 22.0;
    int cells_per_module = 36;
    double ideality = 1.3;
    double r_s = 0.2;
    double r_sh = 150.0;
    double irradiance = 1000.0;
    double temperature = 298.15;
};

/// Module photo-current at the array's irradiance.
double pv_photo_current(const PVArray& pv) noexcept;

/// Array current at array voltage `v_array` (≥ 0). Damped Newton on the
/// implicit module equation to |residual| < 1e-9 A; throws PvSolveFailed.
double pv_current(const PVArray& pv, double v_array);

/// Array voltage at which the array delivers `i_array`; clamps to 0 when the
/// requested current exceeds what the array can source at V = 0.
double pv_voltage(const PVArray& pv, double i_array);

double pv_open_circuit_voltage(const PVArray& pv);

struct MppScan {
    double v_mpp;
    double p_mpp;
};

/// Brute-force maximum power point: 10⁴ uniform steps from 0 to V_oc.
MppScan pv_mpp_scan(const PVArray& pv);

// ---------------------------------------------------------------------------

struct BoostConverter {
    double l = 5e-3;
    double duty = 0.6;
    double i_l = 0.0;
};

struct BoostStep {
    BoostConverter converter;
    /// Current delivered to the DC link, (1 − duty)·ī_l over the step.
    double i_out;
    /// Inductor current averaged over the step.
    double i_l_mean;
};

inline constexpr double kMaxBoostDuty = 0.95;

/// Duty-averaged model: di_l/dt = (v_in − (1 − duty)·v_dc)/l, i_l ≥ 0.
BoostStep boost_step(const BoostConverter& b, double v_in, double v_dc, double dt);

// ---------------------------------------------------------------------------
// Two-level VSC, each leg referenced to the DC-link midpoint (tied to the
// PCC neutral): v_leg = ±v_dc/2.

using SwitchTriple = std::array<bool, 3>;

struct VscSapf {
    double l_f = 3e-3;
    double r_f = 0.05;
    double c_dc = 2200e-6;

    // state
    double v_dc = 800.0;
    ThreePhaseSample i_f{};
    SwitchTriple switches{false, false, false};
    /// Gating removed: legs open, no filter current.
    bool blocked = false;
};

struct VscStep {
    VscSapf vsc;
    /// AC-side converter power Σ v_leg·ī_f over the step.
    double p_ac;
    /// DC current drawn by the bridge, Σ (s_k − ½)·ī_f,k.
    double i_conv;
    ThreePhaseSample i_f_mean;
};

/// Leg voltages (midpoint referenced) for the present switch state.
ThreePhaseSample vsc_leg_voltages(const VscSapf& v) noexcept;

/// Switched step: di_f/dt = (v_leg − v_pcc − r_f·i_f)/l_f, then
/// dv_dc/dt = (i_dc_in − i_conv)/c_dc with i_conv from the step-mean filter
/// currents so that AC and DC power match exactly. Throws DcLinkCollapsed.
VscStep vsc_step(const VscSapf& v, const ThreePhaseSample& v_pcc, double i_dc_in, double dt);

/// Ideal-injection step: the bridge delivers `i_inject` exactly; the DC link
/// supplies the matching AC power.
VscStep vsc_ideal_step(const VscSapf& v, const ThreePhaseSample& i_inject,
                       const ThreePhaseSample& v_pcc, double i_dc_in, double dt);

/// Derivative of the filter currents injected into the PCC (frozen switches).
BranchAdmittance vsc_admittance(const VscSapf& v);

}  // namespace sapf::plant
