#pragma once

// Controllers of the shunt active power filter: i_d–i_q and p-q reference
// current generation, the DC-link PI loss-current loop, per-phase hysteresis
// current control and perturb-and-observe MPPT.

#include "sapf/phasemath.hpp"
#include "sapf/plant.hpp"

namespace sapf::control {

using phasemath::FirstOrderFilterState;
using phasemath::ThreePhaseSample;
using plant::SwitchTriple;

struct PiState {
    double kp = 0.5;
    double ki = 20.0;
    double integral = 0.0;
    double out_min = -50.0;
    double out_max = 50.0;
};

struct PiStep {
    PiState state;
    double out;
};

/// out = clamp(kp·e + ki·∫e). The integral is held whenever the new output
/// would saturate and the error pushes further into saturation.
PiStep pi_step(const PiState& s, double error, double dt) noexcept;

/// Mains angle from the PCC voltage vector. Optionally low-passes v_αβ first;
/// the filter's phase lag at the nominal frequency is added back so θ stays
/// aligned with the fundamental.
struct AngleEstimator {
    bool filter_enabled = true;
    double nominal_hz = 50.0;
    FirstOrderFilterState alpha{0.0, 100.0};
    FirstOrderFilterState beta{0.0, 100.0};
    bool primed = false;
    double theta = 0.0;
};

struct AngleStep {
    AngleEstimator state;
    double theta;
};

/// Throws ZeroMainsVector when the (filtered) mains vector vanishes.
AngleStep angle_step(const AngleEstimator& s, const ThreePhaseSample& v_pcc, double dt);

struct IdqControllerState {
    AngleEstimator angle;
    FirstOrderFilterState d_axis_filter{0.0, 15.0};
    PiState pi;
};

struct IdqStep {
    IdqControllerState state;
    ThreePhaseSample i_ref;
    /// What the source is left to supply: (ī_d + i_loss) on d, nothing on q.
    ThreePhaseSample i_source_target;
    double theta;
    double i_d;
    double i_q;
    double i_d_mean;
    double i_loss;
};

/// i_d–i_q reference generation: θ from the mains vector, load current
/// rotated into dq, ī_d = LPF(i_d), i_loss = PI(v_dc_ref − v_dc), and
/// i_ref = dq⁻¹(i_d − ī_d − i_loss, i_q, i_0).
IdqStep idq_reference(const IdqControllerState& s, const ThreePhaseSample& i_load,
                      const ThreePhaseSample& v_pcc, double v_dc, double v_dc_ref, double dt);

/// Same as idq_reference with the angle supplied by the caller (used to hold
/// the last angle while the mains vector is zero). Leaves `s.angle` untouched.
IdqStep idq_reference_at_angle(const IdqControllerState& s, const ThreePhaseSample& i_load, double theta,
                               double v_dc, double v_dc_ref, double dt);

struct PqStep {
    FirstOrderFilterState p_filter;
    ThreePhaseSample i_ref;
    double p;
    double q;
    double p_mean;
};

/// p-q theory: p = v_α·i_α + v_β·i_β, q = v_β·i_α − v_α·i_β; compensates
/// p − p̄ − p_loss and all of q (and the zero sequence).
/// Throws ZeroMainsVector when v_α² + v_β² = 0.
PqStep pq_reference(const ThreePhaseSample& i_load, const ThreePhaseSample& v_pcc,
                    const FirstOrderFilterState& p_filter, double p_loss, double dt);

struct MpptState {
    double step_size = 0.005;
    double last_power = 0.0;
    double last_duty = 0.6;
    int direction = 1;
    double update_period = 0.01;
    double last_voltage = 0.0;
};

struct MpptStep {
    MpptState state;
    double duty;
};

/// Perturb and observe on the boost duty. Called once per update period.
MpptStep mppt_po_step(const MpptState& s, double p_now, double v_now) noexcept;

struct HysteresisBand {
    double half_band = 0.5;
};

/// Per phase: e = i_ref − i_meas; e > +h turns the upper switch on,
/// e < −h turns it off, otherwise the previous state holds.
SwitchTriple hysteresis_step(const ThreePhaseSample& i_ref, const ThreePhaseSample& i_meas,
                             const HysteresisBand& band, const SwitchTriple& prev) noexcept;

}  // namespace sapf::control
