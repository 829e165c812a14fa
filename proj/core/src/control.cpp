#include "sapf/control.hpp"

#include <algorithm>
#include <cmath>

#include "sapf/error.hpp"

namespace sapf::control {

using namespace sapf::phasemath;

PiStep pi_step(const PiState& s, double error, double dt) noexcept {
    PiStep out{s, 0.0};
    const double integral = s.integral + error * dt;
    const double candidate = s.kp * error + s.ki * integral;
    const bool high = candidate > s.out_max;
    const bool low = candidate < s.out_min;
    // Integrate when unsaturated, or when the error unwinds the saturation.
    if ((!high && !low) || (high && error < 0.0) || (low && error > 0.0)) {
        out.state.integral = integral;
    }
    out.out = std::clamp(s.kp * error + s.ki * out.state.integral, s.out_min, s.out_max);
    return out;
}

AngleStep angle_step(const AngleEstimator& s, const ThreePhaseSample& v_pcc, double dt) {
    AngleStep out{s, 0.0};
    AngleEstimator& a = out.state;
    const StationarySample v = clarke(v_pcc);
    if (!a.filter_enabled) {
        a.theta = grid_angle(v);
        out.theta = a.theta;
        return out;
    }
    if (!a.primed) {
        a.alpha.y = v.alpha;
        a.beta.y = v.beta;
        a.primed = true;
    } else {
        a.alpha = lpf_step(a.alpha, v.alpha, dt).state;
        a.beta = lpf_step(a.beta, v.beta, dt).state;
    }
    const double lag = lpf_phase_lag(a.alpha.cutoff_hz, a.nominal_hz, dt);
    a.theta = wrap_angle(grid_angle({a.alpha.y, a.beta.y, 0.0}) + lag);
    out.theta = a.theta;
    return out;
}

IdqStep idq_reference_at_angle(const IdqControllerState& s, const ThreePhaseSample& i_load, double theta,
                               double v_dc, double v_dc_ref, double dt) {
    IdqStep out{s, {}, {}, theta, 0.0, 0.0, 0.0, 0.0};
    const RotatingSample i_dq = park(clarke(i_load), theta);
    const FilterStep mean = lpf_step(s.d_axis_filter, i_dq.d, dt);
    const PiStep loss = pi_step(s.pi, v_dc_ref - v_dc, dt);

    out.state.d_axis_filter = mean.state;
    out.state.pi = loss.state;
    out.i_d = i_dq.d;
    out.i_q = i_dq.q;
    out.i_d_mean = mean.output;
    out.i_loss = loss.out;

    const RotatingSample ref{i_dq.d - mean.output - loss.out, i_dq.q, i_dq.zero};
    out.i_ref = inverse_clarke(inverse_park(ref, theta));
    out.i_source_target = inverse_clarke(inverse_park({mean.output + loss.out, 0.0, 0.0}, theta));
    return out;
}

IdqStep idq_reference(const IdqControllerState& s, const ThreePhaseSample& i_load,
                      const ThreePhaseSample& v_pcc, double v_dc, double v_dc_ref, double dt) {
    const AngleStep angle = angle_step(s.angle, v_pcc, dt);
    IdqStep out = idq_reference_at_angle(s, i_load, angle.theta, v_dc, v_dc_ref, dt);
    out.state.angle = angle.state;
    return out;
}

PqStep pq_reference(const ThreePhaseSample& i_load, const ThreePhaseSample& v_pcc,
                    const FirstOrderFilterState& p_filter, double p_loss, double dt) {
    const StationarySample v = clarke(v_pcc);
    const StationarySample i = clarke(i_load);
    const double norm2 = v.alpha * v.alpha + v.beta * v.beta;
    if (!(norm2 > 0.0)) throw ZeroMainsVector();

    const double p = v.alpha * i.alpha + v.beta * i.beta;
    const double q = v.beta * i.alpha - v.alpha * i.beta;
    const FilterStep mean = lpf_step(p_filter, p, dt);
    const double p_comp = p - mean.output - p_loss;

    const StationarySample ref{(v.alpha * p_comp + v.beta * q) / norm2,
                               (v.beta * p_comp - v.alpha * q) / norm2, i.zero};
    return {mean.state, inverse_clarke(ref), p, q, mean.output};
}

MpptStep mppt_po_step(const MpptState& s, double p_now, double v_now) noexcept {
    MpptStep out{s, 0.0};
    MpptState& m = out.state;
    if (!(p_now > s.last_power)) m.direction = -s.direction;
    out.duty = std::clamp(s.last_duty + m.direction * s.step_size, 0.0, plant::kMaxBoostDuty);
    m.last_duty = out.duty;
    m.last_power = p_now;
    m.last_voltage = v_now;
    return out;
}

SwitchTriple hysteresis_step(const ThreePhaseSample& i_ref, const ThreePhaseSample& i_meas,
                             const HysteresisBand& band, const SwitchTriple& prev) noexcept {
    const double err[3] = {i_ref.a - i_meas.a, i_ref.b - i_meas.b, i_ref.c - i_meas.c};
    SwitchTriple next = prev;
    for (int k = 0; k < 3; ++k) {
        if (err[k] > band.half_band) {
            next[k] = true;
        } else if (err[k] < -band.half_band) {
            next[k] = false;
        }
    }
    return next;
}

}  // namespace sapf::control
