#include "sapf/plant.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>

#include "sapf/error.hpp"

namespace sapf::plant {

namespace {

constexpr double kBoltzmann = 1.380649e-23;
constexpr double kElementaryCharge = 1.602176634e-19;
constexpr double kStcTemperature = 298.15;
constexpr double kStcIrradiance = 1000.0;

double& at(ThreePhaseSample& x, int k) noexcept {
    return k == 0 ? x.a : (k == 1 ? x.b : x.c);
}
double at(const ThreePhaseSample& x, int k) noexcept {
    return k == 0 ? x.a : (k == 1 ? x.b : x.c);
}
ThreePhaseSample unit(int k) noexcept {
    ThreePhaseSample e{};
    at(e, k) = 1.0;
    return e;
}

/// Builds G and h from a derivative function that is affine in v.
BranchAdmittance linearize(const std::function<ThreePhaseSample(const ThreePhaseSample&)>& f) {
    BranchAdmittance y;
    const ThreePhaseSample f0 = f({});
    y.h = {f0.a, f0.b, f0.c};
    for (int j = 0; j < 3; ++j) {
        const ThreePhaseSample fj = f(unit(j));
        for (int i = 0; i < 3; ++i) y.g[i][j] = at(fj, i) - at(f0, i);
    }
    return y;
}

// --- rectifier helpers ------------------------------------------------------

struct RailPotentials {
    double top;
    double bottom;
};

/// Rail potentials of the bridge with reactance l_ac for the given conduction
/// sets. Each conducting phase obeys l_ac·di/dt = v − rail; the rails are tied
/// by l_dc·di_dc/dt = top − bottom − r_dc·i_dc.
RailPotentials rail_potentials(const RectifierLoad& r, const ThreePhaseSample& v) noexcept {
    int n_top = 0;
    int n_bottom = 0;
    double s_top = 0.0;
    double s_bottom = 0.0;
    for (int k = 0; k < 3; ++k) {
        if (r.conduction[k] > 0) {
            ++n_top;
            s_top += at(v, k);
        } else if (r.conduction[k] < 0) {
            ++n_bottom;
            s_bottom += at(v, k);
        }
    }
    const double g = r.l_ac / r.l_dc;
    const double ri = g * r.r_dc * r.i_dc;
    const double rhs_top = s_top + ri;
    const double rhs_bottom = s_bottom - ri;
    const double det = (n_top + g) * (n_bottom + g) - g * g;
    return {((n_bottom + g) * rhs_top + g * rhs_bottom) / det,
            (g * rhs_top + (n_top + g) * rhs_bottom) / det};
}

ThreePhaseSample commutating_derivative(const RectifierLoad& r, const ThreePhaseSample& v) noexcept {
    ThreePhaseSample di{};
    const bool any_top = std::any_of(r.conduction.begin(), r.conduction.end(), [](auto c) { return c > 0; });
    const bool any_bottom = std::any_of(r.conduction.begin(), r.conduction.end(), [](auto c) { return c < 0; });
    if (!any_top || !any_bottom) return di;
    const RailPotentials rails = rail_potentials(r, v);
    for (int k = 0; k < 3; ++k) {
        if (r.conduction[k] > 0) at(di, k) = (at(v, k) - rails.top) / r.l_ac;
        if (r.conduction[k] < 0) at(di, k) = (at(v, k) - rails.bottom) / r.l_ac;
    }
    return di;
}

ThreePhaseSample ideal_bridge_derivative(const RectifierLoad& r, const ThreePhaseSample& v) noexcept {
    ThreePhaseSample di{};
    int top = -1;
    int bottom = -1;
    for (int k = 0; k < 3; ++k) {
        if (r.conduction[k] > 0) top = k;
        if (r.conduction[k] < 0) bottom = k;
    }
    if (top < 0 || bottom < 0) return di;
    const double didt = (at(v, top) - at(v, bottom) - r.r_dc * r.i_dc) / r.l_dc;
    at(di, top) = didt;
    at(di, bottom) = -didt;
    return di;
}

RectifierStep ideal_bridge_step(const RectifierLoad& load, const ThreePhaseSample& v, double dt) {
    RectifierStep out{load, {}};
    RectifierLoad& r = out.load;
    int k_max = 0;
    int k_min = 0;
    for (int k = 1; k < 3; ++k) {
        if (at(v, k) > at(v, k_max)) k_max = k;
        if (at(v, k) < at(v, k_min)) k_min = k;
    }
    const double v_rect = at(v, k_max) - at(v, k_min);
    r.i_dc = std::max(0.0, r.i_dc + dt * (v_rect - r.r_dc * r.i_dc) / r.l_dc);
    r.conduction = {0, 0, 0};
    if (k_max != k_min && (r.i_dc > 0.0 || v_rect > 0.0)) {
        r.conduction[k_max] = 1;
        r.conduction[k_min] = -1;
    }
    r.i_phase = {};
    if (k_max != k_min) {
        at(r.i_phase, k_max) = r.i_dc;
        at(r.i_phase, k_min) = -r.i_dc;
    }
    out.currents = r.i_phase;
    return out;
}

RectifierStep commutating_bridge_step(const RectifierLoad& load, const ThreePhaseSample& v, double dt) {
    RectifierStep out{load, {}};
    RectifierLoad& r = out.load;

    auto count = [&r](int sign) {
        return std::count_if(r.conduction.begin(), r.conduction.end(),
                             [sign](auto c) { return c * sign > 0; });
    };

    if (count(1) == 0 || count(-1) == 0) {
        r.conduction = {0, 0, 0};
        r.i_phase = {};
        r.i_dc = 0.0;
        int k_max = 0;
        int k_min = 0;
        for (int k = 1; k < 3; ++k) {
            if (at(v, k) > at(v, k_max)) k_max = k;
            if (at(v, k) < at(v, k_min)) k_min = k;
        }
        if (at(v, k_max) > at(v, k_min)) {
            r.conduction[k_max] = 1;
            r.conduction[k_min] = -1;
        }
    }

    // Idle phases whose diode becomes forward biased join the conducting set.
    if (count(1) > 0 && count(-1) > 0) {
        for (int pass = 0; pass < 3; ++pass) {
            const RailPotentials rails = rail_potentials(r, v);
            bool changed = false;
            for (int k = 0; k < 3; ++k) {
                if (r.conduction[k] != 0) continue;
                if (at(v, k) > rails.top) {
                    r.conduction[k] = 1;
                    changed = true;
                } else if (at(v, k) < rails.bottom) {
                    r.conduction[k] = -1;
                    changed = true;
                }
            }
            if (!changed) break;
        }
    }

    const ThreePhaseSample di = commutating_derivative(r, v);
    ThreePhaseSample next = r.i_phase + dt * di;

    // Diodes whose current reverses turn off; the overshoot moves to the
    // remaining diode on the same rail so Σ i stays zero.
    for (int sign : {1, -1}) {
        for (int k = 0; k < 3; ++k) {
            if (r.conduction[k] != sign || at(next, k) * sign > 0.0) continue;
            int partner = -1;
            for (int j = 0; j < 3; ++j) {
                if (j != k && r.conduction[j] == sign &&
                    (partner < 0 || at(next, j) * sign > at(next, partner) * sign)) {
                    partner = j;
                }
            }
            if (partner >= 0) at(next, partner) += at(next, k);
            at(next, k) = 0.0;
            r.conduction[k] = 0;
        }
    }
    if (count(1) == 0 || count(-1) == 0) {
        next = {};
        r.conduction = {0, 0, 0};
    }

    r.i_phase = next;
    r.i_dc = 0.0;
    for (int k = 0; k < 3; ++k) {
        if (r.conduction[k] > 0) r.i_dc += at(next, k);
    }
    out.currents = r.i_phase;
    return out;
}

// --- PV helpers -------------------------------------------------------------

double thermal_voltage(double temperature) noexcept {
    return kBoltzmann * temperature / kElementaryCharge;
}

/// n·N_cell·V_t of one module at temperature T.
double modified_ideality(const PVArray& pv, double temperature) noexcept {
    return pv.ideality * pv.cells_per_module * thermal_voltage(temperature);
}

double stc_photo_current(const PVArray& pv) noexcept {
    return pv.i_sc_module * (1.0 + pv.r_s / pv.r_sh);
}

double saturation_current(const PVArray& pv) noexcept {
    const double a = modified_ideality(pv, kStcTemperature);
    const double i_ph = stc_photo_current(pv);
    return (i_ph - pv.v_oc_module / pv.r_sh) / std::expm1(pv.v_oc_module / a);
}

/// Safeguarded Newton on a strictly decreasing f over [lo, hi] with
/// f(lo) ≥ 0 ≥ f(hi).
template <typename F>
double solve_decreasing(F f, double lo, double hi, double x0, double tol, const char* what) {
    double x = std::clamp(x0, lo, hi);
    for (int it = 0; it < 100; ++it) {
        const auto [fx, dfx] = f(x);
        if (std::abs(fx) < tol) return x;
        if (fx > 0.0) {
            lo = x;
        } else {
            hi = x;
        }
        double next = x - fx / dfx;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (next == x) {
            throw PvSolveFailed(std::string(what) + " stalled with residual " + std::to_string(fx));
        }
        x = next;
    }
    throw PvSolveFailed(std::string(what) + " did not converge in 100 iterations");
}

}  // namespace

// --- grid ---------------------------------------------------------------------

double phase_peak_voltage(const GridSource& src) noexcept {
    return std::numbers::sqrt2 * src.v_ll_rms / std::numbers::sqrt3;
}

ThreePhaseSample grid_voltage(const GridSource& src, double t) noexcept {
    const double peak = phase_peak_voltage(src);
    const double wt = phasemath::kTwoPi * src.freq_hz * t;
    constexpr double shift = phasemath::kTwoPi / 3.0;
    return {peak * std::sin(wt), peak * std::sin(wt - shift), peak * std::sin(wt + shift)};
}

// --- rectifier ----------------------------------------------------------------

RectifierStep rectifier_step(const RectifierLoad& load, const ThreePhaseSample& v_pcc, double dt) {
    return load.l_ac > 0.0 ? commutating_bridge_step(load, v_pcc, dt) : ideal_bridge_step(load, v_pcc, dt);
}

BranchAdmittance rectifier_admittance(const RectifierLoad& load) {
    if (load.l_ac > 0.0) {
        return linearize([&load](const ThreePhaseSample& v) { return commutating_derivative(load, v); });
    }
    return linearize([&load](const ThreePhaseSample& v) { return ideal_bridge_derivative(load, v); });
}

// --- linear load ---------------------------------------------------------------

LinearLoadStep linear_load_step(const LinearLoad& load, const ThreePhaseSample& v_pcc, double dt) {
    LinearLoadStep out{load, {}};
    if (load.l > 0.0) {
        out.load.i_abc = load.i_abc + (dt / load.l) * (v_pcc - load.r * load.i_abc);
    } else {
        out.load.i_abc = (1.0 / load.r) * v_pcc;
    }
    out.currents = out.load.i_abc;
    return out;
}

BranchAdmittance linear_load_admittance(const LinearLoad& load) {
    BranchAdmittance y;
    if (load.l <= 0.0) return y;
    for (int k = 0; k < 3; ++k) {
        y.g[k][k] = 1.0 / load.l;
        y.h[k] = -load.r * at(load.i_abc, k) / load.l;
    }
    return y;
}

// --- PV -------------------------------------------------------------------------

double pv_photo_current(const PVArray& pv) noexcept {
    return stc_photo_current(pv) * pv.irradiance / kStcIrradiance;
}

double pv_current(const PVArray& pv, double v_array) {
    const double vm = std::max(0.0, v_array) / pv.n_series;
    const double a = modified_ideality(pv, pv.temperature);
    const double i0 = saturation_current(pv);
    const double i_ph = pv_photo_current(pv);

    if (pv.r_s == 0.0) {
        return pv.n_parallel * (i_ph - i0 * std::expm1(vm / a) - vm / pv.r_sh);
    }
    auto f = [&](double i) {
        const double vd = vm + i * pv.r_s;
        const double e = std::exp(vd / a);
        const double value = i_ph - i0 * (e - 1.0) - vd / pv.r_sh - i;
        const double slope = -i0 * e * pv.r_s / a - pv.r_s / pv.r_sh - 1.0;
        return std::pair{value, slope};
    };
    const double lo = -vm / pv.r_s;
    const double hi = i_ph;
    const double im = solve_decreasing(f, lo, hi, hi, 1e-9 / pv.n_parallel, "pv current");
    return pv.n_parallel * im;
}

double pv_voltage(const PVArray& pv, double i_array) {
    const double im = i_array / pv.n_parallel;
    const double i_ph = pv_photo_current(pv);
    if (im >= i_ph) return 0.0;
    const double a = modified_ideality(pv, pv.temperature);
    const double i0 = saturation_current(pv);
    auto g = [&](double vd) {
        const double e = std::exp(vd / a);
        return std::pair{i_ph - i0 * (e - 1.0) - vd / pv.r_sh - im, -i0 * e / a - 1.0 / pv.r_sh};
    };
    const double hi = a * std::log1p((i_ph - im) / i0);
    const double vd = solve_decreasing(g, 0.0, hi, hi, 1e-10, "pv voltage");
    return pv.n_series * std::max(0.0, vd - im * pv.r_s);
}

double pv_open_circuit_voltage(const PVArray& pv) {
    return pv_voltage(pv, 0.0);
}

MppScan pv_mpp_scan(const PVArray& pv) {
    constexpr int kSteps = 10000;
    const double v_oc = pv_open_circuit_voltage(pv);
    MppScan best{0.0, 0.0};
    for (int k = 0; k <= kSteps; ++k) {
        const double v = v_oc * k / kSteps;
        const double p = v * pv_current(pv, v);
        if (p > best.p_mpp) best = {v, p};
    }
    return best;
}

// --- boost ------------------------------------------------------------------------

BoostStep boost_step(const BoostConverter& b, double v_in, double v_dc, double dt) {
    BoostStep out{b, 0.0, 0.0};
    const double duty = std::clamp(b.duty, 0.0, kMaxBoostDuty);
    out.converter.duty = duty;
    out.converter.i_l = std::max(0.0, b.i_l + dt * (v_in - (1.0 - duty) * v_dc) / b.l);
    out.i_l_mean = 0.5 * (b.i_l + out.converter.i_l);
    out.i_out = (1.0 - duty) * out.i_l_mean;
    return out;
}

// --- VSC -----------------------------------------------------------------------

ThreePhaseSample vsc_leg_voltages(const VscSapf& v) noexcept {
    auto leg = [&v](bool upper) { return upper ? 0.5 * v.v_dc : -0.5 * v.v_dc; };
    return {leg(v.switches[0]), leg(v.switches[1]), leg(v.switches[2])};
}

VscStep vsc_step(const VscSapf& v, const ThreePhaseSample& v_pcc, double i_dc_in, double dt) {
    if (!(v.v_dc > 0.0)) throw DcLinkCollapsed();
    VscStep out{v, 0.0, 0.0, {}};
    VscSapf& next = out.vsc;
    if (v.blocked) {
        next.i_f = {};
    } else {
        const ThreePhaseSample v_leg = vsc_leg_voltages(v);
        next.i_f = v.i_f + (dt / v.l_f) * (v_leg - v_pcc - v.r_f * v.i_f);
        out.i_f_mean = 0.5 * (v.i_f + next.i_f);
        for (int k = 0; k < 3; ++k) {
            const double s = v.switches[k] ? 0.5 : -0.5;
            out.i_conv += s * at(out.i_f_mean, k);
        }
        out.p_ac = v.v_dc * out.i_conv;
    }
    next.v_dc = v.v_dc + dt * (i_dc_in - out.i_conv) / v.c_dc;
    if (!(next.v_dc > 0.0)) throw DcLinkCollapsed();
    return out;
}

VscStep vsc_ideal_step(const VscSapf& v, const ThreePhaseSample& i_inject,
                       const ThreePhaseSample& v_pcc, double i_dc_in, double dt) {
    if (!(v.v_dc > 0.0)) throw DcLinkCollapsed();
    VscStep out{v, 0.0, 0.0, {}};
    out.vsc.i_f = v.blocked ? ThreePhaseSample{} : i_inject;
    out.i_f_mean = out.vsc.i_f;
    out.p_ac = v_pcc.a * out.i_f_mean.a + v_pcc.b * out.i_f_mean.b + v_pcc.c * out.i_f_mean.c;
    out.i_conv = out.p_ac / v.v_dc;
    out.vsc.v_dc = v.v_dc + dt * (i_dc_in - out.i_conv) / v.c_dc;
    if (!(out.vsc.v_dc > 0.0)) throw DcLinkCollapsed();
    return out;
}

BranchAdmittance vsc_admittance(const VscSapf& v) {
    BranchAdmittance y;
    if (v.blocked) return y;
    const ThreePhaseSample v_leg = vsc_leg_voltages(v);
    for (int k = 0; k < 3; ++k) {
        y.g[k][k] = -1.0 / v.l_f;
        y.h[k] = (at(v_leg, k) - v.r_f * at(v.i_f, k)) / v.l_f;
    }
    return y;
}

}  // namespace sapf::plant
