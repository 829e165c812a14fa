#include "sapf/engine.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>
#include <type_traits>

#include "sapf/error.hpp"

namespace sapf::engine {

using phasemath::StationarySample;
using plant::BranchAdmittance;
using plant::Matrix3;

namespace {

constexpr double kMaxSwitchedDt = 10e-6;

// --- parameter registry --------------------------------------------------------

struct Entry {
    ParameterInfo info;
    std::function<bool(SystemParams&, double)> set;  // false: section absent
    std::function<std::optional<double>(const SystemParams&)> get;
};

template <class T>
double to_double(T v) {
    if constexpr (std::is_enum_v<T>) {
        return static_cast<double>(static_cast<int>(v));
    } else {
        return static_cast<double>(v);
    }
}

template <class T>
T from_double(const std::string& path, double x) {
    if constexpr (std::is_same_v<T, double>) {
        return x;
    } else if constexpr (std::is_same_v<T, bool>) {
        if (x != 0.0 && x != 1.0) throw ValidationError(path, "expects 0 or 1");
        return x == 1.0;
    } else if constexpr (std::is_enum_v<T>) {
        if (x != 0.0 && x != 1.0) throw ValidationError(path, "expects 0 or 1");
        return static_cast<T>(static_cast<int>(x));
    } else {
        if (x != std::round(x) || std::abs(x) > 1e9) throw ValidationError(path, "expects an integer");
        return static_cast<T>(x);
    }
}

template <class T>
ValueKind kind_of() {
    if constexpr (std::is_same_v<T, double>) {
        return ValueKind::real;
    } else if constexpr (std::is_same_v<T, bool>) {
        return ValueKind::boolean;
    } else if constexpr (std::is_enum_v<T>) {
        return ValueKind::choice;
    } else {
        return ValueKind::integer;
    }
}

template <class Section, class T>
Entry field(std::string path, std::string unit, bool event_settable, Section* (*section)(SystemParams&),
            T Section::*member, std::vector<std::string> choices = {}) {
    Entry e{{path, std::move(unit), event_settable, kind_of<T>(), std::move(choices)}, {}, {}};
    e.set = [section, member, path](SystemParams& p, double x) {
        Section* s = section(p);
        if (s == nullptr) return false;
        s->*member = from_double<T>(path, x);
        return true;
    };
    e.get = [section, member](const SystemParams& p) -> std::optional<double> {
        Section* s = section(const_cast<SystemParams&>(p));
        if (s == nullptr) return std::nullopt;
        return to_double(s->*member);
    };
    return e;
}

template <class T>
T* opt(std::optional<T>& o) {
    return o ? &*o : nullptr;
}

plant::GridSource* grid(SystemParams& p) { return &p.grid; }
RectifierParams* rect(SystemParams& p) { return opt(p.rectifier); }
LinearLoadParams* lin(SystemParams& p) { return opt(p.linear); }
SapfParams* sapf(SystemParams& p) { return opt(p.sapf); }
PiParams* pi(SystemParams& p) { return p.sapf ? &p.sapf->pi : nullptr; }
PvParams* pv(SystemParams& p) { return opt(p.pv); }
plant::PVArray* pv_array(SystemParams& p) { return p.pv ? &p.pv->array : nullptr; }
MpptParams* mppt(SystemParams& p) { return p.pv ? &p.pv->mppt : nullptr; }

const std::vector<Entry>& registry() {
    static const std::vector<Entry> entries = [] {
        std::vector<Entry> e;
        e.push_back(field("grid.v_ll_rms", "V", true, grid, &plant::GridSource::v_ll_rms));
        e.push_back(field("grid.freq_hz", "Hz", false, grid, &plant::GridSource::freq_hz));
        e.push_back(field("grid.r_s", "ohm", true, grid, &plant::GridSource::r_s));
        e.push_back(field("grid.l_s", "H", false, grid, &plant::GridSource::l_s));

        e.push_back(field("loads.rectifier.r_dc", "ohm", true, rect, &RectifierParams::r_dc));
        e.push_back(field("loads.rectifier.l_dc", "H", true, rect, &RectifierParams::l_dc));
        e.push_back(field("loads.rectifier.l_ac", "H", false, rect, &RectifierParams::l_ac));
        e.push_back(field("loads.linear.r", "ohm", true, lin, &LinearLoadParams::r));
        e.push_back(field("loads.linear.l", "H", false, lin, &LinearLoadParams::l));

        e.push_back(field("sapf.enabled", "", true, sapf, &SapfParams::enabled));
        e.push_back(field("sapf.mode", "", false, sapf, &SapfParams::mode, {"switched", "ideal"}));
        e.push_back(field("sapf.reference", "", false, sapf, &SapfParams::reference, {"idq", "pq"}));
        e.push_back(field("sapf.l_f", "H", false, sapf, &SapfParams::l_f));
        e.push_back(field("sapf.r_f", "ohm", false, sapf, &SapfParams::r_f));
        e.push_back(field("sapf.c_dc", "F", false, sapf, &SapfParams::c_dc));
        e.push_back(field("sapf.v_dc_ref", "V", true, sapf, &SapfParams::v_dc_ref));
        e.push_back(field("sapf.v_dc_init", "V", false, sapf, &SapfParams::v_dc_init));
        e.push_back(field("sapf.lpf_cutoff_hz", "Hz", true, sapf, &SapfParams::lpf_cutoff_hz));
        e.push_back(field("sapf.angle_filter", "", false, sapf, &SapfParams::angle_filter));
        e.push_back(field("sapf.angle_filter_cutoff_hz", "Hz", false, sapf, &SapfParams::angle_filter_cutoff_hz));
        e.push_back(field("sapf.half_band", "A", true, sapf, &SapfParams::half_band));
        e.push_back(field("sapf.pi.kp", "A/V", true, pi, &PiParams::kp));
        e.push_back(field("sapf.pi.ki", "A/(V s)", true, pi, &PiParams::ki));
        e.push_back(field("sapf.pi.out_min", "A", true, pi, &PiParams::out_min));
        e.push_back(field("sapf.pi.out_max", "A", true, pi, &PiParams::out_max));

        e.push_back(field("pv.n_series", "", false, pv_array, &plant::PVArray::n_series));
        e.push_back(field("pv.n_parallel", "", false, pv_array, &plant::PVArray::n_parallel));
        e.push_back(field("pv.i_sc_module", "A", false, pv_array, &plant::PVArray::i_sc_module));
        e.push_back(field("pv.v_oc_module", "V", false, pv_array, &plant::PVArray::v_oc_module));
        e.push_back(field("pv.cells_per_module", "", false, pv_array, &plant::PVArray::cells_per_module));
        e.push_back(field("pv.ideality", "", false, pv_array, &plant::PVArray::ideality));
        e.push_back(field("pv.r_s", "ohm", false, pv_array, &plant::PVArray::r_s));
        e.push_back(field("pv.r_sh", "ohm", false, pv_array, &plant::PVArray::r_sh));
        e.push_back(field("pv.irradiance", "W/m^2", true, pv_array, &plant::PVArray::irradiance));
        e.push_back(field("pv.temperature", "K", true, pv_array, &plant::PVArray::temperature));
        e.push_back(field("pv.boost.l", "H", false, pv, &PvParams::boost_l));
        e.push_back(field("pv.boost.duty_init", "", false, pv, &PvParams::duty_init));
        e.push_back(field("pv.mppt.enabled", "", true, mppt, &MpptParams::enabled));
        e.push_back(field("pv.mppt.step", "", true, mppt, &MpptParams::step));
        e.push_back(field("pv.mppt.period", "s", false, mppt, &MpptParams::period));
        return e;
    }();
    return entries;
}

const Entry* find_entry(std::string_view path) {
    for (const Entry& e : registry()) {
        if (e.info.path == path) return &e;
    }
    return nullptr;
}

std::string section_of(std::string_view path) {
    const auto dot = path.rfind('.');
    return std::string(path.substr(0, dot));
}

// --- validation ------------------------------------------------------------

void require(bool ok, const std::string& path, const std::string& message) {
    if (!ok) throw ValidationError(path, message);
}

void positive(double x, const std::string& path) { require(x > 0.0 && std::isfinite(x), path, "must be > 0"); }
void non_negative(double x, const std::string& path) {
    require(x >= 0.0 && std::isfinite(x), path, "must be >= 0");
}

void validate_system(const SystemParams& p, double dt) {
    positive(p.grid.v_ll_rms, "grid.v_ll_rms");
    positive(p.grid.freq_hz, "grid.freq_hz");
    non_negative(p.grid.r_s, "grid.r_s");
    non_negative(p.grid.l_s, "grid.l_s");

    if (p.rectifier) {
        positive(p.rectifier->r_dc, "loads.rectifier.r_dc");
        positive(p.rectifier->l_dc, "loads.rectifier.l_dc");
        non_negative(p.rectifier->l_ac, "loads.rectifier.l_ac");
    }
    if (p.linear) {
        positive(p.linear->r, "loads.linear.r");
        non_negative(p.linear->l, "loads.linear.l");
        require(p.linear->l > 0.0 || p.grid.l_s == 0.0, "loads.linear.l",
                "a resistive linear load requires grid.l_s = 0");
    }

    if (p.sapf) {
        const SapfParams& s = *p.sapf;
        require(s.mode == InjectionMode::ideal || dt <= kMaxSwitchedDt * (1.0 + 1e-9), "sim.dt",
                "must be <= 10 us with a switched vsc");
        positive(s.l_f, "sapf.l_f");
        non_negative(s.r_f, "sapf.r_f");
        positive(s.c_dc, "sapf.c_dc");
        positive(s.v_dc_ref, "sapf.v_dc_ref");
        positive(s.v_dc_init, "sapf.v_dc_init");
        positive(s.lpf_cutoff_hz, "sapf.lpf_cutoff_hz");
        require(s.lpf_cutoff_hz < 0.5 / dt, "sapf.lpf_cutoff_hz", "must be below the Nyquist frequency");
        positive(s.angle_filter_cutoff_hz, "sapf.angle_filter_cutoff_hz");
        require(s.angle_filter_cutoff_hz < 0.5 / dt, "sapf.angle_filter_cutoff_hz",
                "must be below the Nyquist frequency");
        positive(s.half_band, "sapf.half_band");
        non_negative(s.pi.kp, "sapf.pi.kp");
        non_negative(s.pi.ki, "sapf.pi.ki");
        require(s.pi.out_min < s.pi.out_max, "sapf.pi.out_min", "must be below sapf.pi.out_max");
    }

    if (p.pv) {
        require(p.sapf.has_value(), "pv", "requires a sapf section (the array feeds the dc link)");
        const plant::PVArray& a = p.pv->array;
        require(a.n_series >= 1, "pv.n_series", "must be >= 1");
        require(a.n_parallel >= 1, "pv.n_parallel", "must be >= 1");
        require(a.cells_per_module >= 1, "pv.cells_per_module", "must be >= 1");
        positive(a.i_sc_module, "pv.i_sc_module");
        positive(a.v_oc_module, "pv.v_oc_module");
        require(a.ideality >= 1.0 && a.ideality <= 2.0, "pv.ideality", "must lie in [1, 2]");
        non_negative(a.r_s, "pv.r_s");
        positive(a.r_sh, "pv.r_sh");
        non_negative(a.irradiance, "pv.irradiance");
        positive(a.temperature, "pv.temperature");
        positive(p.pv->boost_l, "pv.boost.l");
        require(p.pv->duty_init >= 0.0 && p.pv->duty_init <= plant::kMaxBoostDuty, "pv.boost.duty_init",
                "must lie in [0, 0.95]");
        require(p.pv->mppt.step > 0.0 && p.pv->mppt.step <= 0.02, "pv.mppt.step", "must lie in (0, 0.02]");
        positive(p.pv->mppt.period, "pv.mppt.period");

        // Explicit boost-inductor update across the array's steepest slope.
        const double r_max = a.r_sh * a.n_series / a.n_parallel + a.r_s * a.n_series / a.n_parallel;
        require(dt * r_max / p.pv->boost_l < 2.0, "pv.boost.l",
                "too small for sim.dt: dt*R_sh(array)/l must be < 2");
    }
}

/// Boost-inductor time constant at the STC maximum power point.
double boost_time_constant(const PvParams& pv) {
    plant::PVArray stc = pv.array;
    stc.irradiance = 1000.0;
    const plant::MppScan mpp = plant::pv_mpp_scan(stc);
    const double i_mpp = mpp.p_mpp / mpp.v_mpp;
    return pv.boost_l * i_mpp / mpp.v_mpp;
}

// --- PCC solve -----------------------------------------------------------------

double at(const ThreePhaseSample& x, int k) noexcept { return k == 0 ? x.a : (k == 1 ? x.b : x.c); }

ThreePhaseSample solve3(Matrix3 m, std::array<double, 3> b) {
    for (int col = 0; col < 3; ++col) {
        int pivot = col;
        for (int r = col + 1; r < 3; ++r) {
            if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
        }
        std::swap(m[col], m[pivot]);
        std::swap(b[col], b[pivot]);
        if (m[col][col] == 0.0) throw Error("singular pcc admittance matrix");
        for (int r = col + 1; r < 3; ++r) {
            const double f = m[r][col] / m[col][col];
            for (int c = col; c < 3; ++c) m[r][c] -= f * m[col][c];
            b[r] -= f * b[col];
        }
    }
    std::array<double, 3> x{};
    for (int r = 2; r >= 0; --r) {
        double s = b[r];
        for (int c = r + 1; c < 3; ++c) s -= m[r][c] * x[c];
        x[r] = s / m[r][r];
    }
    return {x[0], x[1], x[2]};
}

void accumulate(BranchAdmittance& sum, const BranchAdmittance& y, double sign) {
    for (int i = 0; i < 3; ++i) {
        sum.h[i] += sign * y.h[i];
        for (int j = 0; j < 3; ++j) sum.g[i][j] += sign * y.g[i][j];
    }
}

double dot(const ThreePhaseSample& x, const ThreePhaseSample& y) noexcept {
    return x.a * y.a + x.b * y.b + x.c * y.c;
}

bool sapf_on(const SimState& s) { return s.params.sapf && s.params.sapf->enabled; }
bool ideal_mode(const SimState& s) { return s.params.sapf && s.params.sapf->mode == InjectionMode::ideal; }
bool resistive_linear(const SimState& s) { return s.params.linear && s.params.linear->l == 0.0; }

/// Copies parameter values (never state) from s.params into the components.
void sync_components(SimState& s) {
    const SystemParams& p = s.params;
    if (p.rectifier) {
        s.rectifier.r_dc = p.rectifier->r_dc;
        s.rectifier.l_dc = p.rectifier->l_dc;
        s.rectifier.l_ac = p.rectifier->l_ac;
    }
    if (p.linear) {
        s.linear.r = p.linear->r;
        s.linear.l = p.linear->l;
    }
    if (p.sapf) {
        const SapfParams& f = *p.sapf;
        s.vsc.l_f = f.l_f;
        s.vsc.r_f = f.r_f;
        s.vsc.c_dc = f.c_dc;
        s.vsc.blocked = !f.enabled;
        s.idq.angle.filter_enabled = f.angle_filter;
        s.idq.angle.nominal_hz = p.grid.freq_hz;
        s.idq.angle.alpha.cutoff_hz = f.angle_filter_cutoff_hz;
        s.idq.angle.beta.cutoff_hz = f.angle_filter_cutoff_hz;
        s.idq.d_axis_filter.cutoff_hz = f.lpf_cutoff_hz;
        s.pq_filter.cutoff_hz = f.lpf_cutoff_hz;
        s.idq.pi.kp = f.pi.kp;
        s.idq.pi.ki = f.pi.ki;
        s.idq.pi.out_min = f.pi.out_min;
        s.idq.pi.out_max = f.pi.out_max;
    }
    if (p.pv) {
        s.boost.l = p.pv->boost_l;
        s.mppt.step_size = p.pv->mppt.step;
        s.mppt.update_period = p.pv->mppt.period;
    }
}

std::string format_value(double x) {
    std::ostringstream os;
    os.precision(12);
    os << x;
    return os.str();
}

struct ControlOutput {
    ThreePhaseSample i_ref{};
    double theta = 0.0;
    double i_d = 0.0;
    double i_q = 0.0;
    double i_d_mean = 0.0;
    double i_loss = 0.0;
};

ControlOutput run_controller(SimState& s, const ThreePhaseSample& i_load, double dt) {
    const SapfParams& f = *s.params.sapf;
    const bool on = f.enabled;
    // While disabled the loop sees zero error so the integrator holds.
    const double v_dc = on ? s.vsc.v_dc : f.v_dc_ref;
    ControlOutput c;

    if (f.reference == ReferenceMethod::idq) {
        control::IdqStep st;
        try {
            st = control::idq_reference(s.idq, i_load, s.v_pcc_prev, v_dc, f.v_dc_ref, dt);
        } catch (const ZeroMainsVector&) {
            st = control::idq_reference_at_angle(s.idq, i_load, s.idq.angle.theta, v_dc, f.v_dc_ref, dt);
        }
        s.idq = st.state;
        c = {st.i_ref, st.theta, st.i_d, st.i_q, st.i_d_mean, st.i_loss};
    } else {
        const control::PiStep loss = control::pi_step(s.idq.pi, f.v_dc_ref - v_dc, dt);
        s.idq.pi = loss.state;
        c.i_loss = loss.out;
        const StationarySample v = phasemath::clarke(s.v_pcc_prev);
        const double v_mag = std::hypot(v.alpha, v.beta);
        try {
            // i_loss is a d-axis current; |v_αβ|·i_loss is its share of p.
            const control::PqStep st =
                control::pq_reference(i_load, s.v_pcc_prev, s.pq_filter, v_mag * c.i_loss, dt);
            s.pq_filter = st.p_filter;
            c.i_ref = st.i_ref;
            c.theta = phasemath::grid_angle(v);
        } catch (const ZeroMainsVector&) {
            c.i_ref = {};
        }
    }
    if (!on) c.i_ref = {};
    return c;
}

ThreePhaseSample solve_pcc(const SimState& s, const ThreePhaseSample& e, const ThreePhaseSample& i_rect,
                           const ThreePhaseSample& i_lin_state, const ThreePhaseSample& i_f,
                           bool finite_difference, double dt) {
    const plant::GridSource& g = s.params.grid;
    if (g.l_s == 0.0) {
        const double g_res = resistive_linear(s) ? 1.0 / s.params.linear->r : 0.0;
        const ThreePhaseSample rhs = e - g.r_s * (i_rect + i_lin_state - i_f);
        return (1.0 / (1.0 + g.r_s * g_res)) * rhs;
    }
    const ThreePhaseSample i_s = i_rect + i_lin_state - i_f;
    if (finite_difference) {
        if (!s.source_continuous) return e - g.r_s * i_s;
        return e - g.r_s * i_s - (g.l_s / dt) * (i_s - s.i_source_prev);
    }
    // Derivative balance with switch and diode states frozen over the step:
    // (e − r_s·i_s − v)/l_s = Σ di_branch/dt = G·v + h.
    BranchAdmittance y;
    if (s.params.rectifier) accumulate(y, plant::rectifier_admittance(s.rectifier), 1.0);
    if (s.params.linear) accumulate(y, plant::linear_load_admittance(s.linear), 1.0);
    if (s.params.sapf) accumulate(y, plant::vsc_admittance(s.vsc), -1.0);
    Matrix3 m = y.g;
    std::array<double, 3> b{};
    for (int k = 0; k < 3; ++k) {
        m[k][k] += 1.0 / g.l_s;
        b[k] = (at(e, k) - g.r_s * at(i_s, k)) / g.l_s - y.h[k];
    }
    return solve3(m, b);
}

void set(Frame& f, Channel c, double x) { f[static_cast<std::size_t>(c)] = x; }
void set3(Frame& f, Channel first, const ThreePhaseSample& x) {
    const auto i = static_cast<std::size_t>(first);
    f[i] = x.a;
    f[i + 1] = x.b;
    f[i + 2] = x.c;
}

template <class F>
auto guarded(double t, const char* component, F&& fn) {
    try {
        return fn();
    } catch (const RuntimeAbort&) {
        throw;
    } catch (const Error& e) {
        throw RuntimeAbort(t, component, e.what());
    }
}

}  // namespace

// --- parameters --------------------------------------------------------------

const std::vector<ParameterInfo>& parameters() {
    static const std::vector<ParameterInfo> infos = [] {
        std::vector<ParameterInfo> out;
        for (const Entry& e : registry()) out.push_back(e.info);
        out.push_back({"sim.dt", "s", false, ValueKind::real, {}});
        out.push_back({"sim.t_end", "s", false, ValueKind::real, {}});
        return out;
    }();
    return infos;
}

void set_parameter(Scenario& sc, std::string_view path, double value) {
    if (!std::isfinite(value)) throw ValidationError(std::string(path), "value must be finite");
    if (path == "sim.dt") {
        sc.sim.dt = value;
        return;
    }
    if (path == "sim.t_end") {
        sc.sim.t_end = value;
        return;
    }
    const Entry* e = find_entry(path);
    if (e == nullptr) throw ValidationError(std::string(path), "unknown parameter path");
    if (!e->set(sc.system, value)) {
        throw ValidationError(std::string(path), "section " + section_of(path) + " is absent");
    }
}

double get_parameter(const Scenario& sc, std::string_view path) {
    if (path == "sim.dt") return sc.sim.dt;
    if (path == "sim.t_end") return sc.sim.t_end;
    const Entry* e = find_entry(path);
    if (e == nullptr) throw ValidationError(std::string(path), "unknown parameter path");
    const auto v = e->get(sc.system);
    if (!v) throw ValidationError(std::string(path), "section " + section_of(path) + " is absent");
    return *v;
}

// --- channels ------------------------------------------------------------------

const std::array<std::string_view, kChannelCount>& channel_names() {
    static const std::array<std::string_view, kChannelCount> names{
        "v_sa", "v_sb", "v_sc",
        "e_a", "e_b", "e_c",
        "i_sa", "i_sb", "i_sc",
        "i_la", "i_lb", "i_lc",
        "i_rect_a", "i_rect_b", "i_rect_c",
        "i_lin_a", "i_lin_b", "i_lin_c",
        "i_fa", "i_fb", "i_fc",
        "i_ref_a", "i_ref_b", "i_ref_c",
        "sw_a", "sw_b", "sw_c",
        "theta", "i_d", "i_q", "i_d_mean", "i_loss",
        "v_dc", "i_dc", "i_dc_in",
        "v_pv", "i_pv", "p_pv", "duty",
        "p_source", "p_rect", "p_lin", "p_filter_loss", "p_conv", "e_storage",
    };
    return names;
}

std::optional<Channel> find_channel(std::string_view name) {
    const auto& names = channel_names();
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return static_cast<Channel>(i);
    }
    return std::nullopt;
}

const std::vector<std::string>& default_channels() {
    static const std::vector<std::string> names{
        "i_sa", "i_sb", "i_sc", "v_sa", "v_sb", "v_sc", "i_la", "i_lb", "i_lc",
        "i_fa", "i_fb", "i_fc", "v_dc", "v_pv", "i_pv", "p_pv", "duty",
    };
    return names;
}

// --- validation ------------------------------------------------------------

double snap_dt(double dt, double freq_hz) {
    const double n = std::max(1.0, std::round(1.0 / (freq_hz * dt)));
    return 1.0 / (freq_hz * n);
}

Scenario resolve(const Scenario& sc) {
    Scenario r = sc;
    positive(sc.sim.dt, "sim.dt");
    positive(sc.system.grid.freq_hz, "grid.freq_hz");
    r.sim.dt = snap_dt(sc.sim.dt, sc.system.grid.freq_hz);
    positive(sc.sim.t_end, "sim.t_end");
    require(sc.sim.t_end >= r.sim.dt, "sim.t_end", "must cover at least one step");

    validate_system(r.system, r.sim.dt);
    if (r.system.pv) {
        const double tau = boost_time_constant(*r.system.pv);
        require(r.system.pv->mppt.period >= 10.0 * tau, "pv.mppt.period",
                "must be at least 10x the boost time constant (" + format_value(tau) + " s)");
        require(r.system.pv->mppt.period >= 2.0 * r.sim.dt, "pv.mppt.period", "must span at least two steps");
    }

    SystemParams running = r.system;
    for (std::size_t i = 0; i < r.events.size(); ++i) {
        const Event& ev = r.events[i];
        const std::string key = "events[" + std::to_string(i) + "]";
        require(std::isfinite(ev.time) && ev.time >= 0.0 && ev.time <= r.sim.t_end, key + ".t",
                "must lie in [0, sim.t_end]");
        require(i == 0 || ev.time >= r.events[i - 1].time, key + ".t", "events must be sorted by time");
        const Entry* e = find_entry(ev.path);
        require(e != nullptr, key + ".path", "unknown parameter path '" + ev.path + "'");
        require(e->info.event_settable, key + ".path", "'" + ev.path + "' cannot change during a run");
        try {
            if (!e->set(running, ev.value)) {
                throw ValidationError(ev.path, "section " + section_of(ev.path) + " is absent");
            }
            validate_system(running, r.sim.dt);
        } catch (const ValidationError& err) {
            throw ValidationError(key, err.what());
        }
    }

    if (r.record.empty()) r.record = default_channels();
    for (std::size_t i = 0; i < r.record.size(); ++i) {
        const std::string key = "record[" + std::to_string(i) + "]";
        require(find_channel(r.record[i]).has_value(), key, "unknown channel '" + r.record[i] + "'");
        for (std::size_t j = 0; j < i; ++j) require(r.record[j] != r.record[i], key, "duplicate channel");
    }
    return r;
}

// --- state ---------------------------------------------------------------------

double time_of(const SimState& s, const Scenario& sc) noexcept {
    return static_cast<double>(s.step) * sc.sim.dt;
}

std::int64_t total_steps(const Scenario& resolved) noexcept {
    return static_cast<std::int64_t>(std::floor(resolved.sim.t_end / resolved.sim.dt + 1e-9));
}

std::int64_t event_step(double time, double dt) noexcept {
    return static_cast<std::int64_t>(std::ceil(time / dt - 1e-9));
}

SimState initial_state(const Scenario& resolved) {
    SimState s;
    s.params = resolved.system;
    if (s.params.sapf) s.vsc.v_dc = s.params.sapf->v_dc_init;
    if (s.params.pv) {
        s.boost.duty = s.params.pv->duty_init;
        s.mppt.last_duty = s.params.pv->duty_init;
    }
    sync_components(s);
    return s;
}

void apply_event(SimState& s, const Event& e) {
    const Entry* entry = find_entry(e.path);
    if (entry == nullptr) throw ValidationError(e.path, "unknown parameter path");
    if (!entry->set(s.params, e.value)) {
        throw ValidationError(e.path, "section " + section_of(e.path) + " is absent");
    }
    sync_components(s);
}

void step(SimState& s, const Scenario& sc, Frame* frame_out) {
    const double dt = sc.sim.dt;
    const double t = time_of(s, sc);

    while (s.next_event < sc.events.size() && event_step(sc.events[s.next_event].time, dt) <= s.step) {
        const Event& ev = sc.events[s.next_event];
        apply_event(s, ev);
        s.log.push_back("t=" + format_value(t) + " event " + ev.path + " = " + format_value(ev.value));
        ++s.next_event;
    }

    const SystemParams& p = s.params;
    const bool has_sapf = p.sapf.has_value();
    const bool on = sapf_on(s);
    const bool ideal = ideal_mode(s);
    if (on && !s.sapf_was_enabled) {
        s.source_continuous = false;
        s.mppt_counter = 0;
        s.mppt_energy = 0.0;
        s.mppt_volt_time = 0.0;
        if (p.pv) s.boost.duty = s.mppt.last_duty;
    }

    const ThreePhaseSample e = plant::grid_voltage(p.grid, t);
    const ThreePhaseSample i_rect = p.rectifier ? s.rectifier.i_phase : ThreePhaseSample{};
    const bool resistive = resistive_linear(s);
    ThreePhaseSample i_lin_state{};
    if (p.linear && !resistive) i_lin_state = s.linear.i_abc;
    const ThreePhaseSample i_lin_meas =
        resistive ? (1.0 / p.linear->r) * s.v_pcc_prev : i_lin_state;

    ControlOutput ctl;
    if (has_sapf) {
        ctl = guarded(t, "control", [&] { return run_controller(s, i_rect + i_lin_meas, dt); });
        if (on && !ideal) {
            s.vsc.switches = control::hysteresis_step(ctl.i_ref, s.vsc.i_f, {p.sapf->half_band}, s.vsc.switches);
        }
    }
    const ThreePhaseSample i_f = (on && ideal) ? ctl.i_ref : (has_sapf && on ? s.vsc.i_f : ThreePhaseSample{});

    const ThreePhaseSample v =
        guarded(t, "pcc", [&] { return solve_pcc(s, e, i_rect, i_lin_state, i_f, on && ideal, dt); });
    const ThreePhaseSample i_lin = resistive ? (1.0 / p.linear->r) * v : i_lin_state;
    const ThreePhaseSample i_load = i_rect + i_lin;
    const ThreePhaseSample i_s = i_load - i_f;

    Frame f{};
    set3(f, Channel::v_sa, v);
    set3(f, Channel::e_a, e);
    set3(f, Channel::i_sa, i_s);
    set3(f, Channel::i_la, i_load);
    set3(f, Channel::i_rect_a, i_rect);
    set3(f, Channel::i_lin_a, i_lin);
    set3(f, Channel::i_fa, i_f);
    set3(f, Channel::i_ref_a, ctl.i_ref);
    const bool show_switches = has_sapf && on && !ideal;
    set(f, Channel::sw_a, show_switches && s.vsc.switches[0] ? 1.0 : 0.0);
    set(f, Channel::sw_b, show_switches && s.vsc.switches[1] ? 1.0 : 0.0);
    set(f, Channel::sw_c, show_switches && s.vsc.switches[2] ? 1.0 : 0.0);
    set(f, Channel::theta, ctl.theta);
    set(f, Channel::i_d, ctl.i_d);
    set(f, Channel::i_q, ctl.i_q);
    set(f, Channel::i_d_mean, ctl.i_d_mean);
    set(f, Channel::i_loss, ctl.i_loss);
    set(f, Channel::v_dc, has_sapf ? s.vsc.v_dc : 0.0);
    set(f, Channel::i_dc, p.rectifier ? s.rectifier.i_dc : 0.0);

    double e_storage = 0.0;
    if (has_sapf) {
        e_storage += 0.5 * s.vsc.c_dc * s.vsc.v_dc * s.vsc.v_dc;
        if (!ideal) e_storage += 0.5 * s.vsc.l_f * dot(s.vsc.i_f, s.vsc.i_f);
    }
    if (p.pv) e_storage += 0.5 * s.boost.l * s.boost.i_l * s.boost.i_l;
    set(f, Channel::e_storage, e_storage);

    // --- advance states over [t, t + dt) ---------------------------------------
    ThreePhaseSample i_rect_mean = i_rect;
    if (p.rectifier) {
        const plant::RectifierStep r = guarded(t, "rectifier", [&] { return plant::rectifier_step(s.rectifier, v, dt); });
        s.rectifier = r.load;
        i_rect_mean = 0.5 * (i_rect + r.currents);
    }
    ThreePhaseSample i_lin_mean = i_lin;
    if (p.linear && !resistive) {
        const plant::LinearLoadStep r = plant::linear_load_step(s.linear, v, dt);
        s.linear = r.load;
        i_lin_mean = 0.5 * (i_lin + r.currents);
    }

    double i_dc_in = 0.0;
    double v_pv = 0.0;
    double i_pv = 0.0;
    if (p.pv) {
        if (on) {
            v_pv = guarded(t, "pv", [&] { return plant::pv_voltage(p.pv->array, s.boost.i_l); });
            const plant::BoostStep b = plant::boost_step(s.boost, v_pv, s.vsc.v_dc, dt);
            s.boost = b.converter;
            i_dc_in = b.i_out;
            i_pv = b.i_l_mean;
        } else {
            s.boost.i_l = 0.0;
            v_pv = guarded(t, "pv", [&] { return plant::pv_open_circuit_voltage(p.pv->array); });
        }
    }
    const double p_pv = v_pv * i_pv;
    set(f, Channel::v_pv, v_pv);
    set(f, Channel::i_pv, i_pv);
    set(f, Channel::p_pv, p_pv);
    set(f, Channel::duty, p.pv ? s.boost.duty : 0.0);
    set(f, Channel::i_dc_in, i_dc_in);

    if (p.pv && on && p.pv->mppt.enabled) {
        s.mppt_energy += p_pv * dt;
        s.mppt_volt_time += v_pv * dt;
        ++s.mppt_counter;
        const auto period_steps = std::max<std::int64_t>(1, std::llround(p.pv->mppt.period / dt));
        if (s.mppt_counter >= period_steps) {
            const double span = static_cast<double>(s.mppt_counter) * dt;
            const control::MpptStep m = control::mppt_po_step(s.mppt, s.mppt_energy / span, s.mppt_volt_time / span);
            s.mppt = m.state;
            s.boost.duty = m.duty;
            s.mppt_counter = 0;
            s.mppt_energy = 0.0;
            s.mppt_volt_time = 0.0;
        }
    }

    ThreePhaseSample i_f_mean = i_f;
    double p_conv = 0.0;
    if (has_sapf) {
        const plant::VscStep st = guarded(t, "vsc", [&] {
            return (on && ideal) ? plant::vsc_ideal_step(s.vsc, ctl.i_ref, v, i_dc_in, dt)
                                 : plant::vsc_step(s.vsc, v, i_dc_in, dt);
        });
        const double r_f = s.vsc.r_f;
        set(f, Channel::p_filter_loss, (on && ideal) ? 0.0 : r_f * dot(s.vsc.i_f, st.i_f_mean));
        s.vsc = st.vsc;
        i_f_mean = st.i_f_mean;
        p_conv = st.p_ac;

        const double v_floor = std::sqrt(2.0) * p.grid.v_ll_rms;
        if (on && s.vsc.v_dc < v_floor && !s.warned_low_dc) {
            s.warned_low_dc = true;
            s.log.push_back("t=" + format_value(t) + " warning v_dc " + format_value(s.vsc.v_dc) +
                            " V below line-line peak " + format_value(v_floor) + " V, tracking not guaranteed");
        } else if (s.vsc.v_dc >= v_floor) {
            s.warned_low_dc = false;
        }
    }

    const ThreePhaseSample i_s_mean = i_rect_mean + i_lin_mean - i_f_mean;
    set(f, Channel::p_source, dot(v, i_s_mean));
    set(f, Channel::p_rect, dot(v, i_rect_mean));
    set(f, Channel::p_lin, dot(v, i_lin_mean));
    set(f, Channel::p_conv, p_conv);

    for (std::size_t k = 0; k < kChannelCount; ++k) {
        if (!std::isfinite(f[k])) {
            throw RuntimeAbort(t, "engine", "non-finite value in channel " + std::string(channel_names()[k]));
        }
    }

    s.v_pcc_prev = v;
    s.i_source_prev = i_s;
    s.source_continuous = true;
    s.sapf_was_enabled = on;
    ++s.step;
    if (frame_out != nullptr) *frame_out = f;
}

SimState stepped(const SimState& s, const Scenario& resolved, Frame* frame) {
    SimState next = s;
    step(next, resolved, frame);
    return next;
}

// --- recording ---------------------------------------------------------------

bool TimeSeries::has(std::string_view name) const noexcept {
    return std::find(names.begin(), names.end(), name) != names.end();
}

std::span<const double> TimeSeries::channel(std::string_view name) const {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw Error("channel '" + std::string(name) + "' was not recorded");
    return columns[static_cast<std::size_t>(it - names.begin())];
}

Recorder::Recorder(const Scenario& resolved, std::size_t reserve) {
    series_.dt = resolved.sim.dt;
    series_.f1 = resolved.system.grid.freq_hz;
    series_.names = resolved.record;
    series_.columns.resize(resolved.record.size());
    for (auto& c : series_.columns) c.reserve(reserve);
    for (const std::string& name : resolved.record) {
        const auto ch = find_channel(name);
        if (!ch) throw ValidationError("record", "unknown channel '" + name + "'");
        index_.push_back(static_cast<std::size_t>(*ch));
    }
}

void Recorder::push(const Frame& f) {
    for (std::size_t k = 0; k < index_.size(); ++k) series_.columns[k].push_back(f[index_[k]]);
}

TimeSeries Recorder::finish(std::vector<std::string> log) && {
    series_.event_log = std::move(log);
    return std::move(series_);
}

TimeSeries run_steps(SimState& state, const Scenario& resolved, std::int64_t n_steps) {
    Recorder rec(resolved, static_cast<std::size_t>(std::max<std::int64_t>(0, n_steps)));
    const double t0 = time_of(state, resolved);
    const std::size_t log_start = state.log.size();
    Frame f{};
    for (std::int64_t n = 0; n < n_steps; ++n) {
        step(state, resolved, &f);
        rec.push(f);
    }
    TimeSeries ts = std::move(rec).finish({state.log.begin() + static_cast<std::ptrdiff_t>(log_start), state.log.end()});
    ts.t0 = t0;
    return ts;
}

void set_ideal_injection(Scenario& sc, bool on) {
    if (sc.system.sapf) sc.system.sapf->mode = on ? InjectionMode::ideal : InjectionMode::switched;
}

TimeSeries run_scenario(const Scenario& sc, const RunOptions& options) {
    Scenario resolved = resolve(sc);
    if (options.ideal_injection) set_ideal_injection(resolved, true);
    SimState state = initial_state(resolved);
    return run_steps(state, resolved, total_steps(resolved));
}

}  // namespace sapf::engine
