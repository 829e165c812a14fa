#include "sapf/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>

#include "sapf/error.hpp"

namespace sapf::analysis {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

using Phasor = std::complex<double>;

/// cos/sin of 2πm/spc for m = 0..spc−1.
struct Basis {
    std::vector<double> cos;
    std::vector<double> sin;

    explicit Basis(std::size_t spc) : cos(spc), sin(spc) {
        for (std::size_t m = 0; m < spc; ++m) {
            const double angle = kTwoPi * static_cast<double>(m) / static_cast<double>(spc);
            cos[m] = std::cos(angle);
            sin[m] = std::sin(angle);
        }
    }
    std::size_t size() const noexcept { return cos.size(); }
};

/// Complex amplitude X of harmonic h such that x_h(t) = Re(X·e^{jhωt}).
Phasor harmonic_phasor(std::span<const double> x, const Basis& basis, std::size_t h) {
    const std::size_t spc = basis.size();
    double a = 0.0;
    double b = 0.0;
    std::size_t m = 0;
    for (std::size_t n = 0; n < x.size(); ++n) {
        a += x[n] * basis.cos[m];
        b += x[n] * basis.sin[m];
        m += h;
        if (m >= spc) m %= spc;
    }
    const double scale = 2.0 / static_cast<double>(x.size());
    return {a * scale, -b * scale};
}

std::vector<double> synthesize(const Phasor& x, const Basis& basis, std::size_t n_samples) {
    std::vector<double> out(n_samples);
    for (std::size_t n = 0; n < n_samples; ++n) {
        const std::size_t m = n % basis.size();
        out[n] = x.real() * basis.cos[m] - x.imag() * basis.sin[m];
    }
    return out;
}

std::size_t checked_window(std::span<const double> x, double f1, double fs) {
    const std::size_t spc = samples_per_cycle(f1, fs);
    if (x.empty() || x.size() % spc != 0) {
        throw AsynchronousWindow(std::to_string(x.size()) + " samples is not a whole number of " +
                                     std::to_string(spc) + "-sample cycles",
                                 std::max<std::size_t>(1, x.size() / spc));
    }
    return spc;
}

void require_same_length(std::span<const double> v, std::span<const double> i) {
    if (v.size() != i.size()) throw Error("voltage and current windows differ in length");
}

}  // namespace

std::size_t samples_per_cycle(double f1, double fs) {
    if (!(f1 > 0.0) || !(fs > 0.0)) throw AsynchronousWindow("f1 and fs must be positive", 1);
    const double ratio = fs / f1;
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-6 * ratio) {
        throw AsynchronousWindow("fs/f1 = " + std::to_string(ratio) + " is not an integer", 1);
    }
    return static_cast<std::size_t>(rounded);
}

std::span<const double> last_cycles(std::span<const double> x, std::size_t cycles, double f1, double fs) {
    const std::size_t spc = samples_per_cycle(f1, fs);
    const std::size_t need = cycles * spc;
    if (x.size() < need) {
        throw AsynchronousWindow("need " + std::to_string(cycles) + " cycles (" + std::to_string(need) +
                                     " samples), have " + std::to_string(x.size()),
                                 cycles);
    }
    return x.subspan(x.size() - need);
}

HarmonicSpectrum dft_spectrum(std::span<const double> x, double f1, double fs, int n_harmonics) {
    const std::size_t spc = checked_window(x, f1, fs);
    if (n_harmonics < 1 || 2 * static_cast<std::size_t>(n_harmonics) >= spc) {
        throw Error("harmonic ceiling " + std::to_string(n_harmonics) + " is not below Nyquist (" +
                    std::to_string(spc) + " samples per cycle)");
    }
    HarmonicSpectrum s;
    s.f1 = f1;
    s.magnitudes.resize(n_harmonics + 1);
    s.phases.resize(n_harmonics + 1);

    const Basis basis(spc);
    const double dc = mean(x);
    s.magnitudes[0] = std::abs(dc);
    s.phases[0] = dc < 0.0 ? std::numbers::pi : 0.0;
    for (int h = 1; h <= n_harmonics; ++h) {
        const Phasor p = harmonic_phasor(x, basis, static_cast<std::size_t>(h));
        s.magnitudes[h] = std::abs(p);
        s.phases[h] = std::arg(p);
    }
    return s;
}

double thd(const HarmonicSpectrum& s) {
    if (s.magnitudes.size() < 2) throw NoFundamental();
    // a fundamental at rounding level is treated as absent
    const double largest = *std::max_element(s.magnitudes.begin(), s.magnitudes.end());
    if (!(s.magnitudes[1] > 1e-12 * largest)) throw NoFundamental();
    double sum = 0.0;
    for (std::size_t h = 2; h < s.magnitudes.size(); ++h) sum += s.magnitudes[h] * s.magnitudes[h];
    return std::sqrt(sum) / s.magnitudes[1];
}

double rms(std::span<const double> x) noexcept {
    if (x.empty()) return 0.0;
    double sum = 0.0;
    for (double v : x) sum += v * v;
    return std::sqrt(sum / static_cast<double>(x.size()));
}

double mean(std::span<const double> x) noexcept {
    if (x.empty()) return 0.0;
    double sum = 0.0;
    for (double v : x) sum += v;
    return sum / static_cast<double>(x.size());
}

PowerReport power_metrics(std::span<const double> v, std::span<const double> i, double f1, double fs) {
    require_same_length(v, i);
    const HarmonicSpectrum sv = dft_spectrum(v, f1, fs);
    const HarmonicSpectrum si = dft_spectrum(i, f1, fs);

    PowerReport r;
    double p = 0.0;
    for (std::size_t n = 0; n < v.size(); ++n) p += v[n] * i[n];
    r.p_active = p / static_cast<double>(v.size());
    r.v_rms = rms(v);
    r.i_rms = rms(i);
    r.s_apparent = r.v_rms * r.i_rms;

    const double phi = sv.phases[1] - si.phases[1];
    const double s1 = 0.5 * sv.magnitudes[1] * si.magnitudes[1];
    r.p_fundamental = s1 * std::cos(phi);
    r.q_fundamental = s1 * std::sin(phi);
    r.dpf = std::cos(phi);
    r.pf = r.s_apparent > 0.0 ? r.p_active / r.s_apparent : 0.0;
    r.d_distortion = std::sqrt(std::max(0.0, r.s_apparent * r.s_apparent - r.p_fundamental * r.p_fundamental -
                                                 r.q_fundamental * r.q_fundamental));
    r.thd_i = thd(si);
    r.thd_v = thd(sv);
    return r;
}

CurrentDecomposition decompose_current(std::span<const double> v, std::span<const double> i,
                                       double f1, double fs) {
    require_same_length(v, i);
    const std::size_t spc = checked_window(v, f1, fs);
    const std::size_t n = v.size();

    double vv = 0.0;
    double vi = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        vv += v[k] * v[k];
        vi += v[k] * i[k];
    }
    if (!(vv > 0.0)) throw Error("zero voltage: current decomposition needs V_rms > 0");
    const double conductance = vi / vv;

    CurrentDecomposition d;
    d.i_active.resize(n);
    std::vector<double> residual(n);
    for (std::size_t k = 0; k < n; ++k) {
        d.i_active[k] = conductance * v[k];
        residual[k] = i[k] - d.i_active[k];
    }

    const Basis basis(spc);
    const Phasor v1 = harmonic_phasor(v, basis, 1);
    const Phasor r1 = harmonic_phasor(residual, basis, 1);
    Phasor r1_quadrature = r1;
    if (std::norm(v1) > 0.0) {
        r1_quadrature = r1 - (std::real(r1 * std::conj(v1)) / std::norm(v1)) * v1;
    }
    d.i_reactive = synthesize(r1_quadrature, basis, n);
    d.i_harmonic.resize(n);
    for (std::size_t k = 0; k < n; ++k) d.i_harmonic[k] = residual[k] - d.i_reactive[k];
    return d;
}

PowerDecomposition decompose_power(std::span<const double> v, std::span<const double> i, double f1, double fs) {
    const CurrentDecomposition d = decompose_current(v, i, f1, fs);
    PowerDecomposition p;
    const std::size_t n = v.size();
    p.p_total.resize(n);
    p.p_active.resize(n);
    p.p_reactive.resize(n);
    p.p_harmonic.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        p.p_total[k] = v[k] * i[k];
        p.p_active[k] = v[k] * d.i_active[k];
        p.p_reactive[k] = v[k] * d.i_reactive[k];
        p.p_harmonic[k] = v[k] * d.i_harmonic[k];
    }
    return p;
}

std::vector<double> fundamental_active_power(std::span<const double> v, std::span<const double> i,
                                             double f1, double fs) {
    require_same_length(v, i);
    const std::size_t spc = checked_window(v, f1, fs);
    const Basis basis(spc);
    const Phasor v1 = harmonic_phasor(v, basis, 1);
    const Phasor i1 = harmonic_phasor(i, basis, 1);
    if (!(std::norm(v1) > 0.0)) throw NoFundamental();
    const Phasor i1_in_phase = (std::real(i1 * std::conj(v1)) / std::norm(v1)) * v1;
    const std::vector<double> vt = synthesize(v1, basis, v.size());
    std::vector<double> it = synthesize(i1_in_phase, basis, v.size());
    for (std::size_t k = 0; k < it.size(); ++k) it[k] *= vt[k];
    return it;
}

SettlingCheck settling_check(std::span<const double> x, double f1, double fs) {
    const std::size_t spc = samples_per_cycle(f1, fs);
    const auto window = last_cycles(x, 2, f1, fs);
    const Basis basis(spc);
    const double prev = std::abs(harmonic_phasor(window.first(spc), basis, 1));
    const double last = std::abs(harmonic_phasor(window.last(spc), basis, 1));
    SettlingCheck c;
    c.variation = last > 0.0 ? std::abs(last - prev) / last : (prev > 0.0 ? 1.0 : 0.0);
    c.settled = c.variation < 0.01;
    return c;
}

ComparisonReport compare_report(const AnalyzedChannel& before, const AnalyzedChannel& after) {
    const double f_before = before.current_spectrum.f1;
    const double f_after = after.current_spectrum.f1;
    if (std::abs(f_before - f_after) > 1e-9 * std::max(f_before, f_after)) {
        throw Error("compare_report: fundamentals differ (" + std::to_string(f_before) + " Hz vs " +
                    std::to_string(f_after) + " Hz)");
    }
    ComparisonReport c;
    c.thd_before = before.report.thd_i;
    c.thd_after = after.report.thd_i;
    c.reduction_factor = c.thd_after > 0.0 ? c.thd_before / c.thd_after : std::numeric_limits<double>::infinity();
    c.pf_before = before.report.pf;
    c.pf_after = after.report.pf;
    c.dpf_before = before.report.dpf;
    c.dpf_after = after.report.dpf;
    c.ieee519_pass = c.thd_after <= 0.05;
    c.degraded = c.thd_after > c.thd_before;

    const auto& mb = before.current_spectrum.magnitudes;
    const auto& ma = after.current_spectrum.magnitudes;
    const std::size_t n = std::min(mb.size(), ma.size());
    for (std::size_t h = 2; h < n; ++h) {
        c.harmonics.push_back({static_cast<int>(h), mb[1] > 0.0 ? mb[h] / mb[1] : 0.0,
                               ma[1] > 0.0 ? ma[h] / ma[1] : 0.0});
    }
    return c;
}

}  // namespace sapf::analysis
