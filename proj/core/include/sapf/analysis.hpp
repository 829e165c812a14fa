#pragma once

// Power-quality mathematics over synchronous windows: harmonic spectra by
// direct correlation, THD, RMS, power metrics and the active / reactive /
// harmonic current and power decompositions.

#include <cstddef>
#include <span>
#include <vector>

namespace sapf::analysis {

inline constexpr int kDefaultHarmonics = 50;
inline constexpr std::size_t kDefaultWindowCycles = 5;

struct HarmonicSpectrum {
    double f1 = 50.0;
    /// Peak amplitude per harmonic, index 0 is the DC term.
    std::vector<double> magnitudes;
    /// x(t) ≈ Σ M_h·cos(h·ω·t + φ_h), t measured from the window start.
    std::vector<double> phases;
};

/// Samples per fundamental cycle; throws AsynchronousWindow unless fs/f1 is
/// an integer.
std::size_t samples_per_cycle(double f1, double fs);

/// Last `cycles` fundamental cycles of `x`. Throws AsynchronousWindow when
/// fewer samples are available.
std::span<const double> last_cycles(std::span<const double> x, std::size_t cycles, double f1, double fs);

/// Direct synchronous correlation at h·f1, h = 0..n_harmonics. The window
/// must hold an integer number of cycles.
HarmonicSpectrum dft_spectrum(std::span<const double> x, double f1, double fs,
                              int n_harmonics = kDefaultHarmonics);

/// √(Σ_{h≥2} M_h²) / M_1. Throws NoFundamental when M_1 is zero or below
/// 1e-12 of the largest spectral line.
double thd(const HarmonicSpectrum& s);

double rms(std::span<const double> x) noexcept;
double mean(std::span<const double> x) noexcept;

struct PowerReport {
    double p_active = 0.0;        ///< mean(v·i)
    double p_fundamental = 0.0;   ///< P_1 = ½·V_1·I_1·cos φ_1
    double q_fundamental = 0.0;   ///< Q_1 = ½·V_1·I_1·sin φ_1 (positive: current lags)
    double d_distortion = 0.0;    ///< √(S² − P_1² − Q_1²)
    double s_apparent = 0.0;      ///< V_rms·I_rms
    double pf = 0.0;
    double dpf = 0.0;
    double thd_i = 0.0;
    double thd_v = 0.0;
    double v_rms = 0.0;
    double i_rms = 0.0;
};

/// Single-phase (per channel pair) power metrics over a synchronous window.
PowerReport power_metrics(std::span<const double> v, std::span<const double> i, double f1, double fs);

struct CurrentDecomposition {
    std::vector<double> i_active;
    std::vector<double> i_reactive;
    std::vector<double> i_harmonic;
};

/// i = i_active + i_reactive + i_harmonic with i_active = (P/V_rms²)·v,
/// i_reactive the fundamental of the remainder in quadrature with v_1, and
/// i_harmonic what is left.
CurrentDecomposition decompose_current(std::span<const double> v, std::span<const double> i,
                                       double f1, double fs);

struct PowerDecomposition {
    std::vector<double> p_total;
    std::vector<double> p_active;
    std::vector<double> p_reactive;
    std::vector<double> p_harmonic;
};

/// Instantaneous power split p = v·i_active + v·i_reactive + v·i_harmonic.
PowerDecomposition decompose_power(std::span<const double> v, std::span<const double> i, double f1, double fs);

/// Fundamental instantaneous active power p_A(t) = v_1(t)·i_1p(t), where i_1p
/// is the part of the fundamental current in phase with v_1. Its mean is P_1.
std::vector<double> fundamental_active_power(std::span<const double> v, std::span<const double> i,
                                             double f1, double fs);

struct SettlingCheck {
    double variation = 0.0;  ///< |M_1(last) − M_1(prev)| / M_1(last)
    bool settled = false;    ///< variation < 1%
};

/// Compares the fundamental magnitude of the last two cycles of `x`.
SettlingCheck settling_check(std::span<const double> x, double f1, double fs);

struct AnalyzedChannel {
    PowerReport report;
    HarmonicSpectrum current_spectrum;
};

struct HarmonicDelta {
    int h;
    double before;
    double after;
};

struct ComparisonReport {
    double thd_before = 0.0;
    double thd_after = 0.0;
    double reduction_factor = 0.0;  ///< thd_before / thd_after
    double pf_before = 0.0;
    double pf_after = 0.0;
    double dpf_before = 0.0;
    double dpf_after = 0.0;
    std::vector<HarmonicDelta> harmonics;  ///< magnitudes relative to each fundamental
    bool ieee519_pass = false;             ///< thd_after ≤ 5%
    bool degraded = false;                 ///< thd_after > thd_before
};

/// Throws sapf::Error when the two windows use different fundamentals.
ComparisonReport compare_report(const AnalyzedChannel& before, const AnalyzedChannel& after);

}  // namespace sapf::analysis
