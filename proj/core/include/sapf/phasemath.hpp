#pragma once

// Reference-frame transforms (Clarke, Park) and first-order filtering shared
// by the controllers and the analyzer. Clarke is amplitude invariant, so d/q
// values read directly as phase-peak quantities.

#include <numbers>

namespace sapf::phasemath {

struct ThreePhaseSample {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;

    friend bool operator==(const ThreePhaseSample&, const ThreePhaseSample&) = default;
};

inline ThreePhaseSample operator+(const ThreePhaseSample& x, const ThreePhaseSample& y) {
    return {x.a + y.a, x.b + y.b, x.c + y.c};
}
inline ThreePhaseSample operator-(const ThreePhaseSample& x, const ThreePhaseSample& y) {
    return {x.a - y.a, x.b - y.b, x.c - y.c};
}
inline ThreePhaseSample operator*(double k, const ThreePhaseSample& x) {
    return {k * x.a, k * x.b, k * x.c};
}

struct StationarySample {
    double alpha = 0.0;
    double beta = 0.0;
    double zero = 0.0;

    friend bool operator==(const StationarySample&, const StationarySample&) = default;
};

struct RotatingSample {
    double d = 0.0;
    double q = 0.0;
    double zero = 0.0;

    friend bool operator==(const RotatingSample&, const RotatingSample&) = default;
};

StationarySample clarke(const ThreePhaseSample& x) noexcept;
ThreePhaseSample inverse_clarke(const StationarySample& x) noexcept;

/// d = α·cosθ + β·sinθ, q = −α·sinθ + β·cosθ; zero passes through.
RotatingSample park(const StationarySample& x, double theta) noexcept;
StationarySample inverse_park(const RotatingSample& x, double theta) noexcept;

/// Angle of the mains space vector, atan2(β, α), in (−π, π].
/// Throws ZeroMainsVector when (α, β) = (0, 0).
double grid_angle(const StationarySample& v);

/// Wraps any finite angle into (−π, π].
double wrap_angle(double theta) noexcept;

struct FirstOrderFilterState {
    double y = 0.0;
    double cutoff_hz = 1.0;
};

struct FilterStep {
    FirstOrderFilterState state;
    double output;
};

/// Backward-Euler low-pass: y' = (y + a·x)/(1 + a), a = 2π·cutoff·dt.
FilterStep lpf_step(const FirstOrderFilterState& s, double x, double dt) noexcept;

/// Phase lag (radians, positive) of the discrete lpf_step filter at `freq_hz`.
double lpf_phase_lag(double cutoff_hz, double freq_hz, double dt) noexcept;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

}  // namespace sapf::phasemath
