#include "sapf/phasemath.hpp"

#include <cmath>
#include <complex>

#include "sapf/error.hpp"

namespace sapf::phasemath {

namespace {
constexpr double kInvSqrt3 = 1.0 / std::numbers::sqrt3;
constexpr double kHalfSqrt3 = std::numbers::sqrt3 / 2.0;
}  // namespace

StationarySample clarke(const ThreePhaseSample& x) noexcept {
    return {(2.0 / 3.0) * (x.a - 0.5 * x.b - 0.5 * x.c),
            kInvSqrt3 * (x.b - x.c),
            (x.a + x.b + x.c) / 3.0};
}

ThreePhaseSample inverse_clarke(const StationarySample& x) noexcept {
    return {x.alpha + x.zero,
            -0.5 * x.alpha + kHalfSqrt3 * x.beta + x.zero,
            -0.5 * x.alpha - kHalfSqrt3 * x.beta + x.zero};
}

RotatingSample park(const StationarySample& x, double theta) noexcept {
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    return {x.alpha * c + x.beta * s, -x.alpha * s + x.beta * c, x.zero};
}

StationarySample inverse_park(const RotatingSample& x, double theta) noexcept {
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    return {x.d * c - x.q * s, x.d * s + x.q * c, x.zero};
}

double wrap_angle(double theta) noexcept {
    double w = std::remainder(theta, kTwoPi);  // [−π, π]
    if (w <= -std::numbers::pi) w += kTwoPi;
    return w;
}

double grid_angle(const StationarySample& v) {
    if (v.alpha == 0.0 && v.beta == 0.0) throw ZeroMainsVector();
    // atan2 returns −π for (negative, −0.0); fold it onto +π.
    return wrap_angle(std::atan2(v.beta, v.alpha));
}

FilterStep lpf_step(const FirstOrderFilterState& s, double x, double dt) noexcept {
    const double a = kTwoPi * s.cutoff_hz * dt;
    const double y = (s.y + a * x) / (1.0 + a);
    return {{y, s.cutoff_hz}, y};
}

double lpf_phase_lag(double cutoff_hz, double freq_hz, double dt) noexcept {
    // H(z) = a / ((1 + a) − z⁻¹) evaluated on the unit circle.
    const double a = kTwoPi * cutoff_hz * dt;
    const std::complex<double> z_inv = std::polar(1.0, -kTwoPi * freq_hz * dt);
    const std::complex<double> h = a / ((1.0 + a) - z_inv);
    return -std::arg(h);
}

}  // namespace sapf::phasemath
