#include <cmath>
#include <numbers>

#include "doctest.h"
#include "sapf/error.hpp"
#include "sapf/phasemath.hpp"
#include "testing.hpp"

using namespace sapf::phasemath;
using doctest::Approx;

namespace {

constexpr double pi = std::numbers::pi;

void check_stationary(const StationarySample& got, double alpha, double beta, double zero) {
    CHECK(got.alpha == Approx(alpha).epsilon(1e-12));
    CHECK(got.beta == Approx(beta).epsilon(1e-12));
    CHECK(got.zero == Approx(zero).epsilon(1e-12));
}

}  // namespace

TEST_CASE("clarke maps the reference vectors") {
    check_stationary(clarke({1.0, -0.5, -0.5}), 1.0, 0.0, 0.0);
    check_stationary(clarke({1.0, 1.0, 1.0}), 0.0, 0.0, 1.0);
    const double h = std::sqrt(3.0) / 2.0;
    check_stationary(clarke({0.0, h, -h}), 0.0, 1.0, 0.0);
}

TEST_CASE("inverse clarke maps the reference vectors") {
    const ThreePhaseSample x = inverse_clarke({1.0, 0.0, 0.0});
    CHECK(x.a == Approx(1.0));
    CHECK(x.b == Approx(-0.5));
    CHECK(x.c == Approx(-0.5));
    const ThreePhaseSample z = inverse_clarke({0.0, 0.0, 1.0});
    CHECK(z.a == Approx(1.0));
    CHECK(z.b == Approx(1.0));
    CHECK(z.c == Approx(1.0));
}

TEST_CASE("clarke agrees with the explicit matrix") {
    sapf::testing::Gen gen(11);
    for (int n = 0; n < 200; ++n) {
        const ThreePhaseSample x{gen.wide(), gen.wide(), gen.wide()};
        const double alpha = (2.0 * x.a - x.b - x.c) / 3.0;
        const double beta = (x.b - x.c) / std::sqrt(3.0);
        const double zero = (x.a + x.b + x.c) / 3.0;
        const StationarySample s = clarke(x);
        const double scale = std::abs(x.a) + std::abs(x.b) + std::abs(x.c);
        CHECK(std::abs(s.alpha - alpha) <= 1e-14 * scale);
        CHECK(std::abs(s.beta - beta) <= 1e-14 * scale);
        CHECK(std::abs(s.zero - zero) <= 1e-14 * scale);
    }
}

TEST_CASE("park examples") {
    const RotatingSample r0 = park({1.0, 0.0, 0.0}, 0.0);
    CHECK(r0.d == Approx(1.0));
    CHECK(r0.q == Approx(0.0));

    for (double theta : {-2.5, -0.3, 0.0, 0.7, 1.9, 3.1}) {
        const RotatingSample r = park({std::cos(theta), std::sin(theta), 0.0}, theta);
        CHECK(r.d == Approx(1.0).epsilon(1e-12));
        CHECK(std::abs(r.q) < 1e-12);
    }

    const RotatingSample r90 = park({0.0, 1.0, 0.0}, pi / 2);
    CHECK(r90.d == Approx(1.0));
    CHECK(std::abs(r90.q) < 1e-15);
}

TEST_CASE("inverse park undoes park") {
    struct Case {
        StationarySample x;
        double theta;
    };
    for (const Case& c : {Case{{1.0, 0.0, 0.0}, 0.0}, Case{{std::cos(0.4), std::sin(0.4), 0.0}, 0.4},
                          Case{{0.0, 1.0, 0.25}, pi / 2}}) {
        const StationarySample back = inverse_park(park(c.x, c.theta), c.theta);
        CHECK(back.alpha == Approx(c.x.alpha).epsilon(1e-12));
        CHECK(std::abs(back.beta - c.x.beta) < 1e-12);
        CHECK(back.zero == c.x.zero);
    }
}

TEST_CASE("park keeps the zero component") {
    const RotatingSample r = park({0.3, -0.2, 4.5}, 1.234);
    CHECK(r.zero == 4.5);
}

TEST_CASE("grid angle examples") {
    CHECK(grid_angle({1.0, 0.0, 7.0}) == 0.0);
    CHECK(grid_angle({0.0, 1.0, 0.0}) == Approx(pi / 2));
    CHECK(grid_angle({-1.0, 0.0, 0.0}) == Approx(pi));
    CHECK(grid_angle({-1.0, -0.0, 0.0}) == Approx(pi));
}

TEST_CASE("grid angle rejects a zero mains vector") {
    CHECK_THROWS_AS(grid_angle({0.0, 0.0, 1.0}), sapf::ZeroMainsVector);
}

TEST_CASE("wrap angle") {
    CHECK(wrap_angle(pi) == Approx(pi));
    CHECK(wrap_angle(-pi) == Approx(pi));
    CHECK(wrap_angle(3 * pi / 2) == Approx(-pi / 2));
    CHECK(wrap_angle(0.25 + 8 * pi) == Approx(0.25));
    CHECK(wrap_angle(-0.25 - 6 * pi) == Approx(-0.25));
}

TEST_CASE("lpf converges monotonically to a constant input") {
    FirstOrderFilterState s{-3.0, 20.0};
    double prev = s.y;
    for (int n = 0; n < 40000; ++n) {
        const FilterStep r = lpf_step(s, 2.0, 5e-6);
        CHECK(r.output >= prev);
        CHECK(r.output <= 2.0);
        prev = r.output;
        s = r.state;
    }
    CHECK(s.y == Approx(2.0).epsilon(1e-6));
}

TEST_CASE("lpf step response reaches 1 - 1/e after one time constant") {
    const double fc = 15.0;
    const double tau = 1.0 / (2 * pi * fc);
    for (double dt : {tau / 100, tau / 1000}) {
        FirstOrderFilterState s{0.0, fc};
        const int n = static_cast<int>(std::lround(tau / dt));
        for (int k = 0; k < n; ++k) s = lpf_step(s, 1.0, dt).state;
        CHECK(s.y == Approx(1.0 - std::exp(-1.0)).epsilon(0.02));
    }
}

TEST_CASE("lpf fixed point") {
    const FirstOrderFilterState s{0.75, 100.0};
    const FilterStep r = lpf_step(s, 0.75, 1e-5);
    CHECK(r.output == 0.75);
    CHECK(r.state.cutoff_hz == 100.0);
}

TEST_CASE("lpf phase lag matches the sinusoidal steady state") {
    const double fc = 100.0;
    const double f = 50.0;
    const double dt = 5e-6;
    FirstOrderFilterState s{0.0, fc};
    const int spc = 4000;
    // run well past the transient, then correlate the last cycle
    for (int k = 0; k < 20 * spc; ++k) s = lpf_step(s, std::sin(2 * pi * f * k * dt), dt).state;
    double c = 0.0;
    double q = 0.0;
    for (int k = 20 * spc; k < 21 * spc; ++k) {
        s = lpf_step(s, std::sin(2 * pi * f * k * dt), dt).state;
        c += s.y * std::sin(2 * pi * f * k * dt);
        q += s.y * std::cos(2 * pi * f * k * dt);
    }
    const double lag = -std::atan2(q, c);
    CHECK(lag == Approx(lpf_phase_lag(fc, f, dt)).epsilon(1e-6));
    CHECK(lag == Approx(std::atan(f / fc)).epsilon(1e-3));
}
