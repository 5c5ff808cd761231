// PV-bus generator model: current injection, linearization, the
// voltage-magnitude equation, and the limit-switching mode logic.
#include <cmath>
#include <complex>

#include "doctest.h"

#include "pflow/generator.hpp"
#include "pflow/stamp.hpp"
#include "support/helpers.hpp"

using namespace pflow;
using test_support::Rng;

namespace {

struct DenseLinearization {
    double jac[2][3] = {};  // rows I_R, I_I; cols v.re, v.im, q
    double rhs[2] = {};
};

DenseLinearization accumulate(const StampList& stamps) {
    DenseLinearization d;
    for (const StampEntry& entry : stamps) {
        if (entry.col == kRhsCol) {
            d.rhs[entry.row] += entry.value;
        } else {
            d.jac[entry.row][entry.col] += entry.value;
        }
    }
    return d;
}

}  // namespace

TEST_SUITE("generator") {

TEST_CASE("unit resistive injection") {
    const Complex i = pv_current_injection(1.0, 0.0, Complex{1.0, 0.0});
    CHECK(i.real() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(i.imag() == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("pure reactive injection at a rotated voltage") {
    const Complex i = pv_current_injection(0.0, 1.0, Complex{0.0, 1.0});
    CHECK(i.real() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(i.imag() == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("injection equals the conjugate power-over-voltage quotient") {
    Rng rng(40401);
    for (int trial = 0; trial < 200; ++trial) {
        const double p = rng.uniform(-1.0, 1.0);
        const double q = rng.uniform(-1.0, 1.0);
        const Complex v = rng.complex_in_annulus(0.3, 1.5);
        const Complex expected = std::conj((Complex{p, q}) / v);
        CHECK(std::abs(pv_current_injection(p, q, v) - expected) < 1e-13);
    }
}

TEST_CASE("numerically zero voltage raises the singular-voltage error") {
    CHECK_THROWS_AS((void)pv_current_injection(1.0, 0.0, Complex{1e-13, 0.0}),
                    SingularVoltageError);
}

TEST_CASE("real-current sensitivity to the real voltage at the unit point") {
    const DenseLinearization d = accumulate(pv_linearize(1.0, 0.0, Complex{1.0, 0.0}));
    CHECK(d.jac[0][kPvColVr] == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("linearization matches finite differences across random iterates") {
    Rng rng(40402);
    for (int trial = 0; trial < 1000; ++trial) {
        const double p = rng.uniform(-1.0, 1.0);
        const double q = rng.uniform(-1.0, 1.0);
        const Complex v_k = rng.complex_in_annulus(0.5, 1.5);
        const DenseLinearization d = accumulate(pv_linearize(p, q, v_k));
        for (int row = 0; row < 2; ++row)
            for (int col = 0; col < 3; ++col) CHECK(std::isfinite(d.jac[row][col]));

        const double step = 1e-6;
        auto injection_part = [&](double pp, double qq, Complex vv, int row) {
            const Complex i = pv_current_injection(pp, qq, vv);
            return row == 0 ? i.real() : i.imag();
        };
        for (int row = 0; row < 2; ++row) {
            const double fd_vr = (injection_part(p, q, v_k + Complex{step, 0.0}, row) -
                                  injection_part(p, q, v_k - Complex{step, 0.0}, row)) /
                                 (2.0 * step);
            const double fd_vi = (injection_part(p, q, v_k + Complex{0.0, step}, row) -
                                  injection_part(p, q, v_k - Complex{0.0, step}, row)) /
                                 (2.0 * step);
            const double fd_q = (injection_part(p, q + step, v_k, row) -
                                 injection_part(p, q - step, v_k, row)) /
                                (2.0 * step);
            CHECK(test_support::relative_error(d.jac[row][kPvColVr], fd_vr, 1e-6) < 1e-6);
            CHECK(test_support::relative_error(d.jac[row][kPvColVi], fd_vi, 1e-6) < 1e-6);
            CHECK(test_support::relative_error(d.jac[row][kPvColQ], fd_q, 1e-6) < 1e-6);
        }
    }
}

TEST_CASE("linear model reproduces the nonlinear injection at the expansion point") {
    Rng rng(40403);
    for (int trial = 0; trial < 100; ++trial) {
        const double p = rng.uniform(-1.0, 1.0);
        const double q = rng.uniform(-1.0, 1.0);
        const Complex v_k = rng.complex_in_annulus(0.5, 1.5);
        const DenseLinearization d = accumulate(pv_linearize(p, q, v_k));
        const Complex i_k = pv_current_injection(p, q, v_k);
        for (int row = 0; row < 2; ++row) {
            const double reproduced = d.jac[row][kPvColVr] * v_k.real() +
                                      d.jac[row][kPvColVi] * v_k.imag() +
                                      d.jac[row][kPvColQ] * q + d.rhs[row];
            const double target = row == 0 ? i_k.real() : i_k.imag();
            CHECK(std::abs(reproduced - target) < 1e-12);
        }
    }
}

TEST_CASE("voltage-magnitude residual uses squared magnitudes") {
    CHECK(voltage_control_residual(Complex{1.0, 0.0}, 1.0) == doctest::Approx(0.0));
    CHECK(voltage_control_residual(Complex{0.6, 0.8}, 1.0) ==
          doctest::Approx(0.0).epsilon(1e-15));
    CHECK(voltage_control_residual(Complex{1.1, 0.0}, 1.0) ==
          doctest::Approx(0.21).epsilon(1e-12));
}

TEST_CASE("reactive power inside the limits leaves the mode unchanged") {
    PvGenerator gen;
    gen.q_min = -0.1;
    gen.q_max = 0.1;
    gen.v_setpoint = 1.0;
    PhaseSwitchState state;
    CHECK(!pvpq_switch_step(gen, 0.05, 1.0, state));
    CHECK(state.mode == RegulationMode::PV);
    CHECK(state.toggles == 0);
}

TEST_CASE("reactive power above the upper limit pins the phase at the limit") {
    PvGenerator gen;
    gen.q_min = -0.1;
    gen.q_max = 0.1;
    PhaseSwitchState state;
    CHECK(pvpq_switch_step(gen, 0.2, 1.0, state));
    CHECK(state.mode == RegulationMode::PinnedAtMax);
    CHECK(state.q_pinned == doctest::Approx(0.1));
    CHECK(state.toggles == 1);
}

TEST_CASE("voltage recovery past the setpoint releases a pinned phase") {
    PvGenerator gen;
    gen.q_min = -0.1;
    gen.q_max = 0.1;
    gen.v_setpoint = 1.0;
    PhaseSwitchState state;
    REQUIRE(pvpq_switch_step(gen, 0.2, 0.98, state));  // pinned at max
    // While the voltage stays below the setpoint a max-pinned phase stays put.
    CHECK(!pvpq_switch_step(gen, 0.1, 0.99, state));
    CHECK(state.mode == RegulationMode::PinnedAtMax);
    // Voltage above the setpoint means the full reactive output is no longer
    // needed: back to voltage regulation.
    CHECK(pvpq_switch_step(gen, 0.1, 1.01, state));
    CHECK(state.mode == RegulationMode::PV);
    CHECK(state.toggles == 2);
}

TEST_CASE("the oscillation detector freezes a phase after the toggle budget") {
    PvGenerator gen;
    gen.q_min = -0.1;
    gen.q_max = 0.1;
    gen.v_setpoint = 1.0;
    PhaseSwitchState state;
    for (int cycle = 0; cycle < 3; ++cycle) {
        pvpq_switch_step(gen, 0.2, 0.98, state);   // pin
        pvpq_switch_step(gen, 0.1, 1.02, state);   // release
    }
    CHECK(state.toggles > kMaxModeToggles);
    CHECK(state.frozen);
    const RegulationMode frozen_mode = state.mode;
    // A frozen phase ignores further switching pressure.
    CHECK(!pvpq_switch_step(gen, 0.2, 0.98, state));
    CHECK(state.mode == frozen_mode);
}

}  // TEST_SUITE
