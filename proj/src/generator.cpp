#include "pflow/generator.hpp"

#include <cmath>

namespace pflow {

namespace {
constexpr double kVoltageFloor = 1e-12;
}

Complex pv_current_injection(double p, double q, Complex v) {
    const double d = std::norm(v);
    if (d < kVoltageFloor * kVoltageFloor) throw SingularVoltageError{"pv_current_injection", -1};
    return {(p * v.real() + q * v.imag()) / d, (p * v.imag() - q * v.real()) / d};
}

StampList pv_linearize(double p, double q, Complex v_k) {
    const double vr = v_k.real();
    const double vi = v_k.imag();
    const double d = std::norm(v_k);
    if (d < kVoltageFloor * kVoltageFloor) throw SingularVoltageError{"pv_linearize", -1};
    const double d2 = d * d;
    const Complex inj = pv_current_injection(p, q, v_k);

    const double dIr_dvr = (p * d - (p * vr + q * vi) * 2.0 * vr) / d2;
    const double dIr_dvi = (q * d - (p * vr + q * vi) * 2.0 * vi) / d2;
    const double dIr_dq = vi / d;
    const double dIi_dvr = (-q * d - (p * vi - q * vr) * 2.0 * vr) / d2;
    const double dIi_dvi = (p * d - (p * vi - q * vr) * 2.0 * vi) / d2;
    const double dIi_dq = -vr / d;

    StampList stamps;
    stamps.reserve(8);
    stamps.push_back({0, kPvColVr, dIr_dvr});
    stamps.push_back({0, kPvColVi, dIr_dvi});
    stamps.push_back({0, kPvColQ, dIr_dq});
    stamps.push_back({1, kPvColVr, dIi_dvr});
    stamps.push_back({1, kPvColVi, dIi_dvi});
    stamps.push_back({1, kPvColQ, dIi_dq});
    stamps.push_back({0, kRhsCol, inj.real() - dIr_dvr * vr - dIr_dvi * vi - dIr_dq * q});
    stamps.push_back({1, kRhsCol, inj.imag() - dIi_dvr * vr - dIi_dvi * vi - dIi_dq * q});
    return stamps;
}

double voltage_control_residual(Complex v, double v_setpoint) {
    return std::norm(v) - v_setpoint * v_setpoint;
}

bool pvpq_switch_step(const PvGenerator& gen, double q_state, double v_mag,
                      PhaseSwitchState& state) {
    if (state.frozen || !gen.q_min.has_value() || !gen.q_max.has_value()) return false;

    const auto toggle_to = [&](RegulationMode mode, double pin) {
        state.mode = mode;
        state.q_pinned = pin;
        if (++state.toggles > kMaxModeToggles) state.frozen = true;
        return true;
    };

    switch (state.mode) {
        case RegulationMode::PV:
            if (q_state > *gen.q_max) return toggle_to(RegulationMode::PinnedAtMax, *gen.q_max);
            if (q_state < *gen.q_min) return toggle_to(RegulationMode::PinnedAtMin, *gen.q_min);
            return false;
        case RegulationMode::PinnedAtMax:
            // Full boost applied yet the voltage sits above the setpoint:
            // the PV equation would need less Q, so regulation can resume.
            if (v_mag > gen.v_setpoint) return toggle_to(RegulationMode::PV, 0.0);
            return false;
        case RegulationMode::PinnedAtMin:
            if (v_mag < gen.v_setpoint) return toggle_to(RegulationMode::PV, 0.0);
            return false;
    }
    return false;
}

}  // namespace pflow
