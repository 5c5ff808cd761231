#pragma once

#include <array>
#include <optional>

#include "pflow/stamp.hpp"
#include "pflow/types.hpp"

namespace pflow {

/// Per-phase regulation mode used by the PV/PQ switching baseline.
enum class RegulationMode { PV, PinnedAtMax, PinnedAtMin };

/// Conventional three-phase PV-bus generator: fixed per-phase active power,
/// regulated voltage magnitude, one reactive-power unknown per phase.
struct PvGenerator {
    int bus = 0;
    std::array<double, 3> p_per_phase{};  ///< per-unit active power, indexed by Phase
    double v_setpoint = 1.0;              ///< per-unit voltage magnitude
    /// Reactive limits for the PV/PQ switching baseline; ignored in plain PV mode.
    std::optional<double> q_min;
    std::optional<double> q_max;
};

/// Rectangular current injection of a constant-power source:
///   I_R = (p*v_re + q*v_im) / |v|^2,  I_I = (p*v_im - q*v_re) / |v|^2,
/// equivalently conj((p + jq) / v).
/// Throws SingularVoltageError when |v| is numerically zero.
[[nodiscard]] Complex pv_current_injection(double p, double q, Complex v);

/// Thrown when a device equation is evaluated at a (numerically) zero voltage.
struct SingularVoltageError {
    const char* context;
    int bus;  ///< offending bus id, or -1 when not known at this level
};

/// Local unknown/row numbering for pv_linearize stamps:
///   cols: 0 = v.re, 1 = v.im, 2 = q;  rows: 0 = I_R, 1 = I_I.
/// RHS entries (col == kRhsCol) carry the history source
///   I(v_k) - J * [v_k, q_k], so the linear model reproduces the nonlinear
/// injection exactly at the expansion point.
inline constexpr int kPvColVr = 0;
inline constexpr int kPvColVi = 1;
inline constexpr int kPvColQ = 2;

/// First-order expansion of the PV current source about (v_k, q_k).
[[nodiscard]] StampList pv_linearize(double p, double q, Complex v_k);

/// Voltage-magnitude control residual: |v|^2 - setpoint^2. Both sides squared
/// for an analytic (polynomial) equation.
[[nodiscard]] double voltage_control_residual(Complex v, double v_setpoint);

/// State of one generator phase in the switching baseline.
struct PhaseSwitchState {
    RegulationMode mode = RegulationMode::PV;
    double q_pinned = 0.0;
    int toggles = 0;
    bool frozen = false;  ///< oscillation detected; mode no longer changes
};

/// Toggle budget before the oscillation detector freezes a phase.
inline constexpr int kMaxModeToggles = 5;

/// Outer-loop mode update for the PV/PQ switching baseline. Examines the
/// converged (q_state, |v|) of one generator phase and switches its mode:
/// out-of-limit reactive power pins it, voltage recovery past the setpoint
/// releases it. Returns true when the mode changed.
bool pvpq_switch_step(const PvGenerator& gen, double q_state, double v_mag,
                      PhaseSwitchState& state);

}  // namespace pflow
