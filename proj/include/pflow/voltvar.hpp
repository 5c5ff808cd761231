#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace pflow {

/// Breakpoints of the piecewise Volt/VAR characteristic.
///
/// The shape is: full injection q_cap below v1, falling to zero at v2, a zero
/// deadband on [v2, v3], falling to q_abs at v4, and full absorption beyond.
/// Each of the four knots is rounded off by a cubic transition patch of the
/// given half-width so the curve is first-order continuous everywhere.
struct VoltVarBreakpoints {
    double v1 = 0.92;   ///< per-unit voltage, start of upper saturation
    double v2 = 0.98;   ///< per-unit voltage, start of deadband
    double v3 = 1.02;   ///< per-unit voltage, end of deadband
    double v4 = 1.08;   ///< per-unit voltage, start of lower saturation
    double q_cap = 0.0; ///< maximum injection (per-unit, >= 0)
    double q_abs = 0.0; ///< maximum absorption (per-unit, <= 0)
    double patch_halfwidth = 0.005;  ///< per-unit half-width of each cubic patch
};

/// First-order-continuous reactive-power-vs-voltage curve: linear regions
/// joined by cubic patches, flat saturation extended to both infinities.
class VoltVarCurve {
  public:
    struct Piece {
        enum class Kind { Linear, Cubic };
        Kind kind = Kind::Linear;
        double x_start = 0.0;  ///< domain lower bound (local coordinate origin)
        // q(v) = c0 + c1*t + c2*t^2 + c3*t^3 with t = v - x_start
        std::array<double, 4> coeff{};
    };

    /// A default-constructed curve is identically zero (no reactive support).
    VoltVarCurve() = default;

    /// Builds the curve. Throws CurveBuildError if breakpoints are invalid or
    /// the patches would overlap.
    [[nodiscard]] static VoltVarCurve build(const VoltVarBreakpoints& bp);

    [[nodiscard]] double eval(double v) const;
    [[nodiscard]] double eval_derivative(double v) const;

    [[nodiscard]] bool empty() const { return pieces_.empty(); }
    [[nodiscard]] const VoltVarBreakpoints& breakpoints() const { return bp_; }
    /// Piece boundaries, for continuity audits.
    [[nodiscard]] const std::vector<double>& knots() const { return knots_; }

  private:
    [[nodiscard]] const Piece& piece_at(double v) const;

    VoltVarBreakpoints bp_;
    std::vector<Piece> pieces_;
    std::vector<double> knots_;  ///< boundaries between consecutive pieces
};

/// Construction failure with the offending knot voltage (NaN when the problem
/// is not knot-specific).
struct CurveBuildError {
    const char* reason;
    double knot;
};

/// Residual of the device reactive-power equation:
///   q3g_state - clamp(curve(v_ctrl), q_max)
/// where the clamp is the smooth saturating limit from apply_q_limit.
/// `lambda` scales the curve output (continuation parameter; 1 = nominal).
[[nodiscard]] double voltvar_residual(const VoltVarCurve& curve, double v_ctrl, double q3g_state,
                                      double q_max, double lambda = 1.0);

/// d(target)/d(v_ctrl) of the clamped curve output, for chaining through
/// d|V|/dV_R, d|V|/dV_I inside the solver.
[[nodiscard]] double voltvar_target_derivative(const VoltVarCurve& curve, double v_ctrl,
                                               double q_max, double lambda = 1.0);

}  // namespace pflow
