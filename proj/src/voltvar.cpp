#include "pflow/voltvar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pflow/ibdg.hpp"

namespace pflow {

namespace {

/// Cubic on [x0, x1] matching value and slope at both ends, returned in
/// monomial form about x0.
VoltVarCurve::Piece hermite_patch(double x0, double x1, double y0, double m0, double y1,
                                  double m1) {
    const double h = x1 - x0;
    VoltVarCurve::Piece p;
    p.kind = VoltVarCurve::Piece::Kind::Cubic;
    p.x_start = x0;
    const double dy = y1 - y0;
    p.coeff[0] = y0;
    p.coeff[1] = m0;
    p.coeff[2] = (3.0 * dy / h - 2.0 * m0 - m1) / h;
    p.coeff[3] = (m0 + m1 - 2.0 * dy / h) / (h * h);
    return p;
}

VoltVarCurve::Piece linear_piece(double x0, double y0, double slope) {
    VoltVarCurve::Piece p;
    p.kind = VoltVarCurve::Piece::Kind::Linear;
    p.x_start = x0;
    p.coeff = {y0, slope, 0.0, 0.0};
    return p;
}

}  // namespace

VoltVarCurve VoltVarCurve::build(const VoltVarBreakpoints& bp) {
    const double h = bp.patch_halfwidth;
    if (!(bp.v1 < bp.v2 && bp.v2 <= bp.v3 && bp.v3 < bp.v4))
        throw CurveBuildError{"breakpoints must satisfy v1 < v2 <= v3 < v4", bp.v1};
    if (!(bp.q_abs <= 0.0 && 0.0 <= bp.q_cap))
        throw CurveBuildError{"limits must satisfy q_abs <= 0 <= q_cap",
                              std::numeric_limits<double>::quiet_NaN()};
    if (!(h > 0.0))
        throw CurveBuildError{"patch_halfwidth must be positive",
                              std::numeric_limits<double>::quiet_NaN()};
    const std::array<double, 4> knots{bp.v1, bp.v2, bp.v3, bp.v4};
    const std::array<double, 3> seg_len{bp.v2 - bp.v1, bp.v3 - bp.v2, bp.v4 - bp.v3};
    for (std::size_t i = 0; i < seg_len.size(); ++i) {
        if (!(2.0 * h < seg_len[i]))
            throw CurveBuildError{"patch half-width overlaps adjacent knot", knots[i]};
    }

    // Line i spans between knots i-1 and i (flat outer lines at both ends).
    const double s1 = -bp.q_cap / (bp.v2 - bp.v1);
    const double s3 = bp.q_abs / (bp.v4 - bp.v3);
    const std::array<double, 5> slope{0.0, s1, 0.0, s3, 0.0};
    const auto line_value = [&](std::size_t line, double v) -> double {
        switch (line) {
            case 0: return bp.q_cap;
            case 1: return bp.q_cap + s1 * (v - bp.v1);
            case 2: return 0.0;
            case 3: return s3 * (v - bp.v3);
            default: return bp.q_abs;
        }
    };

    VoltVarCurve curve;
    curve.bp_ = bp;
    curve.pieces_.push_back(linear_piece(-std::numeric_limits<double>::infinity(), bp.q_cap, 0.0));
    for (std::size_t i = 0; i < knots.size(); ++i) {
        const double x0 = knots[i] - h;
        const double x1 = knots[i] + h;
        curve.knots_.push_back(x0);
        curve.pieces_.push_back(hermite_patch(x0, x1, line_value(i, x0), slope[i],
                                              line_value(i + 1, x1), slope[i + 1]));
        curve.knots_.push_back(x1);
        curve.pieces_.push_back(linear_piece(x1, line_value(i + 1, x1), slope[i + 1]));
    }
    return curve;
}

const VoltVarCurve::Piece& VoltVarCurve::piece_at(double v) const {
    // knots_[i] is the upper boundary of pieces_[i].
    auto it = std::upper_bound(knots_.begin(), knots_.end(), v);
    const auto idx = static_cast<std::size_t>(it - knots_.begin());
    return pieces_[std::min(idx, pieces_.size() - 1)];
}

double VoltVarCurve::eval(double v) const {
    if (pieces_.empty()) {
        return 0.0;
    }
    const Piece& p = piece_at(v);
    const double t = std::isinf(p.x_start) ? 0.0 : v - p.x_start;
    return ((p.coeff[3] * t + p.coeff[2]) * t + p.coeff[1]) * t + p.coeff[0];
}

double VoltVarCurve::eval_derivative(double v) const {
    if (pieces_.empty()) {
        return 0.0;
    }
    const Piece& p = piece_at(v);
    const double t = std::isinf(p.x_start) ? 0.0 : v - p.x_start;
    return (3.0 * p.coeff[3] * t + 2.0 * p.coeff[2]) * t + p.coeff[1];
}

double voltvar_residual(const VoltVarCurve& curve, double v_ctrl, double q3g_state, double q_max,
                        double lambda) {
    return q3g_state - lambda * apply_q_limit(curve.eval(v_ctrl), q_max);
}

double voltvar_target_derivative(const VoltVarCurve& curve, double v_ctrl, double q_max,
                                 double lambda) {
    const double raw = curve.eval(v_ctrl);
    return lambda * apply_q_limit_derivative(raw, q_max) * curve.eval_derivative(v_ctrl);
}

}  // namespace pflow
