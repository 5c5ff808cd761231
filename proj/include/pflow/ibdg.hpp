#pragma once

#include <array>

#include "pflow/stamp.hpp"
#include "pflow/types.hpp"
#include "pflow/voltvar.hpp"

namespace pflow {

/// Inverter-based distributed generator with flexible positive/negative
/// sequence current control (FPNSC), sensing-position gains, an instantaneous
/// current rating, and a Volt/VAR characteristic.
///
/// Power scale: p3g and the solved q3g are per-phase-scale quantities; the
/// delivered three-phase totals are three times these values. Per-unit current
/// is on a peak-consistent base, so a phasor magnitude of 1.0 pu corresponds
/// to an instantaneous peak of 1.0 pu and i_rating compares directly against
/// phasor magnitudes.
struct IbdgDevice {
    int bus = 0;
    double p3g = 0.0;      ///< active power (per-unit, >= 0: supply-driven)
    double k1 = 1.0;       ///< positive/negative sequence weight for active current, in [0,1]
    double k2 = 1.0;       ///< sequence weight for reactive current, in [0,1]
    Complex alpha{1.0, 0.0};  ///< sensing gain on the reference current
    Complex beta{0.0, 0.0};   ///< sensing shunt admittance at the terminal
    double i_rating = 1.0;    ///< maximum instantaneous phase current (per-unit peak)
    VoltVarCurve voltvar;     ///< reactive-power characteristic
};

/// FPNSC reference current per phase:
///   I_ref = p3g * (k1*Vp/|Vp|^2 + (1-k1)*Vn/|Vn|^2)
///         + q3g * (k2*orth(Vp)/|Vp|^2 + (1-k2)*orth(Vn)/|Vn|^2)
/// expanded to phase quantities through the sequence rotations. When
/// |vneg| < kSequenceEpsilon the (1-k)-weighted terms are dropped: the
/// balanced limit is the balanced-positive-sequence strategy.
/// Throws SingularVoltageError when |vpos| is numerically zero.
[[nodiscard]] PhasorSet fpnsc_reference(Complex vpos, Complex vneg, double p3g, double q3g,
                                        double k1, double k2);

/// Injected terminal current per phase: I = I_ref * alpha - V * beta applied
/// in the sequence domain. The device is three-wire, so only the positive and
/// negative sequence components of the bus voltage drive it; it injects no
/// zero-sequence current.
[[nodiscard]] PhasorSet ibdg_injection(const IbdgDevice& device, const PhasorSet& v_bus,
                                       double q3g);

/// Rectangular sequence-domain currents of the device, one (real, imaginary)
/// pair per sequence. These are the four scalar current expressions whose
/// first-order expansion forms the device stamps; recombining them through
/// the sequence rotations reproduces ibdg_injection exactly.
struct SequenceSplitCurrents {
    double pos_r = 0.0;
    double pos_i = 0.0;
    double neg_r = 0.0;
    double neg_i = 0.0;
};

[[nodiscard]] SequenceSplitCurrents ibdg_sequence_split(const IbdgDevice& device,
                                                        const SequenceSet& vseq, double q3g);

/// Recombines sequence-split currents into per-phase complex currents
/// (zero sequence identically zero).
[[nodiscard]] PhasorSet recombine_sequence_currents(const SequenceSplitCurrents& currents);

/// Local numbering for ibdg_linearize stamps. Columns 0..5 are the phase
/// voltage components (A_re, A_im, B_re, B_im, C_re, C_im), column 6 is q3g.
/// Rows 0..5 are the injected phase current components in the same order.
/// RHS entries carry history sources as in pv_linearize.
inline constexpr int kIbdgColQ = 6;

/// First-order expansion of the injected phase currents about
/// (v_bus_k, q3g_k), with the sequence-to-phase chain rule folded in.
[[nodiscard]] StampList ibdg_linearize(const IbdgDevice& device, const PhasorSet& v_bus_k,
                                       double q3g_k);

/// Voltage-dependent coefficients of the peak-current and reactive-limit
/// formulas. c1/c2 weight the active power (k1), c3/c4 the reactive (k2);
/// each pair is (sum, difference) of the per-sequence inverse magnitudes.
/// In the balanced case the negative-sequence contributions drop and
/// gamma is zero.
struct CurrentLimitTerms {
    double c1 = 0.0;  ///< k1/|Vp| + (1-k1)/|Vn|
    double c2 = 0.0;  ///< k1/|Vp| - (1-k1)/|Vn|
    double c3 = 0.0;  ///< k2/|Vp| + (1-k2)/|Vn|
    double c4 = 0.0;  ///< k2/|Vp| - (1-k2)/|Vn|
    std::array<double, 3> gamma{};   ///< per-phase rotated angle difference (radians)
    std::array<double, 3> b_term{};  ///< per-phase reactive-limit denominator (per-unit^2)
    double vpos_mag = 0.0;
    double vneg_mag = 0.0;
    bool balanced = false;
};

[[nodiscard]] CurrentLimitTerms make_limit_terms(Complex vpos, Complex vneg, double k1, double k2);

/// Peak instantaneous phase currents for a (p, q) operating point:
///   I_pk^2 = (p*c1*cos g + q*c4*sin g)^2 + (p*c2*sin g - q*c3*cos g)^2
/// per phase with that phase's gamma. Verified against sampled waveform
/// maxima by the test suite.
[[nodiscard]] std::array<double, 3> peak_current(const CurrentLimitTerms& terms, double p3g,
                                                 double q3g);

struct QMaxResult {
    double value = 0.0;
    Phase limiting_phase = Phase::A;
    bool balanced_form = false;  ///< closed form i_pk * |Vp| was used
};

/// Numerical-degeneracy guard threshold for the reactive-limit denominator.
inline constexpr double kBTermEpsilon = 1e-18;

/// Largest reactive power deliverable without any phase exceeding the peak
/// current allowance:
///   b = k2^2*|Vn|^2 + (1-k2)^2*|Vp|^2 + 2*k2*(1-k2)*|Vp|*|Vn|*cos(2*gamma)
///   q_max = sqrt(i_pk^2 * |Vp|^2 * |Vn|^2 / b)  per phase, minimized.
/// Balanced voltages (or a vanishing denominator) use the closed form
/// i_pk_allowed * |Vp|.
[[nodiscard]] QMaxResult q_max_reactive(double i_pk_allowed, double vpos_mag, double vneg_mag,
                                        double k2, const std::array<double, 3>& gamma);

/// Convenience overload taking precomputed terms.
[[nodiscard]] QMaxResult q_max_reactive(double i_pk_allowed, const CurrentLimitTerms& terms,
                                        double k2);

/// Smoothly saturating clamp of a reactive-power request to [-q_max, q_max].
/// Exact pass-through in the interior; a quadratic patch of half-width
/// 0.02*q_max at each knee matches value and slope on both sides, keeping the
/// composed Q(V) characteristic first-order continuous.
[[nodiscard]] double apply_q_limit(double q_requested, double q_max);

/// Derivative of apply_q_limit with respect to the request.
[[nodiscard]] double apply_q_limit_derivative(double q_requested, double q_max);

/// Relative overshoot of the converged peak current tolerated at the rating;
/// the smooth knee trades exactness at the boundary for differentiability.
inline constexpr double kPeakOvershootTolerance = 0.01;

}  // namespace pflow
