#pragma once

#include <array>

#include "pflow/types.hpp"

namespace pflow {

/// Negative-sequence magnitudes below this are treated as exactly balanced.
/// Several controller equations divide by |V-|; below this threshold the
/// closed-form balanced limits are used instead.
inline constexpr double kSequenceEpsilon = 1e-9;

/// Rotation operator a = 1 at 120 degrees.
[[nodiscard]] Complex rotor();

/// Per-phase multipliers applied to the positive-sequence component when
/// expanding to phase quantities: (1, a^2, a) for phases A, B, C.
[[nodiscard]] const std::array<Complex, 3>& positive_rotation();

/// Per-phase multipliers for the negative-sequence component: (1, a, a^2).
[[nodiscard]] const std::array<Complex, 3>& negative_rotation();

/// Fortescue transform with the (1/3)-forward convention: components are
/// averages, so a balanced ABC-rotation set maps to positive == phase-A value.
[[nodiscard]] SequenceSet phase_to_sequence(const PhasorSet& phases);

/// Exact inverse of phase_to_sequence.
[[nodiscard]] PhasorSet sequence_to_phase(const SequenceSet& seq);

/// The orthogonal phasor -j*v, used to inject reactive current.
[[nodiscard]] constexpr Complex orthogonal(Complex v) { return Complex{v.imag(), -v.real()}; }

/// Per-phase rotated angle difference between the positive- and
/// negative-sequence voltages, used by the peak-current and reactive-limit
/// formulas.
struct GammaSet {
    std::array<double, 3> angle{};  ///< radians, indexed by Phase
    bool balanced = false;          ///< |vneg| below kSequenceEpsilon; angles forced to 0
};

/// Computes gamma per phase as half the angle between the per-phase rotated
/// sequence phasors:
///
///   gamma_A = (arg vpos - arg vneg) / 2,
///   gamma_B = gamma_A - 2*pi/3,
///   gamma_C = gamma_A + 2*pi/3.
///
/// The phase offsets come from halving the difference of the sequence
/// rotations (0,-120,+120 degrees positive; 0,+120,-120 negative). gamma is
/// defined modulo pi; consumers use it only inside squared sinusoid terms and
/// cos(2*gamma), which are invariant under that ambiguity. The convention is
/// pinned against sampled waveform peaks in the test suite.
[[nodiscard]] GammaSet gamma_angles(Complex vpos, Complex vneg);

}  // namespace pflow
