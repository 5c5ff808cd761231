#include "pflow/sequence.hpp"

#include <cmath>
#include <numbers>

namespace pflow {

namespace {
const Complex kRotor = std::polar(1.0, 2.0 * std::numbers::pi / 3.0);
const std::array<Complex, 3> kPositiveRotation{Complex{1.0, 0.0}, kRotor * kRotor, kRotor};
const std::array<Complex, 3> kNegativeRotation{Complex{1.0, 0.0}, kRotor, kRotor * kRotor};
}  // namespace

Complex rotor() { return kRotor; }
const std::array<Complex, 3>& positive_rotation() { return kPositiveRotation; }
const std::array<Complex, 3>& negative_rotation() { return kNegativeRotation; }

SequenceSet phase_to_sequence(const PhasorSet& phases) {
    const Complex a = kRotor;
    const Complex a2 = kRotor * kRotor;
    SequenceSet s;
    s.zero = (phases.a() + phases.b() + phases.c()) / 3.0;
    s.positive = (phases.a() + a * phases.b() + a2 * phases.c()) / 3.0;
    s.negative = (phases.a() + a2 * phases.b() + a * phases.c()) / 3.0;
    return s;
}

PhasorSet sequence_to_phase(const SequenceSet& seq) {
    PhasorSet p;
    for (Phase ph : kAllPhases) {
        const auto i = static_cast<std::size_t>(phase_index(ph));
        p[ph] = seq.zero + kPositiveRotation[i] * seq.positive + kNegativeRotation[i] * seq.negative;
    }
    return p;
}

GammaSet gamma_angles(Complex vpos, Complex vneg) {
    GammaSet g;
    if (std::abs(vneg) < kSequenceEpsilon) {
        g.balanced = true;
        return g;
    }
    constexpr double kThird = 2.0 * std::numbers::pi / 3.0;
    // Half the principal angle between the sequence phasors; phase B and C
    // offsets follow from halving the rotation differences.
    const double base = 0.5 * std::arg(vpos * std::conj(vneg));
    g.angle = {base, base - kThird, base + kThird};
    return g;
}

}  // namespace pflow
