#include "pflow/ibdg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "pflow/generator.hpp"
#include "pflow/sequence.hpp"

namespace pflow {

namespace {

/// Rectangular FPNSC reference current of one sequence:
///   I = (u * V + w * orth(V)) / |V|^2
/// with u the active and w the reactive weight for that sequence.
struct SequenceReference {
    double i_r = 0.0;
    double i_i = 0.0;
};

[[nodiscard]] SequenceReference sequence_reference(double u, double w, Complex v) {
    const double d = std::norm(v);
    return {(u * v.real() + w * v.imag()) / d, (u * v.imag() - w * v.real()) / d};
}

/// 2x2 rotation-scaling block of a complex multiplier acting on a
/// rectangular (re, im) pair.
struct ComplexBlock {
    double rr, ri, ir, ii;
};

[[nodiscard]] ComplexBlock block_of(Complex z) {
    return {z.real(), -z.imag(), z.imag(), z.real()};
}

void require_positive_sequence(Complex vpos, int bus) {
    if (std::abs(vpos) < kSequenceEpsilon) {
        throw SingularVoltageError{"ibdg positive-sequence voltage", bus};
    }
}

}  // namespace

PhasorSet fpnsc_reference(Complex vpos, Complex vneg, double p3g, double q3g, double k1,
                          double k2) {
    require_positive_sequence(vpos, -1);
    const double dp = std::norm(vpos);
    Complex ipos = (p3g * k1 * vpos + q3g * k2 * orthogonal(vpos)) / dp;
    Complex ineg{0.0, 0.0};
    if (std::abs(vneg) >= kSequenceEpsilon) {
        const double dn = std::norm(vneg);
        ineg = (p3g * (1.0 - k1) * vneg + q3g * (1.0 - k2) * orthogonal(vneg)) / dn;
    }
    return sequence_to_phase(SequenceSet{Complex{0.0, 0.0}, ipos, ineg});
}

SequenceSplitCurrents ibdg_sequence_split(const IbdgDevice& device, const SequenceSet& vseq,
                                          double q3g) {
    require_positive_sequence(vseq.positive, device.bus);

    const ComplexBlock a = block_of(device.alpha);
    const ComplexBlock b = block_of(device.beta);

    SequenceSplitCurrents out;

    // Positive sequence: alpha * reference - beta * V.
    {
        const SequenceReference ref =
            sequence_reference(device.p3g * device.k1, q3g * device.k2, vseq.positive);
        out.pos_r = a.rr * ref.i_r + a.ri * ref.i_i -
                    (b.rr * vseq.positive.real() + b.ri * vseq.positive.imag());
        out.pos_i = a.ir * ref.i_r + a.ii * ref.i_i -
                    (b.ir * vseq.positive.real() + b.ii * vseq.positive.imag());
    }

    // Negative sequence: the reference part is dropped in the balanced limit,
    // the sensing shunt always acts.
    {
        double ref_r = 0.0;
        double ref_i = 0.0;
        if (std::abs(vseq.negative) >= kSequenceEpsilon) {
            const SequenceReference ref = sequence_reference(
                device.p3g * (1.0 - device.k1), q3g * (1.0 - device.k2), vseq.negative);
            ref_r = ref.i_r;
            ref_i = ref.i_i;
        }
        out.neg_r = a.rr * ref_r + a.ri * ref_i -
                    (b.rr * vseq.negative.real() + b.ri * vseq.negative.imag());
        out.neg_i = a.ir * ref_r + a.ii * ref_i -
                    (b.ir * vseq.negative.real() + b.ii * vseq.negative.imag());
    }

    return out;
}

PhasorSet recombine_sequence_currents(const SequenceSplitCurrents& currents) {
    return sequence_to_phase(SequenceSet{Complex{0.0, 0.0},
                                         Complex{currents.pos_r, currents.pos_i},
                                         Complex{currents.neg_r, currents.neg_i}});
}

PhasorSet ibdg_injection(const IbdgDevice& device, const PhasorSet& v_bus, double q3g) {
    return recombine_sequence_currents(ibdg_sequence_split(device, phase_to_sequence(v_bus), q3g));
}

StampList ibdg_linearize(const IbdgDevice& device, const PhasorSet& v_bus_k, double q3g_k) {
    const SequenceSet vseq = phase_to_sequence(v_bus_k);
    require_positive_sequence(vseq.positive, device.bus);

    // Phase-to-sequence map restricted to the driving components
    // (pos_r, pos_i, neg_r, neg_i) x (A_re, A_im, ..., C_im). The transform is
    // linear, so probing it with unit vectors reproduces it exactly.
    double m[4][6];
    for (int c = 0; c < 6; ++c) {
        PhasorSet unit{};
        unit[static_cast<Phase>(c / 2)] = (c % 2 == 0) ? Complex{1.0, 0.0} : Complex{0.0, 1.0};
        const SequenceSet s = phase_to_sequence(unit);
        m[0][c] = s.positive.real();
        m[1][c] = s.positive.imag();
        m[2][c] = s.negative.real();
        m[3][c] = s.negative.imag();
    }

    // Sequence-to-phase output map, probed the same way.
    double t[6][4];
    for (int c = 0; c < 4; ++c) {
        SequenceSplitCurrents unit{};
        (c == 0   ? unit.pos_r
         : c == 1 ? unit.pos_i
         : c == 2 ? unit.neg_r
                  : unit.neg_i) = 1.0;
        const PhasorSet ip = recombine_sequence_currents(unit);
        for (int r = 0; r < 6; ++r) {
            const Complex phase_i = ip[static_cast<Phase>(r / 2)];
            t[r][c] = (r % 2 == 0) ? phase_i.real() : phase_i.imag();
        }
    }

    // Device Jacobian in the sequence domain: block diagonal over the two
    // driving sequences. Each block is alpha times the reference partials
    // minus the sensing-shunt block.
    const ComplexBlock a = block_of(device.alpha);
    const ComplexBlock b = block_of(device.beta);

    double j_seq[4][4] = {};
    double dq_seq[4] = {};

    const auto fill_block = [&](int offset, double u, double w_coef, Complex v, bool active) {
        double jr[2][2] = {};  // reference partials wrt (v_r, v_i)
        double dq[2] = {};
        if (active) {
            const double d = std::norm(v);
            const SequenceReference ref = sequence_reference(u, q3g_k * w_coef, v);
            const double w = q3g_k * w_coef;
            jr[0][0] = (u - 2.0 * v.real() * ref.i_r) / d;
            jr[0][1] = (w - 2.0 * v.imag() * ref.i_r) / d;
            jr[1][0] = (-w - 2.0 * v.real() * ref.i_i) / d;
            jr[1][1] = (u - 2.0 * v.imag() * ref.i_i) / d;
            dq[0] = w_coef * v.imag() / d;
            dq[1] = -w_coef * v.real() / d;
        }
        j_seq[offset][offset] = a.rr * jr[0][0] + a.ri * jr[1][0] - b.rr;
        j_seq[offset][offset + 1] = a.rr * jr[0][1] + a.ri * jr[1][1] - b.ri;
        j_seq[offset + 1][offset] = a.ir * jr[0][0] + a.ii * jr[1][0] - b.ir;
        j_seq[offset + 1][offset + 1] = a.ir * jr[0][1] + a.ii * jr[1][1] - b.ii;
        dq_seq[offset] = a.rr * dq[0] + a.ri * dq[1];
        dq_seq[offset + 1] = a.ir * dq[0] + a.ii * dq[1];
    };

    fill_block(0, device.p3g * device.k1, device.k2, vseq.positive, true);
    fill_block(2, device.p3g * (1.0 - device.k1), 1.0 - device.k2, vseq.negative,
               std::abs(vseq.negative) >= kSequenceEpsilon);

    // Compose the phase-domain Jacobian: t * j_seq * m.
    double j_phase[6][6] = {};
    double jq[6] = {};
    for (int r = 0; r < 6; ++r) {
        for (int k = 0; k < 4; ++k) {
            if (t[r][k] == 0.0) {
                continue;
            }
            jq[r] += t[r][k] * dq_seq[k];
            for (int c = 0; c < 6; ++c) {
                double acc = 0.0;
                for (int s = 0; s < 4; ++s) {
                    acc += j_seq[k][s] * m[s][c];
                }
                j_phase[r][c] += t[r][k] * acc;
            }
        }
    }

    // History sources: I(x_k) - J * x_k, so the linear model is exact at the
    // expansion point.
    const PhasorSet i_k =
        recombine_sequence_currents(ibdg_sequence_split(device, vseq, q3g_k));
    double x_k[6];
    for (int c = 0; c < 6; ++c) {
        const Complex v = v_bus_k[static_cast<Phase>(c / 2)];
        x_k[c] = (c % 2 == 0) ? v.real() : v.imag();
    }

    StampList stamps;
    stamps.reserve(6 * 8);
    for (int r = 0; r < 6; ++r) {
        double rhs = (r % 2 == 0) ? i_k[static_cast<Phase>(r / 2)].real()
                                  : i_k[static_cast<Phase>(r / 2)].imag();
        for (int c = 0; c < 6; ++c) {
            stamps.push_back({r, c, j_phase[r][c]});
            rhs -= j_phase[r][c] * x_k[c];
        }
        stamps.push_back({r, kIbdgColQ, jq[r]});
        rhs -= jq[r] * q3g_k;
        stamps.push_back({r, kRhsCol, rhs});
    }
    return stamps;
}

CurrentLimitTerms make_limit_terms(Complex vpos, Complex vneg, double k1, double k2) {
    CurrentLimitTerms terms;
    terms.vpos_mag = std::abs(vpos);
    terms.vneg_mag = std::abs(vneg);
    if (terms.vpos_mag < kSequenceEpsilon) {
        throw SingularVoltageError{"current-limit positive-sequence voltage", -1};
    }
    terms.balanced = terms.vneg_mag < kSequenceEpsilon;

    const double inv_p = 1.0 / terms.vpos_mag;
    const double inv_n = terms.balanced ? 0.0 : 1.0 / terms.vneg_mag;
    terms.c1 = k1 * inv_p + (1.0 - k1) * inv_n;
    terms.c2 = k1 * inv_p - (1.0 - k1) * inv_n;
    terms.c3 = k2 * inv_p + (1.0 - k2) * inv_n;
    terms.c4 = k2 * inv_p - (1.0 - k2) * inv_n;

    if (terms.balanced) {
        terms.gamma = {0.0, 0.0, 0.0};
    } else {
        terms.gamma = gamma_angles(vpos, vneg).angle;
    }

    const double vp = terms.vpos_mag;
    const double vn = terms.vneg_mag;
    for (int p = 0; p < 3; ++p) {
        terms.b_term[p] = k2 * k2 * vn * vn + (1.0 - k2) * (1.0 - k2) * vp * vp +
                          2.0 * k2 * (1.0 - k2) * vp * vn * std::cos(2.0 * terms.gamma[p]);
    }
    return terms;
}

std::array<double, 3> peak_current(const CurrentLimitTerms& terms, double p3g, double q3g) {
    std::array<double, 3> peaks{};
    for (int p = 0; p < 3; ++p) {
        const double c = std::cos(terms.gamma[p]);
        const double s = std::sin(terms.gamma[p]);
        const double in_phase = p3g * terms.c1 * c + q3g * terms.c4 * s;
        const double quadrature = p3g * terms.c2 * s - q3g * terms.c3 * c;
        peaks[p] = std::hypot(in_phase, quadrature);
    }
    return peaks;
}

QMaxResult q_max_reactive(double i_pk_allowed, double vpos_mag, double vneg_mag, double k2,
                          const std::array<double, 3>& gamma) {
    QMaxResult result;
    if (vneg_mag < kSequenceEpsilon) {
        result.value = i_pk_allowed * vpos_mag;
        result.balanced_form = true;
        return result;
    }
    const double vp = vpos_mag;
    const double vn = vneg_mag;
    double best = std::numeric_limits<double>::infinity();
    Phase best_phase = Phase::A;
    bool used_balanced_form = false;
    for (const Phase phase : kAllPhases) {
        const double b = k2 * k2 * vn * vn + (1.0 - k2) * (1.0 - k2) * vp * vp +
                         2.0 * k2 * (1.0 - k2) * vp * vn *
                             std::cos(2.0 * gamma[phase_index(phase)]);
        // b is a sum of squares up to rounding; a genuinely negative value
        // can only come from corrupted inputs, never from valid weights.
        const double b_scale = k2 * k2 * vn * vn + (1.0 - k2) * (1.0 - k2) * vp * vp;
        if (b < -1e-12 * std::max(1.0, b_scale)) {
            throw std::domain_error(
                "reactive capability denominator turned negative; inputs are degenerate");
        }
        double candidate;
        bool candidate_balanced = false;
        if (b < kBTermEpsilon) {
            // Degenerate denominator: the sequence contributions to this
            // phase's reactive current cancel. Fall back to the balanced
            // closed form, which is never optimistic about the rating.
            candidate = i_pk_allowed * vp;
            candidate_balanced = true;
        } else {
            candidate = std::sqrt(i_pk_allowed * i_pk_allowed * vp * vp * vn * vn / b);
        }
        if (candidate < best) {
            best = candidate;
            best_phase = phase;
            used_balanced_form = candidate_balanced;
        }
    }
    result.value = best;
    result.limiting_phase = best_phase;
    result.balanced_form = used_balanced_form;
    return result;
}

QMaxResult q_max_reactive(double i_pk_allowed, const CurrentLimitTerms& terms, double k2) {
    return q_max_reactive(i_pk_allowed, terms.vpos_mag, terms.vneg_mag, k2, terms.gamma);
}

double apply_q_limit(double q_requested, double q_max) {
    if (!(q_max > 0.0)) {
        return 0.0;
    }
    const double w = 0.02 * q_max;
    const double mag = std::abs(q_requested);
    double limited;
    if (mag <= q_max - w) {
        limited = mag;
    } else if (mag >= q_max + w) {
        limited = q_max;
    } else {
        const double excess = mag - (q_max - w);
        limited = mag - excess * excess / (4.0 * w);
    }
    return std::copysign(limited, q_requested);
}

double apply_q_limit_derivative(double q_requested, double q_max) {
    if (!(q_max > 0.0)) {
        return 0.0;
    }
    const double w = 0.02 * q_max;
    const double mag = std::abs(q_requested);
    if (mag <= q_max - w) {
        return 1.0;
    }
    if (mag >= q_max + w) {
        return 0.0;
    }
    return 1.0 - (mag - (q_max - w)) / (2.0 * w);
}

}  // namespace pflow
