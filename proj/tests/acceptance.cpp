// Acceptance gate: nine executable criteria covering the inverter model's
// sequence-domain algebra, the peak-current and reactive-capability formulas
// against sampled waveforms, stamp-level Jacobian exactness, the Volt/VAR
// curve's first-order continuity, solver ground truth on the bundled corpus,
// feeder-scale robustness of the continuation driver, the regulator-switching
// oscillation contrast, and the balanced degenerate limits.
//
// Each criterion prints exactly one PASS/FAIL line; the exit code is the
// number of failed criteria.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "pflow/case_io.hpp"
#include "pflow/generator.hpp"
#include "pflow/ibdg.hpp"
#include "pflow/network.hpp"
#include "pflow/report.hpp"
#include "pflow/sequence.hpp"
#include "pflow/solver.hpp"
#include "pflow/stamp.hpp"
#include "pflow/types.hpp"
#include "pflow/voltvar.hpp"
#include "pflow/waveform.hpp"
#include "support/helpers.hpp"

namespace {

using pflow::Complex;
using pflow::Phase;
using pflow::PhasorSet;
using test_support::Rng;
using test_support::case_path;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, ...) {
    char buffer[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buffer, sizeof(buffer), format, args);
    va_end(args);
    return buffer;
}

// ---------------------------------------------------------------------------
// Criterion 1: the rectangular sequence-split currents, recombined through the
// sequence rotations, equal a from-scratch complex evaluation of the control
// law (reference currents shaped by the sensing gains) to 1e-12 over 500
// randomized device states, in under a second.
// ---------------------------------------------------------------------------
bool sequence_split_consistency(std::string& detail) {
    const auto start = Clock::now();
    Rng rng(901);
    const Complex a = std::polar(1.0, 2.0 * std::numbers::pi / 3.0);
    const Complex minus_j{0.0, -1.0};

    double worst = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        pflow::IbdgDevice device;
        device.p3g = rng.uniform(0.0, 0.6);
        device.k1 = rng.uniform(0.0, 1.0);
        device.k2 = rng.uniform(0.0, 1.0);
        device.alpha = Complex{1.0, 0.0} + rng.complex_in_box(0.25);
        device.beta = rng.complex_in_box(0.3);
        const double q3g = rng.uniform(-0.4, 0.4);

        pflow::SequenceSet vseq;
        vseq.zero = rng.complex_in_box(0.1);  // three-wire: must not matter
        vseq.positive = rng.complex_in_annulus(0.5, 1.2);
        vseq.negative = rng.complex_in_annulus(0.05, 0.5);

        // Independent complex evaluation, written from the control law.
        const Complex vp = vseq.positive;
        const Complex vn = vseq.negative;
        Complex ip_ref = device.p3g * device.k1 * vp / std::norm(vp) +
                         q3g * device.k2 * (minus_j * vp) / std::norm(vp);
        Complex in_ref{0.0, 0.0};
        if (std::abs(vn) >= 1e-9) {
            in_ref = device.p3g * (1.0 - device.k1) * vn / std::norm(vn) +
                     q3g * (1.0 - device.k2) * (minus_j * vn) / std::norm(vn);
        }
        const Complex ip = ip_ref * device.alpha - vp * device.beta;
        const Complex in = in_ref * device.alpha - vn * device.beta;
        const std::array<Complex, 3> pos_rot{Complex{1.0, 0.0}, a * a, a};
        const std::array<Complex, 3> neg_rot{Complex{1.0, 0.0}, a, a * a};

        const pflow::SequenceSplitCurrents split = pflow::ibdg_sequence_split(device, vseq, q3g);
        const PhasorSet recombined = pflow::recombine_sequence_currents(split);
        const PhasorSet injected =
            pflow::ibdg_injection(device, pflow::sequence_to_phase(vseq), q3g);

        for (Phase p : pflow::kAllPhases) {
            const std::size_t i = static_cast<std::size_t>(pflow::phase_index(p));
            const Complex expected = pos_rot[i] * ip + neg_rot[i] * in;
            worst = std::max(worst, std::abs(recombined[p] - expected));
            worst = std::max(worst, std::abs(injected[p] - expected));
        }
    }
    const double elapsed = seconds_since(start);
    detail = fmt("500 states, worst deviation %.3g, %.3f s", worst, elapsed);
    return worst <= 1e-12 && elapsed < 1.0;
}

// ---------------------------------------------------------------------------
// Criterion 2: the analytic per-phase peak-current formula agrees with
// waveform-sampled maxima to 0.2% over 200 random operating points with
// unbalance up to 50%, in under five seconds.
// ---------------------------------------------------------------------------
bool peak_formula_oracle(std::string& detail) {
    const auto start = Clock::now();
    Rng rng(902);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        pflow::IbdgDevice device;
        device.p3g = rng.uniform(0.05, 0.5);
        device.k1 = rng.uniform(0.0, 1.0);
        device.k2 = rng.uniform(0.0, 1.0);
        const double q3g = rng.uniform(-0.35, 0.35);

        const Complex vpos = rng.complex_in_annulus(0.6, 1.2);
        const double ratio = rng.uniform(0.0, 0.5);
        const Complex vneg = std::polar(ratio * std::abs(vpos), rng.uniform(0.0, 2.0 * std::numbers::pi));
        const PhasorSet v_bus = pflow::sequence_to_phase({Complex{}, vpos, vneg});

        const pflow::CurrentLimitTerms terms =
            pflow::make_limit_terms(vpos, vneg, device.k1, device.k2);
        const std::array<double, 3> formula = pflow::peak_current(terms, device.p3g, q3g);

        const PhasorSet currents = pflow::ibdg_injection(device, v_bus, q3g);
        const std::array<double, 3> sampled = pflow::measure_peaks(pflow::synthesize(currents));

        for (std::size_t i = 0; i < 3; ++i) {
            if (formula[i] < 1e-9) continue;
            worst = std::max(worst, std::abs(sampled[i] - formula[i]) / formula[i]);
        }
    }
    const double elapsed = seconds_since(start);
    detail = fmt("200 states, worst relative error %.3g, %.3f s", worst, elapsed);
    return worst <= 0.002 && elapsed < 5.0;
}

// ---------------------------------------------------------------------------
// Criterion 3: the reactive-capability bracket. At q = q_max the limiting
// phase's sampled peak current sits within 0.5% of the rating; at 1.05x the
// rating is exceeded. 50 unbalanced states, under five seconds.
// ---------------------------------------------------------------------------
bool reactive_capability_bracket(std::string& detail) {
    const auto start = Clock::now();
    Rng rng(903);
    double worst_at_limit = 0.0;
    double min_excess = 1e9;
    int general_form_states = 0;

    for (int trial = 0; trial < 50; ++trial) {
        pflow::IbdgDevice device;
        device.p3g = 0.0;  // the capability is the reactive-only envelope
        device.k2 = rng.uniform(0.0, 1.0);
        device.k1 = rng.uniform(0.0, 1.0);
        device.i_rating = rng.uniform(0.5, 1.5);

        Complex vpos;
        Complex vneg;
        pflow::QMaxResult qmax;
        pflow::CurrentLimitTerms terms;
        // Keep resampling until the general unbalanced form applies.
        do {
            vpos = rng.complex_in_annulus(0.6, 1.2);
            const double ratio = rng.uniform(0.1, 0.5);
            vneg = std::polar(ratio * std::abs(vpos),
                              rng.uniform(0.0, 2.0 * std::numbers::pi));
            terms = pflow::make_limit_terms(vpos, vneg, device.k1, device.k2);
            qmax = pflow::q_max_reactive(device.i_rating, terms, device.k2);
        } while (qmax.balanced_form);
        ++general_form_states;

        const PhasorSet v_bus = pflow::sequence_to_phase({Complex{}, vpos, vneg});
        const std::size_t limiting =
            static_cast<std::size_t>(pflow::phase_index(qmax.limiting_phase));

        const std::array<double, 3> at_limit =
            pflow::measure_peaks(pflow::synthesize(pflow::ibdg_injection(device, v_bus, qmax.value)));
        worst_at_limit = std::max(
            worst_at_limit, std::abs(at_limit[limiting] - device.i_rating) / device.i_rating);

        const std::array<double, 3> above = pflow::measure_peaks(
            pflow::synthesize(pflow::ibdg_injection(device, v_bus, 1.05 * qmax.value)));
        const double peak_above = *std::max_element(above.begin(), above.end());
        min_excess = std::min(min_excess, peak_above / device.i_rating);
    }
    const double elapsed = seconds_since(start);
    detail = fmt("%d states, worst at-limit deviation %.3g, smallest 1.05x overshoot factor %.4f, %.3f s",
                 general_form_states, worst_at_limit, min_excess, elapsed);
    return worst_at_limit <= 0.005 && min_excess > 1.0 && elapsed < 5.0;
}

// ---------------------------------------------------------------------------
// Criterion 4: every analytic stamp family matches central finite differences
// of its nonlinear function to a relative 1e-6 at 200 random expansion points
// (per family): the constant-power generator block, the inverter block with
// the sequence chain rule, and the Volt/VAR target derivative.
// ---------------------------------------------------------------------------
double pv_stamp_fd_error(Rng& rng) {
    const double p = rng.uniform(0.0, 0.5);
    const double q = rng.uniform(-0.4, 0.4);
    const Complex v = rng.complex_in_annulus(0.5, 1.4);

    double jac[2][3] = {};
    for (const pflow::StampEntry& entry : pflow::pv_linearize(p, q, v)) {
        if (entry.col == pflow::kRhsCol) continue;
        jac[entry.row][entry.col] = entry.value;
    }

    const double h = 1e-7;
    double scale = 1.0;
    for (auto& row : jac)
        for (double x : row) scale = std::max(scale, std::abs(x));

    double worst = 0.0;
    for (int col = 0; col < 3; ++col) {
        const auto eval = [&](double delta) {
            const Complex dv{col == 0 ? delta : 0.0, col == 1 ? delta : 0.0};
            const double dq = col == 2 ? delta : 0.0;
            return pflow::pv_current_injection(p, q + dq, v + dv);
        };
        const Complex diff = (eval(h) - eval(-h)) / (2.0 * h);
        worst = std::max(worst, std::abs(jac[0][col] - diff.real()) / scale);
        worst = std::max(worst, std::abs(jac[1][col] - diff.imag()) / scale);
    }
    return worst;
}

double ibdg_stamp_fd_error(Rng& rng) {
    pflow::IbdgDevice device;
    device.p3g = rng.uniform(0.0, 0.5);
    device.k1 = rng.uniform(0.0, 1.0);
    device.k2 = rng.uniform(0.0, 1.0);
    device.alpha = Complex{1.0, 0.0} + rng.complex_in_box(0.2);
    device.beta = rng.complex_in_box(0.25);
    const double q3g = rng.uniform(-0.35, 0.35);

    const Complex vpos = rng.complex_in_annulus(0.6, 1.2);
    const Complex vneg = rng.complex_in_annulus(0.05, 0.45);
    const PhasorSet v_bus = pflow::sequence_to_phase({Complex{}, vpos, vneg});

    double jac[6][7] = {};
    for (const pflow::StampEntry& entry : pflow::ibdg_linearize(device, v_bus, q3g)) {
        if (entry.col == pflow::kRhsCol) continue;
        jac[entry.row][entry.col] = entry.value;
    }
    double scale = 1.0;
    for (auto& row : jac)
        for (double x : row) scale = std::max(scale, std::abs(x));

    const double h = 1e-7;
    double worst = 0.0;
    for (int col = 0; col < 7; ++col) {
        const auto eval = [&](double delta) {
            PhasorSet v = v_bus;
            double q = q3g;
            if (col == pflow::kIbdgColQ) {
                q += delta;
            } else {
                const Phase p = static_cast<Phase>(col / 2);
                v[p] += (col % 2 == 0) ? Complex{delta, 0.0} : Complex{0.0, delta};
            }
            return pflow::ibdg_injection(device, v, q);
        };
        const PhasorSet fwd = eval(h);
        const PhasorSet bwd = eval(-h);
        for (Phase p : pflow::kAllPhases) {
            const std::size_t i = static_cast<std::size_t>(pflow::phase_index(p));
            const Complex diff = (fwd[p] - bwd[p]) / (2.0 * h);
            worst = std::max(worst, std::abs(jac[2 * i][col] - diff.real()) / scale);
            worst = std::max(worst, std::abs(jac[2 * i + 1][col] - diff.imag()) / scale);
        }
    }
    return worst;
}

double voltvar_chain_fd_error(Rng& rng) {
    pflow::VoltVarBreakpoints bp;
    bp.v1 = rng.uniform(0.88, 0.94);
    bp.v2 = bp.v1 + rng.uniform(0.03, 0.06);
    bp.v3 = bp.v2 + rng.uniform(0.02, 0.05);
    bp.v4 = bp.v3 + rng.uniform(0.03, 0.06);
    bp.q_cap = rng.uniform(0.1, 0.5);
    bp.q_abs = -rng.uniform(0.1, 0.5);
    bp.patch_halfwidth = rng.uniform(0.003, 0.006);
    const pflow::VoltVarCurve curve = pflow::VoltVarCurve::build(bp);
    const double q_max = rng.uniform(0.2, 0.6);
    const double lambda = rng.uniform() < 0.5 ? 1.0 : 0.5;

    const double h = 1e-7;
    double v = 0.0;
    for (int attempt = 0; attempt < 200; ++attempt) {
        v = rng.uniform(bp.v1 - 0.03, bp.v4 + 0.03);
        bool clear = true;
        for (double knot : curve.knots()) clear = clear && std::abs(v - knot) > 10.0 * h;
        // Keep clear of the capability-clamp knee band as well: the composed
        // function is C1 there but its curvature spike would dominate the
        // finite-difference truncation error.
        const double request = std::abs(curve.eval(v));
        clear = clear && (request < 0.95 * q_max || request > 1.07 * q_max);
        if (clear) break;
    }

    const auto target = [&](double x) {
        return lambda * pflow::apply_q_limit(curve.eval(x), q_max);
    };
    const double diff = (target(v + h) - target(v - h)) / (2.0 * h);
    const double analytic = pflow::voltvar_target_derivative(curve, v, q_max, lambda);
    return std::abs(analytic - diff) / std::max(1.0, std::abs(analytic));
}

bool stamp_jacobians(std::string& detail) {
    Rng rng(904);
    double worst_pv = 0.0;
    double worst_ibdg = 0.0;
    double worst_chain = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        worst_pv = std::max(worst_pv, pv_stamp_fd_error(rng));
        worst_ibdg = std::max(worst_ibdg, ibdg_stamp_fd_error(rng));
        worst_chain = std::max(worst_chain, voltvar_chain_fd_error(rng));
    }
    detail = fmt("200 points/family, worst rel: generator %.3g, inverter %.3g, Volt/VAR chain %.3g",
                 worst_pv, worst_ibdg, worst_chain);
    return worst_pv <= 1e-6 && worst_ibdg <= 1e-6 && worst_chain <= 1e-6;
}

// ---------------------------------------------------------------------------
// Criterion 5: Volt/VAR first-order continuity on 20 randomized curves:
// values continuous to 1e-12 and derivatives to 1e-9 across every knot, flat
// saturation tails, and a monotone non-increasing sweep.
// ---------------------------------------------------------------------------
bool voltvar_continuity(std::string& detail) {
    Rng rng(905);
    double worst_value_jump = 0.0;
    double worst_slope_jump = 0.0;
    double worst_tail_slope = 0.0;
    double worst_increase = 0.0;

    for (int trial = 0; trial < 20; ++trial) {
        pflow::VoltVarBreakpoints bp;
        bp.patch_halfwidth = rng.uniform(0.002, 0.008);
        const double gap = 2.5 * bp.patch_halfwidth;
        bp.v1 = rng.uniform(0.85, 0.93);
        bp.v2 = bp.v1 + gap + rng.uniform(0.01, 0.06);
        bp.v3 = bp.v2 + gap + rng.uniform(0.005, 0.05);
        bp.v4 = bp.v3 + gap + rng.uniform(0.01, 0.06);
        bp.q_cap = rng.uniform(0.05, 0.5);
        bp.q_abs = -rng.uniform(0.05, 0.5);
        const pflow::VoltVarCurve curve = pflow::VoltVarCurve::build(bp);

        for (double knot : curve.knots()) {
            const double left = std::nextafter(knot, -1e9);
            const double right = std::nextafter(knot, 1e9);
            worst_value_jump =
                std::max(worst_value_jump, std::abs(curve.eval(left) - curve.eval(right)));
            worst_slope_jump = std::max(
                worst_slope_jump,
                std::abs(curve.eval_derivative(left) - curve.eval_derivative(right)));
        }

        for (double v : {bp.v1 - 0.05, bp.v1 - 0.4, bp.v4 + 0.05, bp.v4 + 0.4}) {
            worst_tail_slope = std::max(worst_tail_slope, std::abs(curve.eval_derivative(v)));
        }

        double previous = curve.eval(bp.v1 - 0.1);
        for (int i = 1; i <= 2000; ++i) {
            const double v = bp.v1 - 0.1 + (bp.v4 - bp.v1 + 0.2) * i / 2000.0;
            const double value = curve.eval(v);
            worst_increase = std::max(worst_increase, value - previous);
            previous = value;
        }
    }
    detail = fmt("20 curves: value jump %.3g, slope jump %.3g, tail slope %.3g, largest increase %.3g",
                 worst_value_jump, worst_slope_jump, worst_tail_slope, worst_increase);
    return worst_value_jump <= 1e-12 && worst_slope_jump <= 1e-9 &&
           worst_tail_slope <= 1e-15 && worst_increase <= 1e-12;
}

// ---------------------------------------------------------------------------
// Criterion 6: solver ground truth. The two-bus case against an independent
// Picard fixed-point oracle to 1e-8; tiny nodal mismatch on every converging
// corpus case; direct and continuation solves agreeing to 1e-8.
// ---------------------------------------------------------------------------
std::array<Complex, 3> solve3(std::array<std::array<Complex, 3>, 3> m, std::array<Complex, 3> rhs) {
    for (int k = 0; k < 3; ++k) {
        int pivot = k;
        for (int r = k + 1; r < 3; ++r)
            if (std::abs(m[r][k]) > std::abs(m[pivot][k])) pivot = r;
        std::swap(m[k], m[pivot]);
        std::swap(rhs[k], rhs[pivot]);
        for (int r = k + 1; r < 3; ++r) {
            const Complex f = m[r][k] / m[k][k];
            for (int c = k; c < 3; ++c) m[r][c] -= f * m[k][c];
            rhs[r] -= f * rhs[k];
        }
    }
    std::array<Complex, 3> x{};
    for (int k = 2; k >= 0; --k) {
        Complex acc = rhs[k];
        for (int c = k + 1; c < 3; ++c) acc -= m[k][c] * x[c];
        x[k] = acc / m[k][k];
    }
    return x;
}

double kcl_max_norm(const pflow::Network& net, const pflow::SolveResult& result,
                    double lambda = 1.0) {
    pflow::SolverState state{result.voltages, result.q_pv, result.q3g};
    double worst = 0.0;
    for (const PhasorSet& r : pflow::kcl_residual(net, state, lambda))
        for (Phase p : pflow::kAllPhases) worst = std::max(worst, std::abs(r[p]));
    return worst;
}

bool solver_ground_truth(std::string& detail) {
    // Part 1: independent fixed-point oracle on the two-bus corpus case.
    pflow::CaseFile minimal = pflow::load_case(case_path("minimal"));
    const pflow::SolveResult direct = pflow::nr_solve(minimal.network, minimal.options);
    if (!direct.converged) {
        detail = "two-bus case failed to converge";
        return false;
    }
    PhasorSet v2 = minimal.network.slack.voltage;
    const pflow::PhaseMatrix& y = minimal.network.branches[0].y_series;
    for (int it = 0; it < 400; ++it) {
        std::array<Complex, 3> draw{};
        std::array<std::array<Complex, 3>, 3> m{};
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) m[r][c] = y[r][c];
        for (Phase p : pflow::kAllPhases)
            draw[static_cast<std::size_t>(pflow::phase_index(p))] =
                std::conj(minimal.network.loads[0].s[p] / v2[p]);
        const std::array<Complex, 3> drop = solve3(m, draw);
        for (Phase p : pflow::kAllPhases)
            v2[p] = minimal.network.slack.voltage[p] -
                    drop[static_cast<std::size_t>(pflow::phase_index(p))];
    }
    double oracle_gap = 0.0;
    for (Phase p : pflow::kAllPhases)
        oracle_gap = std::max(oracle_gap, std::abs(direct.voltages[1][p] - v2[p]));

    // Part 2: nodal mismatch on every case that converges.
    double worst_kcl = 0.0;
    for (const char* name :
         {"minimal", "two_bus_ibdg", "four_bus_unbalanced", "sag_fpnsc", "oscillating_ibdg",
          "feeder50_end", "feeder50_center", "feeder50_distributed"}) {
        pflow::CaseFile cf = pflow::load_case(case_path(name));
        const pflow::SolveResult result = pflow::nr_solve(cf.network, cf.options);
        if (!result.converged) {
            detail = fmt("case %s failed to converge", name);
            return false;
        }
        worst_kcl = std::max(worst_kcl, kcl_max_norm(cf.network, result));
    }
    // The switching cases converge through the mode-update outer loop.
    for (const char* name : {"pv_gen", "oscillating_pvpq"}) {
        pflow::CaseFile cf = pflow::load_case(case_path(name));
        const pflow::SwitchingSolveResult outcome =
            pflow::solve_with_pvpq_switching(cf.network, cf.options);
        if (!outcome.result.converged) {
            detail = fmt("switching case %s failed to converge", name);
            return false;
        }
        worst_kcl = std::max(worst_kcl, kcl_max_norm(cf.network, outcome.result));
    }

    // Part 3: continuation agrees with the direct solve when both converge.
    double worst_path_gap = 0.0;
    for (const char* name : {"minimal", "two_bus_ibdg", "sag_fpnsc", "feeder50_end"}) {
        pflow::CaseFile cf = pflow::load_case(case_path(name));
        const pflow::SolveResult a = pflow::nr_solve(cf.network, cf.options);
        const pflow::SolveResult b = pflow::homotopy_solve(cf.network, cf.options);
        if (!a.converged || !b.converged) {
            detail = fmt("case %s: direct/continuation disagreement on convergence", name);
            return false;
        }
        for (std::size_t bus = 0; bus < a.voltages.size(); ++bus)
            for (Phase p : pflow::kAllPhases)
                worst_path_gap =
                    std::max(worst_path_gap, std::abs(a.voltages[bus][p] - b.voltages[bus][p]));
    }

    detail = fmt("oracle gap %.3g, worst corpus KCL %.3g, direct-vs-continuation gap %.3g",
                 oracle_gap, worst_kcl, worst_path_gap);
    return oracle_gap <= 1e-8 && worst_kcl < 1e-8 && worst_path_gap <= 1e-8;
}

// ---------------------------------------------------------------------------
// Criterion 7: feeder-scale robustness. Three 50-bus feeder variants (devices
// at the ends, the center, and spread out) swept from 0 to 100% inverter
// active power under the continuation driver: every step converges in under
// two seconds with each inverter's (|V+|, q3g) pair on its Volt/VAR curve.
// ---------------------------------------------------------------------------
bool feeder_sweep(std::string& detail) {
    double slowest = 0.0;
    double worst_curve = 0.0;
    int steps = 0;
    for (const char* name : {"feeder50_end", "feeder50_center", "feeder50_distributed"}) {
        pflow::CaseFile cf = pflow::load_case(case_path(name));
        if (cf.network.buses.size() != 50 || cf.network.ibdgs.size() != 10) {
            detail = fmt("%s: expected 50 buses and 10 inverters", name);
            return false;
        }
        for (int tick = 0; tick <= 10; ++tick) {
            const double factor = tick / 10.0;
            pflow::Network net = cf.network;
            for (pflow::IbdgDevice& device : net.ibdgs) device.p3g *= factor;

            const auto start = Clock::now();
            const pflow::SolveResult result = pflow::homotopy_solve(net, cf.options);
            const double elapsed = seconds_since(start);
            slowest = std::max(slowest, elapsed);
            ++steps;
            if (!result.converged) {
                detail = fmt("%s at %.0f%% did not converge", name, 100.0 * factor);
                return false;
            }
            if (elapsed >= 2.0) {
                detail = fmt("%s at %.0f%% took %.2f s", name, 100.0 * factor, elapsed);
                return false;
            }

            pflow::SolverState state{result.voltages, result.q_pv, result.q3g};
            const std::vector<double> limits = pflow::ibdg_q_limits(net, state);
            for (std::size_t d = 0; d < net.ibdgs.size(); ++d) {
                const pflow::IbdgDevice& device = net.ibdgs[d];
                const int pos = net.bus_index(device.bus);
                const Complex vpos =
                    pflow::phase_to_sequence(result.voltages[static_cast<std::size_t>(pos)])
                        .positive;
                worst_curve = std::max(
                    worst_curve, std::abs(pflow::voltvar_residual(device.voltvar, std::abs(vpos),
                                                                  result.q3g[d], limits[d], 1.0)));
            }
        }
    }
    detail = fmt("3 placements x 11 steps, slowest step %.3f s, worst curve residual %.3g",
                 slowest, worst_curve);
    return steps == 33 && slowest < 2.0 && worst_curve < 1e-6;
}

// ---------------------------------------------------------------------------
// Criterion 8: regulator-switching contrast. The constructed two-regulator
// case drives the per-phase mode toggling past its budget of 5, the detector
// flags and freezes it; the same feeder served by the smoothly limited
// inverter model converges without any switching machinery.
// ---------------------------------------------------------------------------
bool switching_oscillation_contrast(std::string& detail) {
    pflow::CaseFile osc = pflow::load_case(case_path("oscillating_pvpq"));
    const pflow::SwitchingSolveResult outcome =
        pflow::solve_with_pvpq_switching(osc.network, osc.options);
    int frozen = 0;
    int max_toggles = 0;
    for (const auto& gen_modes : outcome.modes) {
        for (const pflow::PhaseSwitchState& phase : gen_modes) {
            frozen += phase.frozen ? 1 : 0;
            max_toggles = std::max(max_toggles, phase.toggles);
        }
    }

    pflow::CaseFile smooth = pflow::load_case(case_path("oscillating_ibdg"));
    const pflow::SolveResult counterpart = pflow::nr_solve(smooth.network, smooth.options);

    detail = fmt("switching: oscillation %s after %d rounds (max toggles %d, %d frozen); "
                 "inverter model: %s in %d iterations",
                 outcome.oscillation_detected ? "flagged" : "missed", outcome.rounds, max_toggles,
                 frozen, counterpart.converged ? "converged" : "failed", counterpart.iterations);
    return outcome.oscillation_detected && frozen >= 1 && max_toggles > pflow::kMaxModeToggles &&
           counterpart.converged;
}

// ---------------------------------------------------------------------------
// Criterion 9: balanced degeneracy. With k1 = k2 = 1 and a balanced bus
// voltage the injected currents are balanced to 1e-10 and the reactive
// capability collapses to exactly rating times |V+|.
// ---------------------------------------------------------------------------
bool balanced_degeneracy(std::string& detail) {
    Rng rng(909);
    const Complex a = std::polar(1.0, 2.0 * std::numbers::pi / 3.0);
    double worst_unbalance = 0.0;
    int exact_qmax = 0;
    for (int trial = 0; trial < 50; ++trial) {
        pflow::IbdgDevice device;
        device.k1 = 1.0;
        device.k2 = 1.0;
        device.p3g = rng.uniform(0.0, 0.5);
        device.i_rating = rng.uniform(0.4, 1.5);
        device.alpha = Complex{1.0, 0.0} + rng.complex_in_box(0.2);
        device.beta = rng.complex_in_box(0.25);
        const double q3g = rng.uniform(-0.4, 0.4);

        const Complex vpos = rng.complex_in_annulus(0.5, 1.3);
        const PhasorSet v_bus = pflow::sequence_to_phase({Complex{}, vpos, Complex{}});

        const PhasorSet currents = pflow::ibdg_injection(device, v_bus, q3g);
        // A balanced positive-rotation set satisfies I_b = a^2 I_a, I_c = a I_a.
        worst_unbalance = std::max(worst_unbalance,
                                   std::abs(currents[Phase::B] - a * a * currents[Phase::A]));
        worst_unbalance =
            std::max(worst_unbalance, std::abs(currents[Phase::C] - a * currents[Phase::A]));

        const pflow::CurrentLimitTerms terms =
            pflow::make_limit_terms(vpos, Complex{}, device.k1, device.k2);
        const pflow::QMaxResult qmax = pflow::q_max_reactive(device.i_rating, terms, device.k2);
        if (qmax.value == device.i_rating * std::abs(vpos)) ++exact_qmax;
    }
    detail = fmt("50 states, worst current unbalance %.3g, exact capability identities %d/50",
                 worst_unbalance, exact_qmax);
    return worst_unbalance <= 1e-10 && exact_qmax == 50;
}

struct Criterion {
    const char* label;
    bool (*run)(std::string&);
};

}  // namespace

int main() {
    const Criterion criteria[] = {
        {"sequence-split currents match the complex control law", sequence_split_consistency},
        {"analytic peak currents match sampled waveform maxima", peak_formula_oracle},
        {"the reactive capability brackets the current rating", reactive_capability_bracket},
        {"device stamps match finite differences", stamp_jacobians},
        {"Volt/VAR curves are first-order continuous and monotone", voltvar_continuity},
        {"solver matches the independent oracle and its own ground truth", solver_ground_truth},
        {"50-bus feeder sweeps converge fast with inverters on-curve", feeder_sweep},
        {"mode-switching oscillation is flagged while the inverter model converges",
         switching_oscillation_contrast},
        {"balanced operation degenerates to the exact closed forms", balanced_degeneracy},
    };

    int failures = 0;
    for (const Criterion& criterion : criteria) {
        std::string detail;
        bool ok = false;
        try {
            ok = criterion.run(detail);
        } catch (const std::exception& error) {
            detail = fmt("unexpected exception: %s", error.what());
        } catch (...) {
            detail = "unexpected non-standard exception";
        }
        std::printf("%s — %s (%s)\n", ok ? "PASS" : "FAIL", criterion.label, detail.c_str());
        failures += ok ? 0 : 1;
    }
    if (failures > 0) {
        std::printf("%d of 9 acceptance criteria failed\n", failures);
    } else {
        std::printf("all 9 acceptance criteria passed\n");
    }
    return failures;
}
