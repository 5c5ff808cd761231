#include "pflow/solver.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "pflow/ibdg.hpp"
#include "pflow/sequence.hpp"
#include "pflow/voltvar.hpp"

namespace pflow {

namespace {

/// Rows of the phase-to-sequence map belonging to the positive-sequence
/// component, as a 2x6 real matrix over the stacked phase components. The
/// transform is linear, so probing with unit vectors reproduces it exactly.
struct PositiveSequenceMap {
    double m[2][6];
};

[[nodiscard]] PositiveSequenceMap positive_sequence_rows() {
    PositiveSequenceMap out;
    for (int c = 0; c < 6; ++c) {
        PhasorSet unit{};
        unit[static_cast<Phase>(c / 2)] = (c % 2 == 0) ? Complex{1.0, 0.0} : Complex{0.0, 1.0};
        const SequenceSet s = phase_to_sequence(unit);
        out.m[0][c] = s.positive.real();
        out.m[1][c] = s.positive.imag();
    }
    return out;
}

[[nodiscard]] DeviceControlState make_control(const Network& network, const SolverState& state) {
    DeviceControlState control;
    control.ibdg_q_max = ibdg_q_limits(network, state);
    control.gen_modes.assign(network.generators.size(), {});
    return control;
}

void state_to_vector(const Network& network, const UnknownIndexer& indexer,
                     const SolverState& state, Eigen::VectorXd& x) {
    x.setZero(indexer.size());
    for (std::size_t b = 0; b < network.buses.size(); ++b) {
        for (const Phase phase : kAllPhases) {
            const int r = indexer.voltage_index(static_cast<int>(b), phase, 0);
            const int i = indexer.voltage_index(static_cast<int>(b), phase, 1);
            if (r >= 0) {
                x(r) = state.voltages[b][phase].real();
                x(i) = state.voltages[b][phase].imag();
            }
        }
    }
    for (std::size_t g = 0; g < network.generators.size(); ++g) {
        for (const Phase phase : kAllPhases) {
            const int idx = indexer.pv_q_index(static_cast<int>(g), phase);
            if (idx >= 0) {
                x(idx) = state.q_pv[g][static_cast<std::size_t>(phase_index(phase))];
            }
        }
    }
    for (std::size_t d = 0; d < network.ibdgs.size(); ++d) {
        x(indexer.ibdg_q_index(static_cast<int>(d))) = state.q3g[d];
    }
}

[[nodiscard]] SolverState vector_to_state(const Network& network, const UnknownIndexer& indexer,
                                          const Eigen::VectorXd& x) {
    SolverState state;
    state.voltages.assign(network.buses.size(), PhasorSet{});
    state.q_pv.assign(network.generators.size(), {});
    state.q3g.assign(network.ibdgs.size(), 0.0);
    for (std::size_t b = 0; b < network.buses.size(); ++b) {
        for (const Phase phase : kAllPhases) {
            const int r = indexer.voltage_index(static_cast<int>(b), phase, 0);
            const int i = indexer.voltage_index(static_cast<int>(b), phase, 1);
            if (r >= 0) {
                state.voltages[b][phase] = Complex{x(r), x(i)};
            }
        }
    }
    for (std::size_t g = 0; g < network.generators.size(); ++g) {
        for (const Phase phase : kAllPhases) {
            const int idx = indexer.pv_q_index(static_cast<int>(g), phase);
            if (idx >= 0) {
                state.q_pv[g][static_cast<std::size_t>(phase_index(phase))] = x(idx);
            }
        }
    }
    for (std::size_t d = 0; d < network.ibdgs.size(); ++d) {
        state.q3g[d] = x(indexer.ibdg_q_index(static_cast<int>(d)));
    }
    return state;
}

/// Scaled copy of a device for source-stepping continuation.
[[nodiscard]] IbdgDevice scaled_device(const IbdgDevice& device, double lambda) {
    IbdgDevice scaled = device;
    scaled.p3g = lambda * device.p3g;
    return scaled;
}

struct StageOutcome {
    bool converged = false;
    bool structural_failure = false;
    std::string failure;
    double kcl_norm = 0.0;
};

/// Maximum residual magnitude over the nodal-balance rows only.
[[nodiscard]] double kcl_norm_of(const UnknownIndexer& indexer, const Eigen::VectorXd& f,
                                 int first_device) {
    double norm = 0.0;
    for (int r = 0; r < first_device; ++r) {
        if (!indexer.is_slack_row(r)) {
            norm = std::max(norm, std::abs(f(r)));
        }
    }
    return norm;
}

[[nodiscard]] double control_norm_of(const Eigen::VectorXd& f, int first_device) {
    double norm = 0.0;
    for (int r = first_device; r < f.size(); ++r) {
        norm = std::max(norm, std::abs(f(r)));
    }
    return norm;
}

/// Diagnoses an unfactorizable system: a structurally empty row or column
/// names the offending unknown; anything else is a numerical failure the
/// caller treats as divergence.
[[nodiscard]] std::pair<bool, std::string> diagnose_singular(
    const Eigen::SparseMatrix<double>& matrix, const UnknownIndexer& indexer) {
    const int n = static_cast<int>(matrix.cols());
    std::vector<bool> row_seen(static_cast<std::size_t>(n), false);
    for (int c = 0; c < n; ++c) {
        if (matrix.outerIndexPtr()[c] == matrix.outerIndexPtr()[c + 1]) {
            return {true, "zero pivot: no equation involves " + indexer.describe(c)};
        }
        for (Eigen::SparseMatrix<double>::InnerIterator it(matrix, c); it; ++it) {
            row_seen[static_cast<std::size_t>(it.row())] = true;
        }
    }
    for (int r = 0; r < n; ++r) {
        if (!row_seen[static_cast<std::size_t>(r)]) {
            return {true, "zero pivot: empty equation row for " + indexer.describe(r)};
        }
    }
    return {false, "numerically singular system"};
}

/// One Newton run at fixed loading fraction. Mutates state/control on
/// success and failure alike (the caller keeps a copy if it needs rollback).
[[nodiscard]] StageOutcome newton_stage(const Network& network, const UnknownIndexer& indexer,
                                        const SolverOptions& options, double lambda,
                                        SolverState& state, DeviceControlState& control,
                                        std::vector<TraceEntry>& trace, int& iterations) {
    StageOutcome outcome;
    const int first_device = indexer.first_device_index();

    Eigen::VectorXd x(indexer.size());
    state_to_vector(network, indexer, state, x);

    double q_scale = std::clamp(options.q_relax, 0.0, 1.0);
    if (q_scale == 0.0) {
        q_scale = 1.0;
    }

    for (int it = 0; it < options.max_iter; ++it) {
        AssembledSystem sys;
        try {
            control.ibdg_q_max = ibdg_q_limits(network, state);
            sys = assemble(network, indexer, state, control, lambda);
        } catch (const SingularVoltageError&) {
            outcome.failure = "voltage collapsed to zero at a device bus";
            return outcome;
        }

        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(sys.matrix);
        if (lu.info() != Eigen::Success) {
            const auto [structural, message] = diagnose_singular(sys.matrix, indexer);
            outcome.structural_failure = structural;
            outcome.failure = message;
            return outcome;
        }
        Eigen::VectorXd x_next = lu.solve(sys.rhs);
        if (lu.info() != Eigen::Success || !x_next.allFinite()) {
            outcome.failure = "linear solve produced a non-finite update";
            return outcome;
        }

        Eigen::VectorXd delta = x_next - x;
        for (int r = first_device; r < delta.size(); ++r) {
            delta(r) *= q_scale;
        }
        double v_norm = 0.0;
        for (int r = 0; r < first_device; ++r) {
            v_norm = std::max(v_norm, std::abs(delta(r)));
        }
        const double scale = v_norm > options.v_step_max ? options.v_step_max / v_norm : 1.0;
        delta *= scale;
        x += delta;
        const double update_norm = delta.cwiseAbs().maxCoeff();

        state = vector_to_state(network, indexer, x);
        q_scale = std::min(1.0, q_scale * 2.0);

        double q_drift = 0.0;
        double kcl = 0.0;
        double ctrl = 0.0;
        try {
            const std::vector<double> limits = ibdg_q_limits(network, state);
            for (std::size_t d = 0; d < limits.size(); ++d) {
                q_drift = std::max(q_drift, std::abs(limits[d] - control.ibdg_q_max[d]));
            }
            DeviceControlState probe = control;
            probe.ibdg_q_max = limits;
            const Eigen::VectorXd f = residual_vector(network, indexer, state, probe, lambda);
            kcl = kcl_norm_of(indexer, f, first_device);
            ctrl = control_norm_of(f, first_device);
        } catch (const SingularVoltageError&) {
            outcome.failure = "voltage collapsed to zero at a device bus";
            return outcome;
        }

        trace.push_back({++iterations, update_norm, kcl, lambda});
        outcome.kcl_norm = kcl;

        if (update_norm < options.tol && kcl < options.residual_tol &&
            ctrl < options.residual_tol && q_drift < options.q_limit_fixed_point_tol) {
            outcome.converged = true;
            return outcome;
        }
    }
    outcome.failure = "iteration limit reached";
    return outcome;
}

[[nodiscard]] SolveResult result_from_state(const Network& network, SolverState state) {
    SolveResult result;
    result.voltages = std::move(state.voltages);
    result.q_pv = std::move(state.q_pv);
    result.q3g = std::move(state.q3g);
    (void)network;
    return result;
}

[[nodiscard]] double kcl_max_norm(const Network& network, const SolverState& state,
                                  double lambda) {
    double norm = 0.0;
    for (const PhasorSet& mismatch : kcl_residual(network, state, lambda)) {
        for (const Phase phase : kAllPhases) {
            norm = std::max(norm, std::abs(mismatch[phase]));
        }
    }
    return norm;
}

}  // namespace

UnknownIndexer::UnknownIndexer(const Network& network) {
    bus_offsets_.assign(network.buses.size(), {-1, -1, -1, -1, -1, -1});
    for (std::size_t b = 0; b < network.buses.size(); ++b) {
        const Bus& bus = network.buses[b];
        const bool slack = bus.id == network.slack.bus;
        for (const Phase phase : kAllPhases) {
            if (!bus.phases.contains(phase)) {
                continue;
            }
            for (int part = 0; part < 2; ++part) {
                bus_offsets_[b][static_cast<std::size_t>(phase_index(phase) * 2 + part)] = total_;
                slack_row_.push_back(slack);
                labels_.push_back("bus " + std::to_string(bus.id) + " phase " +
                                  phase_letter(phase) + (part == 0 ? " voltage (real)"
                                                                   : " voltage (imaginary)"));
                ++total_;
            }
        }
    }
    first_device_ = total_;

    gen_offsets_.assign(network.generators.size(), {-1, -1, -1});
    for (std::size_t g = 0; g < network.generators.size(); ++g) {
        const PvGenerator& gen = network.generators[g];
        const Bus* bus = network.find_bus(gen.bus);
        if (bus == nullptr) {
            throw SolverError{"generator references unknown bus " + std::to_string(gen.bus)};
        }
        for (const Phase phase : kAllPhases) {
            if (!bus->phases.contains(phase)) {
                continue;
            }
            gen_offsets_[g][static_cast<std::size_t>(phase_index(phase))] = total_;
            slack_row_.push_back(false);
            labels_.push_back("generator at bus " + std::to_string(gen.bus) + " phase " +
                              phase_letter(phase) + " reactive power");
            ++total_;
        }
    }

    ibdg_offsets_.assign(network.ibdgs.size(), -1);
    for (std::size_t d = 0; d < network.ibdgs.size(); ++d) {
        const IbdgDevice& device = network.ibdgs[d];
        if (network.find_bus(device.bus) == nullptr) {
            throw SolverError{"inverter references unknown bus " + std::to_string(device.bus)};
        }
        ibdg_offsets_[d] = total_;
        slack_row_.push_back(false);
        labels_.push_back("inverter at bus " + std::to_string(device.bus) +
                          " three-phase reactive power");
        ++total_;
    }
}

int UnknownIndexer::voltage_index(int bus_pos, Phase phase, int part) const {
    return bus_offsets_[static_cast<std::size_t>(bus_pos)]
                       [static_cast<std::size_t>(phase_index(phase) * 2 + part)];
}

int UnknownIndexer::pv_q_index(int gen_pos, Phase phase) const {
    return gen_offsets_[static_cast<std::size_t>(gen_pos)]
                       [static_cast<std::size_t>(phase_index(phase))];
}

int UnknownIndexer::ibdg_q_index(int ibdg_pos) const {
    return ibdg_offsets_[static_cast<std::size_t>(ibdg_pos)];
}

bool UnknownIndexer::is_slack_row(int index) const {
    return slack_row_[static_cast<std::size_t>(index)];
}

const std::string& UnknownIndexer::describe(int index) const {
    return labels_[static_cast<std::size_t>(index)];
}

SolverState flat_start(const Network& network) {
    SolverState state;
    state.voltages.assign(network.buses.size(), PhasorSet{});
    for (std::size_t b = 0; b < network.buses.size(); ++b) {
        for (const Phase phase : kAllPhases) {
            if (network.buses[b].phases.contains(phase)) {
                state.voltages[b][phase] = network.slack.voltage[phase];
            }
        }
    }
    state.q_pv.assign(network.generators.size(), {});
    state.q3g.assign(network.ibdgs.size(), 0.0);
    return state;
}

std::vector<double> ibdg_q_limits(const Network& network, const SolverState& state) {
    std::vector<double> limits;
    limits.reserve(network.ibdgs.size());
    for (const IbdgDevice& device : network.ibdgs) {
        const int bus_pos = network.bus_index(device.bus);
        const SequenceSet vseq =
            phase_to_sequence(state.voltages[static_cast<std::size_t>(bus_pos)]);
        const CurrentLimitTerms terms =
            make_limit_terms(vseq.positive, vseq.negative, device.k1, device.k2);
        limits.push_back(q_max_reactive(device.i_rating, terms, device.k2).value);
    }
    return limits;
}

AssembledSystem assemble(const Network& network, const UnknownIndexer& indexer,
                         const SolverState& state, const DeviceControlState& control,
                         double lambda) {
    const int n = indexer.size();
    std::vector<Eigen::Triplet<double>> triplets;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);

    const auto add = [&](int row, int col, double value) {
        if (!indexer.is_slack_row(row)) {
            triplets.emplace_back(row, col, value);
        }
    };
    const auto add_rhs = [&](int row, double value) {
        if (!indexer.is_slack_row(row)) {
            rhs(row) += value;
        }
    };

    // Slack identity rows.
    const int slack_pos = network.bus_index(network.slack.bus);
    for (const Phase phase : kAllPhases) {
        for (int part = 0; part < 2; ++part) {
            const int r = indexer.voltage_index(slack_pos, phase, part);
            if (r >= 0) {
                triplets.emplace_back(r, r, 1.0);
                rhs(r) = part == 0 ? network.slack.voltage[phase].real()
                                   : network.slack.voltage[phase].imag();
            }
        }
    }

    // Branch admittance stamps (linear; the continuation does not scale the
    // network itself).
    for (const Branch& branch : network.branches) {
        const int from_pos = network.bus_index(branch.from);
        const int to_pos = network.bus_index(branch.to);
        for (const StampEntry& entry : stamp_branch(branch)) {
            const auto map_local = [&](int local) {
                const int bus_pos = local < 6 ? from_pos : to_pos;
                const int comp = local % 6;
                return indexer.voltage_index(bus_pos, static_cast<Phase>(comp / 2), comp % 2);
            };
            const int row = map_local(entry.row);
            const int col = map_local(entry.col);
            if (row >= 0 && col >= 0) {
                add(row, col, entry.value);
            }
        }
    }

    // Loads: linearized constant-power draws.
    for (const ConstantPowerLoad& load : network.loads) {
        const int bus_pos = network.bus_index(load.bus);
        for (const Phase phase : kAllPhases) {
            const Complex s_eff = lambda * load.s[phase];
            const int r0 = indexer.voltage_index(bus_pos, phase, 0);
            if (s_eff == Complex{0.0, 0.0} || r0 < 0) {
                continue;
            }
            const Complex v_k = state.voltages[static_cast<std::size_t>(bus_pos)][phase];
            for (const StampEntry& entry : load_linearize(s_eff, v_k)) {
                const int row = indexer.voltage_index(bus_pos, phase, entry.row);
                if (entry.col == kRhsCol) {
                    add_rhs(row, entry.value);
                } else {
                    add(row, indexer.voltage_index(bus_pos, phase, entry.col), -entry.value);
                }
            }
        }
    }

    // Generators: linearized injections plus per-phase control rows.
    for (std::size_t g = 0; g < network.generators.size(); ++g) {
        const PvGenerator& gen = network.generators[g];
        const int bus_pos = network.bus_index(gen.bus);
        for (const Phase phase : kAllPhases) {
            const int q_col = indexer.pv_q_index(static_cast<int>(g), phase);
            if (q_col < 0) {
                continue;
            }
            const std::size_t pi = static_cast<std::size_t>(phase_index(phase));
            const double p_eff = lambda * gen.p_per_phase[pi];
            const double q_k = state.q_pv[g][pi];
            const Complex v_k = state.voltages[static_cast<std::size_t>(bus_pos)][phase];

            for (const StampEntry& entry : pv_linearize(p_eff, q_k, v_k)) {
                const int row = indexer.voltage_index(bus_pos, phase, entry.row);
                if (entry.col == kRhsCol) {
                    add_rhs(row, entry.value);
                } else if (entry.col == kPvColQ) {
                    add(row, q_col, -entry.value);
                } else {
                    add(row, indexer.voltage_index(bus_pos, phase, entry.col), -entry.value);
                }
            }

            const PhaseSwitchState& mode =
                control.gen_modes.empty() ? PhaseSwitchState{} : control.gen_modes[g][pi];
            if (mode.mode == RegulationMode::PV) {
                // Linearized |v|^2 = setpoint^2.
                triplets.emplace_back(q_col, indexer.voltage_index(bus_pos, phase, 0),
                                      2.0 * v_k.real());
                triplets.emplace_back(q_col, indexer.voltage_index(bus_pos, phase, 1),
                                      2.0 * v_k.imag());
                rhs(q_col) = gen.v_setpoint * gen.v_setpoint + std::norm(v_k);
            } else {
                triplets.emplace_back(q_col, q_col, 1.0);
                rhs(q_col) = mode.q_pinned;
            }
        }
    }

    // Inverters: linearized injections plus the Volt/VAR row.
    const PositiveSequenceMap pos_map = positive_sequence_rows();
    for (std::size_t d = 0; d < network.ibdgs.size(); ++d) {
        const IbdgDevice& device = network.ibdgs[d];
        const IbdgDevice device_eff = scaled_device(device, lambda);
        const int bus_pos = network.bus_index(device.bus);
        const int q_col = indexer.ibdg_q_index(static_cast<int>(d));
        const PhasorSet& v_bus_k = state.voltages[static_cast<std::size_t>(bus_pos)];
        const double q3g_k = state.q3g[d];

        const auto volt_col = [&](int comp) {
            return indexer.voltage_index(bus_pos, static_cast<Phase>(comp / 2), comp % 2);
        };

        for (const StampEntry& entry : ibdg_linearize(device_eff, v_bus_k, q3g_k)) {
            const int row = volt_col(entry.row);
            if (entry.col == kRhsCol) {
                add_rhs(row, entry.value);
            } else if (entry.col == kIbdgColQ) {
                add(row, q_col, -entry.value);
            } else {
                add(row, volt_col(entry.col), -entry.value);
            }
        }

        // Volt/VAR control row: q3g = lambda * limited(curve(|V+|)).
        const SequenceSet vseq = phase_to_sequence(v_bus_k);
        const double v_ctrl = std::abs(vseq.positive);
        if (v_ctrl < kSequenceEpsilon) {
            throw SingularVoltageError{"volt/var control voltage", device.bus};
        }
        const double q_max = control.ibdg_q_max[d];
        const double target_slope =
            voltvar_target_derivative(device.voltvar, v_ctrl, q_max, lambda);
        const double residual_k =
            voltvar_residual(device.voltvar, v_ctrl, q3g_k, q_max, lambda);

        double grad_dot_x = 0.0;
        triplets.emplace_back(q_col, q_col, 1.0);
        for (int comp = 0; comp < 6; ++comp) {
            const double x_comp = comp % 2 == 0 ? v_bus_k[static_cast<Phase>(comp / 2)].real()
                                                : v_bus_k[static_cast<Phase>(comp / 2)].imag();
            const double dv_ctrl = (vseq.positive.real() * pos_map.m[0][comp] +
                                    vseq.positive.imag() * pos_map.m[1][comp]) /
                                   v_ctrl;
            const double coeff = -target_slope * dv_ctrl;
            triplets.emplace_back(q_col, volt_col(comp), coeff);
            grad_dot_x += coeff * x_comp;
        }
        rhs(q_col) = q3g_k + grad_dot_x - residual_k;
    }

    AssembledSystem sys;
    sys.matrix.resize(n, n);
    sys.matrix.setFromTriplets(triplets.begin(), triplets.end());
    sys.rhs = std::move(rhs);
    return sys;
}

Eigen::VectorXd residual_vector(const Network& network, const UnknownIndexer& indexer,
                                const SolverState& state, const DeviceControlState& control,
                                double lambda) {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(indexer.size());

    const auto accumulate = [&](int row, double value) {
        if (row >= 0 && !indexer.is_slack_row(row)) {
            f(row) += value;
        }
    };

    // Branch currents into their terminal nodes.
    for (const Branch& branch : network.branches) {
        const int from_pos = network.bus_index(branch.from);
        const int to_pos = network.bus_index(branch.to);
        const PhasorSet& vf = state.voltages[static_cast<std::size_t>(from_pos)];
        const PhasorSet& vt = state.voltages[static_cast<std::size_t>(to_pos)];
        for (const Phase pa : kAllPhases) {
            if (!branch.phases.contains(pa)) {
                continue;
            }
            Complex i_from{0.0, 0.0};
            Complex i_to{0.0, 0.0};
            for (const Phase pb : kAllPhases) {
                if (!branch.phases.contains(pb)) {
                    continue;
                }
                const auto i = static_cast<std::size_t>(phase_index(pa));
                const auto j = static_cast<std::size_t>(phase_index(pb));
                const Complex ys = branch.y_series[i][j];
                const Complex yh = branch.y_shunt[i][j] / 2.0;
                i_from += ys * (vf[pb] - vt[pb]) + yh * vf[pb];
                i_to += ys * (vt[pb] - vf[pb]) + yh * vt[pb];
            }
            accumulate(indexer.voltage_index(from_pos, pa, 0), i_from.real());
            accumulate(indexer.voltage_index(from_pos, pa, 1), i_from.imag());
            accumulate(indexer.voltage_index(to_pos, pa, 0), i_to.real());
            accumulate(indexer.voltage_index(to_pos, pa, 1), i_to.imag());
        }
    }

    // Device injections (nonlinear) subtract from the nodal balance.
    for (const ConstantPowerLoad& load : network.loads) {
        const int bus_pos = network.bus_index(load.bus);
        for (const Phase phase : kAllPhases) {
            const Complex s_eff = lambda * load.s[phase];
            if (s_eff == Complex{0.0, 0.0}) {
                continue;
            }
            const Complex inj =
                load_injection(s_eff, state.voltages[static_cast<std::size_t>(bus_pos)][phase]);
            accumulate(indexer.voltage_index(bus_pos, phase, 0), -inj.real());
            accumulate(indexer.voltage_index(bus_pos, phase, 1), -inj.imag());
        }
    }
    for (std::size_t g = 0; g < network.generators.size(); ++g) {
        const PvGenerator& gen = network.generators[g];
        const int bus_pos = network.bus_index(gen.bus);
        for (const Phase phase : kAllPhases) {
            const int q_idx = indexer.pv_q_index(static_cast<int>(g), phase);
            if (q_idx < 0) {
                continue;
            }
            const std::size_t pi = static_cast<std::size_t>(phase_index(phase));
            const Complex v = state.voltages[static_cast<std::size_t>(bus_pos)][phase];
            const Complex inj =
                pv_current_injection(lambda * gen.p_per_phase[pi], state.q_pv[g][pi], v);
            accumulate(indexer.voltage_index(bus_pos, phase, 0), -inj.real());
            accumulate(indexer.voltage_index(bus_pos, phase, 1), -inj.imag());

            const PhaseSwitchState& mode =
                control.gen_modes.empty() ? PhaseSwitchState{} : control.gen_modes[g][pi];
            if (mode.mode == RegulationMode::PV) {
                f(q_idx) = voltage_control_residual(v, gen.v_setpoint);
            } else {
                f(q_idx) = state.q_pv[g][pi] - mode.q_pinned;
            }
        }
    }
    for (std::size_t d = 0; d < network.ibdgs.size(); ++d) {
        const IbdgDevice& device = network.ibdgs[d];
        const int bus_pos = network.bus_index(device.bus);
        const PhasorSet& v_bus = state.voltages[static_cast<std::size_t>(bus_pos)];
        const PhasorSet inj = ibdg_injection(scaled_device(device, lambda), v_bus, state.q3g[d]);
        for (const Phase phase : kAllPhases) {
            accumulate(indexer.voltage_index(bus_pos, phase, 0), -inj[phase].real());
            accumulate(indexer.voltage_index(bus_pos, phase, 1), -inj[phase].imag());
        }
        const double v_ctrl = std::abs(phase_to_sequence(v_bus).positive);
        f(indexer.ibdg_q_index(static_cast<int>(d))) = voltvar_residual(
            device.voltvar, v_ctrl, state.q3g[d], control.ibdg_q_max[d], lambda);
    }

    // Slack rows: plain voltage mismatch.
    const int slack_pos = network.bus_index(network.slack.bus);
    for (const Phase phase : kAllPhases) {
        const int r = indexer.voltage_index(slack_pos, phase, 0);
        const int i = indexer.voltage_index(slack_pos, phase, 1);
        if (r >= 0) {
            const Complex v = state.voltages[static_cast<std::size_t>(slack_pos)][phase];
            f(r) = v.real() - network.slack.voltage[phase].real();
            f(i) = v.imag() - network.slack.voltage[phase].imag();
        }
    }
    return f;
}

std::vector<PhasorSet> kcl_residual(const Network& network, const SolverState& state,
                                    double lambda) {
    const UnknownIndexer indexer(network);
    DeviceControlState control;
    control.ibdg_q_max.assign(network.ibdgs.size(), 0.0);
    control.gen_modes.assign(network.generators.size(), {});
    const Eigen::VectorXd f = residual_vector(network, indexer, state, control, lambda);

    std::vector<PhasorSet> mismatch(network.buses.size(), PhasorSet{});
    for (std::size_t b = 0; b < network.buses.size(); ++b) {
        if (network.buses[b].id == network.slack.bus) {
            continue;
        }
        for (const Phase phase : kAllPhases) {
            const int r = indexer.voltage_index(static_cast<int>(b), phase, 0);
            const int i = indexer.voltage_index(static_cast<int>(b), phase, 1);
            if (r >= 0) {
                mismatch[b][phase] = Complex{f(r), f(i)};
            }
        }
    }
    return mismatch;
}

SolveResult nr_solve(const Network& network, const SolverOptions& options) {
    require_valid(network);
    const UnknownIndexer indexer(network);

    SolverState state = flat_start(network);
    DeviceControlState control = make_control(network, state);

    SolveResult result;
    int iterations = 0;
    const StageOutcome outcome =
        newton_stage(network, indexer, options, 1.0, state, control, result.trace, iterations);
    if (outcome.structural_failure) {
        throw SolverError{outcome.failure};
    }

    SolveResult filled = result_from_state(network, std::move(state));
    filled.trace = std::move(result.trace);
    filled.iterations = iterations;
    filled.converged = outcome.converged;
    filled.final_residual = filled.trace.empty() ? 0.0 : filled.trace.back().kcl_norm;
    if (outcome.converged) {
        filled.homotopy_path = {1.0};
        filled.lambda_reached = 1.0;
    }
    return filled;
}

SolveResult homotopy_solve(const Network& network, const SolverOptions& options) {
    require_valid(network);
    const UnknownIndexer indexer(network);

    SolverState state = flat_start(network);
    DeviceControlState control = make_control(network, state);

    SolveResult result;
    int iterations = 0;
    double lambda_done = 0.0;
    double step = 1.0 / static_cast<double>(std::max(1, options.homotopy_steps));

    while (lambda_done < 1.0) {
        const double lambda_next = std::min(1.0, lambda_done + step);
        SolverState trial_state = state;
        DeviceControlState trial_control = control;
        const StageOutcome outcome = newton_stage(network, indexer, options, lambda_next,
                                                  trial_state, trial_control, result.trace,
                                                  iterations);
        if (outcome.structural_failure) {
            throw SolverError{outcome.failure};
        }
        if (outcome.converged) {
            state = std::move(trial_state);
            control = std::move(trial_control);
            lambda_done = lambda_next;
            result.homotopy_path.push_back(lambda_next);
            step *= 1.5;
        } else {
            step /= 2.0;
            if (step < options.min_lambda_step) {
                break;
            }
        }
    }

    SolveResult filled = result_from_state(network, std::move(state));
    filled.trace = std::move(result.trace);
    filled.homotopy_path = std::move(result.homotopy_path);
    filled.iterations = iterations;
    filled.converged = lambda_done == 1.0;
    filled.lambda_reached = lambda_done;
    filled.final_residual = kcl_max_norm(network, {filled.voltages, filled.q_pv, filled.q3g},
                                         lambda_done);
    return filled;
}

SwitchingSolveResult solve_with_pvpq_switching(const Network& network,
                                               const SolverOptions& options) {
    require_valid(network);
    const UnknownIndexer indexer(network);

    SolverState state = flat_start(network);
    DeviceControlState control = make_control(network, state);

    SwitchingSolveResult out;
    int iterations = 0;
    std::vector<TraceEntry> trace;
    bool stage_converged = false;

    // Bounded by the per-phase toggle budget plus the freeze mechanism.
    const int max_rounds = 8 * kMaxModeToggles;
    for (int round = 0; round < max_rounds; ++round) {
        const StageOutcome outcome =
            newton_stage(network, indexer, options, 1.0, state, control, trace, iterations);
        if (outcome.structural_failure) {
            throw SolverError{outcome.failure};
        }
        out.rounds = round + 1;
        stage_converged = outcome.converged;
        if (!stage_converged) {
            break;
        }

        int changes = 0;
        for (std::size_t g = 0; g < network.generators.size(); ++g) {
            const PvGenerator& gen = network.generators[g];
            const int bus_pos = network.bus_index(gen.bus);
            for (const Phase phase : kAllPhases) {
                if (indexer.pv_q_index(static_cast<int>(g), phase) < 0) {
                    continue;
                }
                const std::size_t pi = static_cast<std::size_t>(phase_index(phase));
                const double v_mag =
                    std::abs(state.voltages[static_cast<std::size_t>(bus_pos)][phase]);
                if (pvpq_switch_step(gen, state.q_pv[g][pi], v_mag, control.gen_modes[g][pi])) {
                    ++changes;
                }
            }
        }
        if (changes == 0) {
            break;
        }
    }

    out.result = result_from_state(network, std::move(state));
    out.result.trace = std::move(trace);
    out.result.iterations = iterations;
    out.result.converged = stage_converged;
    if (stage_converged) {
        out.result.homotopy_path = {1.0};
        out.result.lambda_reached = 1.0;
    }
    out.result.final_residual =
        out.result.trace.empty() ? 0.0 : out.result.trace.back().kcl_norm;
    out.modes = control.gen_modes;
    for (const auto& gen_modes : out.modes) {
        for (const PhaseSwitchState& phase_state : gen_modes) {
            out.oscillation_detected = out.oscillation_detected || phase_state.frozen;
        }
    }
    return out;
}

}  // namespace pflow
