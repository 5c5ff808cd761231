#pragma once

#include <Eigen/SparseCore>

#include <array>
#include <string>
#include <vector>

#include "pflow/network.hpp"
#include "pflow/types.hpp"

namespace pflow {

/// Raised for structural solver failures (zero pivot, inconsistent sizes);
/// plain non-convergence is reported through SolveResult, never thrown.
struct SolverError {
    std::string message;
};

/// Bijective map between the problem's unknowns and matrix rows/columns.
/// Layout: per bus (in network order), two unknowns (real, imaginary) per
/// present phase; then one reactive-power unknown per generator phase; then
/// one three-phase reactive-power unknown per inverter. Rows pair naturally:
/// voltage unknowns carry the nodal current balance (or the fixed-value
/// identity at the slack), generator unknowns carry the voltage-magnitude
/// equation, inverter unknowns carry the Volt/VAR equation.
class UnknownIndexer {
  public:
    explicit UnknownIndexer(const Network& network);

    [[nodiscard]] int size() const { return total_; }
    /// Index of a voltage component, or -1 for an absent phase.
    /// part: 0 = real, 1 = imaginary. bus_pos indexes network.buses.
    [[nodiscard]] int voltage_index(int bus_pos, Phase phase, int part) const;
    /// Index of a generator's per-phase reactive unknown, or -1.
    [[nodiscard]] int pv_q_index(int gen_pos, Phase phase) const;
    /// Index of an inverter's three-phase reactive unknown.
    [[nodiscard]] int ibdg_q_index(int ibdg_pos) const;
    /// True for rows pinned to the slack voltage.
    [[nodiscard]] bool is_slack_row(int index) const;
    /// First non-voltage unknown; device reactive unknowns occupy
    /// [first_device_index(), size()).
    [[nodiscard]] int first_device_index() const { return first_device_; }
    /// Human-readable unknown name for diagnostics.
    [[nodiscard]] const std::string& describe(int index) const;

  private:
    std::vector<std::array<int, 6>> bus_offsets_;
    std::vector<std::array<int, 3>> gen_offsets_;
    std::vector<int> ibdg_offsets_;
    std::vector<bool> slack_row_;
    std::vector<std::string> labels_;
    int total_ = 0;
    int first_device_ = 0;
};

struct SolverOptions {
    double tol = 1e-8;          ///< max-norm tolerance on the applied update
    int max_iter = 50;          ///< Newton iterations per continuation stage
    double v_step_max = 0.1;    ///< per-iteration clamp on voltage updates (per-unit)
    int homotopy_steps = 1;     ///< initial subdivision of the continuation walk
    double q_relax = 1.0;       ///< initial damping of device reactive updates,
                                ///< doubling each iteration until it reaches 1
    double residual_tol = 1e-8;          ///< nonlinear residual max-norm criterion
    double q_limit_fixed_point_tol = 1e-6;  ///< allowed drift of the lagged
                                            ///< reactive-capability limits
    double min_lambda_step = 1e-3;  ///< continuation stall threshold
};

/// One Newton iterate: voltages per bus (network order; absent phases zero)
/// plus the device reactive-power states.
struct SolverState {
    std::vector<PhasorSet> voltages;
    std::vector<std::array<double, 3>> q_pv;  ///< per generator, per phase
    std::vector<double> q3g;                  ///< per inverter
};

/// Lagged per-iteration control quantities: the inverter reactive-capability
/// limits (frozen within each linearization, converged to a fixed point) and
/// the generator regulation modes used by the switching baseline.
struct DeviceControlState {
    std::vector<double> ibdg_q_max;
    std::vector<std::array<PhaseSwitchState, 3>> gen_modes;
};

struct TraceEntry {
    int iteration = 0;       ///< 1-based, cumulative across continuation stages
    double update_norm = 0.0;
    double kcl_norm = 0.0;   ///< nonlinear nodal-balance max-norm after the update
    double lambda = 1.0;
};

struct SolveResult {
    bool converged = false;
    std::vector<PhasorSet> voltages;          ///< per bus, network order
    std::vector<std::array<double, 3>> q_pv;  ///< per generator, per phase
    std::vector<double> q3g;                  ///< per inverter
    int iterations = 0;
    double final_residual = 0.0;  ///< nodal-balance max-norm at the returned state
    std::vector<TraceEntry> trace;
    std::vector<double> homotopy_path;  ///< loading fractions that converged, in order
    double lambda_reached = 0.0;        ///< last converged loading fraction
};

/// Initial iterate: the slack voltage phasors propagated to every bus
/// (nonzero by construction, so no device equation starts singular), device
/// reactive states at zero.
[[nodiscard]] SolverState flat_start(const Network& network);

/// Capability limits evaluated at a state (the lagged quantities for the
/// next linearization). Generator modes pass through unchanged.
[[nodiscard]] std::vector<double> ibdg_q_limits(const Network& network,
                                                const SolverState& state);

struct AssembledSystem {
    Eigen::SparseMatrix<double> matrix;
    Eigen::VectorXd rhs;
};

/// Builds the linear companion model at state_k: branch admittance stamps,
/// linearized load/generator/inverter injections with history sources, slack
/// identity rows, voltage-magnitude rows, and Volt/VAR rows. `lambda` scales
/// load powers, generator and inverter active powers, and the Volt/VAR
/// target (source-stepping continuation). Solving matrix * x = rhs yields
/// the next Newton iterate directly; matrix equals the Jacobian of
/// residual_vector at state_k.
[[nodiscard]] AssembledSystem assemble(const Network& network, const UnknownIndexer& indexer,
                                       const SolverState& state,
                                       const DeviceControlState& control, double lambda);

/// Nonlinear residual of every equation at a state (slack rows included as
/// voltage mismatches). The Jacobian of this vector is assemble().matrix.
[[nodiscard]] Eigen::VectorXd residual_vector(const Network& network,
                                              const UnknownIndexer& indexer,
                                              const SolverState& state,
                                              const DeviceControlState& control, double lambda);

/// Per-bus complex nodal current mismatch evaluated with the nonlinear
/// device equations (zero at slack buses and on absent phases). The
/// capability limits and generator modes play no role here: they shape only
/// the control rows.
[[nodiscard]] std::vector<PhasorSet> kcl_residual(const Network& network,
                                                  const SolverState& state,
                                                  double lambda = 1.0);

/// Plain Newton solve at full loading from a flat start. Non-convergence is
/// reported in the result, never thrown.
[[nodiscard]] SolveResult nr_solve(const Network& network, const SolverOptions& options = {});

/// Source-stepping continuation: walks the loading fraction from 0 to 1 with
/// an adaptive step (halved on failure, grown 1.5x on success, stalling at
/// min_lambda_step), warm-starting each stage. With homotopy_steps = 1 the
/// first attempt is the direct solve.
[[nodiscard]] SolveResult homotopy_solve(const Network& network,
                                         const SolverOptions& options = {});

/// Outcome of the generator-limit switching baseline.
struct SwitchingSolveResult {
    SolveResult result;
    std::vector<std::array<PhaseSwitchState, 3>> modes;  ///< per generator
    bool oscillation_detected = false;  ///< some phase exhausted its toggle budget
    int rounds = 0;                     ///< outer mode-update rounds
};

/// Comparison baseline: alternates converged Newton solves with per-phase
/// generator mode switching until the modes stop changing or the
/// oscillation detector freezes them.
[[nodiscard]] SwitchingSolveResult solve_with_pvpq_switching(const Network& network,
                                                             const SolverOptions& options = {});

}  // namespace pflow
