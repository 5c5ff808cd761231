#pragma once

#include <string>
#include <vector>

#include "pflow/network.hpp"
#include "pflow/solver.hpp"

namespace pflow {

/// Raised when a report is requested for an unconverged result.
struct ReportError {
    std::string message;
};

/// Which voltage-unbalance definition the summary uses.
enum class UnbalanceDefinition {
    Sequence,      ///< 100 * |V-| / |V+| per bus (true unbalance)
    MaxDeviation,  ///< 100 * max |phase magnitude - mean| / mean (NEMA-style)
};

struct BusPhaseVoltage {
    int bus = 0;
    Phase phase = Phase::A;
    double v_mag = 0.0;      ///< per-unit magnitude
    double v_ang_deg = 0.0;  ///< degrees
};

/// Voltage-profile summary of a converged solution.
struct VoltageProfileReport {
    double v_min = 0.0;   ///< smallest bus-phase magnitude (per-unit)
    double v_max = 0.0;   ///< largest bus-phase magnitude (per-unit)
    double v_mean = 0.0;  ///< mean bus-phase magnitude (per-unit)
    /// Mean absolute deviation of inverter-bus phase magnitudes from their
    /// bus's nominal voltage (per-unit); zero when no inverters exist.
    double v_diff = 0.0;
    /// Mean per-bus voltage unbalance in percent (three-phase buses only).
    double v_unb = 0.0;
    std::vector<BusPhaseVoltage> per_bus;  ///< present phases, network order
};

/// Computes the profile metrics from a converged result. Throws ReportError
/// on an unconverged result (inspect the iteration trace instead).
[[nodiscard]] VoltageProfileReport make_report(
    const SolveResult& result, const Network& network,
    UnbalanceDefinition definition = UnbalanceDefinition::Sequence);

/// Per-bus rows (bus, phase, v_mag, v_ang) followed by a summary block;
/// numbers carry 12 significant digits.
[[nodiscard]] std::string report_csv(const VoltageProfileReport& report);

/// Iteration trace rows: iter, update_norm, kcl_norm, lambda.
[[nodiscard]] std::string trace_csv(const std::vector<TraceEntry>& trace);

/// Two-decimal voltages and one-decimal unbalance, for terminal output.
[[nodiscard]] std::string human_summary(const VoltageProfileReport& report);

}  // namespace pflow
