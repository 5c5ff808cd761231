#pragma once

#include <array>
#include <string>
#include <vector>

#include "pflow/generator.hpp"
#include "pflow/ibdg.hpp"
#include "pflow/stamp.hpp"
#include "pflow/types.hpp"

namespace pflow {

/// Error raised for a structurally unusable network (unknown bus references,
/// singular branch impedances, disconnected islands, ...).
struct NetworkError {
    std::string message;
};

struct Bus {
    int id = 0;
    std::string name;
    PhaseMask phases = PhaseMask::all();
    double nominal_voltage = 1.0;  ///< per-unit magnitude used by report deviations
};

/// 3x3 complex matrix in phase coordinates.
using PhaseMatrix = std::array<std::array<Complex, 3>, 3>;

/// Series branch with full phase coupling: a 3x3 series admittance matrix
/// over the present phases plus an optional total shunt admittance split
/// evenly between the two ends (pi model). Reciprocity requires both
/// matrices symmetric; absent-phase rows/columns are ignored.
struct Branch {
    int from = 0;
    int to = 0;
    PhaseMask phases = PhaseMask::all();
    PhaseMatrix y_series{};
    PhaseMatrix y_shunt{};
};

/// Inverts a series impedance matrix over the given phases into the
/// admittance form Branch stores. Throws NetworkError when the submatrix is
/// singular. Rows/columns of absent phases are zero in the result.
[[nodiscard]] PhaseMatrix admittance_from_impedance(const PhaseMatrix& z, PhaseMask phases);

/// Grounded-star constant-power load; s holds the per-phase complex power
/// drawn from the network (per-unit), indexed by Phase.
struct ConstantPowerLoad {
    int bus = 0;
    PhasorSet s{};
};

/// The voltage-source bus: per-phase phasors held fixed by identity rows.
struct SlackSource {
    int bus = 0;
    PhasorSet voltage{};
};

struct Network {
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<ConstantPowerLoad> loads;
    std::vector<PvGenerator> generators;
    std::vector<IbdgDevice> ibdgs;
    SlackSource slack;

    /// Position of a bus id in buses, or -1 when absent.
    [[nodiscard]] int bus_index(int id) const;
    [[nodiscard]] const Bus* find_bus(int id) const;
};

/// Structural checks: duplicate ids, dangling references, phase-set
/// mismatches, parameter ranges, slack reachability. Returns one message per
/// problem; an empty result means the network is solvable in principle.
[[nodiscard]] std::vector<std::string> validate(const Network& network);

/// Throws NetworkError with all validation messages joined when validate()
/// reports any problem.
void require_valid(const Network& network);

/// Local numbering for stamp_branch entries:
///   index = side * 6 + phase_index * 2 + part
/// with side 0 = from end, 1 = to end and part 0 = real, 1 = imaginary.
/// Only present phases receive entries. A complex admittance y = g + jb
/// lands as the real embedding [[g, -b], [b, g]] so the assembled block
/// times (V_R, V_I) reproduces Re/Im of y*V. The branch is linear, so the
/// stamps carry no RHS terms and are assembled once, outside the iteration
/// loop.
[[nodiscard]] StampList stamp_branch(const Branch& branch);

/// Injection of a constant-power draw into the network (note the sign: the
/// returned current opposes the drawn power). Throws SingularVoltageError at
/// numerically zero voltage.
[[nodiscard]] Complex load_injection(Complex s, Complex v);

/// First-order expansion of load_injection about v_k, in pv_linearize's
/// local numbering restricted to cols {0, 1} plus the RHS history column.
[[nodiscard]] StampList load_linearize(Complex s, Complex v_k);

/// Pure positive-sequence phasor set: magnitude at angle_a on phase A with
/// the other phases rotated -120 and +120 degrees.
[[nodiscard]] PhasorSet balanced_phasors(double magnitude, double angle_a);

}  // namespace pflow
