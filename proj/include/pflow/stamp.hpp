#pragma once

#include <vector>

namespace pflow {

/// Column marker for right-hand-side (history source) contributions.
inline constexpr int kRhsCol = -1;

/// One additive Jacobian or RHS contribution from a device linearization.
///
/// Rows and columns are in a device-local numbering documented at each
/// producing function; the assembler translates them to global indices.
struct StampEntry {
    int row = 0;
    int col = 0;
    double value = 0.0;
};

using StampList = std::vector<StampEntry>;

}  // namespace pflow
