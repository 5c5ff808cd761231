#pragma once

// Shared test utilities: a portable fixed-seed random source, central
// finite differences, small network builders, and corpus-file access.

#include <array>
#include <cmath>
#include <complex>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "pflow/network.hpp"
#include "pflow/types.hpp"

namespace test_support {

/// Deterministic uniform source. Raw std::mt19937 output is scaled by hand
/// because the engine's stream is specified by the standard while the
/// distribution adapters are not; this keeps failures reproducible across
/// standard libraries.
class Rng {
  public:
    explicit Rng(std::uint32_t seed) : engine_(seed) {}

    [[nodiscard]] double uniform() { return engine_() * (1.0 / 4294967296.0); }

    [[nodiscard]] double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Complex value with magnitude in [r_lo, r_hi] and any angle.
    [[nodiscard]] pflow::Complex complex_in_annulus(double r_lo, double r_hi) {
        const double r = uniform(r_lo, r_hi);
        const double angle = uniform(0.0, 2.0 * 3.14159265358979323846);
        return std::polar(r, angle);
    }

    [[nodiscard]] pflow::Complex complex_in_box(double half_width) {
        return {uniform(-half_width, half_width), uniform(-half_width, half_width)};
    }

  private:
    std::mt19937 engine_;
};

/// Central finite difference of a scalar function.
[[nodiscard]] inline double central_difference(const std::function<double(double)>& f, double x,
                                               double step = 1e-6) {
    return (f(x + step) - f(x - step)) / (2.0 * step);
}

/// Relative error with an absolute floor so near-zero references do not
/// explode the ratio.
[[nodiscard]] inline double relative_error(double value, double reference, double floor = 1e-9) {
    return std::abs(value - reference) / std::max(std::abs(reference), floor);
}

/// Series impedance with identical self terms and a uniform mutual fraction.
[[nodiscard]] inline pflow::PhaseMatrix coupled_impedance(pflow::Complex self,
                                                          double mutual_fraction) {
    pflow::PhaseMatrix z{};
    for (int row = 0; row < 3; ++row)
        for (int col = 0; col < 3; ++col)
            z[row][col] = (row == col) ? self : mutual_fraction * self;
    return z;
}

/// Two-bus network: balanced slack at bus 1, one coupled line, one load.
[[nodiscard]] inline pflow::Network two_bus_network(const pflow::PhasorSet& load_s,
                                                    pflow::Complex z_self = {0.01, 0.03},
                                                    double mutual_fraction = 0.25) {
    pflow::Network net;
    net.buses.push_back({1, "", pflow::PhaseMask::all(), 1.0});
    net.buses.push_back({2, "", pflow::PhaseMask::all(), 1.0});
    pflow::Branch branch;
    branch.from = 1;
    branch.to = 2;
    branch.y_series = pflow::admittance_from_impedance(
        coupled_impedance(z_self, mutual_fraction), pflow::PhaseMask::all());
    net.branches.push_back(branch);
    pflow::ConstantPowerLoad load;
    load.bus = 2;
    load.s = load_s;
    net.loads.push_back(load);
    net.slack.bus = 1;
    net.slack.voltage = pflow::balanced_phasors(1.0, 0.0);
    return net;
}

[[nodiscard]] inline pflow::PhasorSet balanced_s(pflow::Complex s) {
    pflow::PhasorSet set;
    for (pflow::Phase p : pflow::kAllPhases) set[p] = s;
    return set;
}

/// Directory holding the bundled case corpus (set by the build).
[[nodiscard]] inline std::string cases_dir() { return PFLOW_CASES_DIR; }

[[nodiscard]] inline std::string case_path(const std::string& name) {
    return cases_dir() + "/" + name + ".json";
}

[[nodiscard]] inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

}  // namespace test_support
