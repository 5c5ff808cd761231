#include "pflow/network.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "pflow/sequence.hpp"

namespace pflow {

namespace {

[[nodiscard]] std::string describe_branch(const Branch& branch) {
    std::ostringstream os;
    os << "branch " << branch.from << "-" << branch.to;
    return os.str();
}

void add_complex_block(StampList& stamps, int row_base, int col_base, Complex y) {
    if (y == Complex{0.0, 0.0}) {
        return;
    }
    const double g = y.real();
    const double b = y.imag();
    stamps.push_back({row_base, col_base, g});
    stamps.push_back({row_base, col_base + 1, -b});
    stamps.push_back({row_base + 1, col_base, b});
    stamps.push_back({row_base + 1, col_base + 1, g});
}

}  // namespace

int Network::bus_index(int id) const {
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (buses[i].id == id) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

const Bus* Network::find_bus(int id) const {
    const int idx = bus_index(id);
    return idx < 0 ? nullptr : &buses[static_cast<std::size_t>(idx)];
}

PhaseMatrix admittance_from_impedance(const PhaseMatrix& z, PhaseMask phases) {
    std::vector<int> present;
    for (const Phase phase : kAllPhases) {
        if (phases.contains(phase)) {
            present.push_back(phase_index(phase));
        }
    }
    PhaseMatrix y{};
    if (present.empty()) {
        return y;
    }
    const auto n = static_cast<Eigen::Index>(present.size());
    Eigen::MatrixXcd zm(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            zm(i, j) = z[static_cast<std::size_t>(present[static_cast<std::size_t>(i)])]
                        [static_cast<std::size_t>(present[static_cast<std::size_t>(j)])];
        }
    }
    const Eigen::FullPivLU<Eigen::MatrixXcd> lu(zm);
    if (!lu.isInvertible()) {
        throw NetworkError{"impedance matrix is singular on its present phases"};
    }
    const Eigen::MatrixXcd ym = lu.inverse();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            y[static_cast<std::size_t>(present[static_cast<std::size_t>(i)])]
             [static_cast<std::size_t>(present[static_cast<std::size_t>(j)])] = ym(i, j);
        }
    }
    return y;
}

StampList stamp_branch(const Branch& branch) {
    if (branch.phases == PhaseMask::none()) {
        throw NetworkError{describe_branch(branch) + " has no phases"};
    }
    StampList stamps;
    for (const Phase pa : kAllPhases) {
        if (!branch.phases.contains(pa)) {
            continue;
        }
        const int pi = phase_index(pa);
        for (const Phase pb : kAllPhases) {
            if (!branch.phases.contains(pb)) {
                continue;
            }
            const int pj = phase_index(pb);
            const Complex ys =
                branch.y_series[static_cast<std::size_t>(pi)][static_cast<std::size_t>(pj)];
            add_complex_block(stamps, pi * 2, pj * 2, ys);
            add_complex_block(stamps, pi * 2, 6 + pj * 2, -ys);
            add_complex_block(stamps, 6 + pi * 2, pj * 2, -ys);
            add_complex_block(stamps, 6 + pi * 2, 6 + pj * 2, ys);

            const Complex yh =
                branch.y_shunt[static_cast<std::size_t>(pi)][static_cast<std::size_t>(pj)] / 2.0;
            add_complex_block(stamps, pi * 2, pj * 2, yh);
            add_complex_block(stamps, 6 + pi * 2, 6 + pj * 2, yh);
        }
    }
    return stamps;
}

Complex load_injection(Complex s, Complex v) {
    return -pv_current_injection(s.real(), s.imag(), v);
}

StampList load_linearize(Complex s, Complex v_k) {
    const StampList source = pv_linearize(s.real(), s.imag(), v_k);
    std::array<double, 2> rhs{};
    StampList out;
    out.reserve(6);
    for (const StampEntry& entry : source) {
        if (entry.col == kPvColQ) {
            // The reactive draw is a constant here, not an unknown: fold its
            // column into the history source.
            rhs[static_cast<std::size_t>(entry.row)] += entry.value * s.imag();
        } else if (entry.col == kRhsCol) {
            rhs[static_cast<std::size_t>(entry.row)] += entry.value;
        } else {
            out.push_back({entry.row, entry.col, -entry.value});
        }
    }
    out.push_back({0, kRhsCol, -rhs[0]});
    out.push_back({1, kRhsCol, -rhs[1]});
    return out;
}

PhasorSet balanced_phasors(double magnitude, double angle_a) {
    constexpr double kThird = 2.0 * std::numbers::pi / 3.0;
    return PhasorSet{std::polar(magnitude, angle_a), std::polar(magnitude, angle_a - kThird),
                     std::polar(magnitude, angle_a + kThird)};
}

std::vector<std::string> validate(const Network& network) {
    std::vector<std::string> problems;
    const auto report = [&problems](const std::string& message) { problems.push_back(message); };

    if (network.buses.empty()) {
        report("network has no buses");
        return problems;
    }

    std::unordered_set<int> ids;
    for (const Bus& bus : network.buses) {
        if (!ids.insert(bus.id).second) {
            report("duplicate bus id " + std::to_string(bus.id));
        }
        if (bus.phases == PhaseMask::none()) {
            report("bus " + std::to_string(bus.id) + " has no phases");
        }
    }

    const auto known = [&ids](int id) { return ids.count(id) != 0; };

    const Bus* slack_bus = network.find_bus(network.slack.bus);
    if (slack_bus == nullptr) {
        report("slack bus " + std::to_string(network.slack.bus) + " does not exist");
    } else {
        for (const Phase phase : kAllPhases) {
            if (slack_bus->phases.contains(phase) &&
                std::abs(network.slack.voltage[phase]) == 0.0) {
                report("slack voltage on phase " + std::string(1, phase_letter(phase)) +
                       " is zero");
            }
        }
    }

    for (const Branch& branch : network.branches) {
        const std::string label = describe_branch(branch);
        if (branch.from == branch.to) {
            report(label + " connects a bus to itself");
            continue;
        }
        const Bus* from = network.find_bus(branch.from);
        const Bus* to = network.find_bus(branch.to);
        if (from == nullptr || to == nullptr) {
            report(label + " references an unknown bus");
            continue;
        }
        if (branch.phases == PhaseMask::none()) {
            report(label + " has no phases");
            continue;
        }
        for (const Phase phase : kAllPhases) {
            if (branch.phases.contains(phase) &&
                (!from->phases.contains(phase) || !to->phases.contains(phase))) {
                report(label + " uses phase " + std::string(1, phase_letter(phase)) +
                       " missing at an endpoint");
            }
        }
        bool symmetric = true;
        bool finite = true;
        bool coupled = false;
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t j = 0; j < 3; ++j) {
                finite = finite && is_finite(branch.y_series[i][j]) &&
                         is_finite(branch.y_shunt[i][j]);
                if (std::abs(branch.y_series[i][j] - branch.y_series[j][i]) > 1e-9 ||
                    std::abs(branch.y_shunt[i][j] - branch.y_shunt[j][i]) > 1e-9) {
                    symmetric = false;
                }
                if (branch.phases.contains(static_cast<Phase>(i)) &&
                    branch.phases.contains(static_cast<Phase>(j)) &&
                    branch.y_series[i][j] != Complex{0.0, 0.0}) {
                    coupled = true;
                }
            }
        }
        if (!finite) {
            report(label + " has a non-finite admittance entry");
        }
        if (!symmetric) {
            report(label + " has an asymmetric admittance matrix");
        }
        if (!coupled) {
            report(label + " has an all-zero series admittance");
        }
    }

    for (const ConstantPowerLoad& load : network.loads) {
        const Bus* bus = network.find_bus(load.bus);
        if (bus == nullptr) {
            report("load references unknown bus " + std::to_string(load.bus));
            continue;
        }
        for (const Phase phase : kAllPhases) {
            if (!bus->phases.contains(phase) && load.s[phase] != Complex{0.0, 0.0}) {
                report("load at bus " + std::to_string(load.bus) + " draws power on absent phase " +
                       std::string(1, phase_letter(phase)));
            }
        }
    }

    for (const PvGenerator& gen : network.generators) {
        const Bus* bus = network.find_bus(gen.bus);
        if (bus == nullptr) {
            report("generator references unknown bus " + std::to_string(gen.bus));
            continue;
        }
        if (gen.bus == network.slack.bus) {
            report("generator placed on the slack bus " + std::to_string(gen.bus));
        }
        if (!(gen.v_setpoint > 0.0)) {
            report("generator at bus " + std::to_string(gen.bus) +
                   " has a non-positive voltage setpoint");
        }
        if (gen.q_min && gen.q_max && *gen.q_min > *gen.q_max) {
            report("generator at bus " + std::to_string(gen.bus) +
                   " has q_min above q_max");
        }
        for (const Phase phase : kAllPhases) {
            if (!bus->phases.contains(phase) && gen.p_per_phase[phase_index(phase)] != 0.0) {
                report("generator at bus " + std::to_string(gen.bus) +
                       " produces power on absent phase " + std::string(1, phase_letter(phase)));
            }
        }
    }

    for (const IbdgDevice& device : network.ibdgs) {
        const Bus* bus = network.find_bus(device.bus);
        const std::string label = "inverter at bus " + std::to_string(device.bus);
        if (bus == nullptr) {
            report("inverter references unknown bus " + std::to_string(device.bus));
            continue;
        }
        if (device.bus == network.slack.bus) {
            report(label + " placed on the slack bus");
        }
        if (bus->phases != PhaseMask::all()) {
            report(label + " requires all three phases");
        }
        if (device.p3g < 0.0) {
            report(label + " has negative active power");
        }
        if (device.k1 < 0.0 || device.k1 > 1.0 || device.k2 < 0.0 || device.k2 > 1.0) {
            report(label + " has sequence weights outside [0, 1]");
        }
        if (!(device.i_rating > 0.0)) {
            report(label + " has a non-positive current rating");
        }
    }

    // Reachability from the slack over branches (bus granularity).
    if (slack_bus != nullptr) {
        std::unordered_map<int, std::vector<int>> adjacency;
        for (const Branch& branch : network.branches) {
            if (known(branch.from) && known(branch.to)) {
                adjacency[branch.from].push_back(branch.to);
                adjacency[branch.to].push_back(branch.from);
            }
        }
        std::unordered_set<int> seen{network.slack.bus};
        std::queue<int> frontier;
        frontier.push(network.slack.bus);
        while (!frontier.empty()) {
            const int at = frontier.front();
            frontier.pop();
            for (const int next : adjacency[at]) {
                if (seen.insert(next).second) {
                    frontier.push(next);
                }
            }
        }
        for (const Bus& bus : network.buses) {
            if (seen.count(bus.id) == 0) {
                report("bus " + std::to_string(bus.id) + " is not connected to the slack");
            }
        }
    }

    return problems;
}

void require_valid(const Network& network) {
    const std::vector<std::string> problems = validate(network);
    if (problems.empty()) {
        return;
    }
    std::string joined = "invalid network:";
    for (const std::string& problem : problems) {
        joined += "\n  - " + problem;
    }
    throw NetworkError{joined};
}

}  // namespace pflow
