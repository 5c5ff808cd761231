// Generates the bundled study corpus. Every case in cases/ is produced by
// this tool, so the corpus can be regenerated or extended deterministically:
//
//   pflow-gen-cases [output-directory]     (default: cases)
//
// The corpus spans the behaviors the test suite exercises: a minimal
// feasible case, inverter cases in balanced and sagged conditions, a
// four-bus network with a two-phase lateral, a reactive-limited generator, a
// 50-bus feeder in three inverter-placement variants, a case beyond the
// maximum power transfer, and a generator configuration whose PV/PQ
// switching oscillates together with its inverter-based counterpart.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "pflow/case_io.hpp"
#include "pflow/network.hpp"
#include "pflow/voltvar.hpp"

namespace {

using namespace pflow;

/// Series impedance with identical self terms and a uniform mutual fraction.
PhaseMatrix coupled_impedance(Complex self, double mutual_fraction) {
    PhaseMatrix z{};
    for (int row = 0; row < 3; ++row)
        for (int col = 0; col < 3; ++col)
            z[row][col] = (row == col) ? self : mutual_fraction * self;
    return z;
}

Branch make_branch(int from, int to, Complex z_self, double mutual_fraction,
                   PhaseMask phases = PhaseMask::all()) {
    Branch branch;
    branch.from = from;
    branch.to = to;
    branch.phases = phases;
    branch.y_series = admittance_from_impedance(coupled_impedance(z_self, mutual_fraction), phases);
    return branch;
}

/// The default reactive characteristic: IEEE 1547 category-B shaped curve
/// sized from the device current rating (matches the parser's "auto" rule).
VoltVarCurve auto_voltvar(double i_rating) {
    VoltVarBreakpoints bp;
    bp.q_cap = 0.44 * i_rating;
    bp.q_abs = -0.44 * i_rating;
    return VoltVarCurve::build(bp);
}

ConstantPowerLoad make_load(int bus, Complex sa, Complex sb, Complex sc) {
    ConstantPowerLoad load;
    load.bus = bus;
    load.s[Phase::A] = sa;
    load.s[Phase::B] = sb;
    load.s[Phase::C] = sc;
    return load;
}

CaseFile case_minimal() {
    CaseFile cf;
    cf.base_mva = 1.0;
    cf.base_kv = 12.47;
    Network& net = cf.network;
    net.buses.push_back({1, "source", PhaseMask::all(), 1.0});
    net.buses.push_back({2, "load", PhaseMask::all(), 1.0});
    net.branches.push_back(make_branch(1, 2, {0.01, 0.03}, 0.25));
    net.loads.push_back(make_load(2, {0.3, 0.1}, {0.3, 0.1}, {0.3, 0.1}));
    net.slack.bus = 1;
    net.slack.voltage = balanced_phasors(1.0, 0.0);
    return cf;
}

CaseFile case_two_bus_ibdg() {
    CaseFile cf;
    cf.base_kv = 12.47;
    Network& net = cf.network;
    net.buses.push_back({1, "source", PhaseMask::all(), 1.0});
    net.buses.push_back({2, "pcc", PhaseMask::all(), 1.0});
    net.branches.push_back(make_branch(1, 2, {0.02, 0.08}, 0.3));
    net.loads.push_back(make_load(2, {0.25, 0.08}, {0.20, 0.06}, {0.15, 0.05}));
    IbdgDevice dev;
    dev.bus = 2;
    dev.p3g = 0.1;
    dev.i_rating = 0.5;
    dev.voltvar = auto_voltvar(dev.i_rating);
    net.ibdgs.push_back(dev);
    net.slack.bus = 1;
    net.slack.voltage = balanced_phasors(1.0, 0.0);
    return cf;
}

CaseFile case_four_bus_unbalanced() {
    CaseFile cf;
    cf.base_kv = 12.47;
    Network& net = cf.network;
    const PhaseMask ab = PhaseMask::none().with(Phase::A).with(Phase::B);
    net.buses.push_back({1, "source", PhaseMask::all(), 1.0});
    net.buses.push_back({2, "junction", PhaseMask::all(), 1.0});
    net.buses.push_back({3, "trunk-end", PhaseMask::all(), 1.0});
    net.buses.push_back({4, "lateral", ab, 1.0});
    net.branches.push_back(make_branch(1, 2, {0.015, 0.05}, 0.35));
    net.branches.push_back(make_branch(2, 3, {0.02, 0.06}, 0.35));
    net.branches.push_back(make_branch(2, 4, {0.025, 0.05}, 0.3, ab));
    net.loads.push_back(make_load(3, {0.20, 0.07}, {0.25, 0.08}, {0.15, 0.05}));
    ConstantPowerLoad lateral;
    lateral.bus = 4;
    lateral.s[Phase::A] = {0.10, 0.030};
    lateral.s[Phase::B] = {0.08, 0.025};
    net.loads.push_back(lateral);
    net.slack.bus = 1;
    net.slack.voltage = balanced_phasors(1.0, 0.0);
    return cf;
}

CaseFile case_pv_gen() {
    CaseFile cf;
    cf.base_kv = 12.47;
    Network& net = cf.network;
    net.buses.push_back({1, "source", PhaseMask::all(), 1.0});
    net.buses.push_back({2, "plant", PhaseMask::all(), 1.0});
    net.branches.push_back(make_branch(1, 2, {0.02, 0.08}, 0.3));
    net.loads.push_back(make_load(2, {0.4, 0.15}, {0.4, 0.15}, {0.4, 0.15}));
    PvGenerator gen;
    gen.bus = 2;
    gen.p_per_phase = {0.1, 0.1, 0.1};
    gen.v_setpoint = 1.02;
    gen.q_min = -0.05;
    gen.q_max = 0.05;
    net.generators.push_back(gen);
    net.slack.bus = 1;
    net.slack.voltage = balanced_phasors(1.0, 0.0);
    return cf;
}

/// Inverter with k1 = k2 = 0.8 behind a phase-A voltage sag. The sag gives
/// the slack a strong negative-sequence component, which is the regime where
/// the mixed-sequence current reference is meaningfully different from the
/// balanced strategy (and where it is well-conditioned to solve for).
CaseFile case_sag_fpnsc() {
    using std::numbers::pi;
    CaseFile cf;
    cf.base_kv = 12.47;
    Network& net = cf.network;
    net.buses.push_back({1, "sagged-source", PhaseMask::all(), 1.0});
    net.buses.push_back({2, "pcc", PhaseMask::all(), 1.0});
    net.branches.push_back(make_branch(1, 2, {0.02, 0.08}, 0.3));
    net.loads.push_back(make_load(2, {0.15, 0.05}, {0.12, 0.04}, {0.10, 0.03}));
    IbdgDevice dev;
    dev.bus = 2;
    dev.p3g = 0.05;
    dev.k1 = 0.8;
    dev.k2 = 0.8;
    dev.i_rating = 0.4;
    dev.voltvar = auto_voltvar(dev.i_rating);
    net.ibdgs.push_back(dev);
    net.slack.bus = 1;
    net.slack.voltage[Phase::A] = Complex{0.65, 0.0};
    net.slack.voltage[Phase::B] = std::polar(1.0, -2.0 * pi / 3.0);
    net.slack.voltage[Phase::C] = std::polar(1.0, 2.0 * pi / 3.0);
    return cf;
}

/// Loading far beyond the maximum power transfer of the line; no solution
/// exists, so direct iteration diverges and continuation stalls below full
/// loading. Kept in the corpus to pin the failure-reporting contract.
CaseFile case_infeasible() {
    CaseFile cf;
    cf.base_kv = 12.47;
    Network& net = cf.network;
    net.buses.push_back({1, "source", PhaseMask::all(), 1.0});
    net.buses.push_back({2, "sink", PhaseMask::all(), 1.0});
    net.branches.push_back(make_branch(1, 2, {0.1, 0.3}, 0.0));
    net.loads.push_back(make_load(2, {1.5, 0.5}, {1.5, 0.5}, {1.5, 0.5}));
    net.slack.bus = 1;
    net.slack.voltage = balanced_phasors(1.0, 0.0);
    return cf;
}

/// Shared three-bus chain for the switching-oscillation pair: strong mutual
/// coupling and single-phase-heavy loads make the per-phase reactive
/// responses interact across phases and buses.
Network oscillation_network() {
    Network net;
    net.buses.push_back({1, "source", PhaseMask::all(), 1.0});
    net.buses.push_back({2, "mid", PhaseMask::all(), 1.0});
    net.buses.push_back({3, "end", PhaseMask::all(), 1.0});
    net.branches.push_back(make_branch(1, 2, {0.02, 0.08}, 0.6));
    net.branches.push_back(make_branch(2, 3, {0.02, 0.08}, 0.6));
    ConstantPowerLoad mid;
    mid.bus = 2;
    mid.s[Phase::A] = {0.5, 0.2};
    net.loads.push_back(mid);
    ConstantPowerLoad end;
    end.bus = 3;
    end.s[Phase::B] = {0.5, 0.2};
    end.s[Phase::C] = {0.15, 0.05};
    net.loads.push_back(end);
    net.slack.bus = 1;
    net.slack.voltage = balanced_phasors(1.0, 0.0);
    return net;
}

/// Two tightly limited regulators with slightly different setpoints on a
/// cross-coupled chain: the joint reactive solution violates a limit, but
/// pinning that phase pushes its voltage back across the setpoint through
/// the other machine's response, so the mode toggling never settles and the
/// oscillation detector freezes the phase.
CaseFile case_oscillating_pvpq() {
    CaseFile cf;
    cf.base_kv = 12.47;
    cf.network = oscillation_network();
    PvGenerator g1;
    g1.bus = 2;
    g1.v_setpoint = 1.00;
    g1.q_min = -0.015;
    g1.q_max = 0.015;
    PvGenerator g2;
    g2.bus = 3;
    g2.v_setpoint = 1.01;
    g2.q_min = -0.015;
    g2.q_max = 0.015;
    cf.network.generators.push_back(g1);
    cf.network.generators.push_back(g2);
    return cf;
}

/// The same network with the machines replaced by inverters whose reactive
/// response is the first-order-continuous Volt/VAR characteristic; the solve
/// needs no mode logic and converges directly.
CaseFile case_oscillating_ibdg() {
    CaseFile cf;
    cf.base_kv = 12.47;
    cf.network = oscillation_network();
    for (int bus : {2, 3}) {
        IbdgDevice dev;
        dev.bus = bus;
        dev.p3g = 0.05;
        dev.i_rating = 0.3;
        dev.voltvar = auto_voltvar(dev.i_rating);
        cf.network.ibdgs.push_back(dev);
    }
    return cf;
}

/// Deterministic per-bus load shape: a smooth size variation along the
/// feeder with a different mix across phases at every bus, around 0.95
/// power factor. Keeps the corpus reproducible without a random number
/// generator whose stream would have to be frozen.
PhasorSet feeder_load(int bus_id) {
    const double size = 1.0 + 0.5 * std::sin(1.3 * bus_id);
    PhasorSet s;
    const double tan_phi = std::tan(std::acos(0.95));
    for (Phase phase : kAllPhases) {
        const double weight =
            1.0 + 0.45 * std::sin(2.1 * bus_id + 2.0 * phase_index(phase));
        const double p = 0.009 * size * weight;
        s[phase] = Complex{p, p * tan_phi};
    }
    return s;
}

/// 50-bus radial feeder: a 26-bus trunk with four 6-bus laterals teed off at
/// buses 6, 12, 18, and 24. Every non-source bus carries an unbalanced load;
/// ten inverters sized to supply the entire feeder load at a penetration
/// factor of one (total inverter power = total load active power) are placed
/// according to `ibdg_buses`.
CaseFile case_feeder50(const std::vector<int>& ibdg_buses) {
    CaseFile cf;
    cf.base_mva = 5.0;
    cf.base_kv = 12.47;
    Network& net = cf.network;
    for (int id = 1; id <= 50; ++id) {
        const char* role = id == 1 ? "source" : (id <= 26 ? "trunk" : "lateral");
        net.buses.push_back({id, std::string(role) + "-" + std::to_string(id),
                             PhaseMask::all(), 1.0});
    }
    const Complex z_trunk{0.004, 0.008};
    const Complex z_lat{0.006, 0.010};
    const double mutual = 0.35;
    for (int id = 1; id < 26; ++id) net.branches.push_back(make_branch(id, id + 1, z_trunk, mutual));
    const int tee[4] = {6, 12, 18, 24};
    for (int lat = 0; lat < 4; ++lat) {
        const int first = 27 + 6 * lat;
        net.branches.push_back(make_branch(tee[lat], first, z_lat, mutual));
        for (int id = first; id < first + 5; ++id)
            net.branches.push_back(make_branch(id, id + 1, z_lat, mutual));
    }
    double total_p = 0.0;
    for (int id = 2; id <= 50; ++id) {
        ConstantPowerLoad load;
        load.bus = id;
        load.s = feeder_load(id);
        for (Phase phase : kAllPhases) total_p += load.s[phase].real();
        net.loads.push_back(load);
    }
    // Ten devices, three phases each: per-device power for 100% penetration.
    const double p3g = total_p / (3.0 * static_cast<double>(ibdg_buses.size()));
    for (int bus : ibdg_buses) {
        IbdgDevice dev;
        dev.bus = bus;
        dev.p3g = p3g;
        dev.i_rating = 2.2 * p3g;
        dev.voltvar = auto_voltvar(dev.i_rating);
        net.ibdgs.push_back(dev);
    }
    net.slack.bus = 1;
    net.slack.voltage = balanced_phasors(1.0, 0.0);
    return cf;
}

struct NamedCase {
    const char* name;
    CaseFile file;
};

}  // namespace

int main(int argc, char** argv) {
    const std::filesystem::path out_dir = argc > 1 ? argv[1] : "cases";
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        std::fprintf(stderr, "cannot create %s: %s\n", out_dir.string().c_str(),
                     ec.message().c_str());
        return 2;
    }

    const std::vector<int> end_buses{25, 26, 31, 32, 37, 38, 43, 44, 49, 50};
    const std::vector<int> center_buses{10, 11, 12, 13, 14, 15, 16, 17, 18, 19};
    const std::vector<int> spread_buses{5, 10, 15, 20, 25, 29, 34, 39, 44, 49};

    std::vector<NamedCase> corpus;
    corpus.push_back({"minimal", case_minimal()});
    corpus.push_back({"two_bus_ibdg", case_two_bus_ibdg()});
    corpus.push_back({"four_bus_unbalanced", case_four_bus_unbalanced()});
    corpus.push_back({"pv_gen", case_pv_gen()});
    corpus.push_back({"sag_fpnsc", case_sag_fpnsc()});
    corpus.push_back({"infeasible", case_infeasible()});
    corpus.push_back({"oscillating_pvpq", case_oscillating_pvpq()});
    corpus.push_back({"oscillating_ibdg", case_oscillating_ibdg()});
    corpus.push_back({"feeder50_end", case_feeder50(end_buses)});
    corpus.push_back({"feeder50_center", case_feeder50(center_buses)});
    corpus.push_back({"feeder50_distributed", case_feeder50(spread_buses)});

    for (const NamedCase& entry : corpus) {
        const std::filesystem::path path = out_dir / (std::string(entry.name) + ".json");
        try {
            save_case(entry.file, path.string());
        } catch (const CaseError& error) {
            std::fprintf(stderr, "%s: %s\n", path.string().c_str(), error.what().c_str());
            return 2;
        }
        std::printf("wrote %s\n", path.string().c_str());
    }
    return 0;
}
