#include "pflow/report.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <string>

#include "pflow/sequence.hpp"

namespace pflow {

namespace {

[[nodiscard]] std::string fmt(double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.12g", value);
    return buffer;
}

}  // namespace

VoltageProfileReport make_report(const SolveResult& result, const Network& network,
                                 UnbalanceDefinition definition) {
    if (!result.converged) {
        throw ReportError{
            "solve did not converge; no voltage profile is reported "
            "(inspect the iteration trace for the failure pattern)"};
    }

    VoltageProfileReport report;
    double sum = 0.0;
    int count = 0;
    report.v_min = std::numeric_limits<double>::infinity();
    report.v_max = -std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < network.buses.size(); ++b) {
        const Bus& bus = network.buses[b];
        for (const Phase phase : kAllPhases) {
            if (!bus.phases.contains(phase)) {
                continue;
            }
            const Complex v = result.voltages[b][phase];
            const double mag = std::abs(v);
            const double ang = std::arg(v) * 180.0 / std::numbers::pi;
            report.per_bus.push_back({bus.id, phase, mag, ang});
            report.v_min = std::min(report.v_min, mag);
            report.v_max = std::max(report.v_max, mag);
            sum += mag;
            ++count;
        }
    }
    report.v_mean = count > 0 ? sum / count : 0.0;

    double diff_sum = 0.0;
    int diff_count = 0;
    for (const IbdgDevice& device : network.ibdgs) {
        const int bus_pos = network.bus_index(device.bus);
        const Bus& bus = network.buses[static_cast<std::size_t>(bus_pos)];
        for (const Phase phase : kAllPhases) {
            if (!bus.phases.contains(phase)) {
                continue;
            }
            const double mag = std::abs(result.voltages[static_cast<std::size_t>(bus_pos)][phase]);
            diff_sum += std::abs(mag - bus.nominal_voltage);
            ++diff_count;
        }
    }
    report.v_diff = diff_count > 0 ? diff_sum / diff_count : 0.0;

    double unb_sum = 0.0;
    int unb_count = 0;
    for (std::size_t b = 0; b < network.buses.size(); ++b) {
        if (network.buses[b].phases != PhaseMask::all()) {
            continue;
        }
        double unb = 0.0;
        if (definition == UnbalanceDefinition::Sequence) {
            const SequenceSet seq = phase_to_sequence(result.voltages[b]);
            const double vp = std::abs(seq.positive);
            if (vp > kSequenceEpsilon) {
                unb = 100.0 * std::abs(seq.negative) / vp;
            }
        } else {
            double mean = 0.0;
            for (const Phase phase : kAllPhases) {
                mean += std::abs(result.voltages[b][phase]);
            }
            mean /= 3.0;
            if (mean > 0.0) {
                double worst = 0.0;
                for (const Phase phase : kAllPhases) {
                    worst = std::max(worst, std::abs(std::abs(result.voltages[b][phase]) - mean));
                }
                unb = 100.0 * worst / mean;
            }
        }
        unb_sum += unb;
        ++unb_count;
    }
    report.v_unb = unb_count > 0 ? unb_sum / unb_count : 0.0;
    return report;
}

std::string report_csv(const VoltageProfileReport& report) {
    std::string out = "bus,phase,v_mag,v_ang\n";
    for (const BusPhaseVoltage& row : report.per_bus) {
        out += std::to_string(row.bus);
        out += ',';
        out += phase_letter(row.phase);
        out += ',';
        out += fmt(row.v_mag);
        out += ',';
        out += fmt(row.v_ang_deg);
        out += '\n';
    }
    out += "# summary\n";
    out += "metric,value\n";
    out += "v_min," + fmt(report.v_min) + "\n";
    out += "v_max," + fmt(report.v_max) + "\n";
    out += "v_mean," + fmt(report.v_mean) + "\n";
    out += "v_diff," + fmt(report.v_diff) + "\n";
    out += "v_unb_percent," + fmt(report.v_unb) + "\n";
    return out;
}

std::string trace_csv(const std::vector<TraceEntry>& trace) {
    std::string out = "iter,update_norm,kcl_norm,lambda\n";
    for (const TraceEntry& entry : trace) {
        out += std::to_string(entry.iteration);
        out += ',';
        out += fmt(entry.update_norm);
        out += ',';
        out += fmt(entry.kcl_norm);
        out += ',';
        out += fmt(entry.lambda);
        out += '\n';
    }
    return out;
}

std::string human_summary(const VoltageProfileReport& report) {
    char buffer[256];
    std::snprintf(buffer, sizeof(buffer),
                  "voltage profile: min %.2f pu, max %.2f pu, mean %.2f pu\n"
                  "inverter-bus deviation from nominal: %.2f pu\n"
                  "average voltage unbalance: %.1f %%\n",
                  report.v_min, report.v_max, report.v_mean, report.v_diff, report.v_unb);
    return buffer;
}

}  // namespace pflow
