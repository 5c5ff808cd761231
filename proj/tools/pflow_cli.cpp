// Command-line front end: solve a case, validate a case file, sweep inverter
// penetration, or run the waveform cross-check for one inverter.
// Exit codes: 0 success, 1 solve did not converge, 2 input error.
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "pflow/case_io.hpp"
#include "pflow/ibdg.hpp"
#include "pflow/report.hpp"
#include "pflow/sequence.hpp"
#include "pflow/solver.hpp"
#include "pflow/voltvar.hpp"
#include "pflow/waveform.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNoConvergence = 1;
constexpr int kExitInputError = 2;

bool write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        std::cerr << "error: cannot write '" << path << "'\n";
        return false;
    }
    out << content;
    return true;
}

struct SolveArgs {
    std::string case_path;
    bool homotopy = false;
    std::optional<double> tol;
    std::optional<int> max_iter;
    std::string out_path;
    std::string trace_path;
};

int run_solve(const SolveArgs& args) {
    pflow::CaseFile case_file;
    try {
        case_file = pflow::load_case(args.case_path);
    } catch (const pflow::CaseError& error) {
        std::cerr << "error: " << error.what() << "\n";
        return kExitInputError;
    }
    pflow::SolverOptions options = case_file.options;
    if (args.tol) {
        options.tol = *args.tol;
        options.residual_tol = *args.tol;
    }
    if (args.max_iter) {
        options.max_iter = *args.max_iter;
    }

    // Generators carrying reactive limits engage the mode-switching outer
    // loop; otherwise limits would be silently ignored by the plain solve.
    bool limited_generators = false;
    for (const pflow::PvGenerator& gen : case_file.network.generators) {
        limited_generators = limited_generators || (gen.q_min && gen.q_max);
    }

    pflow::SolveResult result;
    std::optional<pflow::SwitchingSolveResult> switching;
    try {
        if (limited_generators) {
            switching = pflow::solve_with_pvpq_switching(case_file.network, options);
            result = switching->result;
        } else {
            result = args.homotopy ? pflow::homotopy_solve(case_file.network, options)
                                   : pflow::nr_solve(case_file.network, options);
        }
    } catch (const pflow::SolverError& error) {
        std::cerr << "error: " << error.message << "\n";
        return kExitInputError;
    }

    if (!args.trace_path.empty() &&
        !write_text_file(args.trace_path, pflow::trace_csv(result.trace))) {
        return kExitInputError;
    }

    if (!result.converged) {
        std::cerr << "solve did not converge after " << result.iterations << " iterations";
        if (args.homotopy) {
            std::cerr << " (loading fraction reached: " << result.lambda_reached << ")";
        }
        std::cerr << "\n";
        if (args.trace_path.empty()) {
            std::cerr << "hint: rerun with --trace to record the iteration history\n";
        }
        return kExitNoConvergence;
    }

    const pflow::VoltageProfileReport report = pflow::make_report(result, case_file.network);
    std::cout << "converged in " << result.iterations << " iterations, nodal mismatch "
              << result.final_residual << "\n";
    if (switching) {
        int pinned = 0;
        int frozen = 0;
        for (const auto& gen_modes : switching->modes) {
            for (const pflow::PhaseSwitchState& phase : gen_modes) {
                pinned += phase.mode != pflow::RegulationMode::PV ? 1 : 0;
                frozen += phase.frozen ? 1 : 0;
            }
        }
        std::cout << "generator limit switching: " << switching->rounds << " rounds, " << pinned
                  << " phase(s) at a reactive limit";
        if (switching->oscillation_detected) {
            std::cout << "; oscillation detected, " << frozen << " phase(s) frozen";
        }
        std::cout << "\n";
    }
    std::cout << pflow::human_summary(report);
    if (!args.out_path.empty() && !write_text_file(args.out_path, pflow::report_csv(report))) {
        return kExitInputError;
    }
    return kExitOk;
}

int run_validate(const std::string& case_path) {
    try {
        const pflow::CaseFile case_file = pflow::load_case(case_path);
        const pflow::Network& net = case_file.network;
        std::cout << "case OK: " << net.buses.size() << " buses, " << net.branches.size()
                  << " branches, " << net.loads.size() << " loads, " << net.generators.size()
                  << " generators, " << net.ibdgs.size() << " inverters\n";
        return kExitOk;
    } catch (const pflow::CaseError& error) {
        std::cerr << "error: " << error.what() << "\n";
        return kExitInputError;
    }
}

struct SweepArgs {
    std::string case_path;
    std::string penetration;  // start:stop:step
    std::string out_path;
};

int run_sweep(const SweepArgs& args) {
    pflow::CaseFile case_file;
    try {
        case_file = pflow::load_case(args.case_path);
    } catch (const pflow::CaseError& error) {
        std::cerr << "error: " << error.what() << "\n";
        return kExitInputError;
    }

    double start = 0.0;
    double stop = 0.0;
    double step = 0.0;
    {
        char extra = '\0';
        if (std::sscanf(args.penetration.c_str(), "%lf:%lf:%lf%c", &start, &stop, &step,
                        &extra) != 3 ||
            step <= 0.0 || stop < start) {
            std::cerr << "error: --penetration expects start:stop:step with step > 0\n";
            return kExitInputError;
        }
    }

    const int count = static_cast<int>(std::floor((stop - start) / step + 1e-9)) + 1;
    std::ostringstream rows;
    rows << "penetration,converged,iterations,v_min,v_max,v_mean,v_diff,v_unb_percent\n";
    bool all_converged = true;
    for (int i = 0; i < count; ++i) {
        const double factor = start + i * step;
        pflow::Network net = case_file.network;
        for (pflow::IbdgDevice& device : net.ibdgs) {
            device.p3g *= factor;
        }
        pflow::SolveResult result;
        try {
            result = pflow::homotopy_solve(net, case_file.options);
        } catch (const pflow::SolverError& error) {
            std::cerr << "error: " << error.message << "\n";
            return kExitInputError;
        }
        char factor_text[32];
        std::snprintf(factor_text, sizeof(factor_text), "%.12g", factor);
        if (result.converged) {
            const pflow::VoltageProfileReport report = pflow::make_report(result, net);
            char line[256];
            std::snprintf(line, sizeof(line), "%s,1,%d,%.12g,%.12g,%.12g,%.12g,%.12g\n",
                          factor_text, result.iterations, report.v_min, report.v_max,
                          report.v_mean, report.v_diff, report.v_unb);
            rows << line;
        } else {
            all_converged = false;
            rows << factor_text << ",0," << result.iterations << ",,,,,\n";
        }
    }
    if (!args.out_path.empty()) {
        if (!write_text_file(args.out_path, rows.str())) {
            return kExitInputError;
        }
    } else {
        std::cout << rows.str();
    }
    return all_converged ? kExitOk : kExitNoConvergence;
}

struct OracleArgs {
    std::string case_path;
    int ibdg_index = 0;
    std::string wave_path;
};

int run_oracle(const OracleArgs& args) {
    pflow::CaseFile case_file;
    try {
        case_file = pflow::load_case(args.case_path);
    } catch (const pflow::CaseError& error) {
        std::cerr << "error: " << error.what() << "\n";
        return kExitInputError;
    }
    const pflow::Network& net = case_file.network;
    if (args.ibdg_index < 0 || args.ibdg_index >= static_cast<int>(net.ibdgs.size())) {
        std::cerr << "error: inverter index " << args.ibdg_index << " out of range (case has "
                  << net.ibdgs.size() << ")\n";
        return kExitInputError;
    }

    pflow::SolveResult result;
    try {
        result = pflow::homotopy_solve(net, case_file.options);
    } catch (const pflow::SolverError& error) {
        std::cerr << "error: " << error.message << "\n";
        return kExitInputError;
    }
    if (!result.converged) {
        std::cerr << "solve did not converge; cannot evaluate the oracle at a solution\n";
        return kExitNoConvergence;
    }

    const pflow::IbdgDevice& device = net.ibdgs[static_cast<std::size_t>(args.ibdg_index)];
    const double q3g = result.q3g[static_cast<std::size_t>(args.ibdg_index)];
    const int bus_pos = net.bus_index(device.bus);
    const pflow::PhasorSet v_bus = result.voltages[static_cast<std::size_t>(bus_pos)];
    const pflow::SequenceSet vseq = pflow::phase_to_sequence(v_bus);

    const pflow::PhasorSet current = pflow::ibdg_injection(device, v_bus, q3g);
    const pflow::CurrentLimitTerms terms =
        pflow::make_limit_terms(vseq.positive, vseq.negative, device.k1, device.k2);
    const std::array<double, 3> formula = pflow::peak_current(terms, device.p3g, q3g);

    const pflow::Waveform i_wave = pflow::synthesize(current);
    const pflow::Waveform v_wave = pflow::synthesize(v_bus);
    const std::array<double, 3> sampled = pflow::measure_peaks(i_wave);
    const pflow::PowerMeasurement power = pflow::measure_power(v_wave, i_wave);

    std::printf("inverter %d at bus %d: p3g=%.6g q3g=%.6g |V+|=%.6g |V-|=%.6g\n",
                args.ibdg_index, device.bus, device.p3g, q3g, std::abs(vseq.positive),
                std::abs(vseq.negative));
    double worst = 0.0;
    for (const pflow::Phase phase : pflow::kAllPhases) {
        const std::size_t i = static_cast<std::size_t>(pflow::phase_index(phase));
        const double rel =
            formula[i] > 0.0 ? std::abs(sampled[i] - formula[i]) / formula[i] : 0.0;
        worst = std::max(worst, rel);
        std::printf("phase %c: formula peak %.9g, sampled peak %.9g, rel err %.3g\n",
                    pflow::phase_letter(phase), formula[i], sampled[i], rel);
    }
    const pflow::QMaxResult qmax = pflow::q_max_reactive(device.i_rating, terms, device.k2);
    std::printf("delivered P=%.9g (3*p3g=%.9g), Q=%.9g (3*q3g=%.9g)\n", power.p_total(),
                3.0 * device.p3g, power.q_total(), 3.0 * q3g);
    std::printf("reactive capability q_max=%.9g (limiting phase %c%s), rating %.6g\n",
                qmax.value, pflow::phase_letter(qmax.limiting_phase),
                qmax.balanced_form ? ", balanced form" : "", device.i_rating);
    std::printf("peak formula vs waveform: worst rel err %.3g\n", worst);

    if (!args.wave_path.empty()) {
        std::ofstream out(args.wave_path, std::ios::binary);
        if (!out) {
            std::cerr << "error: cannot write '" << args.wave_path << "'\n";
            return kExitInputError;
        }
        pflow::write_csv(out, i_wave);
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Three-phase unbalanced power-flow solver with analytical inverter models"};
    app.require_subcommand(1);

    SolveArgs solve_args;
    CLI::App* solve = app.add_subcommand("solve", "Solve a case and report the voltage profile");
    solve->add_option("case", solve_args.case_path, "case file")->required();
    solve->add_flag("--homotopy", solve_args.homotopy,
                    "use the source-stepping continuation driver");
    double tol_value = 0.0;
    int max_iter_value = 0;
    CLI::Option* tol_opt =
        solve->add_option("--tol", tol_value, "convergence tolerance override");
    CLI::Option* iter_opt =
        solve->add_option("--max-iter", max_iter_value, "iteration limit override");
    solve->add_option("--out", solve_args.out_path, "write the report CSV here");
    solve->add_option("--trace", solve_args.trace_path, "write the iteration trace CSV here");

    std::string validate_path;
    CLI::App* validate = app.add_subcommand("validate", "Parse and validate a case file");
    validate->add_option("case", validate_path, "case file")->required();

    SweepArgs sweep_args;
    CLI::App* sweep = app.add_subcommand(
        "sweep", "Solve across an inverter active-power scaling range");
    sweep->add_option("case", sweep_args.case_path, "case file")->required();
    sweep->add_option("--penetration", sweep_args.penetration,
                      "start:stop:step scaling applied to every inverter's p3g")
        ->required();
    sweep->add_option("--out", sweep_args.out_path, "write the sweep CSV here");

    OracleArgs oracle_args;
    CLI::App* oracle = app.add_subcommand(
        "oracle", "Cross-check one inverter's analytical peaks against sampled waveforms");
    oracle->add_option("case", oracle_args.case_path, "case file")->required();
    oracle->add_option("--ibdg", oracle_args.ibdg_index,
                       "inverter index (position in the case's ibdgs array)")
        ->required();
    oracle->add_option("--wave", oracle_args.wave_path, "write the current waveform CSV here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& help) {
        return app.exit(help);
    } catch (const CLI::ParseError& error) {
        app.exit(error);
        return kExitInputError;
    }

    if (solve->parsed()) {
        if (*tol_opt) {
            solve_args.tol = tol_value;
        }
        if (*iter_opt) {
            solve_args.max_iter = max_iter_value;
        }
        return run_solve(solve_args);
    }
    if (validate->parsed()) {
        return run_validate(validate_path);
    }
    if (sweep->parsed()) {
        return run_sweep(sweep_args);
    }
    return run_oracle(oracle_args);
}
