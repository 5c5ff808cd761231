#include "pflow/case_io.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "pflow/ibdg.hpp"
#include "pflow/voltvar.hpp"

namespace pflow {

namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, const std::string& message) {
    throw CaseError{path, message};
}

[[nodiscard]] std::string type_name(const json& value) {
    return value.type_name();
}

/// Strict object reader: every key must be consumed, leftovers are errors.
class ObjectReader {
  public:
    ObjectReader(const json& object, std::string path) : object_(object), path_(std::move(path)) {
        if (!object_.is_object()) {
            fail(path_, "expected an object, got " + type_name(object_));
        }
    }

    [[nodiscard]] const std::string& path() const { return path_; }

    [[nodiscard]] const json* optional(const std::string& key) {
        consumed_.insert(key);
        const auto it = object_.find(key);
        return it == object_.end() ? nullptr : &*it;
    }

    [[nodiscard]] const json& require(const std::string& key) {
        const json* value = optional(key);
        if (value == nullptr) {
            fail(path_, "missing required field '" + key + "'");
        }
        return *value;
    }

    /// Rejects any key that was never requested.
    void finish() {
        for (const auto& [key, value] : object_.items()) {
            if (!consumed_.contains(key)) {
                fail(path_ + "." + key, "unknown field");
            }
        }
    }

  private:
    const json& object_;
    std::string path_;
    std::set<std::string> consumed_;
};

[[nodiscard]] double as_double(const json& value, const std::string& path) {
    if (!value.is_number()) {
        fail(path, "expected a number, got " + type_name(value));
    }
    return value.get<double>();
}

[[nodiscard]] double as_finite_double(const json& value, const std::string& path) {
    const double x = as_double(value, path);
    if (!std::isfinite(x)) {
        fail(path, "value must be finite");
    }
    return x;
}

[[nodiscard]] int as_int(const json& value, const std::string& path) {
    if (!value.is_number_integer()) {
        fail(path, "expected an integer, got " + type_name(value));
    }
    return value.get<int>();
}

[[nodiscard]] std::string as_string(const json& value, const std::string& path) {
    if (!value.is_string()) {
        fail(path, "expected a string, got " + type_name(value));
    }
    return value.get<std::string>();
}

/// Complex values are two-element [real, imaginary] arrays.
[[nodiscard]] Complex as_complex(const json& value, const std::string& path) {
    if (!value.is_array() || value.size() != 2) {
        fail(path, "expected a [real, imaginary] pair");
    }
    return {as_finite_double(value[0], path + "[0]"), as_finite_double(value[1], path + "[1]")};
}

/// Phase subsets are strings over 'a','b','c' in order, e.g. "abc", "ac".
[[nodiscard]] PhaseMask as_phases(const json& value, const std::string& path) {
    const std::string text = as_string(value, path);
    PhaseMask mask;
    int last = -1;
    for (const char c : text) {
        int idx = -1;
        for (const Phase p : kAllPhases) {
            if (phase_letter(p) == c) {
                idx = phase_index(p);
            }
        }
        if (idx < 0) {
            fail(path, std::string("unknown phase letter '") + c + "'");
        }
        if (idx <= last) {
            fail(path, "phase letters must be unique and in a/b/c order");
        }
        last = idx;
        mask = mask.with(static_cast<Phase>(idx));
    }
    if (mask == PhaseMask::none()) {
        fail(path, "at least one phase is required");
    }
    return mask;
}

/// 3x3 complex matrices are arrays of three rows of three [re, im] pairs.
[[nodiscard]] PhaseMatrix as_matrix(const json& value, const std::string& path) {
    if (!value.is_array() || value.size() != 3) {
        fail(path, "expected a 3x3 matrix (three rows)");
    }
    PhaseMatrix m{};
    for (int i = 0; i < 3; ++i) {
        const json& row = value[static_cast<std::size_t>(i)];
        const std::string row_path = path + "[" + std::to_string(i) + "]";
        if (!row.is_array() || row.size() != 3) {
            fail(row_path, "expected a row of three [re, im] pairs");
        }
        for (int j = 0; j < 3; ++j) {
            m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = as_complex(
                row[static_cast<std::size_t>(j)], row_path + "[" + std::to_string(j) + "]");
        }
    }
    return m;
}

/// Per-phase complex maps: {"a": [re, im], ...}; absent phases stay zero.
[[nodiscard]] PhasorSet as_phasor_map(const json& value, const std::string& path) {
    ObjectReader reader(value, path);
    PhasorSet out{};
    for (const Phase p : kAllPhases) {
        const std::string key(1, phase_letter(p));
        if (const json* entry = reader.optional(key)) {
            out[p] = as_complex(*entry, path + "." + key);
        }
    }
    reader.finish();
    return out;
}

[[nodiscard]] Bus parse_bus(const json& value, const std::string& path) {
    ObjectReader reader(value, path);
    Bus bus;
    bus.id = as_int(reader.require("id"), path + ".id");
    if (const json* name = reader.optional("name")) {
        bus.name = as_string(*name, path + ".name");
    }
    if (const json* phases = reader.optional("phases")) {
        bus.phases = as_phases(*phases, path + ".phases");
    }
    if (const json* nominal = reader.optional("nominal_voltage")) {
        bus.nominal_voltage = as_finite_double(*nominal, path + ".nominal_voltage");
        if (bus.nominal_voltage <= 0.0) {
            fail(path + ".nominal_voltage", "must be positive");
        }
    }
    reader.finish();
    return bus;
}

[[nodiscard]] Branch parse_branch(const json& value, const std::string& path) {
    ObjectReader reader(value, path);
    Branch branch;
    branch.from = as_int(reader.require("from"), path + ".from");
    branch.to = as_int(reader.require("to"), path + ".to");
    if (const json* phases = reader.optional("phases")) {
        branch.phases = as_phases(*phases, path + ".phases");
    }
    const json* y_series = reader.optional("y_series");
    const json* z_series = reader.optional("z_series");
    if ((y_series != nullptr) == (z_series != nullptr)) {
        fail(path, "exactly one of 'y_series' and 'z_series' is required");
    }
    if (y_series != nullptr) {
        branch.y_series = as_matrix(*y_series, path + ".y_series");
    } else {
        const PhaseMatrix z = as_matrix(*z_series, path + ".z_series");
        try {
            branch.y_series = admittance_from_impedance(z, branch.phases);
        } catch (const NetworkError& error) {
            fail(path + ".z_series", error.message);
        }
    }
    if (const json* y_shunt = reader.optional("y_shunt")) {
        branch.y_shunt = as_matrix(*y_shunt, path + ".y_shunt");
    }
    reader.finish();
    return branch;
}

[[nodiscard]] ConstantPowerLoad parse_load(const json& value, const std::string& path,
                                           double base_mva) {
    ObjectReader reader(value, path);
    ConstantPowerLoad load;
    load.bus = as_int(reader.require("bus"), path + ".bus");
    const json* s = reader.optional("s");
    const json* s_mva = reader.optional("s_mva");
    if ((s != nullptr) == (s_mva != nullptr)) {
        fail(path, "exactly one of 's' (per-unit) and 's_mva' (physical) is required");
    }
    if (s != nullptr) {
        load.s = as_phasor_map(*s, path + ".s");
    } else {
        load.s = as_phasor_map(*s_mva, path + ".s_mva");
        for (const Phase p : kAllPhases) {
            load.s[p] /= base_mva;
        }
    }
    reader.finish();
    return load;
}

[[nodiscard]] PvGenerator parse_generator(const json& value, const std::string& path) {
    ObjectReader reader(value, path);
    PvGenerator gen;
    gen.bus = as_int(reader.require("bus"), path + ".bus");
    const json& p = reader.require("p");
    if (!p.is_array() || p.size() != 3) {
        fail(path + ".p", "expected three per-phase active powers [pa, pb, pc]");
    }
    for (int i = 0; i < 3; ++i) {
        gen.p_per_phase[static_cast<std::size_t>(i)] =
            as_finite_double(p[static_cast<std::size_t>(i)],
                             path + ".p[" + std::to_string(i) + "]");
    }
    if (const json* setpoint = reader.optional("v_setpoint")) {
        gen.v_setpoint = as_finite_double(*setpoint, path + ".v_setpoint");
    }
    if (const json* q_min = reader.optional("q_min")) {
        gen.q_min = as_finite_double(*q_min, path + ".q_min");
    }
    if (const json* q_max = reader.optional("q_max")) {
        gen.q_max = as_finite_double(*q_max, path + ".q_max");
    }
    reader.finish();
    return gen;
}

[[nodiscard]] VoltVarBreakpoints parse_voltvar(const json& value, const std::string& path,
                                               double i_rating) {
    VoltVarBreakpoints bp;
    if (value.is_string()) {
        if (value.get<std::string>() != "auto") {
            fail(path, "expected \"auto\" or a breakpoint object");
        }
        // Default characteristic: saturation at +/-44% of the current rating
        // (the common smart-inverter reactive capability fraction).
        bp.q_cap = 0.44 * i_rating;
        bp.q_abs = -0.44 * i_rating;
        return bp;
    }
    ObjectReader reader(value, path);
    if (const json* v = reader.optional("v1")) bp.v1 = as_finite_double(*v, path + ".v1");
    if (const json* v = reader.optional("v2")) bp.v2 = as_finite_double(*v, path + ".v2");
    if (const json* v = reader.optional("v3")) bp.v3 = as_finite_double(*v, path + ".v3");
    if (const json* v = reader.optional("v4")) bp.v4 = as_finite_double(*v, path + ".v4");
    bp.q_cap = as_finite_double(reader.require("q_cap"), path + ".q_cap");
    bp.q_abs = as_finite_double(reader.require("q_abs"), path + ".q_abs");
    if (const json* w = reader.optional("patch_halfwidth")) {
        bp.patch_halfwidth = as_finite_double(*w, path + ".patch_halfwidth");
    }
    reader.finish();
    return bp;
}

[[nodiscard]] IbdgDevice parse_ibdg(const json& value, const std::string& path) {
    ObjectReader reader(value, path);
    IbdgDevice device;
    device.bus = as_int(reader.require("bus"), path + ".bus");
    device.p3g = as_finite_double(reader.require("p3g"), path + ".p3g");
    if (const json* k1 = reader.optional("k1")) {
        device.k1 = as_finite_double(*k1, path + ".k1");
    }
    if (const json* k2 = reader.optional("k2")) {
        device.k2 = as_finite_double(*k2, path + ".k2");
    }
    if (const json* alpha = reader.optional("alpha")) {
        device.alpha = as_complex(*alpha, path + ".alpha");
    }
    if (const json* beta = reader.optional("beta")) {
        device.beta = as_complex(*beta, path + ".beta");
    }
    device.i_rating = as_finite_double(reader.require("i_rating"), path + ".i_rating");
    VoltVarBreakpoints bp;
    bp.q_cap = 0.44 * device.i_rating;
    bp.q_abs = -0.44 * device.i_rating;
    if (const json* voltvar = reader.optional("voltvar")) {
        bp = parse_voltvar(*voltvar, path + ".voltvar", device.i_rating);
    }
    try {
        device.voltvar = VoltVarCurve::build(bp);
    } catch (const CurveBuildError& error) {
        fail(path + ".voltvar", std::string(error.reason) + " (near knot " + std::to_string(error.knot) + ")");
    }
    reader.finish();
    return device;
}

[[nodiscard]] SlackSource parse_slack(const json& value, const std::string& path) {
    ObjectReader reader(value, path);
    SlackSource slack;
    slack.bus = as_int(reader.require("bus"), path + ".bus");
    const json* voltage = reader.optional("voltage");
    const json* magnitude = reader.optional("magnitude");
    if ((voltage != nullptr) == (magnitude != nullptr)) {
        fail(path, "exactly one of 'voltage' (per-phase phasors) and 'magnitude' "
                   "(balanced shorthand) is required");
    }
    if (voltage != nullptr) {
        slack.voltage = as_phasor_map(*voltage, path + ".voltage");
        (void)reader.optional("angle_deg");  // only meaningful with 'magnitude'
        if (value.contains("angle_deg")) {
            fail(path + ".angle_deg", "only valid together with 'magnitude'");
        }
    } else {
        double angle_deg = 0.0;
        if (const json* angle = reader.optional("angle_deg")) {
            angle_deg = as_finite_double(*angle, path + ".angle_deg");
        }
        slack.voltage = balanced_phasors(as_finite_double(*magnitude, path + ".magnitude"),
                                         angle_deg * std::numbers::pi / 180.0);
    }
    reader.finish();
    return slack;
}

[[nodiscard]] SolverOptions parse_options(const json& value, const std::string& path) {
    ObjectReader reader(value, path);
    SolverOptions options;
    if (const json* tol = reader.optional("tol")) {
        options.tol = as_finite_double(*tol, path + ".tol");
    }
    if (const json* max_iter = reader.optional("max_iter")) {
        options.max_iter = as_int(*max_iter, path + ".max_iter");
    }
    if (const json* step = reader.optional("v_step_max")) {
        options.v_step_max = as_finite_double(*step, path + ".v_step_max");
    }
    if (const json* steps = reader.optional("homotopy_steps")) {
        options.homotopy_steps = as_int(*steps, path + ".homotopy_steps");
    }
    if (const json* relax = reader.optional("q_relax")) {
        options.q_relax = as_finite_double(*relax, path + ".q_relax");
    }
    reader.finish();
    return options;
}

template <typename Item, typename Parser>
void parse_array(ObjectReader& root, const std::string& key, std::vector<Item>& out,
                 Parser&& parser) {
    const json* array = root.optional(key);
    if (array == nullptr) {
        return;
    }
    if (!array->is_array()) {
        fail("$." + key, "expected an array");
    }
    for (std::size_t i = 0; i < array->size(); ++i) {
        out.push_back(parser((*array)[i], "$." + key + "[" + std::to_string(i) + "]"));
    }
}

[[nodiscard]] std::string line_column(const std::string& text, std::size_t byte) {
    std::size_t line = 1;
    std::size_t column = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

[[nodiscard]] json complex_json(Complex z) { return json::array({z.real(), z.imag()}); }

[[nodiscard]] json phases_json(PhaseMask mask) {
    std::string text;
    for (const Phase p : kAllPhases) {
        if (mask.contains(p)) {
            text += phase_letter(p);
        }
    }
    return text;
}

[[nodiscard]] json matrix_json(const PhaseMatrix& m) {
    json rows = json::array();
    for (int i = 0; i < 3; ++i) {
        json row = json::array();
        for (int j = 0; j < 3; ++j) {
            row.push_back(complex_json(m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]));
        }
        rows.push_back(row);
    }
    return rows;
}

[[nodiscard]] json phasor_map_json(const PhasorSet& set) {
    json out = json::object();
    for (const Phase p : kAllPhases) {
        if (set[p] != Complex{0.0, 0.0}) {
            out[std::string(1, phase_letter(p))] = complex_json(set[p]);
        }
    }
    return out;
}

[[nodiscard]] bool matrix_is_zero(const PhaseMatrix& m) {
    for (const auto& row : m) {
        for (const Complex& z : row) {
            if (z != Complex{0.0, 0.0}) {
                return false;
            }
        }
    }
    return true;
}

}  // namespace

CaseFile parse_case(const std::string& text) {
    json document;
    try {
        document = json::parse(text);
    } catch (const json::parse_error& error) {
        fail("$", "malformed JSON at " + line_column(text, error.byte) + ": " + error.what());
    }

    ObjectReader root(document, "$");
    CaseFile out;
    out.schema_version = as_int(root.require("schema_version"), "$.schema_version");
    if (out.schema_version != 1) {
        fail("$.schema_version", "unsupported schema version " +
                                     std::to_string(out.schema_version) + " (expected 1)");
    }
    if (const json* base_mva = root.optional("base_mva")) {
        out.base_mva = as_finite_double(*base_mva, "$.base_mva");
        if (out.base_mva <= 0.0) {
            fail("$.base_mva", "must be positive");
        }
    }
    if (const json* base_kv = root.optional("base_kv")) {
        out.base_kv = as_finite_double(*base_kv, "$.base_kv");
        if (out.base_kv <= 0.0) {
            fail("$.base_kv", "must be positive");
        }
    }

    parse_array(root, "buses", out.network.buses,
                [](const json& v, const std::string& p) { return parse_bus(v, p); });
    parse_array(root, "branches", out.network.branches,
                [](const json& v, const std::string& p) { return parse_branch(v, p); });
    parse_array(root, "loads", out.network.loads,
                [&](const json& v, const std::string& p) {
                    return parse_load(v, p, out.base_mva);
                });
    parse_array(root, "pv_generators", out.network.generators,
                [](const json& v, const std::string& p) { return parse_generator(v, p); });
    parse_array(root, "ibdgs", out.network.ibdgs,
                [](const json& v, const std::string& p) { return parse_ibdg(v, p); });
    out.network.slack = parse_slack(root.require("slack"), "$.slack");
    if (const json* options = root.optional("solver_options")) {
        out.options = parse_options(*options, "$.solver_options");
    }
    root.finish();

    const std::vector<std::string> problems = validate(out.network);
    if (!problems.empty()) {
        std::string joined;
        for (const std::string& problem : problems) {
            if (!joined.empty()) {
                joined += "; ";
            }
            joined += problem;
        }
        fail("$", joined);
    }
    return out;
}

CaseFile load_case(const std::string& path) {
    std::ifstream stream(path, std::ios::binary);
    if (!stream) {
        fail("$", "cannot open case file '" + path + "'");
    }
    std::ostringstream buffer;
    buffer << stream.rdbuf();
    return parse_case(buffer.str());
}

std::string serialize_case(const CaseFile& case_file) {
    const Network& net = case_file.network;
    json document = json::object();
    document["schema_version"] = case_file.schema_version;
    document["base_mva"] = case_file.base_mva;
    document["base_kv"] = case_file.base_kv;

    json buses = json::array();
    for (const Bus& bus : net.buses) {
        json b = json::object();
        b["id"] = bus.id;
        if (!bus.name.empty()) {
            b["name"] = bus.name;
        }
        b["phases"] = phases_json(bus.phases);
        b["nominal_voltage"] = bus.nominal_voltage;
        buses.push_back(std::move(b));
    }
    document["buses"] = std::move(buses);

    json branches = json::array();
    for (const Branch& branch : net.branches) {
        json b = json::object();
        b["from"] = branch.from;
        b["to"] = branch.to;
        b["phases"] = phases_json(branch.phases);
        b["y_series"] = matrix_json(branch.y_series);
        if (!matrix_is_zero(branch.y_shunt)) {
            b["y_shunt"] = matrix_json(branch.y_shunt);
        }
        branches.push_back(std::move(b));
    }
    document["branches"] = std::move(branches);

    if (!net.loads.empty()) {
        json loads = json::array();
        for (const ConstantPowerLoad& load : net.loads) {
            json l = json::object();
            l["bus"] = load.bus;
            l["s"] = phasor_map_json(load.s);
            loads.push_back(std::move(l));
        }
        document["loads"] = std::move(loads);
    }

    if (!net.generators.empty()) {
        json gens = json::array();
        for (const PvGenerator& gen : net.generators) {
            json g = json::object();
            g["bus"] = gen.bus;
            g["p"] = json::array({gen.p_per_phase[0], gen.p_per_phase[1], gen.p_per_phase[2]});
            g["v_setpoint"] = gen.v_setpoint;
            if (gen.q_min) {
                g["q_min"] = *gen.q_min;
            }
            if (gen.q_max) {
                g["q_max"] = *gen.q_max;
            }
            gens.push_back(std::move(g));
        }
        document["pv_generators"] = std::move(gens);
    }

    if (!net.ibdgs.empty()) {
        json devices = json::array();
        for (const IbdgDevice& device : net.ibdgs) {
            json d = json::object();
            d["bus"] = device.bus;
            d["p3g"] = device.p3g;
            d["k1"] = device.k1;
            d["k2"] = device.k2;
            d["alpha"] = complex_json(device.alpha);
            d["beta"] = complex_json(device.beta);
            d["i_rating"] = device.i_rating;
            const VoltVarBreakpoints& bp = device.voltvar.breakpoints();
            json v = json::object();
            v["v1"] = bp.v1;
            v["v2"] = bp.v2;
            v["v3"] = bp.v3;
            v["v4"] = bp.v4;
            v["q_cap"] = bp.q_cap;
            v["q_abs"] = bp.q_abs;
            v["patch_halfwidth"] = bp.patch_halfwidth;
            d["voltvar"] = std::move(v);
            devices.push_back(std::move(d));
        }
        document["ibdgs"] = std::move(devices);
    }

    json slack = json::object();
    slack["bus"] = net.slack.bus;
    json voltage = json::object();
    for (const Phase p : kAllPhases) {
        voltage[std::string(1, phase_letter(p))] = complex_json(net.slack.voltage[p]);
    }
    slack["voltage"] = std::move(voltage);
    document["slack"] = std::move(slack);

    json options = json::object();
    options["tol"] = case_file.options.tol;
    options["max_iter"] = case_file.options.max_iter;
    options["v_step_max"] = case_file.options.v_step_max;
    options["homotopy_steps"] = case_file.options.homotopy_steps;
    options["q_relax"] = case_file.options.q_relax;
    document["solver_options"] = std::move(options);

    return document.dump(2) + "\n";
}

void save_case(const CaseFile& case_file, const std::string& path) {
    std::ofstream stream(path, std::ios::binary);
    if (!stream) {
        fail("$", "cannot write case file '" + path + "'");
    }
    stream << serialize_case(case_file);
}

}  // namespace pflow
