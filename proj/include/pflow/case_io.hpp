#pragma once

#include <string>

#include "pflow/network.hpp"
#include "pflow/solver.hpp"

namespace pflow {

/// Parse or validation failure, addressed by the path of the offending
/// field (e.g. "$.branches[2].y_series") or "$" for document-level issues.
struct CaseError {
    std::string path;
    std::string message;

    [[nodiscard]] std::string what() const { return path + ": " + message; }
};

/// A complete study definition: the network plus solver settings and the
/// declared per-unit bases. All electrical quantities are stored per-unit;
/// the bases document the physical system and convert the few fields that
/// may be given in physical units (load powers in MVA).
struct CaseFile {
    int schema_version = 1;
    double base_mva = 1.0;
    double base_kv = 1.0;
    Network network;
    SolverOptions options;
};

/// Strict parse of the JSON case format: unknown fields are rejected,
/// structural problems (duplicate ids, dangling references, asymmetric
/// branch matrices) are reported with their path. Throws CaseError.
[[nodiscard]] CaseFile parse_case(const std::string& text);

/// parse_case over a file's contents; IO failures become CaseError.
[[nodiscard]] CaseFile load_case(const std::string& path);

/// Canonical serialization: defaults materialized, impedances converted to
/// admittances, "auto" Volt/VAR settings expanded, stable key order.
/// serialize_case(parse_case(x)) is a fixed point of parse/serialize.
[[nodiscard]] std::string serialize_case(const CaseFile& case_file);

void save_case(const CaseFile& case_file, const std::string& path);

}  // namespace pflow
