#pragma once

#include <iosfwd>
#include <string>

#include "gridoed/experiment_config.hpp"
#include "gridoed/grid_case.hpp"
#include "gridoed/grid_model.hpp"

namespace gridoed {

/// A parsed case: the static grid plus the line admittances derived from
/// the branch data (used as simulation ground truth unless overridden).
struct ParsedCase {
    GridCase grid;
    LineParams line_params;
};

/// Parses the supported MATPOWER subset: baseMVA, bus, gen, branch and
/// gencost blocks of a case function body. Branch impedances are converted
/// to series admittances g = r/(r^2+x^2), b = -x/(r^2+x^2); shunt columns
/// are ignored. Transformer taps, phase shifts, out-of-service elements and
/// non-quadratic cost models raise UnsupportedFeature.
ParsedCase parse_matpower_case(std::istream& in);
ParsedCase parse_matpower_case(const std::string& text);

/// Native structured text format ("gridcase v1"); canonical round-trip form.
ParsedCase parse_native_case(std::istream& in);
ParsedCase parse_native_case(const std::string& text);
std::string serialize_native_case(const ParsedCase& c);

/// Reads either format, keyed on the leading token of the first
/// non-comment line ("gridcase" vs. "function").
ParsedCase load_case_file(const std::string& path);

/// Key-value experiment configuration. Unknown keys are rejected; all
/// fields fall back to the reference-study defaults.
ExperimentConfig parse_experiment_config(std::istream& in);
ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

bool gridcase_equal(const ParsedCase& a, const ParsedCase& b);

}  // namespace gridoed
