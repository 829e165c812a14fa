#pragma once

// Scenario files: JSON text mirroring engine::Scenario. Every scalar key is a
// parameter path ("grid.v_ll_rms", "pv.mppt.step", ...); unknown keys are
// rejected with their full path.

#include <filesystem>
#include <string>
#include <string_view>

#include "sapf/engine.hpp"

namespace sapf::cli {

inline constexpr int kFormatVersion = 1;

/// Throws ValidationError naming the offending key.
engine::Scenario parse_scenario(std::string_view text);
engine::Scenario load_scenario(const std::filesystem::path& path);

/// Full JSON form of a scenario, every present parameter written explicitly.
/// Parsing the result reproduces the scenario exactly.
std::string dump_scenario(const engine::Scenario& sc);

/// Numeric value of an event or sweep entry given as a JSON-like token:
/// number, true/false, or a choice label.
double parse_parameter_value(std::string_view path, std::string_view token);

}  // namespace sapf::cli
