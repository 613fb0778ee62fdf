#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "cvqkd/monte_carlo.hpp"
#include "cvqkd/optimize.hpp"

namespace cvqkd::tools {

/// Configuration file problem: unknown key, missing field, wrong type or an
/// out-of-range value caught before any computation starts.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Default parameter blocks for a scenario, with every field materialized.
nlohmann::json default_config(const std::string& scenario);

/// Validates a raw configuration (strict: unknown keys are errors) and
/// returns it with all defaults filled in and sweep grids expanded to
/// explicit value lists. Resolving an already-resolved configuration is a
/// no-op, so the emitted sidecar reproduces the run exactly.
nlohmann::json resolve_config(const nlohmann::json& raw);

struct RunPaths {
    std::filesystem::path csv;
    std::filesystem::path sidecar;
    std::size_t rows = 0;
};

/// Executes a resolved configuration: writes the scenario CSV plus a JSON
/// sidecar holding the resolved configuration into out_dir. Sweep points are
/// evaluated in parallel up to config["threads"], but rows land in sweep
/// order and the bytes written do not depend on the thread count.
RunPaths run_scenario(const nlohmann::json& resolved, const std::filesystem::path& out_dir);

/// Shortest decimal representation that parses back to the same double,
/// always with '.' as the decimal separator.
std::string format_number(double v);

/// Builds the protocol described by the source/channel/measurement/
/// reconciliation/finite_size/fading blocks of a resolved configuration.
ProtocolSetting setting_from_config(const nlohmann::json& resolved);

} // namespace cvqkd::tools
