#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hyperctrl/counterexample.hpp"
#include "hyperctrl/system_model.hpp"

namespace hyperctrl {

/**
 * @brief System from a JSON config:
 * {"k", "m", "speeds": [{"kind": "const" | "affine" | "grid", ...}], "B": [[...]],
 *  "coupling": {"kind": "zero" | "closed-form-id" | "grid", ...}}.
 *
 * Closed-form ids: "poly" (terms {i, j, c[r][s]} for t^r x^s, 1-based i, j) and
 * "thm1" (the counterexample coupling for the given ell and eps, constant speeds only).
 */
SystemSpec system_from_json(const nlohmann::json& j);

/** @brief Counterexample parameters of a config that uses the "thm1" coupling. */
std::optional<CounterexampleSpec> counterexample_from_json(const nlohmann::json& j);

/** @brief Parses a JSON file; ConfigError naming the path when missing or malformed. */
nlohmann::json read_json_file(const std::filesystem::path& path);

/** @brief Preset directory: $HYPERCTRL_PRESET_DIR, else the bundled data/presets. */
std::filesystem::path preset_directory();
std::vector<std::string> preset_names();
/** @brief The system config of a named preset; ConfigError for unknown names. */
nlohmann::json load_preset(const std::string& name);

}  // namespace hyperctrl
