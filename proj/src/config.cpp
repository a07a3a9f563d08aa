#include "hyperctrl/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>

#include "hyperctrl/errors.hpp"

#ifndef HYPERCTRL_DEFAULT_PRESET_DIR
#define HYPERCTRL_DEFAULT_PRESET_DIR "data/presets"
#endif

namespace hyperctrl {

namespace {

template <typename T>
T required(const nlohmann::json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) {
        throw ConfigError(where + ": missing key \"" + key + "\"");
    }
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(where + ": bad value for \"" + key + "\": " + e.what());
    }
}

SpeedPtr speed_from_json(const nlohmann::json& j) {
    const std::string kind = required<std::string>(j, "kind", "speed");
    if (kind == "const") {
        return constant_speed(required<double>(j, "value", "const speed"));
    }
    if (kind == "affine") {
        return affine_speed(required<double>(j, "a", "affine speed"), required<double>(j, "b", "affine speed"));
    }
    if (kind == "grid") {
        return grid_speed(required<std::vector<double>>(j, "x", "grid speed"),
                          required<std::vector<double>>(j, "v", "grid speed"));
    }
    throw ConfigError("unknown speed kind \"" + kind + "\"");
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& rows, int r, int c, const std::string& where) {
    if (!rows.is_array() || static_cast<int>(rows.size()) != r) {
        throw ConfigError(where + ": expected " + std::to_string(r) + " rows");
    }
    Eigen::MatrixXd M(r, c);
    for (int i = 0; i < r; ++i) {
        const auto row = rows[i].get<std::vector<double>>();
        if (static_cast<int>(row.size()) != c) {
            throw ConfigError(where + ": expected " + std::to_string(c) + " columns in row " + std::to_string(i + 1));
        }
        for (int jj = 0; jj < c; ++jj) {
            M(i, jj) = row[jj];
        }
    }
    return M;
}

CounterexampleSpec thm1_spec(const nlohmann::json& j, const nlohmann::json& coupling) {
    CounterexampleSpec cx;
    cx.k = required<int>(j, "k", "system");
    cx.m = required<int>(j, "m", "system");
    cx.ell = coupling.value("ell", 2);
    cx.eps = coupling.value("eps", 0.1);
    for (const auto& s : j.at("speeds")) {
        if (s.value("kind", "") != "const") {
            throw ConfigError("the thm1 coupling needs constant speeds");
        }
        cx.lambdas.push_back(s.at("value").get<double>());
    }
    cx.B = matrix_from_json(j.at("B"), cx.k, cx.m, "B");
    return cx;
}

CouplingPtr coupling_from_json(const nlohmann::json& sys, int n) {
    if (!sys.contains("coupling")) {
        return zero_coupling(n);
    }
    const auto& c = sys.at("coupling");
    const std::string kind = required<std::string>(c, "kind", "coupling");
    if (kind == "zero") {
        return zero_coupling(n);
    }
    if (kind == "closed-form-id") {
        const std::string id = required<std::string>(c, "id", "coupling");
        if (id == "poly") {
            std::vector<PolynomialEntry> entries;
            for (const auto& t : c.at("terms")) {
                PolynomialEntry e;
                e.row = required<int>(t, "i", "poly term") - 1;
                e.col = required<int>(t, "j", "poly term") - 1;
                e.coeffs = required<std::vector<std::vector<double>>>(t, "c", "poly term");
                entries.push_back(std::move(e));
            }
            return polynomial_coupling(n, std::move(entries));
        }
        if (id == "thm1") {
            try {
                return build_coefficients(thm1_spec(sys, c));
            } catch (const PreconditionError& e) {
                throw ConfigError(std::string("thm1 coupling: ") + e.what());
            }
        }
        throw ConfigError("unknown closed-form coupling id \"" + id + "\"");
    }
    if (kind == "grid") {
        std::vector<GridEntry> entries;
        for (const auto& e : c.at("entries")) {
            GridEntry g;
            g.row = required<int>(e, "i", "grid entry") - 1;
            g.col = required<int>(e, "j", "grid entry") - 1;
            g.values = required<std::vector<std::vector<double>>>(e, "v", "grid entry");
            entries.push_back(std::move(g));
        }
        return grid_coupling(n, required<std::vector<double>>(c, "t", "grid coupling"),
                             required<std::vector<double>>(c, "x", "grid coupling"), std::move(entries));
    }
    throw ConfigError("unknown coupling kind \"" + kind + "\"");
}

}  // namespace

SystemSpec system_from_json(const nlohmann::json& j) {
    const nlohmann::json& sys = j.contains("system") ? j.at("system") : j;
    const int k = required<int>(sys, "k", "system");
    const int m = required<int>(sys, "m", "system");
    if (k < 1 || m < 1) {
        throw ConfigError("system: k and m must be positive");
    }
    const auto& speeds_json = sys.at("speeds");
    if (!speeds_json.is_array() || static_cast<int>(speeds_json.size()) != k + m) {
        throw ConfigError("system: expected " + std::to_string(k + m) + " speeds");
    }
    std::vector<SpeedPtr> speeds;
    for (const auto& s : speeds_json) {
        speeds.push_back(speed_from_json(s));
    }
    const Eigen::MatrixXd B = matrix_from_json(sys.at("B"), k, m, "B");
    return SystemSpec(k, m, std::move(speeds), B, coupling_from_json(sys, k + m));
}

std::optional<CounterexampleSpec> counterexample_from_json(const nlohmann::json& j) {
    const nlohmann::json& sys = j.contains("system") ? j.at("system") : j;
    if (!sys.contains("coupling")) {
        return std::nullopt;
    }
    const auto& c = sys.at("coupling");
    if (c.value("kind", "") != "closed-form-id" || c.value("id", "") != "thm1") {
        return std::nullopt;
    }
    return thm1_spec(sys, c);
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path.string());
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

std::filesystem::path preset_directory() {
    if (const char* env = std::getenv("HYPERCTRL_PRESET_DIR"); env != nullptr && *env != '\0') {
        return env;
    }
    return HYPERCTRL_DEFAULT_PRESET_DIR;
}

std::vector<std::string> preset_names() {
    std::vector<std::string> names;
    std::error_code ec;
    for (const auto& entry : std::filesystem::directory_iterator(preset_directory(), ec)) {
        if (entry.path().extension() == ".json") {
            names.push_back(entry.path().stem().string());
        }
    }
    std::sort(names.begin(), names.end());
    return names;
}

nlohmann::json load_preset(const std::string& name) {
    const std::filesystem::path path = preset_directory() / (name + ".json");
    if (!std::filesystem::exists(path)) {
        throw ConfigError("unknown preset \"" + name + "\" (looked in " + preset_directory().string() + ")");
    }
    return read_json_file(path);
}

}  // namespace hyperctrl
