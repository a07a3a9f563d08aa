// hyperctrl command line driver.
//
// Exit codes: 0 success, 1 unknown or missing subcommand, 2 precondition or
// configuration error, 3 solver non-convergence or failed construction, 4 I/O error.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hyperctrl/broad_solver.hpp"
#include "hyperctrl/config.hpp"
#include "hyperctrl/controllability.hpp"
#include "hyperctrl/counterexample.hpp"
#include "hyperctrl/duality.hpp"
#include "hyperctrl/spectral.hpp"

#ifndef HYPERCTRL_GIT_DESCRIBE
#define HYPERCTRL_GIT_DESCRIBE "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hyperctrl;

namespace {

constexpr int kSchemaVersion = 1;
constexpr int kCounterexampleN = 2000;

const std::vector<std::string> kCommands = {"simulate", "adjoint", "omega", "duality", "hum", "observability",
                                            "counterexample", "spectrum", "flow", "info"};

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/** @brief "a:b:count" with count >= 1 points, endpoints included. */
std::vector<double> parse_range(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) {
        parts.push_back(p);
    }
    if (parts.size() != 3) {
        throw ConfigError("range \"" + text + "\" is not of the form start:stop:points");
    }
    double a = 0.0;
    double b = 0.0;
    int count = 0;
    try {
        a = std::stod(parts[0]);
        b = std::stod(parts[1]);
        count = std::stoi(parts[2]);
    } catch (const std::exception&) {
        throw ConfigError("range \"" + text + "\" has a non-numeric field");
    }
    if (count < 1) {
        throw ConfigError("range \"" + text + "\" needs at least one point");
    }
    std::vector<double> out;
    for (int i = 0; i < count; ++i) {
        out.push_back(count == 1 ? a : a + (b - a) * i / (count - 1));
    }
    return out;
}

/** @brief Reads a CSV with a header row and numeric columns; column 0 is the abscissa. */
std::vector<std::vector<double>> read_csv_columns(const fs::path& path, int columns) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open data file " + path.string());
    }
    std::string line;
    std::getline(in, line);
    std::vector<std::vector<double>> cols(static_cast<std::size_t>(columns));
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::stringstream ss(line);
        std::string cell;
        int c = 0;
        while (std::getline(ss, cell, ',')) {
            if (c < columns) {
                try {
                    cols[static_cast<std::size_t>(c)].push_back(std::stod(cell));
                } catch (const std::exception&) {
                    throw ConfigError("non-numeric entry \"" + cell + "\" in " + path.string());
                }
            }
            ++c;
        }
        if (c < columns) {
            throw ConfigError(path.string() + ": expected " + std::to_string(columns) + " columns");
        }
    }
    if (cols[0].size() < 2) {
        throw ConfigError(path.string() + ": needs at least two data rows");
    }
    return cols;
}

double interp(const std::vector<double>& xs, const std::vector<double>& vs, double x) {
    if (x <= xs.front()) {
        return vs.front();
    }
    if (x >= xs.back()) {
        return vs.back();
    }
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const std::size_t j = static_cast<std::size_t>(it - xs.begin());
    const double th = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
    return (1.0 - th) * vs[j - 1] + th * vs[j];
}

/**
 * @brief Data on components first..first+count-1 as a function (i, s).
 *
 * Tags: zero, ones, sine (sin(i pi s)), bump (smooth bump on (0.25, 0.75)),
 * random:SEED (four-mode sine series), or a CSV path with header s,c_1,..,c_count.
 */
std::function<double(int, double)> data_function(const std::string& tag, int first, int count, double scale = 1.0) {
    if (tag == "zero") {
        return [](int, double) { return 0.0; };
    }
    if (tag == "ones") {
        return [](int, double) { return 1.0; };
    }
    if (tag == "sine") {
        return [scale](int i, double s) { return std::sin(i * M_PI * s / scale); };
    }
    if (tag == "bump") {
        return [scale](int, double s) {
            const double z = (s / scale - 0.5) / 0.25;
            return std::abs(z) < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - z * z)) : 0.0;
        };
    }
    if (tag.rfind("random:", 0) == 0) {
        unsigned seed = 0;
        try {
            seed = static_cast<unsigned>(std::stoul(tag.substr(7)));
        } catch (const std::exception&) {
            throw ConfigError("bad seed in data tag \"" + tag + "\"");
        }
        std::mt19937 rng(seed);
        std::normal_distribution<double> normal;
        std::vector<std::vector<double>> a(static_cast<std::size_t>(count), std::vector<double>(5));
        for (auto& row : a) {
            for (std::size_t j = 0; j < row.size(); ++j) {
                row[j] = normal(rng) / static_cast<double>(j + 1);
            }
        }
        return [a, first, scale](int i, double s) {
            const auto& row = a[static_cast<std::size_t>(i - first)];
            double v = row[0];
            for (std::size_t j = 1; j < row.size(); ++j) {
                v += row[j] * std::sin(static_cast<double>(j) * M_PI * s / scale);
            }
            return v;
        };
    }
    if (fs::path(tag).extension() == ".csv") {
        const auto cols = read_csv_columns(tag, count + 1);
        return [cols, first](int i, double s) { return interp(cols[0], cols[static_cast<std::size_t>(i - first + 1)], s); };
    }
    throw ConfigError("unknown data tag \"" + tag + "\" (zero, ones, sine, bump, random:SEED or a .csv file)");
}

struct Context {
    std::string system_path;
    std::string preset;
    std::string out_dir = ".";
    int threads = 0;
    int N = 200;
    int Nx = 32;
    bool dump_config = false;

    json config;
    std::optional<SystemSpec> spec;

    void load() {
        if (!preset.empty() && !system_path.empty()) {
            throw ConfigError("--system and --preset are mutually exclusive");
        }
        if (!preset.empty()) {
            config = load_preset(preset);
        } else if (!system_path.empty()) {
            if (!fs::exists(system_path)) {
                throw ConfigError("system file not found: " + system_path);
            }
            config = read_json_file(system_path);
        } else {
            throw ConfigError("no system given (use --system path.json or --preset name)");
        }
        if (dump_config) {
            std::cout << config.dump(2) << "\n";
        }
        spec.emplace(system_from_json(config));
        for (const auto& w : spec->warnings()) {
            std::cerr << "warning: " << w << "\n";
        }
    }

    void validate_grid() const {
        if (N < 16 || Nx < 16) {
            throw ConfigError("grid resolution must be at least 16 (got N = " + std::to_string(N) +
                              ", Nx = " + std::to_string(Nx) + ")");
        }
    }

    int thread_count() const {
        if (threads > 0) {
            return threads;
        }
        if (const char* env = std::getenv("HYPERCTRL_THREADS"); env != nullptr && *env != '\0') {
            try {
                return std::max(1, std::stoi(env));
            } catch (const std::exception&) {
                throw ConfigError(std::string("HYPERCTRL_THREADS is not an integer: ") + env);
            }
        }
        return 1;
    }

    /** @brief Creates the output directory and checks it is writable before any solve. */
    void prepare_output() const {
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        const fs::path probe = fs::path(out_dir) / ".hyperctrl-write-check";
        {
            std::ofstream f(probe);
            if (!f) {
                throw IoError("output directory is not writable: " + out_dir);
            }
        }
        fs::remove(probe, ec);
    }

    fs::path out(const std::string& name) const { return fs::path(out_dir) / name; }

    json report(const std::string& command, const json& params, const json& tolerances) const {
        json r;
        r["schema_version"] = kSchemaVersion;
        r["command"] = command;
        r["config"] = {{"system", config}, {"parameters", params}};
        r["provenance"] = {{"version", "0.1.0"},
                           {"git", HYPERCTRL_GIT_DESCRIBE},
                           {"grid", {{"N", N}, {"Nx", Nx}}},
                           {"tolerances", tolerances}};
        return r;
    }
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw IoError("cannot write " + path.string());
    }
    f << text;
    if (!f) {
        throw IoError("write failed for " + path.string());
    }
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

/** @brief Field dump on a uniform x grid of Nx + 1 points, every `stride`-th time level. */
void write_field_csv(const fs::path& path, const SolutionField& field, int Nx) {
    const int levels = field.levels();
    const int stride = std::max(1, (levels - 1) / 400);
    std::ostringstream os;
    os << "t,x";
    for (int i = 1; i <= field.n(); ++i) {
        os << ",u_" << i;
    }
    os << "\n";
    const TimeGrid& tg = field.disc().time();
    std::vector<int> rows;
    for (int l = 0; l < levels; l += stride) {
        rows.push_back(l);
    }
    if (rows.back() != levels - 1) {
        rows.push_back(levels - 1);
    }
    for (int l : rows) {
        const double t = tg.t(l);
        for (int p = 0; p <= Nx; ++p) {
            const double x = static_cast<double>(p) / Nx;
            os << num(t) << "," << num(x);
            for (int i = 1; i <= field.n(); ++i) {
                os << "," << num(field.sample(i, t, x));
            }
            os << "\n";
        }
    }
    write_text(path, os.str());
}

void write_trace_csv(const fs::path& path, const Trace& trace, const std::string& prefix) {
    std::ostringstream os;
    os << "t";
    for (int r = 0; r < trace.values.rows(); ++r) {
        os << "," << prefix << "_" << trace.first + r;
    }
    os << "\n";
    for (int l = 0; l < trace.values.cols(); ++l) {
        os << num(trace.grid.t(l));
        for (int r = 0; r < trace.values.rows(); ++r) {
            os << "," << num(trace.values(r, l));
        }
        os << "\n";
    }
    write_text(path, os.str());
}

void require_converged(const PicardReport& report, const std::string& what) {
    if (!report.converged) {
        throw SolverError(what + " did not converge", report);
    }
}

std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        s += (i ? " " : "") + num(v[i]);
    }
    return s;
}

// ---- subcommands -----------------------------------------------------------

int cmd_info(Context& ctx) {
    const SystemSpec& s = *ctx.spec;
    std::cout << "n " << s.n() << "\n";
    std::cout << "k " << s.k() << "\n";
    std::cout << "m " << s.m() << "\n";
    std::cout << "tau " << join(s.taus()) << "\n";
    std::cout << "T_opt " << num(s.t_opt()) << "\n";
    std::cout << "T_1 " << num(s.t_russell()) << "\n";
    std::cout << "B_generic " << check_B_class(s.B(), s.k(), s.m(), BClass::generic) << "\n";
    if (s.m() >= s.k()) {
        std::cout << "B_extended " << check_B_class(s.B(), s.k(), s.m(), BClass::extended) << "\n";
    } else {
        std::cout << "B_extended n/a\n";
    }
    for (int i = 1; i <= std::min(s.k(), s.m()); ++i) {
        std::cout << "B_row_condition_" << i << " " << row_condition(s.B(), i) << "\n";
    }
    return 0;
}

struct WindowArgs {
    double tau = 0.0;
    double T = -1.0;
};

double horizon(const Context& ctx, double T) {
    const double h = T > 0.0 ? T : ctx.spec->t_opt();
    if (!(h > 0.0)) {
        throw ConfigError("horizon must be positive");
    }
    return h;
}

SolveOptions solve_options(const Context& ctx) {
    SolveOptions o;
    o.N = ctx.N;
    return o;
}

int cmd_simulate(Context& ctx, const WindowArgs& w, const std::string& u0_tag, const std::string& control_tag) {
    const SystemSpec& s = *ctx.spec;
    const double T = horizon(ctx, w.T);
    auto u0 = data_function(u0_tag, 1, s.n());
    auto Uf = data_function(control_tag, s.k() + 1, s.m());
    const double t0 = w.tau;
    TraceFn U = [Uf, t0](int i, double t) { return Uf(i, t - t0); };
    ctx.prepare_output();
    auto res = solve_forward(s, u0, U, w.tau, w.tau + T, solve_options(ctx));
    require_converged(res.report, "forward solve");
    write_field_csv(ctx.out("field.csv"), res.field, ctx.Nx);
    json r = ctx.report("simulate", {{"tau", w.tau}, {"T", T}, {"u0", u0_tag}, {"control", control_tag}},
                        {{"picard", SolveOptions{}.tolerance}});
    r["picard"] = res.report.to_json();
    r["terminal_max_abs"] = res.field.time_slice(res.field.levels() - 1).cwiseAbs().maxCoeff();
    write_json(ctx.out("simulate_report.json"), r);
    std::cout << "simulate: T = " << num(T) << ", Picard iterations " << res.report.iterations << ", wrote "
              << ctx.out("field.csv").string() << "\n";
    return 0;
}

int cmd_adjoint(Context& ctx, const WindowArgs& w, const std::string& phi_tag) {
    const SystemSpec& s = *ctx.spec;
    const double T = horizon(ctx, w.T);
    auto phi = data_function(phi_tag, 1, s.n());
    ctx.prepare_output();
    auto res = solve_adjoint(s, phi, w.tau, T, solve_options(ctx));
    require_converged(res.report, "adjoint solve");
    write_field_csv(ctx.out("field.csv"), res.field, ctx.Nx);
    const Trace obs = observation_trace(res.field);
    write_trace_csv(ctx.out("observation.csv"), obs, "obs");
    json r = ctx.report("adjoint", {{"tau", w.tau}, {"T", T}, {"phi", phi_tag}}, {{"picard", SolveOptions{}.tolerance}});
    r["picard"] = res.report.to_json();
    r["observation_norm"] = obs.norm();
    write_json(ctx.out("adjoint_report.json"), r);
    std::cout << "adjoint: T = " << num(T) << ", observation norm " << num(obs.norm()) << "\n";
    return 0;
}

int cmd_omega(Context& ctx, const WindowArgs& w, const std::string& f_tag, const std::string& g_tag, bool hat) {
    const SystemSpec& s = *ctx.spec;
    const double T = horizon(ctx, w.T);
    OmegaData data;
    data.f = data_function(f_tag, 1, s.n(), T);
    data.g = data_function(g_tag, s.k() + 1, s.m());
    data.gamma = [](int, double, double) { return 0.0; };
    data.q = [](int, double) { return 0.0; };
    ctx.prepare_output();
    auto res = hat ? solve_rectangle_hat(s, w.tau, T, data, solve_options(ctx))
                   : solve_omega(s, w.tau, T, data, solve_options(ctx));
    require_converged(res.report, hat ? "hat solve" : "Omega solve");
    write_field_csv(ctx.out("field.csv"), res.field, ctx.Nx);
    json r = ctx.report("omega", {{"tau", w.tau}, {"T", T}, {"f", f_tag}, {"g", g_tag}, {"hat", hat}},
                        {{"picard", SolveOptions{}.tolerance}});
    r["picard"] = res.report.to_json();
    r["worst_contraction"] = res.report.worst_contraction();
    write_json(ctx.out("omega_report.json"), r);
    std::cout << (hat ? "hat" : "omega") << ": T = " << num(T) << ", worst contraction "
              << num(res.report.worst_contraction()) << "\n";
    return 0;
}

StateFn terminal_state_function(const Context& ctx, const std::string& tag, double T) {
    if (tag == "witness") {
        auto cx = counterexample_from_json(ctx.config);
        if (!cx) {
            throw ConfigError("the witness datum needs a system with the thm1 coupling");
        }
        const auto c = counterexample_constants(*cx);
        if (std::abs(c.T - T) > 1e-12) {
            throw ConfigError("the witness datum lives at T = " + num(c.T));
        }
        return witness_terminal_datum(*cx);
    }
    return data_function(tag, 1, ctx.spec->n());
}

int cmd_duality(Context& ctx, const WindowArgs& w, const std::string& check, const std::string& u0_tag,
                const std::string& control_tag, const std::string& phi_tag, double tolerance) {
    const SystemSpec& s = *ctx.spec;
    const double T = horizon(ctx, w.T);
    const StateFn phi = terminal_state_function(ctx, phi_tag, T);
    auto u0 = data_function(u0_tag, 1, s.n());
    auto Uf = data_function(control_tag, s.k() + 1, s.m());
    const double t0 = w.tau;
    TraceFn U = [Uf, t0](int i, double t) { return Uf(i, t - t0); };
    ctx.prepare_output();
    ControlToStateMap map(s, w.tau, T, solve_options(ctx));
    double defect = 0.0;
    json detail;
    if (check == "st1" || check == "st2") {
        const auto mode = check == "st1" ? PairingMode::controlled_u : PairingMode::zero_observation_v;
        const TraceFn used = check == "st1" ? TraceFn([](int, double) { return 0.0; }) : U;
        const auto rep = pairing_check(map, u0, used, phi, mode);
        defect = rep.relative();
        detail = {{"terminal_pairing", rep.terminal_pairing},
                  {"initial_pairing", rep.initial_pairing},
                  {"absolute_defect", rep.defect},
                  {"scale", rep.scale},
                  {"vanishing_trace_norm", rep.vanishing_trace_norm}};
    } else if (check == "adjoint") {
        const auto rep = adjoint_identity(map, U, phi);
        defect = rep.relative();
        detail = {{"lhs", rep.lhs}, {"rhs", rep.rhs}, {"absolute_defect", rep.defect}, {"scale", rep.scale}};
    } else {
        throw ConfigError("unknown check \"" + check + "\" (st1, st2 or adjoint)");
    }
    const bool pass = defect < tolerance;
    json r = ctx.report("duality",
                        {{"check", check}, {"tau", w.tau}, {"T", T}, {"u0", u0_tag}, {"control", control_tag}, {"phi", phi_tag}},
                        {{"defect", tolerance}});
    r["defect"] = defect;
    r["tolerance"] = tolerance;
    r["pass"] = pass;
    r["detail"] = detail;
    write_json(ctx.out("duality_report.json"), r);
    std::cout << "duality " << check << ": defect " << num(defect) << (pass ? " pass" : " FAIL") << "\n";
    return 0;
}

int cmd_hum(Context& ctx, const WindowArgs& w, const std::string& u0_tag, const HumOptions& hopts) {
    const SystemSpec& s = *ctx.spec;
    const double T = horizon(ctx, w.T);
    auto u0 = data_function(u0_tag, 1, s.n());
    ctx.prepare_output();
    ControlToStateMap map(s, w.tau, T, solve_options(ctx));
    const auto sol = hum_control(map, u0, hopts);
    write_trace_csv(ctx.out("control.csv"), sol.U, "U");
    json r = ctx.report("hum", {{"tau", w.tau}, {"T", T}, {"u0", u0_tag}},
                        {{"cg", hopts.tolerance}, {"regularization_factor", hopts.regularization_factor}});
    r.update(sol.to_json());
    write_json(ctx.out("hum_report.json"), r);
    std::cout << "hum: T = " << num(T) << ", CG iterations " << sol.cg_iterations << ", relative residual "
              << num(sol.relative_residual()) << "\n";
    if (!sol.converged) {
        std::cerr << "error: CG did not converge\n";
        return 3;
    }
    return 0;
}

int cmd_observability(Context& ctx, const WindowArgs& w, const std::string& scan) {
    const SystemSpec& s = *ctx.spec;
    const std::vector<double> Ts = scan.empty() ? std::vector<double>{horizon(ctx, w.T)} : parse_range(scan);
    ctx.prepare_output();
    std::ostringstream csv;
    csv << "T,constant\n";
    json rows = json::array();
    for (double T : Ts) {
        if (!(T > 0.0)) {
            throw ConfigError("horizon must be positive");
        }
        ControlToStateMap map(s, w.tau, T, solve_options(ctx));
        const auto g = assemble_gramian(map);
        const auto c = observability_constant(g);
        const auto v = null_controllability_verdict(g, w.tau, T);
        csv << num(T) << "," << num(c.constant) << "\n";
        json row = v.to_json();
        row["constant"] = c.constant;
        row["constant_over_trace"] = c.relative_to_trace();
        rows.push_back(row);
        std::cout << "observability: T = " << num(T) << ", constant " << num(c.constant) << ", "
                  << to_string(v.verdict) << "\n";
    }
    write_text(ctx.out("scan.csv"), csv.str());
    json r = ctx.report("observability", {{"tau", w.tau}, {"T", Ts}}, {{"verdict", "1e-6 / 1e-10 of trace/dim"}});
    r["rows"] = rows;
    write_json(ctx.out("observability_report.json"), r);
    return 0;
}

int cmd_counterexample(Context& ctx, std::optional<double> eps, const std::string& scan, int gramian_N) {
    auto cx = counterexample_from_json(ctx.config);
    if (!cx) {
        throw ConfigError("counterexample needs a system with the thm1 coupling (try --preset thm1-ref)");
    }
    if (eps) {
        cx->eps = *eps;
    }
    ctx.prepare_output();
    SolveOptions opts = solve_options(ctx);
    WitnessTolerances tol;
    tol.strict = false;
    const json params = {{"counterexample", cx->to_json()}, {"scan", scan}, {"gramian_N", gramian_N}};
    const json tols = {{"obs_relative", tol.obs_relative}, {"obs_absolute", tol.obs_absolute},
                       {"initial_floor", tol.initial_floor}, {"identity", tol.identity}};
    if (!scan.empty()) {
        const auto rows = observability_failure_scan(*cx, parse_range(scan), opts, gramian_N);
        std::ostringstream csv;
        csv << "eps,T,ratio,witness_pass,constant,constant_over_trace,verdict\n";
        json jr = json::array();
        for (const auto& r : rows) {
            csv << num(r.eps) << "," << num(r.T) << "," << num(r.ratio) << "," << r.witness_pass << ","
                << num(r.constant) << "," << num(r.constant_over_trace) << "," << r.verdict << "\n";
            jr.push_back({{"eps", r.eps},
                          {"T", r.T},
                          {"ratio", r.ratio},
                          {"witness_pass", r.witness_pass},
                          {"constant", r.constant},
                          {"constant_over_trace", r.constant_over_trace},
                          {"verdict", r.verdict}});
        }
        write_text(ctx.out("counterexample_scan.csv"), csv.str());
        json r = ctx.report("counterexample", params, tols);
        r["rows"] = jr;
        write_json(ctx.out("counterexample_scan.json"), r);
        std::cout << "counterexample scan: " << rows.size() << " rows, wrote "
                  << ctx.out("counterexample_scan.csv").string() << "\n";
        return 0;
    }
    const auto w = build_dual_witness(*cx, opts, tol);
    write_field_csv(ctx.out("field.csv"), w.solution.field, ctx.Nx);
    json r = ctx.report("counterexample", params, tols);
    r.update(w.report.to_json());
    r["constants"] = counterexample_constants(*cx).to_json();
    write_json(ctx.out("counterexample_report.json"), r);
    std::cout << "counterexample: eps = " << num(cx->eps) << ", T = " << num(w.report.T) << ", ratio "
              << num(w.report.ratio()) << ", pass " << (w.report.pass ? "true" : "false") << "\n";
    return 0;
}

int cmd_spectrum(Context& ctx, double tau, double T, const std::string& scan, const std::string& route,
                 double threshold, bool basis) {
    const SystemSpec& s = *ctx.spec;
    const double H = horizon(ctx, T);
    SpectralOptions o;
    o.Nx = ctx.Nx;
    o.solve = solve_options(ctx);
    o.threshold = threshold;
    o.threads = ctx.thread_count();
    if (route == "auto") {
        o.route = HRoute::automatic;
    } else if (route == "kernel") {
        o.route = HRoute::kernel_operators;
    } else if (route == "dual") {
        o.route = HRoute::dual;
    } else {
        throw ConfigError("unknown route \"" + route + "\" (auto, kernel or dual)");
    }
    ctx.prepare_output();
    json r = ctx.report("spectrum", {{"tau", tau}, {"horizon", H}, {"scan", scan}, {"route", route}},
                        {{"threshold", threshold}, {"gap_confidence", o.gap_confidence}});
    if (!scan.empty()) {
        const auto rows = dim_scan(s, parse_range(scan), H, o);
        json jr = json::array();
        for (const auto& row : rows) {
            jr.push_back({{"tau", row.tau},
                          {"dim", row.dim},
                          {"gap", row.gap},
                          {"low_confidence", row.low_confidence},
                          {"flagged", row.flagged},
                          {"refined_dim", row.refined_dim}});
            std::cout << "spectrum: tau = " << num(row.tau) << ", dim " << row.dim << ", gap " << num(row.gap)
                      << (row.flagged ? ", flagged" : "") << "\n";
        }
        r["rows"] = jr;
        write_json(ctx.out("spectrum_report.json"), r);
        return 0;
    }
    const auto Hb = compute_H(s, tau, H, o);
    r.update(Hb.to_json(false));
    write_json(ctx.out("spectrum_report.json"), r);
    if (basis) {
        std::ostringstream csv;
        csv << "component,x,weight";
        for (int c = 0; c < Hb.dim(); ++c) {
            csv << ",phi_" << c + 1;
        }
        csv << "\n";
        for (int p = 0; p < static_cast<int>(Hb.x.size()); ++p) {
            csv << Hb.comp[static_cast<std::size_t>(p)] << "," << num(Hb.x(p)) << "," << num(Hb.w(p));
            for (int c = 0; c < Hb.dim(); ++c) {
                csv << "," << num(Hb.vectors(p, c));
            }
            csv << "\n";
        }
        write_text(ctx.out("basis.csv"), csv.str());
    }
    std::cout << "spectrum: tau = " << num(tau) << ", T = " << num(H) << ", route " << to_string(Hb.route) << ", dim "
              << Hb.dim() << ", gap " << num(Hb.gap) << (Hb.low_confidence ? " (low confidence)" : "") << "\n";
    return 0;
}

int cmd_flow(Context& ctx, int i, double s0, double xi, const std::string& t_spec) {
    const SystemSpec& s = *ctx.spec;
    if (i < 1 || i > s.n()) {
        throw ConfigError("component index out of range 1.." + std::to_string(s.n()));
    }
    const std::vector<double> ts = t_spec.find(':') != std::string::npos ? parse_range(t_spec)
                                                                         : std::vector<double>{std::stod(t_spec)};
    CharacteristicFlow flow(s);
    std::cout << "t,x\n";
    for (double t : ts) {
        std::cout << num(t) << "," << num(flow.flow(i, t, s0, xi)) << "\n";
    }
    return 0;
}

bool is_known(const std::string& name) { return std::find(kCommands.begin(), kCommands.end(), name) != kCommands.end(); }

int run(int argc, char** argv) {
    CLI::App app{"hyperctrl: controllability of 1-D linear hyperbolic systems with one-sided boundary controls", "hyperctrl"};
    app.require_subcommand(1);

    Context ctx;
    auto add_common = [&ctx](CLI::App* sub, bool grid = true) {
        sub->add_option("--system", ctx.system_path, "System config (JSON)");
        sub->add_option("--preset", ctx.preset, "Bundled preset name");
        sub->add_flag("--dump-config", ctx.dump_config, "Print the expanded system config");
        if (grid) {
            sub->add_option("--N", ctx.N, "Cells per unit time");
            sub->add_option("--Nx", ctx.Nx, "Cells in x for field dumps and the phi-grid");
            sub->add_option("--out", ctx.out_dir, "Output directory");
            sub->add_option("--threads", ctx.threads, "Worker threads (fallback: HYPERCTRL_THREADS)");
        }
    };

    WindowArgs win;
    auto add_window = [&win](CLI::App* sub) {
        sub->add_option("--tau", win.tau, "Window start");
        sub->add_option("--T", win.T, "Window length (default T_opt)");
    };

    auto* info = app.add_subcommand("info", "Print travel times, optimal time and B classes");
    add_common(info, false);

    std::string u0_tag = "sine";
    std::string control_tag = "zero";
    std::string phi_tag = "sine";
    auto* simulate = app.add_subcommand("simulate", "Forward solve; writes field.csv");
    add_common(simulate);
    add_window(simulate);
    simulate->add_option("--u0", u0_tag, "Initial state tag or CSV");
    simulate->add_option("--control", control_tag, "Control tag or CSV");

    auto* adjoint = app.add_subcommand("adjoint", "Dual solve; writes field.csv and observation.csv");
    add_common(adjoint);
    add_window(adjoint);
    adjoint->add_option("--phi", phi_tag, "Terminal state tag or CSV");

    std::string f_tag = "zero";
    std::string g_tag = "sine";
    bool hat = false;
    auto* omega = app.add_subcommand("omega", "Omega (or hat) problem; writes field.csv");
    add_common(omega);
    add_window(omega);
    omega->add_option("--f", f_tag, "Trace on x = 1");
    omega->add_option("--g", g_tag, "Plus-part initial state");
    omega->add_flag("--hat", hat, "Solve the hat problem on the full rectangle");

    std::string check = "adjoint";
    double duality_tol = 1e-3;
    auto* duality = app.add_subcommand("duality", "Pairing and adjoint-identity checks");
    add_common(duality);
    add_window(duality);
    duality->add_option("--check", check, "st1, st2 or adjoint");
    duality->add_option("--u0", u0_tag, "Initial state tag or CSV");
    duality->add_option("--control", control_tag, "Control tag or CSV");
    duality->add_option("--phi", phi_tag, "Terminal dual state tag, CSV or witness");
    duality->add_option("--tolerance", duality_tol, "Relative defect tolerance");

    HumOptions hopts;
    auto* hum = app.add_subcommand("hum", "HUM control; writes control.csv");
    add_common(hum);
    add_window(hum);
    hum->add_option("--u0", u0_tag, "Initial state tag or CSV");
    hum->add_option("--cg-tolerance", hopts.tolerance, "CG tolerance");
    hum->add_option("--max-iterations", hopts.max_iterations, "CG iteration cap");

    std::string obs_scan;
    auto* observability = app.add_subcommand("observability", "Observability constant; writes scan.csv");
    add_common(observability);
    add_window(observability);
    observability->add_option("--scan", obs_scan, "T0:T1:points");

    std::optional<double> eps;
    std::string cx_scan;
    int gramian_N = 0;
    auto* counterexample = app.add_subcommand("counterexample", "Dual witness of the counterexample system; writes counterexample_report.json");
    add_common(counterexample);
    counterexample->add_option("--eps", eps, "Time deficit");
    counterexample->add_option("--scan", cx_scan, "eps0:eps1:points");
    counterexample->add_option("--gramian-N", gramian_N, "Resolution of the Gramian part of a scan (0 skips it)");

    double spec_tau = 0.0;
    double spec_T = -1.0;
    std::string spec_scan;
    std::string route = "auto";
    double threshold = 1e-8;
    bool basis = false;
    auto* spectrum = app.add_subcommand("spectrum", "Obstruction space H(tau, T)");
    add_common(spectrum);
    spectrum->add_option("--tau", spec_tau, "Time anchor");
    spectrum->add_option("--horizon", spec_T, "Horizon (default T_opt)");
    spectrum->add_option("--scan", spec_scan, "tau0:tau1:points");
    spectrum->add_option("--route", route, "auto, kernel or dual");
    spectrum->add_option("--threshold", threshold, "Relative singular value threshold");
    spectrum->add_flag("--basis", basis, "Write basis.csv");

    int fi = 1;
    double fs0 = 0.0;
    double fxi = 0.0;
    std::string ft = "1";
    auto* flow = app.add_subcommand("flow", "Characteristic x_i(t; s, xi) as CSV");
    add_common(flow, false);
    flow->add_option("--i", fi, "Component (1-based)")->required();
    flow->add_option("--s", fs0, "Start time");
    flow->add_option("--xi", fxi, "Start position");
    flow->add_option("--t", ft, "Time or t0:t1:points");

    // An unknown or missing subcommand is a usage error with its own exit code.
    std::string first;
    for (int a = 1; a < argc; ++a) {
        const std::string s = argv[a];
        if (s == "-h" || s == "--help") {
            break;
        }
        if (!s.empty() && s[0] != '-') {
            first = s;
            break;
        }
    }
    const bool asked_help = argc > 1 && (std::string(argv[1]) == "-h" || std::string(argv[1]) == "--help");
    if (!asked_help && !is_known(first)) {
        if (!first.empty()) {
            std::cerr << "unknown subcommand \"" << first << "\"\n";
        }
        std::cerr << app.help();
        return 1;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    if (ctx.N == 200 && first == "counterexample" && counterexample->count("--N") == 0) {
        ctx.N = kCounterexampleN;
    }
    ctx.validate_grid();
    ctx.load();

    if (first == "info") return cmd_info(ctx);
    if (first == "simulate") return cmd_simulate(ctx, win, u0_tag, control_tag);
    if (first == "adjoint") return cmd_adjoint(ctx, win, phi_tag);
    if (first == "omega") return cmd_omega(ctx, win, f_tag, g_tag, hat);
    if (first == "duality") return cmd_duality(ctx, win, check, u0_tag, control_tag, phi_tag, duality_tol);
    if (first == "hum") return cmd_hum(ctx, win, u0_tag, hopts);
    if (first == "observability") return cmd_observability(ctx, win, obs_scan);
    if (first == "counterexample") return cmd_counterexample(ctx, eps, cx_scan, gramian_N);
    if (first == "spectrum") return cmd_spectrum(ctx, spec_tau, spec_T, spec_scan, route, threshold, basis);
    return cmd_flow(ctx, fi, fs0, fxi, ft);
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const SolverError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const ConstructionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
