#include "gepower_cli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gepower/analysis.hpp"
#include "gepower/io.hpp"
#include "gepower/lp.hpp"
#include "gepower/model.hpp"
#include "gepower/sim.hpp"
#include "gepower/solver.hpp"

namespace gepower::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::size_t kDefaultExportCap = 32768;
constexpr std::size_t kMaxResolution = 2001;

struct Flags {
    std::string config;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> resolution;
    std::optional<double> epsilon;
    std::string solution;   // check
    std::string parameter;  // sweep
    bool trace = false;     // simulate
};

struct Context {
    json config;
    fs::path config_dir;
    fs::path out;
    Flags flags;
    std::ostream* log = nullptr;

    [[nodiscard]] json section(const char* name) const {
        if (!config.contains(name)) return json::object();
        const auto& s = config.at(name);
        if (!s.is_object()) throw ConfigError(std::string("config section '") + name + "' must be an object");
        return s;
    }
    [[nodiscard]] fs::path resolve(const std::string& p) const {
        const fs::path path(p);
        return path.is_absolute() ? path : config_dir / path;
    }
};

std::ostream& info(const Context& ctx) { return *ctx.log << "[gepower] "; }

template <class T>
T get_or(const json& section, const char* key, T fallback) {
    if (!section.contains(key)) return fallback;
    try {
        return section.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

ProblemSpec load_problem(const Context& ctx) {
    if (!ctx.config.contains("problem")) throw ConfigError("config has no 'problem' entry");
    json j = ctx.config.at("problem");
    if (j.is_string()) {
        const fs::path p = ctx.resolve(j.get<std::string>());
        if (!fs::exists(p)) throw ConfigError("problem file not found: " + p.string());
        j = read_json_file(p);
    }
    ProblemSpec spec;
    try {
        spec = j.get<ProblemSpec>();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("problem spec: ") + e.what());
    }
    const auto violations = validate_spec(spec);
    if (!violations.empty()) throw ConfigError("invalid problem spec:\n" + format_violations(violations));
    return spec;
}

std::size_t resolution_for(const Context& ctx, const json& section, std::size_t fallback) {
    const std::size_t r = ctx.flags.resolution.value_or(get_or<std::size_t>(section, "resolution", fallback));
    if (r < 2) throw ConfigError("resolution must be at least 2 (got " + std::to_string(r) + ")");
    if (r > kMaxResolution) throw ConfigError("resolution must be at most " + std::to_string(kMaxResolution));
    return r;
}

double epsilon_for(const Context& ctx, const json& section, double fallback) {
    const double e = ctx.flags.epsilon.value_or(get_or<double>(section, "epsilon", fallback));
    if (!(e > 0.0) || !std::isfinite(e)) throw ConfigError("epsilon must be positive");
    return e;
}

std::uint64_t seed_for(const Context& ctx, const json& section) {
    return ctx.flags.seed.value_or(get_or<std::uint64_t>(section, "seed", 0));
}

struct Solved {
    ProblemSpec spec;
    ValueIterationResult vi;
    Policy policy;
    double epsilon = 0.0;
    double seconds = 0.0;
};

Solved solve_inline(const Context& ctx, const ProblemSpec& spec, const json& section) {
    const std::size_t res = resolution_for(ctx, section, 21);
    const double eps = epsilon_for(ctx, section, 1e-6);
    IterationOptions opt;
    opt.max_iterations = get_or<std::size_t>(section, "max_iterations", opt.max_iterations);
    const BeliefGrid grid = build_grid(spec, res);
    info(ctx) << "value iteration on " << grid.size() << " grid points (resolution " << res << ", epsilon " << eps
              << ")\n";
    const auto t0 = std::chrono::steady_clock::now();
    Solved s{spec, value_iterate(spec, grid, eps, opt), {}, eps, 0.0};
    s.policy = extract_policy(spec, s.vi.value);
    s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    info(ctx) << "converged in " << s.vi.iterations << " iterations, residual " << s.vi.residual << "\n";
    return s;
}

std::string render_csv(const ValueFunction& v, const Policy& p) {
    std::ostringstream os;
    write_solution_csv(os, v, p);
    return os.str();
}

// ----------------------------------------------------------------------------

int cmd_solve(const Context& ctx) {
    const ProblemSpec spec = load_problem(ctx);
    const Solved s = solve_inline(ctx, spec, ctx.section("solve"));
    write_text_file(ctx.out / "solution.csv", render_csv(s.vi.value, s.policy));
    const SolveMetadata meta{spec, s.vi.value.grid, s.epsilon, s.vi.iterations, s.vi.residual, s.seconds};
    write_text_file(ctx.out / "solution.json", json(meta).dump(2) + "\n");
    info(ctx) << "wrote " << (ctx.out / "solution.csv").string() << " (" << s.vi.value.grid.size() << " rows)\n";
    return kExitOk;
}

json threshold_report(const ProblemSpec& spec, const ValueFunction& v, const Policy& policy) {
    json out = json::array();
    const std::pair<CanonicalThreshold, const char*> all[] = {
        {CanonicalThreshold::th1, "th1"}, {CanonicalThreshold::th2, "th2"}, {CanonicalThreshold::th3, "th3"}};
    for (const auto& [which, name] : all) {
        const auto e = canonical_edge(which);
        json row{{"name", name}, {"edge", e.edge.to_string()}, {"lower", e.lower.to_string()},
                 {"upper", e.upper.to_string()}};
        try {
            const auto t = edge_threshold(spec, v, e.edge, e.lower, e.upper);
            row["threshold"] = t.threshold;
            row["crossing"] = t.crossing;
            row["fixed_point_residual"] = std::abs(t.threshold - threshold_fixed_point(spec, v, which, t.threshold));
            const auto b = edge_grid_boundary(policy, e.edge, e.lower, e.upper);
            if (b.last_lower) row["grid_last_lower"] = *b.last_lower;
            if (b.first_upper) row["grid_first_upper"] = *b.first_upper;
        } catch (const std::exception& ex) {
            row["error"] = ex.what();
        }
        out.push_back(row);
    }
    return out;
}

int cmd_check(const Context& ctx) {
    const json section = ctx.section("check");
    std::string dir = ctx.flags.solution;
    if (dir.empty()) dir = get_or<std::string>(section, "solution", "");

    ProblemSpec spec;
    ValueFunction v;
    if (!dir.empty()) {
        const fs::path base = ctx.flags.solution.empty() ? ctx.resolve(dir) : fs::path(dir);
        const fs::path meta_path = base / "solution.json";
        const fs::path csv_path = base / "solution.csv";
        for (const auto& p : {meta_path, csv_path}) {
            if (!fs::exists(p)) throw ConfigError("missing solve artifact: " + p.string());
        }
        SolveMetadata meta;
        try {
            meta = read_json_file(meta_path).get<SolveMetadata>();
        } catch (const json::exception& e) {
            throw ConfigError("malformed " + meta_path.string() + ": " + e.what());
        }
        std::ifstream in(csv_path);
        try {
            v = read_solution_csv(in, meta.grid);
        } catch (const std::runtime_error& e) {
            throw ConfigError(e.what());
        }
        spec = meta.problem;
        const auto violations = validate_spec(spec);
        if (!violations.empty()) throw ConfigError("invalid problem in artifact:\n" + format_violations(violations));
        info(ctx) << "loaded " << v.values.size() << " values from " << csv_path.string() << "\n";
    } else {
        spec = load_problem(ctx);
        v = solve_inline(ctx, spec, section).vi.value;
    }
    const Policy policy = extract_policy(spec, v);
    const StructuralReport report = run_structural_checks(spec, v, policy);
    json out = report;
    if (spec.n_channels() == 3) out["thresholds"] = threshold_report(spec, v, policy);
    write_text_file(ctx.out / "check.json", out.dump(2) + "\n");
    for (const auto& c : report.items) {
        info(ctx) << (c.pass ? "PASS " : (c.asserted ? "FAIL " : "NOTE ")) << c.name << ": " << c.detail << "\n";
    }
    return report.all_pass() ? kExitOk : kExitCheckFailed;
}

std::vector<double> sweep_values(const json& section) {
    if (!section.contains("values")) throw ConfigError("sweep needs 'values' (a list or {start, stop, step})");
    const json& v = section.at("values");
    std::vector<double> out;
    if (v.is_array()) {
        for (const auto& x : v) {
            if (!x.is_number()) throw ConfigError("sweep values must be numbers");
            out.push_back(x.get<double>());
        }
    } else if (v.is_object()) {
        const double start = get_or<double>(v, "start", 0.0);
        const double stop = get_or<double>(v, "stop", 0.0);
        const double step = get_or<double>(v, "step", 0.0);
        if (!(step > 0.0) || stop < start) throw ConfigError("sweep range needs step > 0 and stop >= start");
        const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
        for (std::size_t i = 0; i < count; ++i) {
            // Round to 12 decimals so 0.1 + 2*0.1 prints as 0.3.
            out.push_back(std::round((start + static_cast<double>(i) * step) * 1e12) / 1e12);
        }
    } else {
        throw ConfigError("sweep 'values' must be a list or a {start, stop, step} object");
    }
    if (out.empty()) throw ConfigError("sweep value list is empty");
    return out;
}

std::string parameterization(SweepParameter p) {
    switch (p) {
        case SweepParameter::reward_penalty_ratio: return "C[k] = R[k] / value, R fixed";
        case SweepParameter::reward_ratio_k2k1:
            return "R[k] = value^(k-1) * R[1] / k, C[k] = R[k] * C[1] / R[1]; k*R[k] / ((k-1)*R[k-1]) = value";
        default: return to_string(p) + " = value, everything else fixed";
    }
}

int cmd_sweep(const Context& ctx) {
    const ProblemSpec base = load_problem(ctx);
    const json section = ctx.section("sweep");
    std::string name = ctx.flags.parameter;
    if (name.empty()) name = get_or<std::string>(section, "parameter", "");
    if (name.empty()) throw ConfigError("sweep needs a parameter");
    SweepParameter parameter{};
    try {
        parameter = parse_sweep_parameter(name);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const auto values = sweep_values(section);
    SweepSettings settings;
    settings.resolution = resolution_for(ctx, section, settings.resolution);
    settings.epsilon = epsilon_for(ctx, section, settings.epsilon);
    settings.run_checks = get_or<bool>(section, "checks", true);
    settings.volume_samples = get_or<std::size_t>(section, "volume_samples", settings.volume_samples);
    if (settings.volume_samples < 1) throw ConfigError("volume_samples must be at least 1");
    info(ctx) << "sweeping " << name << " over " << values.size() << " values\n";
    const auto rows = sweep(base, parameter, values, settings);

    std::ostringstream csv;
    write_sweep_csv(csv, rows, base.n_channels());
    write_text_file(ctx.out / "sweep.csv", csv.str());
    std::size_t skipped = 0;
    for (const auto& r : rows) {
        if (r.skipped) {
            ++skipped;
            info(ctx) << "skipped " << name << "=" << r.param_value << ": " << r.reason << "\n";
        }
    }
    const json meta{{"parameter", name},
                    {"parameterization", parameterization(parameter)},
                    {"base_problem", base},
                    {"resolution", settings.resolution},
                    {"epsilon", settings.epsilon},
                    {"rows", rows.size()},
                    {"skipped", skipped},
                    {"volume_samples", settings.volume_samples},
                    {"volume_definition", "mean over actions with k used channels of the fraction of a "
                                          "cell-centred probe lattice (volume_samples per axis) on which that "
                                          "action is the greedy choice"}};
    write_text_file(ctx.out / "sweep.json", meta.dump(2) + "\n");
    if (skipped == rows.size()) {
        info(ctx) << "every sweep row was skipped\n";
        return kExitUsage;
    }
    return kExitOk;
}

void write_trace(const Context& ctx, const ProblemSpec& spec, const NamedPolicy& policy, const Belief& p0,
                 std::size_t horizon, std::uint64_t seed) {
    Rng rng = episode_rng(seed, 0);
    const auto ep = run_episode(spec, policy.decide, p0, horizon, rng, true);
    std::ostringstream os;
    os.precision(17);
    const std::size_t n = spec.n_channels();
    os << "t";
    for (std::size_t j = 0; j < n; ++j) os << ",p" << j + 1;
    os << ",action_mask";
    for (std::size_t j = 0; j < n; ++j) os << ",state" << j + 1;
    os << ",reward\n";
    for (std::size_t t = 0; t < ep.log.size(); ++t) {
        const auto& s = ep.log[t];
        os << t;
        for (std::size_t j = 0; j < n; ++j) os << "," << s.belief[j];
        os << "," << s.action.mask();
        for (std::size_t j = 0; j < n; ++j) os << "," << static_cast<int>(s.states[j]);
        os << "," << s.reward << "\n";
    }
    write_text_file(ctx.out / ("trace_" + policy.name + ".csv"), os.str());
}

int cmd_simulate(const Context& ctx) {
    const ProblemSpec spec = load_problem(ctx);
    const json section = ctx.section("simulate");
    const auto names = get_or<std::vector<std::string>>(
        section, "policies", {"optimal", "myopic", "all_on", "best_single", "uniform_random", "none"});
    if (names.empty()) throw ConfigError("simulate needs at least one policy");

    std::vector<NamedPolicy> available{myopic_policy(spec)};
    for (auto& b : baseline_policies(spec)) available.push_back(std::move(b));
    for (const auto& n : names) {
        const bool known = n == "optimal" || std::any_of(available.begin(), available.end(),
                                                         [&](const NamedPolicy& p) { return p.name == n; });
        if (!known) {
            throw ConfigError("unknown policy '" + n +
                              "' (expected optimal, myopic, all_on, best_single, uniform_random or none)");
        }
    }
    const auto episodes = get_or<std::int64_t>(section, "episodes", 10000);
    if (episodes < 2) throw ConfigError("episodes must be at least 2 (got " + std::to_string(episodes) + ")");
    const std::size_t n = spec.n_channels();
    const auto p0_raw = get_or<std::vector<double>>(section, "p0", std::vector<double>(n, 0.5));
    if (p0_raw.size() != n) throw ConfigError("p0 must have one entry per channel");
    Belief p0;
    try {
        p0 = Belief(p0_raw);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("p0: ") + e.what());
    }
    const auto horizon = get_or<std::int64_t>(section, "horizon", static_cast<std::int64_t>(default_horizon(spec)));
    if (horizon < 1) throw ConfigError("horizon must be at least 1");
    const std::uint64_t seed = seed_for(ctx, section);

    const Solved solved = solve_inline(ctx, spec, section);
    available.insert(available.begin(), grid_policy(solved.policy, "optimal"));

    json results = json::array();
    for (const auto& name : names) {
        const auto& policy = *std::find_if(available.begin(), available.end(),
                                           [&](const NamedPolicy& p) { return p.name == name; });
        const auto summary = evaluate_policy(spec, policy, p0, static_cast<std::size_t>(episodes),
                                             static_cast<std::size_t>(horizon), seed);
        info(ctx) << std::left << std::setw(15) << name << " mean " << summary.mean << " +/- "
                  << summary.ci99_half_width << " (99%)\n";
        results.push_back(summary);
        if (ctx.flags.trace) write_trace(ctx, spec, policy, p0, static_cast<std::size_t>(horizon), seed);
    }
    const json out{{"p0", p0_raw},
                   {"episodes", episodes},
                   {"horizon", horizon},
                   {"seed", seed},
                   {"solver_value_at_p0", interpolate(solved.vi.value, p0)},
                   {"solver_resolution", solved.vi.value.grid.resolution()},
                   {"results", results}};
    write_text_file(ctx.out / "simulate.json", out.dump(2) + "\n");
    return kExitOk;
}

int cmd_export_lp(const Context& ctx) {
    const ProblemSpec spec = load_problem(ctx);
    const json section = ctx.section("export_lp");
    const std::size_t res = resolution_for(ctx, section, 11);
    const auto cap = get_or<std::size_t>(section, "max_variables", kDefaultExportCap);
    const BeliefGrid grid = build_grid(spec, res);
    if (grid.size() > cap) {
        std::size_t suggest = 0;
        for (std::size_t r = 2; r < res && build_grid(spec, r).size() <= cap; ++r) suggest = r;
        std::ostringstream os;
        os << "LP would have " << grid.size() << " variables, above the cap of " << cap;
        if (suggest >= 2) os << "; try --resolution " << suggest << " or lower";
        throw ConfigError(os.str());
    }
    const std::size_t constraint_cap = get_or<std::size_t>(section, "max_constraints", kDefaultMaxConstraints);
    LPProblem lp;
    try {
        lp = build_lp(spec, grid, constraint_cap);
    } catch (const CapacityError& e) {
        throw ConfigError(e.what());
    }
    std::ostringstream text;
    export_lp(lp, text);
    write_text_file(ctx.out / "problem.lp", text.str());
    json map = lp_variable_map(lp);
    map["n_variables"] = lp.variables();
    map["n_constraints"] = lp.constraints.size();
    map["actions_per_point"] = std::size_t{1} << spec.n_channels();
    map["grid"] = grid_to_json(grid);
    map["problem"] = spec;
    write_text_file(ctx.out / "problem_vars.json", map.dump(1) + "\n");
    info(ctx) << "wrote " << (ctx.out / "problem.lp").string() << " with " << lp.variables() << " variables and "
              << lp.constraints.size() << " constraints\n";
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& log) {
    CLI::App app{"Optimal power allocation over Gilbert-Elliott channels"};
    app.require_subcommand(1);
    Flags flags;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", flags.config, "JSON run configuration")->required();
        sub->add_option("--out", flags.out, "output directory")->capture_default_str();
        sub->add_option("--seed", flags.seed, "random seed (overrides the config)");
        sub->add_option("--resolution", flags.resolution, "grid points per axis (>= 2)");
        sub->add_option("--epsilon", flags.epsilon, "value-iteration accuracy");
    };
    auto* solve = app.add_subcommand("solve", "value iteration and policy extraction");
    auto* check = app.add_subcommand("check", "structural checks on a solved instance");
    auto* sweep_cmd = app.add_subcommand("sweep", "decision-region volumes over a parameter range");
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo evaluation of policies");
    auto* export_cmd = app.add_subcommand("export-lp", "write the grid LP in CPLEX LP format");
    for (auto* sub : {solve, check, sweep_cmd, simulate, export_cmd}) add_common(sub);
    check->add_option("--solution", flags.solution, "directory holding solution.csv and solution.json");
    sweep_cmd->add_option("--parameter", flags.parameter,
                          "lambda0, lambda1, reward_penalty_ratio, reward_ratio_k2k1 or beta");
    simulate->add_flag("--trace", flags.trace, "write a per-step CSV of episode 0 for every policy");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        log << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        log << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    Context ctx;
    ctx.flags = flags;
    ctx.log = &log;
    try {
        const fs::path config_path(flags.config);
        if (!fs::exists(config_path)) throw ConfigError("config file not found: " + flags.config);
        try {
            ctx.config = read_json_file(config_path);
        } catch (const std::runtime_error& e) {
            throw ConfigError(e.what());
        }
        if (!ctx.config.is_object()) throw ConfigError("config must be a JSON object");
        ctx.config_dir = config_path.parent_path();
        ctx.out = flags.out;
        if (solve->parsed()) return cmd_solve(ctx);
        if (check->parsed()) return cmd_check(ctx);
        if (sweep_cmd->parsed()) return cmd_sweep(ctx);
        if (simulate->parsed()) return cmd_simulate(ctx);
        if (export_cmd->parsed()) return cmd_export_lp(ctx);
    } catch (const ConfigError& e) {
        log << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        log << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const json::exception& e) {
        log << "error: malformed configuration: " << e.what() << "\n";
        return kExitUsage;
    } catch (const NonConvergenceError& e) {
        log << "error: " << e.what() << "\n";
        return kExitCheckFailed;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << "\n";
        return kExitCheckFailed;
    }
    return kExitUsage;
}

}  // namespace gepower::cli
