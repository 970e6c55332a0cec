#include "gepower/lp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "gepower/simplex.hpp"

namespace gepower {

namespace {

std::vector<WeightedIndex> merge_weights(std::vector<WeightedIndex> w) {
    std::sort(w.begin(), w.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
    std::vector<WeightedIndex> merged;
    for (const auto& e : w) {
        if (!merged.empty() && merged.back().index == e.index) {
            merged.back().weight += e.weight;
        } else {
            merged.push_back(e);
        }
    }
    return merged;
}

std::string num(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

}  // namespace

LPProblem build_lp(const ProblemSpec& spec, const BeliefGrid& grid, std::size_t max_constraints) {
    if (grid.dims() != spec.n_channels()) throw std::invalid_argument("build_lp: grid dimension mismatch");
    const auto actions = enumerate_actions(spec.n_channels());
    const std::size_t count = grid.size() * actions.size();
    if (count > max_constraints) {
        std::ostringstream os;
        os << "LP would have " << count << " constraints (cap " << max_constraints << ")";
        throw CapacityError(os.str());
    }
    LPProblem lp{grid, spec.beta, std::vector<LPConstraint>(count)};
    const auto n_points = static_cast<std::ptrdiff_t>(grid.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t pi = 0; pi < n_points; ++pi) {
        const auto i = static_cast<std::size_t>(pi);
        const Belief p = grid.point(i);
        for (std::size_t m = 0; m < actions.size(); ++m) {
            auto& c = lp.constraints[i * actions.size() + m];
            c.point = i;
            c.action = actions[m];
            c.reward = immediate_reward(spec, actions[m], p);
            std::vector<WeightedIndex> w;
            for (const auto& o : successor_outcomes(spec.channel, actions[m], p).outcomes) {
                if (o.probability == 0.0) continue;
                append_interpolation_weights(grid, o.successor.coords(), o.probability, w);
            }
            c.weights = merge_weights(std::move(w));
        }
    }
    return lp;
}

LPSolution solve_lp(const LPProblem& lp, double tol, std::size_t max_variables) {
    const std::size_t n_vars = lp.variables();
    if (n_vars > max_variables) {
        std::ostringstream os;
        os << "internal simplex is limited to " << max_variables << " variables, LP has " << n_vars
           << "; use value iteration or export the LP";
        throw CapacityError(os.str());
    }
    // Dual program: one column per primal constraint (p, a) with entries
    // e_p - beta * w_a(p, .), cost g_a(p), and unit right-hand side.
    StandardFormLP dual;
    dual.rows = n_vars;
    dual.rhs.assign(n_vars, 1.0);
    dual.columns.resize(lp.constraints.size());
    dual.cost.resize(lp.constraints.size());
    std::vector<std::size_t> basis(n_vars, std::numeric_limits<std::size_t>::max());
    for (std::size_t j = 0; j < lp.constraints.size(); ++j) {
        const auto& c = lp.constraints[j];
        auto& col = dual.columns[j].entries;
        bool has_self = false;
        for (const auto& [idx, w] : c.weights) {
            const double coef = (idx == c.point ? 1.0 : 0.0) - lp.beta * w;
            has_self = has_self || idx == c.point;
            if (coef != 0.0) col.emplace_back(idx, coef);
        }
        if (!has_self) {
            col.emplace_back(c.point, 1.0);
            std::sort(col.begin(), col.end());
        }
        dual.cost[j] = c.reward;
        // Any deterministic policy gives a feasible basis; start from the one
        // maximizing the immediate reward (ties to the earliest action).
        std::size_t& b = basis[c.point];
        if (b == std::numeric_limits<std::size_t>::max() || c.reward > lp.constraints[b].reward) b = j;
    }
    if (std::find(basis.begin(), basis.end(), std::numeric_limits<std::size_t>::max()) != basis.end()) {
        throw std::invalid_argument("solve_lp: some grid point has no constraint");
    }
    SimplexOptions options;
    options.tolerance = tol;
    const auto result = solve_simplex(dual, options, basis);
    if (result.status != SimplexStatus::optimal) {
        throw std::logic_error("solve_lp: simplex did not reach an optimum; the MDP program is always "
                               "feasible and bounded, so this indicates a construction bug");
    }

    LPSolution sol;
    sol.value = ValueFunction{lp.grid, result.duals};
    sol.pivots = result.pivots;
    sol.binding.assign(n_vars, Action());
    for (std::size_t j : result.basis) {
        if (j < lp.constraints.size()) sol.binding[lp.constraints[j].point] = lp.constraints[j].action;
    }
    for (double v : sol.value.values) sol.objective += v;
    for (const auto& c : lp.constraints) {
        double rhs = c.reward;
        for (const auto& [idx, w] : c.weights) rhs += lp.beta * w * sol.value.values[idx];
        sol.max_violation = std::max(sol.max_violation, rhs - sol.value.values[c.point]);
    }
    return sol;
}

void export_lp(const LPProblem& lp, std::ostream& out) {
    constexpr std::size_t kTermsPerLine = 6;
    out << "\\ Discounted belief-MDP program: " << lp.variables() << " variables, " << lp.constraints.size()
        << " constraints, beta = " << num(lp.beta) << "\n";
    out << "Minimize\n obj:";
    for (std::size_t i = 0; i < lp.variables(); ++i) {
        if (i > 0 && i % kTermsPerLine == 0) out << "\n     ";
        out << (i == 0 ? " " : " + ") << "v_" << i;
    }
    out << "\nSubject To\n";
    for (const auto& c : lp.constraints) {
        std::vector<WeightedIndex> terms;
        bool has_self = false;
        for (const auto& [idx, w] : c.weights) {
            const double coef = (idx == c.point ? 1.0 : 0.0) - lp.beta * w;
            has_self = has_self || idx == c.point;
            if (coef != 0.0) terms.push_back({idx, coef});
        }
        if (!has_self) {
            terms.push_back({c.point, 1.0});
            std::sort(terms.begin(), terms.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
        }
        out << " c_" << c.point << "_" << c.action.mask() << ":";
        for (std::size_t t = 0; t < terms.size(); ++t) {
            if (t > 0 && t % kTermsPerLine == 0) out << "\n   ";
            const double coef = terms[t].weight;
            out << (coef < 0.0 ? " - " : (t == 0 ? " " : " + ")) << num(std::abs(coef)) << " v_" << terms[t].index;
        }
        out << " >= " << num(c.reward) << "\n";
    }
    out << "Bounds\n";
    for (std::size_t i = 0; i < lp.variables(); ++i) out << " v_" << i << " free\n";
    out << "End\n";
}

void export_lp(const LPProblem& lp, const std::filesystem::path& path) {
    std::ofstream file(path);
    if (!file) throw std::runtime_error("export_lp: cannot open " + path.string());
    export_lp(lp, file);
    if (!file) throw std::runtime_error("export_lp: write failed for " + path.string());
}

nlohmann::json lp_variable_map(const LPProblem& lp) {
    nlohmann::json vars = nlohmann::json::array();
    for (std::size_t i = 0; i < lp.variables(); ++i) {
        const Belief p = lp.grid.point(i);
        vars.push_back({{"name", "v_" + std::to_string(i)},
                        {"index", i},
                        {"belief", std::vector<double>(p.coords().begin(), p.coords().end())}});
    }
    return {{"variables", vars}};
}

CrossCheckReport cross_check(const ValueFunction& vi, const ValueFunction& lp, double tol) {
    if (!(vi.grid == lp.grid) || vi.values.size() != lp.values.size()) {
        throw std::invalid_argument("cross_check: value fields live on different grids");
    }
    CrossCheckReport report;
    double sum = 0.0;
    for (std::size_t i = 0; i < vi.values.size(); ++i) {
        const double d = std::abs(vi.values[i] - lp.values[i]);
        sum += d;
        if (d > report.max_abs_diff) {
            report.max_abs_diff = d;
            report.worst_point = i;
        }
    }
    report.mean_abs_diff = vi.values.empty() ? 0.0 : sum / static_cast<double>(vi.values.size());
    report.pass = report.max_abs_diff <= tol;
    return report;
}

void to_json(nlohmann::json& j, const CrossCheckReport& report) {
    j = nlohmann::json{{"max_abs_diff", report.max_abs_diff},
                       {"mean_abs_diff", report.mean_abs_diff},
                       {"pass", report.pass},
                       {"worst_point", report.worst_point}};
}

}  // namespace gepower
