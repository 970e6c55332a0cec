#pragma once

// Linear-programming view of the grid Bellman equation:
//
//     minimize  sum_p V(p)
//     s.t.      V(p) >= g_a(p) + beta * sum_y w_a(p, y) V(y)   for every grid point p and action a,
//
// where w_a(p, .) spreads each exact successor of (p, a) onto grid vertices with
// the same multilinear weights the value-iteration operator uses. The optimum
// is therefore the fixed point of that operator.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gepower/model.hpp"
#include "gepower/solver.hpp"

namespace gepower {

struct LPConstraint {
    std::size_t point = 0;
    Action action;
    double reward = 0.0;                 // g_a(p), the right-hand side
    std::vector<WeightedIndex> weights;  // merged successor weights, sorted by index
};

struct LPProblem {
    BeliefGrid grid;
    double beta = 0.0;
    std::vector<LPConstraint> constraints;  // point-major, then ascending mask

    [[nodiscard]] std::size_t variables() const noexcept { return grid.size(); }
};

inline constexpr std::size_t kDefaultMaxConstraints = 2'000'000;
inline constexpr std::size_t kDefaultMaxSimplexVariables = 5000;

/// Throws CapacityError when |grid| * 2^N exceeds max_constraints.
[[nodiscard]] LPProblem build_lp(const ProblemSpec& spec, const BeliefGrid& grid,
                                 std::size_t max_constraints = kDefaultMaxConstraints);

struct LPSolution {
    ValueFunction value;
    std::vector<Action> binding;  // action whose constraint is tight at each point
    double objective = 0.0;
    double max_violation = 0.0;   // largest g + beta*wV - V(p) over all constraints
    std::size_t pivots = 0;
};

/// Solves the dual (occupation-measure) program with the internal simplex,
/// warm-started from the immediate-reward-greedy policy basis. Throws
/// std::logic_error if the solver reports infeasible or unbounded.
[[nodiscard]] LPSolution solve_lp(const LPProblem& lp, double tol = 1e-9,
                                  std::size_t max_variables = kDefaultMaxSimplexVariables);

/// CPLEX LP text: variables v_<point>, constraints c_<point>_<mask>, all variables free.
void export_lp(const LPProblem& lp, std::ostream& out);
void export_lp(const LPProblem& lp, const std::filesystem::path& path);

/// {"variables": [{"name": "v_0", "index": 0, "belief": [...]}, ...]}
[[nodiscard]] nlohmann::json lp_variable_map(const LPProblem& lp);

struct CrossCheckReport {
    double max_abs_diff = 0.0;
    double mean_abs_diff = 0.0;
    std::size_t worst_point = 0;
    bool pass = false;
};

/// Throws std::invalid_argument when the two fields live on different grids.
[[nodiscard]] CrossCheckReport cross_check(const ValueFunction& vi, const ValueFunction& lp, double tol);
void to_json(nlohmann::json& j, const CrossCheckReport& report);

}  // namespace gepower
