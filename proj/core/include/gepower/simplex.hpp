#pragma once

// Dense revised simplex for standard-form linear programs
//
//     maximize c^T x   subject to   A x = b,  x >= 0,  b >= 0.
//
// The constraint matrix is stored column-wise and sparse; the basis inverse is
// kept dense and updated by rank-one eta steps, with a fresh LU
// refactorization every `refactor_every` pivots. Without a starting basis a
// phase-one problem over artificial columns is solved first.

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

namespace gepower {

struct SparseColumn {
    std::vector<std::pair<std::size_t, double>> entries;  // (row, coefficient)
};

struct StandardFormLP {
    std::size_t rows = 0;
    std::vector<SparseColumn> columns;
    std::vector<double> cost;
    std::vector<double> rhs;
};

enum class PivotRule {
    bland,                  // lowest-index improving column, lowest-index leaving row
    dantzig_bland_fallback  // largest reduced cost; switch to Bland after a run of degenerate pivots
};

struct SimplexOptions {
    double tolerance = 1e-9;
    std::size_t max_pivots = 1'000'000;
    std::size_t refactor_every = 100;
    std::size_t degenerate_run_limit = 50;
    PivotRule rule = PivotRule::dantzig_bland_fallback;
};

enum class SimplexStatus { optimal, infeasible, unbounded, pivot_limit };

struct SimplexResult {
    SimplexStatus status = SimplexStatus::pivot_limit;
    std::vector<double> x;       // primal values, one per column
    std::vector<double> duals;   // y = B^-T c_B; at optimality c_j - y^T A_j <= tolerance
    std::vector<std::size_t> basis;
    double objective = 0.0;
    std::size_t pivots = 0;
};

/// `initial_basis`, when given, must name `rows` columns forming a primal-feasible basis.
[[nodiscard]] SimplexResult solve_simplex(const StandardFormLP& lp, const SimplexOptions& options = {},
                                          const std::optional<std::vector<std::size_t>>& initial_basis = std::nullopt);

}  // namespace gepower
