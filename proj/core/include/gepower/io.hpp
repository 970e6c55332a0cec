#pragma once

// Text artifacts for solved instances: a value/policy CSV with one row per
// grid point plus a JSON sidecar carrying the problem and grid axes, so a
// later `check` can rebuild the exact value field.

#include <filesystem>
#include <iosfwd>
#include <optional>

#include <nlohmann/json.hpp>

#include "gepower/model.hpp"
#include "gepower/solver.hpp"

namespace gepower {

[[nodiscard]] nlohmann::json grid_to_json(const BeliefGrid& grid);
[[nodiscard]] BeliefGrid grid_from_json(const nlohmann::json& j);

/// Header p1..pN,value,action_mask,action,tie_count; values at 17 significant digits.
void write_solution_csv(std::ostream& out, const ValueFunction& v, const Policy& policy);

/// Reads the value column back; rows must list the grid points in flat order.
/// Throws std::runtime_error on malformed rows or coordinates off the grid.
[[nodiscard]] ValueFunction read_solution_csv(std::istream& in, const BeliefGrid& grid);

struct SolveMetadata {
    ProblemSpec problem;
    BeliefGrid grid;
    double epsilon = 0.0;
    std::size_t iterations = 0;
    double residual = 0.0;
    std::optional<double> wall_seconds;  // kept out of the CSV so reruns are byte-identical there
};

void to_json(nlohmann::json& j, const SolveMetadata& m);
void from_json(const nlohmann::json& j, SolveMetadata& m);

[[nodiscard]] nlohmann::json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace gepower
