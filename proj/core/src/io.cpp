#include "gepower/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace gepower {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, sep)) out.push_back(field);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

double parse_double(const std::string& s, std::size_t row) {
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size()) {
        throw std::runtime_error("solution CSV row " + std::to_string(row) + ": cannot parse number '" + s + "'");
    }
    return x;
}

}  // namespace

nlohmann::json grid_to_json(const BeliefGrid& grid) {
    return {{"resolution", grid.resolution()}, {"axes", grid.axes()}};
}

BeliefGrid grid_from_json(const nlohmann::json& j) {
    return BeliefGrid(j.at("axes").get<std::vector<std::vector<double>>>(), j.value("resolution", std::size_t{0}));
}

void write_solution_csv(std::ostream& out, const ValueFunction& v, const Policy& policy) {
    const auto& g = v.grid;
    for (std::size_t d = 0; d < g.dims(); ++d) out << "p" << d + 1 << ",";
    out << "value,action_mask,action,tie_count\n";
    std::ostringstream row;
    row.precision(17);
    for (std::size_t i = 0; i < g.size(); ++i) {
        row.str("");
        const auto idx = g.multi_index(i);
        for (std::size_t d = 0; d < g.dims(); ++d) row << g.axis(d)[idx[d]] << ",";
        const Action& a = policy.choice[i];
        std::string label = a.to_string();
        row << v.values[i] << "," << a.mask() << ",\"" << label << "\"," << policy.tie_count(i) << "\n";
        out << row.str();
    }
}

ValueFunction read_solution_csv(std::istream& in, const BeliefGrid& grid) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("solution CSV is empty");
    const std::size_t n = grid.dims();
    const auto header = split(line, ',');
    if (header.size() < n + 1 || header[n] != "value") {
        throw std::runtime_error("solution CSV header does not match a " + std::to_string(n) + "-channel grid");
    }
    ValueFunction v{grid, std::vector<double>(grid.size(), 0.0)};
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (row >= grid.size()) throw std::runtime_error("solution CSV has more rows than grid points");
        const auto fields = split(line, ',');
        if (fields.size() < n + 1) throw std::runtime_error("solution CSV row " + std::to_string(row) + " is short");
        const Belief expected = grid.point(row);
        for (std::size_t d = 0; d < n; ++d) {
            const double x = parse_double(fields[d], row);
            if (std::abs(x - expected[d]) > 1e-12) {
                throw std::runtime_error("solution CSV row " + std::to_string(row) + " is not grid point " +
                                         std::to_string(row));
            }
        }
        v.values[row] = parse_double(fields[n], row);
        ++row;
    }
    if (row != grid.size()) {
        throw std::runtime_error("solution CSV has " + std::to_string(row) + " rows, grid has " +
                                 std::to_string(grid.size()));
    }
    return v;
}

void to_json(nlohmann::json& j, const SolveMetadata& m) {
    j = nlohmann::json{{"problem", m.problem},
                       {"grid", grid_to_json(m.grid)},
                       {"epsilon", m.epsilon},
                       {"iterations", m.iterations},
                       {"residual", m.residual}};
    if (m.wall_seconds) j["wall_time_seconds"] = *m.wall_seconds;
}

void from_json(const nlohmann::json& j, SolveMetadata& m) {
    m.problem = j.at("problem").get<ProblemSpec>();
    m.grid = grid_from_json(j.at("grid"));
    m.epsilon = j.value("epsilon", 0.0);
    m.iterations = j.value("iterations", std::size_t{0});
    m.residual = j.value("residual", 0.0);
    if (j.contains("wall_time_seconds")) m.wall_seconds = j.at("wall_time_seconds").get<double>();
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("invalid JSON in " + path.string() + ": " + e.what());
    }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace gepower
