#include "gepower/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace gepower {

namespace {

std::size_t axis_len(const BeliefGrid& g, std::size_t d) { return g.axis(d).size(); }

// Flat indices of the first point of every grid line along `axis`.
std::vector<std::size_t> line_starts(const BeliefGrid& g, std::size_t axis) {
    std::vector<std::size_t> starts;
    const std::size_t stride = g.stride(axis);
    const std::size_t len = axis_len(g, axis);
    starts.reserve(g.size() / len);
    for (std::size_t i = 0; i < g.size(); ++i) {
        if ((i / stride) % len == 0) starts.push_back(i);
    }
    return starts;
}

std::size_t vertex_index(const BeliefGrid& g, const Action& a) {
    std::vector<std::size_t> idx(g.dims());
    for (std::size_t d = 0; d < g.dims(); ++d) idx[d] = a.uses(d) ? axis_len(g, d) - 1 : 0;
    return g.flat_index(idx);
}

// Same-length runs: true when members on the line form one contiguous block.
template <class Member>
bool single_run(std::size_t len, Member&& member, std::size_t* gap = nullptr) {
    std::size_t first = len;
    std::size_t last = 0;
    for (std::size_t k = 0; k < len; ++k) {
        if (member(k)) {
            if (first == len) first = k;
            last = k;
        }
    }
    if (first == len) return true;
    for (std::size_t k = first; k <= last; ++k) {
        if (!member(k)) {
            if (gap != nullptr) *gap = k;
            return false;
        }
    }
    return true;
}

std::vector<std::vector<std::size_t>> all_permutations(std::size_t n) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<std::vector<std::size_t>> out;
    do {
        out.push_back(perm);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return out;
}

std::size_t permuted_index(const BeliefGrid& g, std::size_t flat, std::span<const std::size_t> perm) {
    const auto idx = g.multi_index(flat);
    std::vector<std::size_t> out(idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) out[perm[j]] = idx[j];
    return g.flat_index(out);
}

std::string perm_string(const std::vector<std::size_t>& perm) {
    std::ostringstream os;
    os << "[";
    for (std::size_t j = 0; j < perm.size(); ++j) os << (j ? "," : "") << perm[j];
    os << "]";
    return os.str();
}

double max_q(const ProblemSpec& spec, const ValueFunction& v, const Belief& p) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& a : enumerate_actions(spec.n_channels())) best = std::max(best, q_value(spec, v, p, a));
    return best;
}

Action greedy_choice(const ProblemSpec& spec, const ValueFunction& v, const Belief& p, double tie_epsilon) {
    const auto all = enumerate_actions(spec.n_channels());
    std::vector<double> q(all.size());
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < all.size(); ++m) {
        q[m] = q_value(spec, v, p, all[m]);
        best = std::max(best, q[m]);
    }
    std::size_t pick = all.size();
    for (std::size_t m = 0; m < all.size(); ++m) {
        if (q[m] >= best - tie_epsilon && (pick == all.size() || tie_break_less(all[m], all[pick]))) pick = m;
    }
    return all[pick];
}

std::size_t require_on_axis(const BeliefGrid& g, std::size_t d, double x, const char* who) {
    const std::size_t k = g.find(d, x);
    if (k == axis_len(g, d)) {
        std::ostringstream os;
        os << who << ": coordinate " << x << " is not a grid value on axis " << d;
        throw std::invalid_argument(os.str());
    }
    return k;
}

}  // namespace

// ----------------------------------------------------------------------------
// Regions

ConnectivityResult check_connectivity(const Policy& policy, const Action& action) {
    const auto& g = policy.grid;
    ConnectivityResult result;
    std::vector<char> seen(g.size(), 0);
    std::vector<std::size_t> stack;
    for (std::size_t s = 0; s < g.size(); ++s) {
        if (seen[s] || !(policy.choice[s] == action)) continue;
        result.empty = false;
        ++result.components;
        seen[s] = 1;
        stack.push_back(s);
        while (!stack.empty()) {
            const std::size_t i = stack.back();
            stack.pop_back();
            for (std::size_t d = 0; d < g.dims(); ++d) {
                const std::size_t stride = g.stride(d);
                const std::size_t k = (i / stride) % axis_len(g, d);
                auto visit = [&](std::size_t nb) {
                    if (!seen[nb] && policy.choice[nb] == action) {
                        seen[nb] = 1;
                        stack.push_back(nb);
                    }
                };
                if (k > 0) visit(i - stride);
                if (k + 1 < axis_len(g, d)) visit(i + stride);
            }
        }
    }
    return result;
}

std::vector<double> probe_region_volumes(const ProblemSpec& spec, const ValueFunction& v,
                                         std::size_t samples_per_axis) {
    const std::size_t n = spec.n_channels();
    if (samples_per_axis < 1) throw std::invalid_argument("probe_region_volumes: need at least one sample per axis");
    std::size_t total = 1;
    for (std::size_t d = 0; d < n; ++d) total *= samples_per_axis;
    std::vector<std::size_t> counts(std::size_t{1} << n, 0);
    std::vector<double> coords(n);
    for (std::size_t i = 0; i < total; ++i) {
        std::size_t rest = i;
        for (std::size_t d = n; d-- > 0;) {
            coords[d] = (static_cast<double>(rest % samples_per_axis) + 0.5) / static_cast<double>(samples_per_axis);
            rest /= samples_per_axis;
        }
        ++counts[greedy_choice(spec, v, Belief(coords), kDefaultTieEpsilon).mask()];
    }
    std::vector<double> out(counts.size());
    for (std::size_t m = 0; m < counts.size(); ++m) out[m] = static_cast<double>(counts[m]) / static_cast<double>(total);
    return out;
}

std::vector<double> cell_volumes(const BeliefGrid& grid) {
    std::vector<std::vector<double>> widths(grid.dims());
    for (std::size_t d = 0; d < grid.dims(); ++d) {
        const auto& x = grid.axis(d);
        for (std::size_t k = 0; k < x.size(); ++k) {
            const double lo = k == 0 ? x[0] : 0.5 * (x[k - 1] + x[k]);
            const double hi = k + 1 == x.size() ? x[k] : 0.5 * (x[k] + x[k + 1]);
            widths[d].push_back(hi - lo);
        }
    }
    std::vector<double> out(grid.size(), 1.0);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        for (std::size_t d = 0; d < grid.dims(); ++d) out[i] *= widths[d][(i / grid.stride(d)) % widths[d].size()];
    }
    return out;
}

RegionReport decision_regions(const Policy& policy) {
    const auto& g = policy.grid;
    const std::size_t n = g.dims();
    RegionReport report;
    report.total_points = g.size();
    const auto weights = cell_volumes(g);
    for (const auto& a : enumerate_actions(n)) {
        ActionRegion r;
        r.action = a;
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (policy.choice[i] == a) {
                ++r.count;
                r.measure += weights[i];
            }
        }
        r.volume = static_cast<double>(r.count) / static_cast<double>(g.size());
        r.components = check_connectivity(policy, a).components;
        r.contains_vertex = policy.choice[vertex_index(g, a)] == a;
        for (std::size_t d = 0; d < n; ++d) {
            bool ok = true;
            const std::size_t stride = g.stride(d);
            for (std::size_t s : line_starts(g, d)) {
                ok = single_run(axis_len(g, d), [&](std::size_t k) { return policy.choice[s + k * stride] == a; });
                if (!ok) break;
            }
            r.contiguous_along.push_back(ok);
        }
        report.regions.push_back(std::move(r));
    }
    return report;
}

std::vector<ContiguityViolation> check_contiguity(const Policy& policy, std::size_t axis) {
    const auto& g = policy.grid;
    if (axis >= g.dims()) throw std::invalid_argument("check_contiguity: axis out of range");
    std::vector<ContiguityViolation> out;
    const std::size_t stride = g.stride(axis);
    const std::size_t len = axis_len(g, axis);
    for (const auto& a : enumerate_actions(g.dims())) {
        for (std::size_t s : line_starts(g, axis)) {
            std::size_t gap = 0;
            if (!single_run(len, [&](std::size_t k) { return policy.in_argmax(s + k * stride, a); }, &gap)) {
                out.push_back({a, axis, s, s + gap * stride});
            }
        }
    }
    return out;
}

std::vector<ContiguityViolation> check_contiguity(const Policy& policy) {
    std::vector<ContiguityViolation> out;
    for (std::size_t d = 0; d < policy.grid.dims(); ++d) {
        auto v = check_contiguity(policy, d);
        out.insert(out.end(), v.begin(), v.end());
    }
    return out;
}

// ----------------------------------------------------------------------------
// Symmetry

SymmetryVerdict check_symmetry(const ProblemSpec& spec, const ValueFunction& v, double tol) {
    const auto& g = v.grid;
    if (!g.is_symmetric()) throw std::invalid_argument("check_symmetry: grid axes differ, symmetry is undefined");
    if (g.dims() != spec.n_channels()) throw std::invalid_argument("check_symmetry: grid dimension mismatch");
    const auto all = enumerate_actions(spec.n_channels());
    const std::size_t na = all.size();
    std::vector<double> q(g.size() * na);
    const auto n_points = static_cast<std::ptrdiff_t>(g.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t pi = 0; pi < n_points; ++pi) {
        const auto i = static_cast<std::size_t>(pi);
        const Belief p = g.point(i);
        for (std::size_t m = 0; m < na; ++m) q[i * na + m] = q_value(spec, v, p, all[m]);
    }

    SymmetryVerdict verdict;
    verdict.worst_permutation.resize(g.dims());
    std::iota(verdict.worst_permutation.begin(), verdict.worst_permutation.end(), 0);
    double worst_total = -1.0;
    for (const auto& perm : all_permutations(g.dims())) {
        ++verdict.permutations_checked;
        std::vector<std::size_t> mapped(na);
        for (std::size_t m = 0; m < na; ++m) mapped[m] = all[m].permuted(perm).mask();
        for (std::size_t i = 0; i < g.size(); ++i) {
            const std::size_t j = permuted_index(g, i, perm);
            const double dv = std::abs(v.values[i] - v.values[j]);
            double dq = 0.0;
            for (std::size_t m = 0; m < na; ++m) dq = std::max(dq, std::abs(q[i * na + m] - q[j * na + mapped[m]]));
            verdict.worst_value_deviation = std::max(verdict.worst_value_deviation, dv);
            verdict.worst_q_deviation = std::max(verdict.worst_q_deviation, dq);
            if (std::max(dv, dq) > worst_total) {
                worst_total = std::max(dv, dq);
                verdict.worst_point = i;
                verdict.worst_permutation = perm;
            }
        }
    }
    verdict.pass = verdict.worst_value_deviation <= tol && verdict.worst_q_deviation <= tol;
    return verdict;
}

std::size_t argmax_equivariance_mismatches(const Policy& policy) {
    const auto& g = policy.grid;
    if (!g.is_symmetric()) throw std::invalid_argument("argmax_equivariance_mismatches: grid axes differ");
    const auto all = enumerate_actions(g.dims());
    std::size_t mismatches = 0;
    for (const auto& perm : all_permutations(g.dims())) {
        std::vector<std::uint32_t> mapped(all.size());
        for (std::size_t m = 0; m < all.size(); ++m) mapped[m] = all[m].permuted(perm).mask();
        for (std::size_t i = 0; i < g.size(); ++i) {
            std::uint64_t image = 0;
            for (std::size_t m = 0; m < all.size(); ++m) {
                if ((policy.argmax[i] >> m) & 1U) image |= std::uint64_t{1} << mapped[m];
            }
            if (image != policy.argmax[permuted_index(g, i, perm)]) ++mismatches;
        }
    }
    return mismatches;
}

// ----------------------------------------------------------------------------
// Shape of V

ConvexityVerdict check_convexity(const ValueFunction& v, double rel_tol) {
    const auto& g = v.grid;
    ConvexityVerdict verdict;
    for (std::size_t d = 0; d < g.dims(); ++d) {
        const auto& x = g.axis(d);
        const std::size_t stride = g.stride(d);
        for (std::size_t s : line_starts(g, d)) {
            for (std::size_t k = 1; k + 1 < x.size(); ++k) {
                const double h1 = x[k] - x[k - 1];
                const double h2 = x[k + 1] - x[k];
                const double v0 = v.values[s + (k - 1) * stride];
                const double v1 = v.values[s + k * stride];
                const double v2 = v.values[s + (k + 1) * stride];
                const double second = 2.0 * ((h2 * v0 + h1 * v2) / (h1 + h2) - v1);
                const double normalized = second / (1.0 + std::abs(v1));
                if (normalized < verdict.worst) {
                    verdict.worst = normalized;
                    verdict.worst_point = s + k * stride;
                    verdict.worst_axis = d;
                }
            }
        }
    }
    verdict.pass = verdict.worst >= -rel_tol;
    return verdict;
}

ConvexityVerdict check_monotonicity(const ValueFunction& v, double rel_tol) {
    const auto& g = v.grid;
    ConvexityVerdict verdict;
    for (std::size_t d = 0; d < g.dims(); ++d) {
        const std::size_t stride = g.stride(d);
        for (std::size_t s : line_starts(g, d)) {
            for (std::size_t k = 0; k + 1 < axis_len(g, d); ++k) {
                const double lo = v.values[s + k * stride];
                const double hi = v.values[s + (k + 1) * stride];
                const double normalized = (hi - lo) / (1.0 + std::abs(lo));
                if (normalized < verdict.worst) {
                    verdict.worst = normalized;
                    verdict.worst_point = s + k * stride;
                    verdict.worst_axis = d;
                }
            }
        }
    }
    verdict.pass = verdict.worst >= -rel_tol;
    return verdict;
}

// ----------------------------------------------------------------------------
// Edges

Belief Edge::at(double x) const {
    std::vector<double> c = fixed;
    c.at(free_axis) = x;
    return Belief(std::move(c));
}

std::string Edge::to_string() const {
    std::ostringstream os;
    os << "{";
    bool first = true;
    for (std::size_t d = 0; d < fixed.size(); ++d) {
        if (d == free_axis) continue;
        os << (first ? "" : ", ") << "p" << d + 1 << "=" << fixed[d];
        first = false;
    }
    os << "}";
    return os.str();
}

ThresholdResult edge_threshold(const ProblemSpec& spec, const ValueFunction& v, const Edge& edge,
                               const Action& lower, const Action& upper, double tol) {
    if (edge.fixed.size() != spec.n_channels() || edge.free_axis >= edge.fixed.size()) {
        throw std::invalid_argument("edge_threshold: edge does not match the channel count");
    }
    auto diff = [&](double x) {
        const Belief p = edge.at(x);
        return q_value(spec, v, p, lower) - q_value(spec, v, p, upper);
    };
    auto sign = [](double d, double scale) {
        const double eps = 1e-12 * (1.0 + scale);
        return d > eps ? 1 : (d < -eps ? -1 : 0);
    };
    double scale = 0.0;
    for (double x : v.values) scale = std::max(scale, std::abs(x));

    constexpr std::size_t kSamples = 201;
    std::vector<double> xs(kSamples);
    std::vector<int> signs(kSamples);
    for (std::size_t i = 0; i < kSamples; ++i) {
        xs[i] = static_cast<double>(i) / static_cast<double>(kSamples - 1);
        signs[i] = sign(diff(xs[i]), scale);
    }
    std::size_t changes = 0;
    int prev = 0;
    std::size_t prev_at = 0;
    std::size_t bracket_lo = 0;
    std::size_t bracket_hi = 0;
    for (std::size_t i = 0; i < kSamples; ++i) {
        if (signs[i] == 0) continue;
        if (prev != 0 && signs[i] != prev) {
            ++changes;
            bracket_lo = prev_at;
            bracket_hi = i;
        }
        prev = signs[i];
        prev_at = i;
    }
    if (changes > 1) {
        std::ostringstream os;
        os << "Q(" << lower.to_string() << ") - Q(" << upper.to_string() << ") changes sign " << changes
           << " times along edge " << edge.to_string();
        throw StructuralViolation(os.str());
    }

    ThresholdResult result;
    result.edge = edge;
    result.lower = lower;
    result.upper = upper;
    if (changes == 0) {
        const bool upper_wins = std::find(signs.begin(), signs.end(), -1) != signs.end();
        result.threshold = upper_wins ? 0.0 : 1.0;
    } else {
        double lo = xs[bracket_lo];
        double hi = xs[bracket_hi];
        const int s_lo = signs[bracket_lo];
        while (hi - lo > tol) {
            const double mid = 0.5 * (lo + hi);
            const int s = sign(diff(mid), scale);
            if (s == 0) {
                lo = hi = mid;
                break;
            }
            (s == s_lo ? lo : hi) = mid;
        }
        result.threshold = 0.5 * (lo + hi);
        result.crossing = true;
        result.residual = std::abs(diff(result.threshold));
    }

    constexpr double kDelta = 1e-6;
    constexpr double kOptTol = 1e-9;
    const double below = std::max(0.0, result.threshold - kDelta);
    const double above = std::min(1.0, result.threshold + kDelta);
    if (result.threshold > 0.0) {
        const Belief p = edge.at(below);
        result.lower_optimal_below = q_value(spec, v, p, lower) >= max_q(spec, v, p) - kOptTol;
    }
    if (result.threshold < 1.0) {
        const Belief p = edge.at(above);
        result.upper_optimal_above = q_value(spec, v, p, upper) >= max_q(spec, v, p) - kOptTol;
    }
    return result;
}

CanonicalEdge canonical_edge(CanonicalThreshold which) {
    switch (which) {
        case CanonicalThreshold::th1:
            return {Edge{1, {0.0, 0.0, 0.0}}, Action::from_bits({0, 0, 0}), Action::from_bits({0, 1, 0})};
        case CanonicalThreshold::th2:
            return {Edge{1, {1.0, 0.0, 0.0}}, Action::from_bits({1, 0, 0}), Action::from_bits({1, 1, 0})};
        case CanonicalThreshold::th3:
            return {Edge{2, {1.0, 1.0, 0.0}}, Action::from_bits({1, 1, 0}), Action::from_bits({1, 1, 1})};
    }
    throw std::invalid_argument("canonical_edge: unknown threshold");
}

double threshold_fixed_point(const ProblemSpec& spec, const ValueFunction& v, CanonicalThreshold which, double th) {
    if (spec.n_channels() != 3) throw std::invalid_argument("threshold_fixed_point: needs three channels");
    const double l0 = spec.channel.lambda0;
    const double l1 = spec.channel.lambda1;
    const double b = spec.beta;
    const double t = propagate_belief(spec.channel, th);
    auto V = [&](double a, double c, double d) { return interpolate(v, Belief{a, c, d}); };
    const auto& s = spec.schedule;
    double num = 0.0;
    double den = 0.0;
    switch (which) {
        case CanonicalThreshold::th1:
            num = s.penalty(1) + b * (V(t, l0, l0) - V(l0, l0, l0));
            den = s.reward(1) + s.penalty(1) + b * (V(l0, l1, l0) - V(l0, l0, l0));
            break;
        case CanonicalThreshold::th2:
            num = s.reward(1) - s.reward(2) + s.penalty(2) + b * (V(t, l1, l0) - V(l1, l0, l0));
            den = s.reward(2) + s.penalty(2) + b * (V(l1, l1, l0) - V(l1, l0, l0));
            break;
        case CanonicalThreshold::th3:
            num = 2.0 * s.reward(2) - 2.0 * s.reward(3) + s.penalty(3) + b * (V(t, l1, l1) - V(l1, l1, l0));
            den = s.reward(3) + s.penalty(3) + b * (V(l1, l1, l1) - V(l1, l1, l0));
            break;
    }
    return num / den;
}

EdgeBoundary edge_grid_boundary(const Policy& policy, const Edge& edge, const Action& lower, const Action& upper) {
    const auto& g = policy.grid;
    if (edge.fixed.size() != g.dims()) throw std::invalid_argument("edge_grid_boundary: dimension mismatch");
    std::vector<std::size_t> idx(g.dims(), 0);
    for (std::size_t d = 0; d < g.dims(); ++d) {
        if (d != edge.free_axis) idx[d] = require_on_axis(g, d, edge.fixed[d], "edge_grid_boundary");
    }
    const auto& x = g.axis(edge.free_axis);
    EdgeBoundary out;
    std::size_t last_lower = x.size();
    std::size_t first_upper = x.size();
    for (std::size_t k = 0; k < x.size(); ++k) {
        idx[edge.free_axis] = k;
        const Action& c = policy.choice[g.flat_index(idx)];
        out.only_pair = out.only_pair && (c == lower || c == upper);
        if (c == upper && first_upper == x.size()) first_upper = k;
        if (c == lower && first_upper == x.size()) last_lower = k;
    }
    if (last_lower < x.size()) out.last_lower = x[last_lower];
    if (first_upper < x.size()) out.first_upper = x[first_upper];
    if (out.last_lower && out.first_upper) out.step = *out.first_upper - *out.last_lower;
    return out;
}

PlaneSlice boundary_plane_policy(const ProblemSpec& spec, const ValueFunction& v, std::size_t axis, double value) {
    const auto& g = v.grid;
    if (axis >= g.dims()) throw std::invalid_argument("boundary_plane_policy: axis out of range");
    if (value != 0.0 && value != 1.0) throw std::invalid_argument("boundary_plane_policy: face value must be 0 or 1");
    const std::size_t k = require_on_axis(g, axis, value, "boundary_plane_policy");
    PlaneSlice slice;
    slice.axis = axis;
    slice.value = value;
    std::vector<bool> seen(std::size_t{1} << g.dims(), false);
    for (std::size_t i = 0; i < g.size(); ++i) {
        if ((i / g.stride(axis)) % axis_len(g, axis) != k) continue;
        slice.points.push_back(i);
        slice.choice.push_back(greedy_choice(spec, v, g.point(i), kDefaultTieEpsilon));
        seen[slice.choice.back().mask()] = true;
    }
    for (const auto& a : enumerate_actions(g.dims())) {
        if (!seen[a.mask()]) continue;
        slice.appearing.push_back(a);
        if (a.uses(axis) != (value == 1.0)) slice.offending.push_back(a);
    }
    slice.pass = slice.offending.empty();
    return slice;
}

// ----------------------------------------------------------------------------
// Bundle

bool StructuralReport::all_pass() const {
    return std::all_of(items.begin(), items.end(), [](const CheckItem& c) { return c.pass || !c.asserted; });
}

StructuralReport run_structural_checks(const ProblemSpec& spec, const ValueFunction& v, const Policy& policy) {
    StructuralReport report;
    const auto& g = v.grid;
    const std::size_t n = g.dims();

    {
        const auto c = check_convexity(v);
        std::ostringstream os;
        os << "worst normalized second difference " << c.worst << " on axis " << c.worst_axis + 1;
        report.items.push_back({"convexity", c.pass, true, c.worst, os.str()});
    }
    {
        const auto m = check_monotonicity(v);
        std::ostringstream os;
        os << "worst normalized forward difference " << m.worst << " on axis " << m.worst_axis + 1;
        report.items.push_back({"monotonicity", m.pass, true, m.worst, os.str()});
    }
    if (g.is_symmetric()) {
        const auto s = check_symmetry(spec, v);
        std::ostringstream os;
        os << s.permutations_checked << " permutations, worst |dV| " << s.worst_value_deviation << ", worst |dQ| "
           << s.worst_q_deviation << " under " << perm_string(s.worst_permutation);
        report.items.push_back(
            {"symmetry", s.pass, true, std::max(s.worst_value_deviation, s.worst_q_deviation), os.str()});
        const std::size_t mism = argmax_equivariance_mismatches(policy);
        report.items.push_back({"argmax_equivariance", mism == 0, true, static_cast<double>(mism),
                                std::to_string(mism) + " mismatched (point, permutation) pairs"});
    } else {
        report.items.push_back({"symmetry", false, false, 0.0, "grid axes differ; not evaluated"});
    }
    {
        const auto viol = check_contiguity(policy);
        std::string detail = std::to_string(viol.size()) + " broken lines";
        if (!viol.empty()) {
            detail += "; first: action " + viol.front().action.to_string() + " along axis " +
                      std::to_string(viol.front().axis + 1);
        }
        report.items.push_back({"contiguity", viol.empty(), true, static_cast<double>(viol.size()), detail});
    }
    {
        bool ok = true;
        std::size_t worst = 0;
        std::ostringstream os;
        for (const auto& a : enumerate_actions(n)) {
            const auto c = check_connectivity(policy, a);
            os << a.to_string() << ":" << (c.empty ? std::string("empty") : std::to_string(c.components)) << " ";
            if (!c.empty && c.components != 1) ok = false;
            worst = std::max(worst, c.components);
        }
        const bool asserted = n == 3 && spec.channel.lambda0 < spec.channel.lambda1;
        report.items.push_back({"connectivity", ok, asserted, static_cast<double>(worst), os.str()});
    }
    {
        std::size_t missing = 0;
        std::string detail;
        for (const auto& a : enumerate_actions(n)) {
            if (!policy.in_argmax(vertex_index(g, a), a)) {
                ++missing;
                detail += a.to_string() + " ";
            }
        }
        report.items.push_back({"vertex_membership", missing == 0, true, static_cast<double>(missing),
                                missing == 0 ? "every corner optimal for its own action" : "missing: " + detail});
    }
    {
        std::size_t bad = 0;
        std::string detail;
        for (std::size_t d = 0; d < n; ++d) {
            for (double face : {0.0, 1.0}) {
                const auto slice = boundary_plane_policy(spec, v, d, face);
                if (!slice.pass) {
                    ++bad;
                    detail += "p" + std::to_string(d + 1) + "=" + (face == 0.0 ? "0" : "1") + " ";
                }
            }
        }
        report.items.push_back({"boundary_faces", bad == 0, true, static_cast<double>(bad),
                                bad == 0 ? "all faces respect the restriction" : "failing faces: " + detail});
    }
    return report;
}

void to_json(nlohmann::json& j, const StructuralReport& report) {
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& c : report.items) {
        checks.push_back({{"name", c.name},
                          {"pass", c.pass},
                          {"asserted", c.asserted},
                          {"worst", c.worst},
                          {"detail", c.detail}});
    }
    j = nlohmann::json{{"checks", checks}, {"pass", report.all_pass()}};
}

// ----------------------------------------------------------------------------
// Sweeps

SweepParameter parse_sweep_parameter(const std::string& name) {
    if (name == "lambda0") return SweepParameter::lambda0;
    if (name == "lambda1") return SweepParameter::lambda1;
    if (name == "reward_penalty_ratio") return SweepParameter::reward_penalty_ratio;
    if (name == "reward_ratio_k2k1") return SweepParameter::reward_ratio_k2k1;
    if (name == "beta") return SweepParameter::beta;
    throw std::invalid_argument("unknown sweep parameter '" + name +
                                "' (expected lambda0, lambda1, reward_penalty_ratio, reward_ratio_k2k1 or beta)");
}

std::string to_string(SweepParameter parameter) {
    switch (parameter) {
        case SweepParameter::lambda0: return "lambda0";
        case SweepParameter::lambda1: return "lambda1";
        case SweepParameter::reward_penalty_ratio: return "reward_penalty_ratio";
        case SweepParameter::reward_ratio_k2k1: return "reward_ratio_k2k1";
        case SweepParameter::beta: return "beta";
    }
    return "unknown";
}

ProblemSpec instantiate(const ProblemSpec& base, SweepParameter parameter, double value) {
    ProblemSpec s = base;
    auto& sch = s.schedule;
    switch (parameter) {
        case SweepParameter::lambda0: s.channel.lambda0 = value; break;
        case SweepParameter::lambda1: s.channel.lambda1 = value; break;
        case SweepParameter::beta: s.beta = value; break;
        case SweepParameter::reward_penalty_ratio:
            for (std::size_t k = 0; k < sch.rewards.size(); ++k) sch.penalties[k] = sch.rewards[k] / value;
            break;
        case SweepParameter::reward_ratio_k2k1: {
            const double r1 = sch.rewards.at(0);
            const double ratio = r1 / sch.penalties.at(0);
            for (std::size_t k = 0; k < sch.rewards.size(); ++k) {
                sch.rewards[k] = std::pow(value, static_cast<double>(k)) * r1 / static_cast<double>(k + 1);
                sch.penalties[k] = sch.rewards[k] / ratio;
            }
            break;
        }
    }
    return s;
}

SweepRow analyze_instance(const ProblemSpec& spec, double param_value, const SweepSettings& settings) {
    SweepRow row;
    row.param_value = param_value;
    const auto violations = validate_spec(spec);
    if (!violations.empty()) {
        row.skipped = true;
        row.reason = format_violations(violations);
        return row;
    }
    const std::size_t n = spec.n_channels();
    if (n > kMaxGridChannels) {
        row.skipped = true;
        row.reason = "grid solver supports at most " + std::to_string(kMaxGridChannels) + " channels";
        return row;
    }
    try {
        const auto vi = value_iterate(spec, build_grid(spec, settings.resolution), settings.epsilon);
        const auto policy = extract_policy(spec, vi.value, settings.tie_epsilon);
        const auto regions = decision_regions(policy);
        const auto probe = probe_region_volumes(spec, vi.value, settings.volume_samples);
        row.volume.assign(n + 1, 0.0);
        std::vector<std::size_t> per_class(n + 1, 0);
        for (const auto& a : enumerate_actions(n)) {
            row.volume[a.cardinality()] += probe[a.mask()];
            ++per_class[a.cardinality()];
        }
        for (std::size_t k = 0; k <= n; ++k) {
            row.volume[k] /= static_cast<double>(per_class[k]);
            const std::uint32_t rep = ((1U << k) - 1U) << (n - k);
            row.components.push_back(regions.regions[rep].components);
        }
        row.contiguity_pass = check_contiguity(policy).empty();
        row.vertex_pass = true;
        for (const auto& a : enumerate_actions(n)) {
            row.vertex_pass = row.vertex_pass && policy.in_argmax(vertex_index(policy.grid, a), a);
        }
        if (settings.run_checks) {
            row.symmetry_pass = check_symmetry(spec, vi.value).pass && argmax_equivariance_mismatches(policy) == 0;
        }
    } catch (const std::exception& e) {
        row = SweepRow{};
        row.param_value = param_value;
        row.skipped = true;
        row.reason = e.what();
    }
    return row;
}

std::vector<SweepRow> sweep(const ProblemSpec& base, SweepParameter parameter, const std::vector<double>& values,
                            const SweepSettings& settings) {
    std::vector<SweepRow> rows(values.size());
    const auto count = static_cast<std::ptrdiff_t>(values.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        const auto k = static_cast<std::size_t>(i);
        rows[k] = analyze_instance(instantiate(base, parameter, values[k]), values[k], settings);
    }
    return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows, std::size_t n_channels) {
    out << "param_value";
    for (std::size_t k = 0; k <= n_channels; ++k) out << ",vol_B" << k;
    for (std::size_t k = 0; k <= n_channels; ++k) out << ",components_B" << k;
    out << ",contiguity_pass,symmetry_pass,vertex_pass,status\n";
    const auto old_precision = out.precision(12);
    for (const auto& r : rows) {
        out << r.param_value;
        for (std::size_t k = 0; k <= n_channels; ++k) {
            out << ",";
            if (!r.skipped) out << r.volume[k];
        }
        for (std::size_t k = 0; k <= n_channels; ++k) {
            out << ",";
            if (!r.skipped) out << r.components[k];
        }
        auto flag = [&](bool b) { return r.skipped ? "" : (b ? "true" : "false"); };
        out << "," << flag(r.contiguity_pass) << "," << flag(r.symmetry_pass) << "," << flag(r.vertex_pass) << ",";
        if (r.skipped) {
            std::string reason = r.reason;
            std::replace(reason.begin(), reason.end(), ',', ';');
            std::replace(reason.begin(), reason.end(), '\n', ' ');
            out << "skipped: " << reason;
        } else {
            out << "ok";
        }
        out << "\n";
    }
    out.precision(old_precision);
}

}  // namespace gepower
