#pragma once

// Structural analysis of solved policies: decision regions and their volumes,
// contiguity along grid lines, connectivity, permutation symmetry, convexity,
// edge thresholds, boundary-face restrictions and parameter sweeps.
//
// Region volumes are measured on the tie-broken single choice (a partition of
// the grid). Symmetry and contiguity verdicts use argmax sets, which are robust
// to ties on region boundaries.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gepower/model.hpp"
#include "gepower/solver.hpp"

namespace gepower {

class StructuralViolation : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct ActionRegion {
    Action action;
    std::size_t count = 0;
    double volume = 0.0;                    // fraction of grid points
    double measure = 0.0;                   // fraction of the cube covered by nearest-point cells
    std::size_t components = 0;             // face-adjacent connected components
    std::vector<bool> contiguous_along;     // per axis, on the tie-broken choice
    bool contains_vertex = false;           // the cube corner whose coordinates equal the mask bits
};

struct RegionReport {
    std::vector<ActionRegion> regions;      // indexed by mask
    std::size_t total_points = 0;
};

[[nodiscard]] RegionReport decision_regions(const Policy& policy);

/// Fraction of a cell-centred probe lattice (samples_per_axis^N points, independent
/// of the solver grid) on which each action is the tie-broken greedy choice
/// under V. Indexed by mask.
[[nodiscard]] std::vector<double> probe_region_volumes(const ProblemSpec& spec, const ValueFunction& v,
                                                       std::size_t samples_per_axis = 40);

/// Measure of each grid point's nearest-point cell; sums to 1.
[[nodiscard]] std::vector<double> cell_volumes(const BeliefGrid& grid);

struct ContiguityViolation {
    Action action;
    std::size_t axis = 0;
    std::size_t line_start = 0;  // flat index of the line's first point
    std::size_t gap_at = 0;      // flat index of a non-member between two members
};

/// Lines along `axis` on which an action's argmax-membership is not a single run.
[[nodiscard]] std::vector<ContiguityViolation> check_contiguity(const Policy& policy, std::size_t axis);
[[nodiscard]] std::vector<ContiguityViolation> check_contiguity(const Policy& policy);

struct ConnectivityResult {
    std::size_t components = 0;
    bool empty = true;
};

[[nodiscard]] ConnectivityResult check_connectivity(const Policy& policy, const Action& action);

struct SymmetryVerdict {
    bool pass = false;
    double worst_value_deviation = 0.0;
    double worst_q_deviation = 0.0;
    std::vector<std::size_t> worst_permutation;  // channel j -> position perm[j]
    std::size_t worst_point = 0;
    std::size_t permutations_checked = 0;
};

/// V(p) = V(rho p) and Q(p, a) = Q(rho p, rho a) for every coordinate permutation
/// rho. Throws std::invalid_argument on a grid with differing axes.
[[nodiscard]] SymmetryVerdict check_symmetry(const ProblemSpec& spec, const ValueFunction& v, double tol = 1e-9);

/// Number of (point, permutation) pairs where argmax(rho p) != rho(argmax(p)).
[[nodiscard]] std::size_t argmax_equivariance_mismatches(const Policy& policy);

struct ConvexityVerdict {
    bool pass = true;
    double worst = 0.0;          // most negative normalized second difference
    std::size_t worst_point = 0;
    std::size_t worst_axis = 0;
};

/// Second differences along every axis line must be >= -rel_tol * (1 + |V|).
/// On non-uniform spacing the second difference is twice the defect of the
/// middle value below the chord through its neighbours.
[[nodiscard]] ConvexityVerdict check_convexity(const ValueFunction& v, double rel_tol = 1e-6);

/// Forward differences along every axis line must be >= -rel_tol * (1 + |V|).
[[nodiscard]] ConvexityVerdict check_monotonicity(const ValueFunction& v, double rel_tol = 1e-9);

// ----------------------------------------------------------------------------
// Edges and thresholds

/// A cube edge: every coordinate except `free_axis` is pinned to fixed[d].
struct Edge {
    std::size_t free_axis = 0;
    std::vector<double> fixed;

    [[nodiscard]] Belief at(double x) const;
    [[nodiscard]] std::string to_string() const;
};

struct ThresholdResult {
    Edge edge;
    double threshold = 0.0;
    Action lower;
    Action upper;
    double residual = 0.0;            // |Q_lower - Q_upper| at the returned point (0 when no crossing)
    bool crossing = false;            // false when one action dominates the whole edge
    bool lower_optimal_below = false;
    bool upper_optimal_above = false;
};

/// Bisection on the sign of Q(lower) - Q(upper) along the edge. Returns 1 when
/// `lower` dominates the whole edge and 0 when `upper` does. Throws
/// StructuralViolation when a verification sweep sees more than one sign change.
[[nodiscard]] ThresholdResult edge_threshold(const ProblemSpec& spec, const ValueFunction& v, const Edge& edge,
                                             const Action& lower, const Action& upper, double tol = 1e-10);

enum class CanonicalThreshold { th1, th2, th3 };

struct CanonicalEdge {
    Edge edge;
    Action lower;
    Action upper;
};

/// Three-channel edges: th1 on {p1=0, p3=0} between (0,0,0) and (0,1,0); th2 on
/// {p1=1, p3=0} between (1,0,0) and (1,1,0); th3 on {p1=1, p2=1} between
/// (1,1,0) and (1,1,1).
[[nodiscard]] CanonicalEdge canonical_edge(CanonicalThreshold which);

/// Right-hand side of the implicit threshold equation th = F(th), with the
/// varying argument moved to the first slot by permutation symmetry:
///   th1: [C1 + b(V(T(th),l0,l0) - V(l0,l0,l0))] / [R1 + C1 + b(V(l0,l1,l0) - V(l0,l0,l0))]
///   th2: [R1 - R2 + C2 + b(V(T(th),l1,l0) - V(l1,l0,l0))] / [R2 + C2 + b(V(l1,l1,l0) - V(l1,l0,l0))]
///   th3: [2R2 - 2R3 + C3 + b(V(T(th),l1,l1) - V(l1,l1,l0))] / [R3 + C3 + b(V(l1,l1,l1) - V(l1,l1,l0))]
[[nodiscard]] double threshold_fixed_point(const ProblemSpec& spec, const ValueFunction& v, CanonicalThreshold which,
                                           double th);

struct EdgeBoundary {
    std::optional<double> last_lower;   // largest grid coordinate choosing `lower` before the switch
    std::optional<double> first_upper;  // smallest grid coordinate choosing `upper` after it
    double step = 0.0;                  // grid spacing across the switch
    bool only_pair = true;              // every grid point on the edge chose lower or upper
};

[[nodiscard]] EdgeBoundary edge_grid_boundary(const Policy& policy, const Edge& edge, const Action& lower,
                                              const Action& upper);

struct PlaneSlice {
    std::size_t axis = 0;
    double value = 0.0;
    std::vector<std::size_t> points;   // flat grid indices on the face
    std::vector<Action> choice;        // tie-broken argmax at each point
    std::vector<Action> appearing;     // distinct actions, ascending mask
    std::vector<Action> offending;     // appearing actions that break the restriction
    bool pass = false;
};

/// On the face p_axis = 0 no optimal action uses channel `axis`; on p_axis = 1
/// every optimal action does.
[[nodiscard]] PlaneSlice boundary_plane_policy(const ProblemSpec& spec, const ValueFunction& v, std::size_t axis,
                                               double value);

// ----------------------------------------------------------------------------
// Bundled verdicts

struct CheckItem {
    std::string name;
    bool pass = false;
    bool asserted = true;  // reported-only items never fail the bundle
    double worst = 0.0;
    std::string detail;
};

struct StructuralReport {
    std::vector<CheckItem> items;
    [[nodiscard]] bool all_pass() const;
};

/// Convexity, monotonicity, symmetry, argmax equivariance, contiguity,
/// connectivity, vertex membership and boundary faces. Connectivity is only
/// asserted for three non-degenerate channels (lambda0 < lambda1).
[[nodiscard]] StructuralReport run_structural_checks(const ProblemSpec& spec, const ValueFunction& v,
                                                     const Policy& policy);
void to_json(nlohmann::json& j, const StructuralReport& report);

// ----------------------------------------------------------------------------
// Sweeps

enum class SweepParameter { lambda0, lambda1, reward_penalty_ratio, reward_ratio_k2k1, beta };

[[nodiscard]] SweepParameter parse_sweep_parameter(const std::string& name);
[[nodiscard]] std::string to_string(SweepParameter parameter);

/// reward_penalty_ratio: C[k] = R[k] / value.
/// reward_ratio_k2k1: R[k] = value^(k-1) R[1] / k, so k R[k] / ((k-1) R[k-1]) = value
/// for every k, and C[k] = R[k] C[1] / R[1].
[[nodiscard]] ProblemSpec instantiate(const ProblemSpec& base, SweepParameter parameter, double value);

struct SweepSettings {
    std::size_t resolution = 15;
    double epsilon = 1e-6;
    double tie_epsilon = kDefaultTieEpsilon;
    std::size_t volume_samples = 40;  // probe lattice points per axis
    bool run_checks = true;
};

struct SweepRow {
    double param_value = 0.0;
    bool skipped = false;
    std::string reason;
    /// Representative B_k = first k channels, k = 0..N. Volumes come from the
    /// probe lattice and are averaged over the C(N,k) actions of the same
    /// cardinality, which equals the volume of B_k under permutation symmetry
    /// without favouring the tie-break winner.
    std::vector<double> volume;
    std::vector<std::size_t> components;  // of the representative B_k itself
    bool contiguity_pass = false;
    bool symmetry_pass = false;
    bool vertex_pass = false;
};

[[nodiscard]] SweepRow analyze_instance(const ProblemSpec& spec, double param_value, const SweepSettings& settings);

[[nodiscard]] std::vector<SweepRow> sweep(const ProblemSpec& base, SweepParameter parameter,
                                          const std::vector<double>& values, const SweepSettings& settings = {});

/// Columns: param_value, vol_B0..vol_BN, components_B0..components_BN,
/// contiguity_pass, symmetry_pass, vertex_pass, status.
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows, std::size_t n_channels);

}  // namespace gepower
