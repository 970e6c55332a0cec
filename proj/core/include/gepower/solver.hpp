#pragma once

// Bellman solvers for the belief-state MDP.
//
// Grid route: the belief cube is discretized into a tensor grid whose axes
// contain 0, 1, lambda0 and lambda1 exactly; off-grid successors are spread
// onto the enclosing cell vertices with multilinear weights. Used channels
// always land on lambda0/lambda1, so only unused coordinates ever need
// interpolation.
//
// Reachable route: every belief reachable from p0 has coordinates in the
// T-orbits of lambda0, lambda1 and p0. Truncating the orbits at depth
// n_trunc (then snapping to the stationary belief) gives a finite MDP that is
// solved without any interpolation.

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "gepower/model.hpp"

namespace gepower {

class NonConvergenceError : public std::runtime_error {
  public:
    NonConvergenceError(std::size_t iterations, double residual);
    [[nodiscard]] std::size_t iterations() const noexcept { return iterations_; }
    [[nodiscard]] double residual() const noexcept { return residual_; }

  private:
    std::size_t iterations_;
    double residual_;
};

class CapacityError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Grid solvers enumerate 2^N actions per point; beyond this they are not supported.
inline constexpr std::size_t kMaxGridChannels = 6;

class BeliefGrid {
  public:
    BeliefGrid() = default;
    /// Axes must be strictly increasing and span [0, 1].
    explicit BeliefGrid(std::vector<std::vector<double>> axes, std::size_t resolution = 0);

    [[nodiscard]] std::size_t dims() const noexcept { return axes_.size(); }
    [[nodiscard]] std::size_t size() const noexcept { return size_; }
    [[nodiscard]] std::size_t resolution() const noexcept { return resolution_; }
    [[nodiscard]] const std::vector<double>& axis(std::size_t d) const { return axes_.at(d); }
    [[nodiscard]] const std::vector<std::vector<double>>& axes() const noexcept { return axes_; }
    [[nodiscard]] bool is_symmetric() const;

    /// Row-major flat index; the first coordinate varies slowest.
    [[nodiscard]] std::size_t flat_index(std::span<const std::size_t> idx) const;
    [[nodiscard]] std::vector<std::size_t> multi_index(std::size_t flat) const;
    [[nodiscard]] Belief point(std::size_t flat) const;
    [[nodiscard]] double coord(std::size_t flat, std::size_t d) const;
    [[nodiscard]] std::size_t stride(std::size_t d) const { return strides_.at(d); }
    /// Index of the grid coordinate nearest to x on axis d (ties go low).
    [[nodiscard]] std::size_t nearest(std::size_t d, double x) const;
    /// Exact-match lookup of a grid coordinate; returns axis.size() if absent.
    [[nodiscard]] std::size_t find(std::size_t d, double x) const;

    friend bool operator==(const BeliefGrid& a, const BeliefGrid& b) { return a.axes_ == b.axes_; }

  private:
    std::vector<std::vector<double>> axes_;
    std::vector<std::size_t> strides_;
    std::size_t size_ = 0;
    std::size_t resolution_ = 0;
};

/// Uniform grid with `resolution` points per axis, augmented with lambda0 and lambda1.
[[nodiscard]] BeliefGrid build_grid(const ProblemSpec& spec, std::size_t resolution);

struct WeightedIndex {
    std::size_t index;
    double weight;
};

/// Multilinear interpolation weights of p over its enclosing cell. Coordinates
/// that hit a grid value exactly contribute a single vertex, so the list has
/// 2^m entries where m counts off-grid coordinates. Appends weight * scale.
void append_interpolation_weights(const BeliefGrid& grid, std::span<const double> p, double scale,
                                  std::vector<WeightedIndex>& out);

struct ValueFunction {
    BeliefGrid grid;
    std::vector<double> values;

    [[nodiscard]] double at(std::size_t flat) const { return values.at(flat); }
};

[[nodiscard]] double interpolate(const ValueFunction& v, const Belief& p);

/// g_a(p) + beta * sum over outcomes of prob * V(successor).
[[nodiscard]] double q_value(const ProblemSpec& spec, const ValueFunction& v, const Belief& p, const Action& a);

/// Precomputed (reward, successor weights) for every (grid point, action).
class TransitionKernel {
  public:
    TransitionKernel(const ProblemSpec& spec, const BeliefGrid& grid);

    [[nodiscard]] std::size_t points() const noexcept { return points_; }
    [[nodiscard]] std::size_t actions() const noexcept { return actions_; }
    [[nodiscard]] double beta() const noexcept { return beta_; }
    [[nodiscard]] double reward(std::size_t point, std::size_t action) const {
        return rewards_[point * actions_ + action];
    }
    [[nodiscard]] std::span<const WeightedIndex> successors(std::size_t point, std::size_t action) const;
    [[nodiscard]] double q(std::size_t point, std::size_t action, std::span<const double> values) const;
    [[nodiscard]] std::size_t nonzeros() const noexcept { return entries_.size(); }

  private:
    std::size_t points_ = 0;
    std::size_t actions_ = 0;
    double beta_ = 0.0;
    std::vector<double> rewards_;
    std::vector<std::size_t> offsets_;
    std::vector<WeightedIndex> entries_;
};

struct BackupResult {
    ValueFunction value;
    double residual = 0.0;  // sup-norm of the change
};

[[nodiscard]] BackupResult bellman_backup(const ProblemSpec& spec, const ValueFunction& v);
[[nodiscard]] BackupResult bellman_backup(const TransitionKernel& kernel, const ValueFunction& v);

struct IterationOptions {
    std::size_t max_iterations = 100000;
};

struct ValueIterationResult {
    ValueFunction value;
    std::size_t iterations = 0;
    double residual = 0.0;
};

/// Iterates from V = 0 until the residual is at most epsilon (1 - beta) / (2 beta),
/// which leaves the result within epsilon of the fixed point in sup-norm.
[[nodiscard]] ValueIterationResult value_iterate(const ProblemSpec& spec, const BeliefGrid& grid, double epsilon,
                                                 const IterationOptions& options = {});

struct Policy {
    BeliefGrid grid;
    std::vector<Action> choice;
    /// Bit m is set when the action with mask m is within tie_epsilon of the max.
    std::vector<std::uint64_t> argmax;

    [[nodiscard]] bool in_argmax(std::size_t flat, const Action& a) const {
        return ((argmax[flat] >> a.mask()) & 1U) != 0U;
    }
    [[nodiscard]] std::size_t tie_count(std::size_t flat) const;
};

inline constexpr double kDefaultTieEpsilon = 1e-9;

[[nodiscard]] Policy extract_policy(const ProblemSpec& spec, const ValueFunction& v,
                                    double tie_epsilon = kDefaultTieEpsilon);

/// Action for an arbitrary belief: the choice at the nearest grid point.
[[nodiscard]] Action lookup_nearest(const Policy& policy, const Belief& p);

// ----------------------------------------------------------------------------
// Reachable belief set

struct ReachableSet {
    std::size_t n_channels = 0;
    unsigned n_trunc = 0;
    std::vector<double> alphabet;          // per-channel belief values, sorted
    std::vector<std::size_t> successor;    // alphabet index of T(alphabet[i])
    std::size_t index_lambda0 = 0;
    std::size_t index_lambda1 = 0;
    std::size_t index_stationary = 0;
    std::vector<std::size_t> start;        // alphabet index of each p0 coordinate

    [[nodiscard]] std::size_t state_count() const;
    [[nodiscard]] std::size_t nearest(double x) const;
};

/// Alphabet = {T^n(lambda0), T^n(lambda1), T^n(p0_j) : n <= n_trunc} plus the stationary
/// belief; orbits past n_trunc snap to the stationary belief. Throws for sigma = 1.
[[nodiscard]] ReachableSet build_reachable_set(const ProblemSpec& spec, const Belief& p0, unsigned n_trunc);

struct ReachableOptions {
    std::size_t max_states = 10'000'000;
    std::size_t max_iterations = 100000;
};

struct ReachableSolution {
    ReachableSet set;
    std::vector<double> values;   // per product state, row-major over alphabet indices
    std::vector<Action> choice;   // greedy tie-broken action per product state
    double value_at_start = 0.0;
    std::size_t iterations = 0;

    [[nodiscard]] std::size_t state_of(const Belief& p) const;  // nearest alphabet member per coordinate
    [[nodiscard]] Action lookup(const Belief& p) const { return choice[state_of(p)]; }
};

[[nodiscard]] ReachableSolution solve_reachable(const ProblemSpec& spec, const Belief& p0, unsigned n_trunc,
                                                double epsilon, const ReachableOptions& options = {});

}  // namespace gepower
