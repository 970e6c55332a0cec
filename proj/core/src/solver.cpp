#include "gepower/solver.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

namespace gepower {

namespace {

// Coordinates this close to a grid value are treated as lying on it; keeps the
// successor lists sparse when T(p) lands on a grid point up to rounding.
constexpr double kSnap = 1e-13;

double stopping_threshold(double epsilon, double beta) {
    if (beta == 0.0) return std::numeric_limits<double>::infinity();
    return epsilon * (1.0 - beta) / (2.0 * beta);
}

void check_grid_spec(const ProblemSpec& spec, const BeliefGrid& grid) {
    if (grid.dims() != spec.n_channels()) {
        throw std::invalid_argument("grid dimension does not match the channel count");
    }
    if (grid.dims() == 0 || grid.dims() > kMaxGridChannels) {
        throw std::invalid_argument("grid solvers support 1 to 6 channels");
    }
}

}  // namespace

NonConvergenceError::NonConvergenceError(std::size_t iterations, double residual)
    : std::runtime_error("value iteration did not converge after " + std::to_string(iterations) +
                         " iterations (last residual " + std::to_string(residual) + ")"),
      iterations_(iterations),
      residual_(residual) {}

// ----------------------------------------------------------------------------
// BeliefGrid

BeliefGrid::BeliefGrid(std::vector<std::vector<double>> axes, std::size_t resolution)
    : axes_(std::move(axes)), resolution_(resolution) {
    if (axes_.empty()) throw std::invalid_argument("grid needs at least one axis");
    for (const auto& ax : axes_) {
        if (ax.size() < 2) throw std::invalid_argument("grid axes need at least two points");
        if (ax.front() != 0.0 || ax.back() != 1.0) throw std::invalid_argument("grid axes must span [0, 1]");
        for (std::size_t i = 1; i < ax.size(); ++i) {
            if (!(ax[i] > ax[i - 1])) throw std::invalid_argument("grid axes must be strictly increasing");
        }
    }
    strides_.assign(axes_.size(), 1);
    size_ = 1;
    for (std::size_t d = axes_.size(); d-- > 0;) {
        strides_[d] = size_;
        size_ *= axes_[d].size();
    }
    if (resolution_ == 0) resolution_ = axes_.front().size();
}

bool BeliefGrid::is_symmetric() const {
    return std::all_of(axes_.begin(), axes_.end(), [&](const auto& ax) { return ax == axes_.front(); });
}

std::size_t BeliefGrid::flat_index(std::span<const std::size_t> idx) const {
    std::size_t flat = 0;
    for (std::size_t d = 0; d < axes_.size(); ++d) flat += idx[d] * strides_[d];
    return flat;
}

std::vector<std::size_t> BeliefGrid::multi_index(std::size_t flat) const {
    std::vector<std::size_t> idx(axes_.size());
    for (std::size_t d = 0; d < axes_.size(); ++d) {
        idx[d] = flat / strides_[d];
        flat %= strides_[d];
    }
    return idx;
}

double BeliefGrid::coord(std::size_t flat, std::size_t d) const {
    return axes_[d][(flat / strides_[d]) % axes_[d].size()];
}

Belief BeliefGrid::point(std::size_t flat) const {
    std::vector<double> p(axes_.size());
    for (std::size_t d = 0; d < axes_.size(); ++d) p[d] = coord(flat, d);
    return Belief(std::move(p));
}

std::size_t BeliefGrid::nearest(std::size_t d, double x) const {
    const auto& ax = axes_.at(d);
    const auto it = std::lower_bound(ax.begin(), ax.end(), x);
    if (it == ax.begin()) return 0;
    if (it == ax.end()) return ax.size() - 1;
    const auto hi = static_cast<std::size_t>(it - ax.begin());
    return (x - ax[hi - 1] <= ax[hi] - x) ? hi - 1 : hi;
}

std::size_t BeliefGrid::find(std::size_t d, double x) const {
    const auto& ax = axes_.at(d);
    const auto it = std::lower_bound(ax.begin(), ax.end(), x);
    if (it != ax.end() && *it == x) return static_cast<std::size_t>(it - ax.begin());
    return ax.size();
}

BeliefGrid build_grid(const ProblemSpec& spec, std::size_t resolution) {
    if (resolution < 2) throw std::invalid_argument("grid resolution must be at least 2");
    const std::size_t n = spec.n_channels();
    if (n == 0 || n > kMaxGridChannels) throw std::invalid_argument("grid solvers support 1 to 6 channels");
    std::vector<double> axis(resolution);
    for (std::size_t i = 0; i < resolution; ++i) {
        axis[i] = static_cast<double>(i) / static_cast<double>(resolution - 1);
    }
    for (double lambda : {spec.channel.lambda0, spec.channel.lambda1}) {
        auto hit = std::find_if(axis.begin(), axis.end(), [&](double x) { return std::abs(x - lambda) <= 1e-12; });
        if (hit != axis.end()) {
            *hit = lambda;
        } else {
            axis.push_back(lambda);
        }
    }
    std::sort(axis.begin(), axis.end());
    axis.erase(std::unique(axis.begin(), axis.end()), axis.end());
    return BeliefGrid(std::vector<std::vector<double>>(n, axis), resolution);
}

// ----------------------------------------------------------------------------
// Interpolation

void append_interpolation_weights(const BeliefGrid& grid, std::span<const double> p, double scale,
                                  std::vector<WeightedIndex>& out) {
    const std::size_t n = grid.dims();
    std::size_t base = 0;
    // Off-grid coordinates: (stride, upper weight) of the enclosing cell.
    std::size_t free_dims = 0;
    std::size_t free_stride[kMaxGridChannels];
    double free_t[kMaxGridChannels];
    for (std::size_t d = 0; d < n; ++d) {
        const auto& ax = grid.axis(d);
        const double x = p[d];
        auto it = std::lower_bound(ax.begin(), ax.end(), x);
        auto hi = static_cast<std::size_t>(it - ax.begin());
        if (hi < ax.size() && ax[hi] - x <= kSnap) {
            base += hi * grid.stride(d);
            continue;
        }
        if (hi == 0) {
            base += 0;
            continue;
        }
        if (hi == ax.size()) {
            base += (ax.size() - 1) * grid.stride(d);
            continue;
        }
        if (x - ax[hi - 1] <= kSnap) {
            base += (hi - 1) * grid.stride(d);
            continue;
        }
        base += (hi - 1) * grid.stride(d);
        free_stride[free_dims] = grid.stride(d);
        free_t[free_dims] = (x - ax[hi - 1]) / (ax[hi] - ax[hi - 1]);
        ++free_dims;
    }
    for (std::size_t corner = 0; corner < (std::size_t{1} << free_dims); ++corner) {
        double w = scale;
        std::size_t idx = base;
        for (std::size_t f = 0; f < free_dims; ++f) {
            if ((corner >> f) & 1U) {
                w *= free_t[f];
                idx += free_stride[f];
            } else {
                w *= 1.0 - free_t[f];
            }
        }
        out.push_back({idx, w});
    }
}

double interpolate(const ValueFunction& v, const Belief& p) {
    if (p.size() != v.grid.dims()) throw std::invalid_argument("interpolate: belief dimension mismatch");
    std::vector<WeightedIndex> w;
    append_interpolation_weights(v.grid, p.coords(), 1.0, w);
    double sum = 0.0;
    for (const auto& [idx, weight] : w) sum += weight * v.values[idx];
    return sum;
}

double q_value(const ProblemSpec& spec, const ValueFunction& v, const Belief& p, const Action& a) {
    double q = immediate_reward(spec, a, p);
    if (spec.beta == 0.0) return q;
    double future = 0.0;
    for (const auto& o : successor_outcomes(spec.channel, a, p).outcomes) {
        if (o.probability == 0.0) continue;
        future += o.probability * interpolate(v, o.successor);
    }
    return q + spec.beta * future;
}

// ----------------------------------------------------------------------------
// Kernel and backup

TransitionKernel::TransitionKernel(const ProblemSpec& spec, const BeliefGrid& grid)
    : points_(grid.size()), actions_(std::size_t{1} << spec.n_channels()), beta_(spec.beta) {
    check_grid_spec(spec, grid);
    const auto all = enumerate_actions(spec.n_channels());
    rewards_.resize(points_ * actions_);
    offsets_.reserve(points_ * actions_ + 1);
    offsets_.push_back(0);
    for (std::size_t i = 0; i < points_; ++i) {
        const Belief p = grid.point(i);
        for (std::size_t m = 0; m < actions_; ++m) {
            rewards_[i * actions_ + m] = immediate_reward(spec, all[m], p);
            for (const auto& o : successor_outcomes(spec.channel, all[m], p).outcomes) {
                if (o.probability == 0.0) continue;
                append_interpolation_weights(grid, o.successor.coords(), o.probability, entries_);
            }
            offsets_.push_back(entries_.size());
        }
    }
}

std::span<const WeightedIndex> TransitionKernel::successors(std::size_t point, std::size_t action) const {
    const std::size_t row = point * actions_ + action;
    return {entries_.data() + offsets_[row], offsets_[row + 1] - offsets_[row]};
}

double TransitionKernel::q(std::size_t point, std::size_t action, std::span<const double> values) const {
    double future = 0.0;
    for (const auto& [idx, w] : successors(point, action)) future += w * values[idx];
    return reward(point, action) + beta_ * future;
}

BackupResult bellman_backup(const TransitionKernel& kernel, const ValueFunction& v) {
    if (v.values.size() != kernel.points()) throw std::invalid_argument("backup: value field size mismatch");
    BackupResult out{ValueFunction{v.grid, std::vector<double>(v.values.size())}, 0.0};
    const auto n_points = static_cast<std::ptrdiff_t>(kernel.points());
    const std::span<const double> src(v.values);
    double residual = 0.0;
#pragma omp parallel for schedule(static) reduction(max : residual)
    for (std::ptrdiff_t i = 0; i < n_points; ++i) {
        const auto pi = static_cast<std::size_t>(i);
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t m = 0; m < kernel.actions(); ++m) best = std::max(best, kernel.q(pi, m, src));
        out.value.values[pi] = best;
        residual = std::max(residual, std::abs(best - src[pi]));
    }
    out.residual = residual;
    return out;
}

BackupResult bellman_backup(const ProblemSpec& spec, const ValueFunction& v) {
    return bellman_backup(TransitionKernel(spec, v.grid), v);
}

ValueIterationResult value_iterate(const ProblemSpec& spec, const BeliefGrid& grid, double epsilon,
                                   const IterationOptions& options) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("value_iterate: epsilon must be positive");
    const TransitionKernel kernel(spec, grid);
    const double threshold = stopping_threshold(epsilon, spec.beta);
    ValueIterationResult result{ValueFunction{grid, std::vector<double>(grid.size(), 0.0)}, 0, 0.0};
    while (result.iterations < options.max_iterations) {
        auto step = bellman_backup(kernel, result.value);
        result.value = std::move(step.value);
        result.residual = step.residual;
        ++result.iterations;
        if (result.residual <= threshold) return result;
    }
    throw NonConvergenceError(result.iterations, result.residual);
}

// ----------------------------------------------------------------------------
// Policy

std::size_t Policy::tie_count(std::size_t flat) const {
    return static_cast<std::size_t>(std::popcount(argmax[flat]));
}

Policy extract_policy(const ProblemSpec& spec, const ValueFunction& v, double tie_epsilon) {
    check_grid_spec(spec, v.grid);
    const auto all = enumerate_actions(spec.n_channels());
    Policy policy{v.grid, std::vector<Action>(v.grid.size()), std::vector<std::uint64_t>(v.grid.size(), 0)};
    std::vector<double> q(all.size());
    for (std::size_t i = 0; i < v.grid.size(); ++i) {
        const Belief p = v.grid.point(i);
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t m = 0; m < all.size(); ++m) {
            q[m] = q_value(spec, v, p, all[m]);
            best = std::max(best, q[m]);
        }
        std::uint64_t set = 0;
        std::size_t pick = all.size();
        for (std::size_t m = 0; m < all.size(); ++m) {
            if (q[m] >= best - tie_epsilon) {
                set |= std::uint64_t{1} << m;
                if (pick == all.size() || tie_break_less(all[m], all[pick])) pick = m;
            }
        }
        policy.argmax[i] = set;
        policy.choice[i] = all[pick];
    }
    return policy;
}

Action lookup_nearest(const Policy& policy, const Belief& p) {
    std::vector<std::size_t> idx(p.size());
    for (std::size_t d = 0; d < p.size(); ++d) idx[d] = policy.grid.nearest(d, p[d]);
    return policy.choice[policy.grid.flat_index(idx)];
}

// ----------------------------------------------------------------------------
// Reachable set

std::size_t ReachableSet::state_count() const {
    std::size_t count = 1;
    for (std::size_t d = 0; d < n_channels; ++d) {
        if (count > std::numeric_limits<std::size_t>::max() / alphabet.size()) {
            return std::numeric_limits<std::size_t>::max();
        }
        count *= alphabet.size();
    }
    return count;
}

std::size_t ReachableSet::nearest(double x) const {
    const auto it = std::lower_bound(alphabet.begin(), alphabet.end(), x);
    if (it == alphabet.begin()) return 0;
    if (it == alphabet.end()) return alphabet.size() - 1;
    const auto hi = static_cast<std::size_t>(it - alphabet.begin());
    return (x - alphabet[hi - 1] <= alphabet[hi] - x) ? hi - 1 : hi;
}

ReachableSet build_reachable_set(const ProblemSpec& spec, const Belief& p0, unsigned n_trunc) {
    if (n_trunc < 1) throw std::invalid_argument("reachable set: n_trunc must be at least 1");
    if (p0.size() != spec.n_channels()) throw std::invalid_argument("reachable set: p0 dimension mismatch");
    const auto& ch = spec.channel;
    if (ch.sigma() >= 1.0) throw std::domain_error("reachable set: sigma = 1 leaves orbits untruncatable");
    const double stationary = stationary_belief(ch);

    std::vector<double> values{stationary};
    auto add_orbit = [&](double x) {
        for (unsigned n = 0; n <= n_trunc; ++n) {
            values.push_back(x);
            x = propagate_belief(ch, x);
        }
    };
    add_orbit(ch.lambda0);
    add_orbit(ch.lambda1);
    for (double x : p0.coords()) add_orbit(x);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());

    ReachableSet set;
    set.n_channels = spec.n_channels();
    set.n_trunc = n_trunc;
    set.alphabet = std::move(values);
    auto index_of = [&](double x) {
        const auto it = std::lower_bound(set.alphabet.begin(), set.alphabet.end(), x);
        if (it != set.alphabet.end() && *it == x) return static_cast<std::size_t>(it - set.alphabet.begin());
        return set.alphabet.size();
    };
    set.index_lambda0 = index_of(ch.lambda0);
    set.index_lambda1 = index_of(ch.lambda1);
    set.index_stationary = index_of(stationary);
    set.successor.resize(set.alphabet.size());
    for (std::size_t i = 0; i < set.alphabet.size(); ++i) {
        const std::size_t next = index_of(propagate_belief(ch, set.alphabet[i]));
        // Members whose image left the truncated orbit snap to the stationary belief.
        set.successor[i] = next < set.alphabet.size() ? next : set.index_stationary;
    }
    for (double x : p0.coords()) set.start.push_back(index_of(x));
    return set;
}

std::size_t ReachableSolution::state_of(const Belief& p) const {
    std::size_t s = 0;
    for (std::size_t d = 0; d < p.size(); ++d) s = s * set.alphabet.size() + set.nearest(p[d]);
    return s;
}

ReachableSolution solve_reachable(const ProblemSpec& spec, const Belief& p0, unsigned n_trunc, double epsilon,
                                  const ReachableOptions& options) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("solve_reachable: epsilon must be positive");
    ReachableSolution sol;
    sol.set = build_reachable_set(spec, p0, n_trunc);
    const auto& set = sol.set;
    const std::size_t n = spec.n_channels();
    const std::size_t states = set.state_count();
    if (states > options.max_states) {
        std::ostringstream os;
        os << "reachable state space has " << states << " states (cap " << options.max_states
           << "); reduce n_trunc";
        throw CapacityError(os.str());
    }
    const std::size_t alpha = set.alphabet.size();
    std::vector<std::size_t> stride(n, 1);
    for (std::size_t d = n - 1; d-- > 0;) stride[d] = stride[d + 1] * alpha;
    const auto actions = enumerate_actions(n);
    const double beta = spec.beta;

    // Q(s, a) for the current field; successors are alphabet members by construction.
    auto q_of = [&](std::size_t s, const Action& a, const std::vector<double>& v) {
        double belief_sum = 0.0;
        std::size_t base = 0;
        std::size_t used_stride[Action::kMaxChannels];
        double used_p[Action::kMaxChannels];
        std::size_t k = 0;
        std::size_t rest = s;
        for (std::size_t d = 0; d < n; ++d) {
            const std::size_t digit = rest / stride[d];
            rest %= stride[d];
            if (a.uses(d)) {
                used_p[k] = set.alphabet[digit];
                used_stride[k] = stride[d];
                belief_sum += set.alphabet[digit];
                ++k;
            } else {
                base += set.successor[digit] * stride[d];
            }
        }
        double g = 0.0;
        if (k > 0) {
            const double r = spec.schedule.reward(k);
            const double c = spec.schedule.penalty(k);
            g = belief_sum * (r + c) - static_cast<double>(k) * c;
        }
        if (beta == 0.0) return g;
        double future = 0.0;
        for (std::size_t pattern = 0; pattern < (std::size_t{1} << k); ++pattern) {
            double prob = 1.0;
            std::size_t idx = base;
            for (std::size_t u = 0; u < k; ++u) {
                const bool good = ((pattern >> u) & 1U) != 0U;
                prob *= good ? used_p[u] : 1.0 - used_p[u];
                idx += (good ? set.index_lambda1 : set.index_lambda0) * used_stride[u];
            }
            if (prob != 0.0) future += prob * v[idx];
        }
        return g + beta * future;
    };

    const double threshold = stopping_threshold(epsilon, beta);
    std::vector<double> v(states, 0.0);
    std::vector<double> next(states);
    double residual = 0.0;
    while (true) {
        if (sol.iterations >= options.max_iterations) throw NonConvergenceError(sol.iterations, residual);
        residual = 0.0;
        const auto n_states = static_cast<std::ptrdiff_t>(states);
#pragma omp parallel for schedule(static) reduction(max : residual)
        for (std::ptrdiff_t si = 0; si < n_states; ++si) {
            const auto s = static_cast<std::size_t>(si);
            double best = -std::numeric_limits<double>::infinity();
            for (const auto& a : actions) best = std::max(best, q_of(s, a, v));
            next[s] = best;
            residual = std::max(residual, std::abs(best - v[s]));
        }
        v.swap(next);
        ++sol.iterations;
        if (residual <= threshold) break;
    }

    sol.choice.resize(states);
    for (std::size_t s = 0; s < states; ++s) {
        double best = -std::numeric_limits<double>::infinity();
        std::vector<double> q(actions.size());
        for (std::size_t m = 0; m < actions.size(); ++m) {
            q[m] = q_of(s, actions[m], v);
            best = std::max(best, q[m]);
        }
        std::size_t pick = actions.size();
        for (std::size_t m = 0; m < actions.size(); ++m) {
            if (q[m] >= best - kDefaultTieEpsilon && (pick == actions.size() || tie_break_less(actions[m], actions[pick]))) {
                pick = m;
            }
        }
        sol.choice[s] = actions[pick];
    }
    std::size_t start = 0;
    for (std::size_t d = 0; d < n; ++d) start += set.start[d] * stride[d];
    sol.value_at_start = v[start];
    sol.values = std::move(v);
    return sol;
}

}  // namespace gepower
