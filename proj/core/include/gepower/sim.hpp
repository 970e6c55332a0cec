#pragma once

// Monte Carlo ground truth: true channel states evolve as independent
// two-state Markov chains, the policy sees only beliefs, and the states of
// used channels are revealed after each slot.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gepower/model.hpp"
#include "gepower/solver.hpp"

namespace gepower {

using Rng = std::mt19937_64;

/// Per-channel true state, 1 = good.
using ChannelStates = std::vector<std::uint8_t>;

/// Any decision rule mapping the current belief to an action; may consume randomness.
using PolicyFn = std::function<Action(const Belief&, Rng&)>;

struct NamedPolicy {
    std::string name;
    PolicyFn decide;
};

[[nodiscard]] ChannelStates step_channels(const ChannelParams& params, const ChannelStates& states, Rng& rng);

struct StepRecord {
    Belief belief;
    Action action;
    ChannelStates states;  // true states during the slot; only used channels are revealed
    double reward = 0.0;
};

struct EpisodeResult {
    double discounted_reward = 0.0;
    std::vector<StepRecord> log;  // filled only when requested
};

/// Throws std::invalid_argument when horizon < 1.
[[nodiscard]] EpisodeResult run_episode(const ProblemSpec& spec, const PolicyFn& policy, const Belief& p0,
                                        std::size_t horizon, Rng& rng, bool record_steps = false);

/// Smallest horizon with beta^H * N * R[1] / (1 - beta) <= tolerance (1 when beta = 0).
[[nodiscard]] std::size_t default_horizon(const ProblemSpec& spec, double tolerance = 1e-6);

/// Generator for one episode, derived from (seed, episode) through std::seed_seq.
[[nodiscard]] Rng episode_rng(std::uint64_t seed, std::uint64_t episode);

struct PolicyEvalSummary {
    std::string policy_name;
    std::size_t episodes = 0;
    std::size_t horizon = 0;
    std::uint64_t seed = 0;
    double mean = 0.0;
    double std_error = 0.0;
    double ci99_half_width = 0.0;
};

inline constexpr double kZ99 = 2.5758293035489004;

/// Episodes run in parallel, each on its own substream; the mean uses pairwise
/// summation so the summary does not depend on the thread count.
/// Throws std::invalid_argument when episodes < 2 or horizon < 1.
[[nodiscard]] PolicyEvalSummary evaluate_policy(const ProblemSpec& spec, const NamedPolicy& policy, const Belief& p0,
                                                std::size_t episodes, std::size_t horizon, std::uint64_t seed);

void to_json(nlohmann::json& j, const PolicyEvalSummary& s);

/// Nearest-grid-point lookup into a solved policy.
[[nodiscard]] NamedPolicy grid_policy(const Policy& policy, std::string name = "optimal");
/// Exact lookup into a reachable-set solution (nearest alphabet member off the set).
[[nodiscard]] NamedPolicy reachable_policy(const ReachableSolution& solution, std::string name = "optimal_reachable");
/// Maximizes the immediate reward only, with the standard tie-break.
[[nodiscard]] NamedPolicy myopic_policy(const ProblemSpec& spec);
/// all_on, best_single, uniform_random, none.
[[nodiscard]] std::vector<NamedPolicy> baseline_policies(const ProblemSpec& spec);

/// Pairwise (cascade) summation.
[[nodiscard]] double pairwise_sum(const double* data, std::size_t n);

}  // namespace gepower
