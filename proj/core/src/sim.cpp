#include "gepower/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace gepower {

ChannelStates step_channels(const ChannelParams& params, const ChannelStates& states, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ChannelStates next(states.size());
    for (std::size_t j = 0; j < states.size(); ++j) {
        const double p_good = states[j] ? params.lambda1 : params.lambda0;
        next[j] = u(rng) < p_good ? 1 : 0;
    }
    return next;
}

EpisodeResult run_episode(const ProblemSpec& spec, const PolicyFn& policy, const Belief& p0, std::size_t horizon,
                          Rng& rng, bool record_steps) {
    if (horizon < 1) throw std::invalid_argument("run_episode: horizon must be at least 1");
    const std::size_t n = spec.n_channels();
    if (p0.size() != n) throw std::invalid_argument("run_episode: initial belief has the wrong length");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ChannelStates states(n);
    for (std::size_t j = 0; j < n; ++j) states[j] = u(rng) < p0[j] ? 1 : 0;

    EpisodeResult result;
    if (record_steps) result.log.reserve(horizon);
    std::vector<double> belief(p0.coords().begin(), p0.coords().end());
    double discount = 1.0;
    for (std::size_t t = 0; t < horizon; ++t) {
        const Belief b(belief);
        const Action a = policy(b, rng);
        const std::size_t k = a.cardinality();
        double r = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (a.uses(j)) {
                r += states[j] ? spec.schedule.reward(k) : -spec.schedule.penalty(k);
                belief[j] = states[j] ? spec.channel.lambda1 : spec.channel.lambda0;
            } else {
                belief[j] = propagate_belief(spec.channel, belief[j]);
            }
        }
        result.discounted_reward += discount * r;
        if (record_steps) result.log.push_back({b, a, states, r});
        discount *= spec.beta;
        states = step_channels(spec.channel, states, rng);
    }
    return result;
}

std::size_t default_horizon(const ProblemSpec& spec, double tolerance) {
    if (spec.beta == 0.0) return 1;
    const double n = static_cast<double>(spec.n_channels());
    const double envelope = n * spec.schedule.reward(1) / (1.0 - spec.beta);
    if (envelope <= tolerance) return 1;
    const double h = std::log(tolerance / envelope) / std::log(spec.beta);
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(h)));
}

Rng episode_rng(std::uint64_t seed, std::uint64_t episode) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32U),
                      static_cast<std::uint32_t>(episode), static_cast<std::uint32_t>(episode >> 32U)};
    return Rng(seq);
}

double pairwise_sum(const double* data, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += data[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(data, half) + pairwise_sum(data + half, n - half);
}

PolicyEvalSummary evaluate_policy(const ProblemSpec& spec, const NamedPolicy& policy, const Belief& p0,
                                  std::size_t episodes, std::size_t horizon, std::uint64_t seed) {
    if (episodes < 2) throw std::invalid_argument("evaluate_policy: need at least 2 episodes");
    if (horizon < 1) throw std::invalid_argument("evaluate_policy: horizon must be at least 1");
    std::vector<double> rewards(episodes);
    const auto count = static_cast<std::ptrdiff_t>(episodes);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t e = 0; e < count; ++e) {
        Rng rng = episode_rng(seed, static_cast<std::uint64_t>(e));
        rewards[static_cast<std::size_t>(e)] = run_episode(spec, policy.decide, p0, horizon, rng).discounted_reward;
    }
    PolicyEvalSummary s;
    s.policy_name = policy.name;
    s.episodes = episodes;
    s.horizon = horizon;
    s.seed = seed;
    const double n = static_cast<double>(episodes);
    s.mean = pairwise_sum(rewards.data(), episodes) / n;
    std::vector<double> sq(episodes);
    for (std::size_t i = 0; i < episodes; ++i) sq[i] = (rewards[i] - s.mean) * (rewards[i] - s.mean);
    const double variance = pairwise_sum(sq.data(), episodes) / (n - 1.0);
    s.std_error = std::sqrt(variance / n);
    s.ci99_half_width = kZ99 * s.std_error;
    return s;
}

void to_json(nlohmann::json& j, const PolicyEvalSummary& s) {
    j = nlohmann::json{{"policy_name", s.policy_name},
                       {"episodes", s.episodes},
                       {"horizon", s.horizon},
                       {"seed", s.seed},
                       {"mean", s.mean},
                       {"stderr", s.std_error},
                       {"ci99", s.ci99_half_width}};
}

NamedPolicy grid_policy(const Policy& policy, std::string name) {
    return {std::move(name), [policy](const Belief& p, Rng&) { return lookup_nearest(policy, p); }};
}

NamedPolicy reachable_policy(const ReachableSolution& solution, std::string name) {
    return {std::move(name), [solution](const Belief& p, Rng&) { return solution.lookup(p); }};
}

NamedPolicy myopic_policy(const ProblemSpec& spec) {
    const auto actions = enumerate_actions(spec.n_channels());
    return {"myopic", [spec, actions](const Belief& p, Rng&) {
                std::vector<double> g(actions.size());
                double top = -std::numeric_limits<double>::infinity();
                for (std::size_t m = 0; m < actions.size(); ++m) {
                    g[m] = immediate_reward(spec, actions[m], p);
                    top = std::max(top, g[m]);
                }
                std::size_t pick = actions.size();
                for (std::size_t m = 0; m < actions.size(); ++m) {
                    if (g[m] >= top - kDefaultTieEpsilon && (pick == actions.size() || tie_break_less(actions[m], actions[pick]))) {
                        pick = m;
                    }
                }
                return actions[pick];
            }};
}

std::vector<NamedPolicy> baseline_policies(const ProblemSpec& spec) {
    const std::size_t n = spec.n_channels();
    std::vector<NamedPolicy> out;
    out.push_back({"all_on", [n](const Belief&, Rng&) { return Action::all(n); }});
    out.push_back({"best_single", [n](const Belief& p, Rng&) {
                       std::size_t best = 0;
                       for (std::size_t j = 1; j < n; ++j) {
                           if (p[j] > p[best]) best = j;
                       }
                       return Action(n, 1U << (n - 1 - best));
                   }});
    out.push_back({"uniform_random", [n](const Belief&, Rng& rng) {
                       std::uniform_int_distribution<std::uint32_t> pick(0, (1U << n) - 1U);
                       return Action(n, pick(rng));
                   }});
    out.push_back({"none", [n](const Belief&, Rng&) { return Action::none(n); }});
    return out;
}

}  // namespace gepower
