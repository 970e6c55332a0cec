#pragma once

// Problem-instance vocabulary for power allocation over N statistically
// identical Gilbert-Elliott channels: channel dynamics, reward schedule,
// actions, beliefs and the exact one-step outcome enumeration.

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace gepower {

/// Two-state Markov channel: lambda0 = Pr[good | bad], lambda1 = Pr[good | good].
struct ChannelParams {
    double lambda0 = 0.0;
    double lambda1 = 0.0;

    [[nodiscard]] double sigma() const noexcept { return lambda1 - lambda0; }
    /// lambda0 = 0 and lambda1 = 1: every channel keeps its state forever.
    [[nodiscard]] bool is_identity() const noexcept { return lambda0 == 0.0 && lambda1 == 1.0; }
};

/// Bits gained per good used channel (R) and lost per bad used channel (C)
/// when k channels share the power. Index 0 holds the k = 1 entry.
struct RewardSchedule {
    std::vector<double> rewards;
    std::vector<double> penalties;

    [[nodiscard]] std::size_t n_channels() const noexcept { return rewards.size(); }
    [[nodiscard]] double reward(std::size_t k) const { return rewards.at(k - 1); }
    [[nodiscard]] double penalty(std::size_t k) const { return penalties.at(k - 1); }
};

struct ProblemSpec {
    ChannelParams channel;
    RewardSchedule schedule;
    double beta = 0.9;
    // Carried for completeness; power only enters through the equal P/k split.
    double total_power = 1.0;

    [[nodiscard]] std::size_t n_channels() const noexcept { return schedule.n_channels(); }
};

/// Channel-selection mask. Channel j (0-based) maps to bit (N-1-j), so the
/// integer order of masks is the lexicographic order of (a_1, ..., a_N).
class Action {
  public:
    static constexpr std::size_t kMaxChannels = 16;

    Action() = default;
    Action(std::size_t n_channels, std::uint32_t mask);
    static Action from_bits(std::initializer_list<int> bits);
    static Action none(std::size_t n_channels) { return {n_channels, 0U}; }
    static Action all(std::size_t n_channels);

    [[nodiscard]] std::size_t n_channels() const noexcept { return n_; }
    [[nodiscard]] std::uint32_t mask() const noexcept { return mask_; }
    [[nodiscard]] bool uses(std::size_t channel) const noexcept {
        return ((mask_ >> (n_ - 1 - channel)) & 1U) != 0U;
    }
    [[nodiscard]] std::size_t cardinality() const noexcept;
    [[nodiscard]] std::vector<std::size_t> used_channels() const;
    /// Image under a coordinate permutation: channel j moves to perm[j].
    [[nodiscard]] Action permuted(std::span<const std::size_t> perm) const;
    /// "(1,0,1)"
    [[nodiscard]] std::string to_string() const;

    friend bool operator==(const Action&, const Action&) = default;

  private:
    std::size_t n_ = 0;
    std::uint32_t mask_ = 0;
};

/// Tie-break order used everywhere a single action must be picked from a set:
/// fewer used channels first, then the smaller mask.
[[nodiscard]] bool tie_break_less(const Action& a, const Action& b) noexcept;

/// Per-channel probability of being in the good state.
class Belief {
  public:
    Belief() = default;
    explicit Belief(std::vector<double> coords);
    Belief(std::initializer_list<double> coords);

    [[nodiscard]] std::size_t size() const noexcept { return coords_.size(); }
    [[nodiscard]] double operator[](std::size_t i) const { return coords_[i]; }
    [[nodiscard]] std::span<const double> coords() const noexcept { return coords_; }
    [[nodiscard]] Belief permuted(std::span<const std::size_t> perm) const;

    friend bool operator==(const Belief&, const Belief&) = default;

  private:
    std::vector<double> coords_;
};

struct Outcome {
    double probability = 0.0;
    Belief successor;
};

/// 2^k outcomes for an action of cardinality k, ordered by the revealed
/// pattern read as a binary number over the used channels (first used
/// channel is the most significant bit, bit set = good). Zero-probability
/// entries are kept.
struct OutcomeDistribution {
    std::vector<Outcome> outcomes;
};

[[nodiscard]] double propagate_belief(const ChannelParams& params, double p);
[[nodiscard]] double propagate_belief_n(const ChannelParams& params, double p, unsigned n);
/// lambda0 / (1 - sigma); throws std::domain_error when sigma = 1.
[[nodiscard]] double stationary_belief(const ChannelParams& params);

[[nodiscard]] double immediate_reward(const ProblemSpec& spec, const Action& action, const Belief& belief);

[[nodiscard]] OutcomeDistribution successor_outcomes(const ChannelParams& params, const Action& action,
                                                     const Belief& belief);

[[nodiscard]] std::vector<Action> enumerate_actions(std::size_t n_channels);

struct Violation {
    std::string rule;     // the broken inequality, e.g. "R[2] < R[1]"
    std::string detail;   // offending values
};

/// Empty when the instance satisfies every modeling assumption.
[[nodiscard]] std::vector<Violation> validate_spec(const ProblemSpec& spec);
[[nodiscard]] std::string format_violations(const std::vector<Violation>& violations);

/// Instance used throughout the structural experiments:
/// lambda1 = 0.9, lambda0 = 0.1, beta = 0.9, R = (3, 2, 1.78), C = (1.5, 1, 0.89).
[[nodiscard]] ProblemSpec reference_instance();

// JSON object with keys n, lambda0, lambda1, beta, R, C, total_power.
void to_json(nlohmann::json& j, const ProblemSpec& spec);
void from_json(const nlohmann::json& j, ProblemSpec& spec);

}  // namespace gepower
