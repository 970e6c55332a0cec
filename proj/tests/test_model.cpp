#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "gepower/model.hpp"
#include "support.hpp"

using namespace gepower;
using gepower::testing::fig3;

namespace {

bool has_rule(const std::vector<Violation>& v, const std::string& rule) {
    return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.rule == rule; });
}

}  // namespace

TEST(PropagateBelief, EndpointsMapToLambdas) {
    const ChannelParams ch{0.1, 0.9};
    EXPECT_EQ(propagate_belief(ch, 0.0), 0.1);
    EXPECT_EQ(propagate_belief(ch, 1.0), 0.9);
}

TEST(PropagateBelief, StationaryPointIsFixed) {
    EXPECT_DOUBLE_EQ(propagate_belief({0.1, 0.9}, 0.5), 0.5);
}

TEST(PropagateBelief, RejectsOutOfRange) {
    EXPECT_THROW((void)propagate_belief({0.1, 0.9}, -0.01), std::invalid_argument);
    EXPECT_THROW((void)propagate_belief({0.1, 0.9}, 1.01), std::invalid_argument);
}

TEST(PropagateBelief, IsAffine) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const ChannelParams ch{0.3 * u(rng), 0.3 + 0.7 * u(rng)};
        const double p = u(rng), q = u(rng), c = u(rng);
        const double lhs = propagate_belief(ch, c * p + (1 - c) * q);
        const double rhs = c * propagate_belief(ch, p) + (1 - c) * propagate_belief(ch, q);
        EXPECT_NEAR(lhs, rhs, 1e-15);
    }
}

TEST(PropagateBeliefN, TwoStepsFromZero) {
    EXPECT_NEAR(propagate_belief_n({0.1, 0.9}, 0.0, 2), 0.18, 1e-15);
}

TEST(PropagateBeliefN, ZeroStepsIsIdentity) {
    EXPECT_EQ(propagate_belief_n({0.1, 0.9}, 0.3, 0), 0.3);
}

TEST(PropagateBeliefN, ConvergesToStationary) {
    EXPECT_NEAR(propagate_belief_n({0.1, 0.9}, 0.0, 500), 0.5, 1e-15);
}

TEST(PropagateBeliefN, IdentityChannelKeepsBelief) {
    EXPECT_EQ(propagate_belief_n({0.0, 1.0}, 0.37, 17), 0.37);
}

TEST(PropagateBeliefN, MatchesRepeatedSingleSteps) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const ChannelParams ch{0.4 * u(rng), 0.5 + 0.5 * u(rng)};
        const double p = u(rng);
        const unsigned n = static_cast<unsigned>(i % 30);
        double iterated = p;
        for (unsigned k = 0; k < n; ++k) iterated = propagate_belief(ch, iterated);
        EXPECT_NEAR(propagate_belief_n(ch, p, n), iterated, 1e-12);
    }
}

TEST(PropagateBeliefN, Semigroup) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const ChannelParams ch{0.4 * u(rng), 0.5 + 0.5 * u(rng)};
        const double p = u(rng);
        const unsigned a = static_cast<unsigned>(i % 13), b = static_cast<unsigned>(i % 7);
        EXPECT_NEAR(propagate_belief_n(ch, p, a + b), propagate_belief_n(ch, propagate_belief_n(ch, p, a), b), 1e-12);
    }
}

TEST(StationaryBelief, Examples) {
    EXPECT_DOUBLE_EQ(stationary_belief({0.1, 0.9}), 0.5);
    EXPECT_DOUBLE_EQ(stationary_belief({0.3, 0.3}), 0.3);
    EXPECT_DOUBLE_EQ(stationary_belief({0.0, 0.0}), 0.0);
}

TEST(StationaryBelief, IsAFixedPoint) {
    const ChannelParams ch{0.23, 0.71};
    const double s = stationary_belief(ch);
    EXPECT_NEAR(propagate_belief(ch, s), s, 1e-15);
}

TEST(StationaryBelief, SigmaOneIsAnError) {
    EXPECT_THROW((void)stationary_belief({0.0, 1.0}), std::domain_error);
}

TEST(ImmediateReward, AllOnAtCertainGood) {
    EXPECT_NEAR(immediate_reward(fig3(), Action::from_bits({1, 1, 1}), Belief{1, 1, 1}), 5.34, 1e-12);
}

TEST(ImmediateReward, NullActionIsZero) {
    EXPECT_EQ(immediate_reward(fig3(), Action::none(3), Belief{0.3, 0.9, 0.2}), 0.0);
}

TEST(ImmediateReward, SingleChannelAtHalf) {
    EXPECT_NEAR(immediate_reward(fig3(), Action::from_bits({1, 0, 0}), Belief{0.5, 0.2, 0.7}), 0.75, 1e-15);
}

TEST(ImmediateReward, MatchesOracleOnRandomInputs) {
    std::mt19937_64 rng(3);
    const auto s = fig3();
    for (int i = 0; i < 300; ++i) {
        const auto p = gepower::testing::random_belief(rng, 3);
        const auto mask = static_cast<std::uint32_t>(i % 8);
        const std::vector<int> bits{int((mask >> 2) & 1), int((mask >> 1) & 1), int(mask & 1)};
        EXPECT_NEAR(immediate_reward(s, Action(3, mask), Belief(p)), gepower::testing::reward_oracle(s, bits, p),
                    1e-12);
    }
}

TEST(ImmediateReward, AffineInEachCoordinate) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto s = fig3();
    for (int i = 0; i < 200; ++i) {
        auto p = gepower::testing::random_belief(rng, 3);
        const Action a(3, static_cast<std::uint32_t>(i % 8));
        const std::size_t j = static_cast<std::size_t>(i % 3);
        const double x = u(rng), y = u(rng), c = u(rng);
        auto at = [&](double v) {
            p[j] = v;
            return immediate_reward(s, a, Belief(p));
        };
        EXPECT_NEAR(at(c * x + (1 - c) * y), c * at(x) + (1 - c) * at(y), 1e-13);
    }
}

TEST(ImmediateReward, InvariantUnderJointPermutation) {
    std::mt19937_64 rng(21);
    const auto s = fig3();
    std::vector<std::size_t> perm{0, 1, 2};
    do {
        for (int i = 0; i < 20; ++i) {
            const Belief p(gepower::testing::random_belief(rng, 3));
            for (const auto& a : enumerate_actions(3)) {
                EXPECT_NEAR(immediate_reward(s, a, p), immediate_reward(s, a.permuted(perm), p.permuted(perm)), 1e-14);
            }
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
}

TEST(SuccessorOutcomes, SingleChannelExample) {
    const auto d = successor_outcomes({0.1, 0.9}, Action::from_bits({1, 0, 0}), Belief{0.5, 0.3, 0.7});
    ASSERT_EQ(d.outcomes.size(), 2U);
    // Pattern order: good first has the higher binary value, so "bad" comes first.
    double total_good = 0.0, total_bad = 0.0;
    for (const auto& o : d.outcomes) {
        EXPECT_NEAR(o.successor[1], 0.34, 1e-15);
        EXPECT_NEAR(o.successor[2], 0.66, 1e-15);
        if (o.successor[0] == 0.9) total_good += o.probability;
        if (o.successor[0] == 0.1) total_bad += o.probability;
    }
    EXPECT_DOUBLE_EQ(total_good, 0.5);
    EXPECT_DOUBLE_EQ(total_bad, 0.5);
}

TEST(SuccessorOutcomes, NullActionPropagatesEverything) {
    const ChannelParams ch{0.1, 0.9};
    const auto d = successor_outcomes(ch, Action::none(3), Belief{0.2, 0.4, 0.6});
    ASSERT_EQ(d.outcomes.size(), 1U);
    EXPECT_EQ(d.outcomes[0].probability, 1.0);
    for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_NEAR(d.outcomes[0].successor[j], 0.1 + 0.8 * (0.2 + 0.2 * static_cast<double>(j)), 1e-15);
    }
}

TEST(SuccessorOutcomes, CertainStatesGiveOneOutcome) {
    const auto d = successor_outcomes({0.1, 0.9}, Action::all(3), Belief{1, 1, 1});
    ASSERT_EQ(d.outcomes.size(), 8U);
    int nonzero = 0;
    for (const auto& o : d.outcomes) {
        if (o.probability > 0) {
            ++nonzero;
            EXPECT_EQ(o.probability, 1.0);
            EXPECT_EQ(o.successor, (Belief{0.9, 0.9, 0.9}));
        }
    }
    EXPECT_EQ(nonzero, 1);
}

TEST(SuccessorOutcomes, ProbabilitiesFormADistribution) {
    std::mt19937_64 rng(13);
    for (int i = 0; i < 300; ++i) {
        const std::size_t n = 1 + static_cast<std::size_t>(i % 5);
        const Belief p(gepower::testing::random_belief(rng, n));
        const Action a(n, static_cast<std::uint32_t>(rng() % (1U << n)));
        const auto d = successor_outcomes({0.15, 0.85}, a, p);
        EXPECT_EQ(d.outcomes.size(), std::size_t{1} << a.cardinality());
        double sum = 0.0;
        for (const auto& o : d.outcomes) {
            EXPECT_GE(o.probability, 0.0);
            sum += o.probability;
            for (double x : o.successor.coords()) {
                EXPECT_GE(x, 0.0);
                EXPECT_LE(x, 1.0);
            }
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(SuccessorOutcomes, ExpectedSuccessorEqualsPropagation) {
    // Averaging the revealed next-slot beliefs must reproduce T(p) on every channel.
    std::mt19937_64 rng(17);
    const ChannelParams ch{0.1, 0.9};
    for (int i = 0; i < 100; ++i) {
        const Belief p(gepower::testing::random_belief(rng, 3));
        const Action a(3, static_cast<std::uint32_t>(i % 8));
        const auto d = successor_outcomes(ch, a, p);
        for (std::size_t j = 0; j < 3; ++j) {
            double mean = 0.0;
            for (const auto& o : d.outcomes) mean += o.probability * o.successor[j];
            EXPECT_NEAR(mean, propagate_belief(ch, p[j]), 1e-12);
        }
    }
}

TEST(EnumerateActions, Orders) {
    const auto one = enumerate_actions(1);
    ASSERT_EQ(one.size(), 2U);
    EXPECT_EQ(one[0].to_string(), "(0)");
    EXPECT_EQ(one[1].to_string(), "(1)");
    const auto two = enumerate_actions(2);
    ASSERT_EQ(two.size(), 4U);
    EXPECT_EQ(two[0].to_string(), "(0,0)");
    EXPECT_EQ(two[1].to_string(), "(0,1)");
    EXPECT_EQ(two[2].to_string(), "(1,0)");
    EXPECT_EQ(two[3].to_string(), "(1,1)");
    EXPECT_EQ(enumerate_actions(3).size(), 8U);
}

TEST(ActionType, MaskConvention) {
    const auto a = Action::from_bits({1, 0, 1});
    EXPECT_EQ(a.mask(), 5U);
    EXPECT_TRUE(a.uses(0));
    EXPECT_FALSE(a.uses(1));
    EXPECT_TRUE(a.uses(2));
    EXPECT_EQ(a.cardinality(), 2U);
    EXPECT_EQ(a.used_channels(), (std::vector<std::size_t>{0, 2}));
}

TEST(ActionType, TieBreakPrefersFewerChannelsThenSmallerMask) {
    EXPECT_TRUE(tie_break_less(Action::from_bits({1, 0, 0}), Action::from_bits({0, 1, 1})));
    EXPECT_TRUE(tie_break_less(Action::from_bits({0, 1, 0}), Action::from_bits({1, 0, 0})));
    EXPECT_FALSE(tie_break_less(Action::from_bits({1, 1, 0}), Action::from_bits({0, 0, 1})));
}

TEST(ActionType, PermutationMovesChannels) {
    const std::vector<std::size_t> perm{2, 0, 1};  // channel 0 -> 2, 1 -> 0, 2 -> 1
    EXPECT_EQ(Action::from_bits({1, 0, 0}).permuted(perm), Action::from_bits({0, 0, 1}));
    EXPECT_EQ((Belief{0.1, 0.2, 0.3}.permuted(perm)), (Belief{0.2, 0.3, 0.1}));
}

TEST(ValidateSpec, Fig3IsValid) {
    EXPECT_TRUE(validate_spec(fig3()).empty());
}

TEST(ValidateSpec, EqualRewardsViolateStrictDecrease) {
    auto s = fig3();
    s.schedule.rewards = {3, 3, 3};
    EXPECT_TRUE(has_rule(validate_spec(s), "R[2] < R[1]"));
}

TEST(ValidateSpec, ReversedLambdas) {
    auto s = fig3();
    s.channel = {0.9, 0.1};
    EXPECT_TRUE(has_rule(validate_spec(s), "lambda0 <= lambda1"));
}

TEST(ValidateSpec, UpperRatioBound) {
    auto s = fig3();
    s.schedule.rewards = {3.0, 1.4, 1.3};  // R1 >= 2 R2
    EXPECT_TRUE(has_rule(validate_spec(s), "R[1] < (2/1)*R[2]"));
}

TEST(ValidateSpec, ZeroPenaltyRejected) {
    auto s = fig3();
    s.schedule.penalties = {1.5, 1.0, 0.0};
    EXPECT_TRUE(has_rule(validate_spec(s), "C[3] > 0"));
}

TEST(ValidateSpec, BetaRange) {
    auto s = fig3();
    s.beta = 1.0;
    EXPECT_TRUE(has_rule(validate_spec(s), "0 <= beta < 1"));
}

TEST(ValidateSpec, FormatNamesEveryRule) {
    auto s = fig3();
    s.channel = {0.9, 0.1};
    s.beta = -1;
    const auto text = format_violations(validate_spec(s));
    EXPECT_NE(text.find("lambda0 <= lambda1"), std::string::npos);
    EXPECT_NE(text.find("0 <= beta < 1"), std::string::npos);
}

TEST(ReferenceInstance, MatchesFig3Parameters) {
    const auto r = reference_instance();
    EXPECT_EQ(r.channel.lambda0, 0.1);
    EXPECT_EQ(r.channel.lambda1, 0.9);
    EXPECT_EQ(r.beta, 0.9);
    EXPECT_EQ(r.schedule.rewards, (std::vector<double>{3, 2, 1.78}));
    EXPECT_EQ(r.schedule.penalties, (std::vector<double>{1.5, 1, 0.89}));
}

TEST(SpecJson, RoundTrip) {
    const auto s = fig3();
    const nlohmann::json j = s;
    for (const char* key : {"n", "lambda0", "lambda1", "beta", "R", "C", "total_power"}) EXPECT_TRUE(j.contains(key));
    const auto back = j.get<ProblemSpec>();
    EXPECT_EQ(back.channel.lambda0, s.channel.lambda0);
    EXPECT_EQ(back.schedule.rewards, s.schedule.rewards);
    EXPECT_EQ(back.schedule.penalties, s.schedule.penalties);
    EXPECT_EQ(back.total_power, 1.0);
}

TEST(SpecJson, TotalPowerDefaultsAndMissingKeysThrow) {
    nlohmann::json j = {{"n", 1}, {"lambda0", 0.1}, {"lambda1", 0.9}, {"beta", 0.5}, {"R", {2.0}}, {"C", {1.0}}};
    EXPECT_EQ(j.get<ProblemSpec>().total_power, 1.0);
    j.erase("beta");
    EXPECT_THROW((void)j.get<ProblemSpec>(), std::invalid_argument);
}
