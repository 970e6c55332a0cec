#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "gepower/solver.hpp"
#include "support.hpp"

using namespace gepower;
using gepower::testing::fig3;
using gepower::testing::with_beta;
using gepower::testing::with_channel;

namespace {

double max_reward(const ProblemSpec& s, const Belief& p) {
    double best = -1e300;
    for (const auto& a : enumerate_actions(s.n_channels())) best = std::max(best, immediate_reward(s, a, p));
    return best;
}

const ValueFunction& fig3_21() {
    static const ValueFunction v = value_iterate(fig3(), build_grid(fig3(), 21), 1e-8).value;
    return v;
}

ValueFunction random_field(const BeliefGrid& g, std::mt19937_64& rng, double scale) {
    std::uniform_real_distribution<double> u(-scale, scale);
    ValueFunction v{g, std::vector<double>(g.size())};
    for (auto& x : v.values) x = u(rng);
    return v;
}

}  // namespace

TEST(BuildGrid, TenthsNeedNoAugmentation) {
    const auto g = build_grid(fig3(), 11);
    ASSERT_EQ(g.axis(0).size(), 11U);
    for (std::size_t i = 0; i < 11; ++i) EXPECT_NEAR(g.axis(0)[i], 0.1 * static_cast<double>(i), 1e-15);
    EXPECT_EQ(g.size(), 1331U);
    EXPECT_NE(g.find(0, 0.1), g.axis(0).size());
    EXPECT_NE(g.find(0, 0.9), g.axis(0).size());
}

TEST(BuildGrid, AugmentsWithLambda0) {
    const auto g = build_grid(with_channel(fig3(), 0.15, 0.9), 11);
    ASSERT_EQ(g.axis(0).size(), 12U);
    EXPECT_NE(g.find(0, 0.15), g.axis(0).size());
}

TEST(BuildGrid, Resolution21) {
    const auto g = build_grid(fig3(), 21);
    ASSERT_EQ(g.axis(0).size(), 21U);
    EXPECT_NEAR(g.axis(0)[1], 0.05, 1e-15);
    EXPECT_EQ(g.axis(0)[2], 0.1);
    EXPECT_EQ(g.axis(0)[18], 0.9);
    EXPECT_EQ(g.size(), 9261U);
}

TEST(BuildGrid, ResolutionBelowTwoRejected) {
    EXPECT_THROW((void)build_grid(fig3(), 1), std::invalid_argument);
}

TEST(BeliefGridIndex, RowMajorFirstCoordinateSlowest) {
    const auto g = build_grid(with_channel(fig3(), 0.25, 0.75), 5);
    EXPECT_EQ(g.stride(0), 25U);
    EXPECT_EQ(g.stride(2), 1U);
    const std::vector<std::size_t> idx{1, 2, 3};
    const auto flat = g.flat_index(idx);
    EXPECT_EQ(flat, 38U);
    EXPECT_EQ(g.multi_index(flat), idx);
    EXPECT_EQ(g.point(flat), (Belief{0.25, 0.5, 0.75}));
}

TEST(BeliefGridIndex, RejectsMalformedAxes) {
    EXPECT_THROW(BeliefGrid({{0.0, 0.5}}), std::invalid_argument);
    EXPECT_THROW(BeliefGrid({{0.0, 0.6, 0.5, 1.0}}), std::invalid_argument);
}

TEST(Interpolate, VertexReturnsStoredValue) {
    std::mt19937_64 rng(1);
    const auto g = build_grid(fig3(), 6);
    const auto v = random_field(g, rng, 5.0);
    for (std::size_t i = 0; i < g.size(); i += 7) EXPECT_EQ(interpolate(v, g.point(i)), v.values[i]);
}

TEST(Interpolate, ConstantField) {
    std::mt19937_64 rng(2);
    const auto g = build_grid(fig3(), 6);
    const ValueFunction v{g, std::vector<double>(g.size(), 3.25)};
    for (int i = 0; i < 100; ++i) {
        EXPECT_NEAR(interpolate(v, Belief(gepower::testing::random_belief(rng, 3))), 3.25, 1e-13);
    }
}

TEST(Interpolate, OneDimensionalLinear) {
    const ValueFunction v{BeliefGrid({{0.0, 1.0}}), {0.0, 10.0}};
    EXPECT_DOUBLE_EQ(interpolate(v, Belief{0.25}), 2.5);
}

TEST(Interpolate, ReproducesAffineFields) {
    std::mt19937_64 rng(3);
    const auto g = build_grid(with_channel(fig3(), 0.13, 0.77), 7);
    ValueFunction v{g, std::vector<double>(g.size())};
    auto f = [](const Belief& p) { return 1.0 + 2.0 * p[0] - 3.0 * p[1] + 0.5 * p[2]; };
    for (std::size_t i = 0; i < g.size(); ++i) v.values[i] = f(g.point(i));
    for (int i = 0; i < 200; ++i) {
        const Belief p(gepower::testing::random_belief(rng, 3));
        EXPECT_NEAR(interpolate(v, p), f(p), 1e-12);
    }
}

TEST(Interpolate, WeightsFormConvexCombination) {
    std::mt19937_64 rng(4);
    const auto g = build_grid(fig3(), 9);
    for (int i = 0; i < 200; ++i) {
        const auto p = gepower::testing::random_belief(rng, 3);
        std::vector<WeightedIndex> w;
        append_interpolation_weights(g, p, 1.0, w);
        double sum = 0.0;
        for (const auto& x : w) {
            EXPECT_GE(x.weight, 0.0);
            sum += x.weight;
        }
        EXPECT_NEAR(sum, 1.0, 1e-14);
        EXPECT_LE(w.size(), 8U);
    }
}

TEST(QValue, BetaZeroIsImmediateReward) {
    std::mt19937_64 rng(5);
    const auto s = with_beta(fig3(), 0.0);
    const auto g = build_grid(s, 6);
    const auto v = random_field(g, rng, 10.0);
    for (int i = 0; i < 50; ++i) {
        const Belief p(gepower::testing::random_belief(rng, 3));
        for (const auto& a : enumerate_actions(3)) EXPECT_EQ(q_value(s, v, p, a), immediate_reward(s, a, p));
    }
}

TEST(QValue, NullActionPropagatesAll) {
    std::mt19937_64 rng(6);
    const auto s = fig3();
    const auto& v = fig3_21();
    for (int i = 0; i < 50; ++i) {
        const Belief p(gepower::testing::random_belief(rng, 3));
        const Belief tp{propagate_belief(s.channel, p[0]), propagate_belief(s.channel, p[1]),
                        propagate_belief(s.channel, p[2])};
        EXPECT_NEAR(q_value(s, v, p, Action::none(3)), s.beta * interpolate(v, tp), 1e-12);
    }
}

TEST(QValue, AllGoodChannelsGeometricSeries) {
    const auto s = with_channel(fig3(), 1.0, 1.0);
    const auto v = value_iterate(s, build_grid(s, 5), 1e-9).value;
    EXPECT_NEAR(q_value(s, v, Belief{1, 1, 1}, Action::all(3)), 53.4, 1e-8);
}

TEST(QValue, AffineInUsedCoordinates) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto s = fig3();
    const auto& v = fig3_21();
    for (int i = 0; i < 200; ++i) {
        const Action a(3, 1U + static_cast<std::uint32_t>(i % 7));
        const auto used = a.used_channels();
        const std::size_t j = used[static_cast<std::size_t>(i) % used.size()];
        auto p = gepower::testing::random_belief(rng, 3);
        const double x = u(rng), y = u(rng), c = u(rng);
        auto q = [&](double pj) {
            p[j] = pj;
            return q_value(s, v, Belief(p), a);
        };
        EXPECT_NEAR(q(c * x + (1 - c) * y), c * q(x) + (1 - c) * q(y), 1e-9);
    }
}

TEST(BellmanBackup, FromZeroGivesMaxReward) {
    const auto s = fig3();
    const auto g = build_grid(s, 6);
    const auto r = bellman_backup(s, ValueFunction{g, std::vector<double>(g.size(), 0.0)});
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(r.value.values[i], max_reward(s, g.point(i)), 1e-13);
}

TEST(BellmanBackup, MatchesQValueMaximum) {
    std::mt19937_64 rng(8);
    const auto s = fig3();
    const auto g = build_grid(s, 5);
    const auto v = random_field(g, rng, 10.0);
    const auto r = bellman_backup(s, v);
    for (std::size_t i = 0; i < g.size(); ++i) {
        double best = -1e300;
        for (const auto& a : enumerate_actions(3)) best = std::max(best, q_value(s, v, g.point(i), a));
        EXPECT_NEAR(r.value.values[i], best, 1e-12);
    }
}

TEST(BellmanBackup, ConvergedFieldIsFixedPoint) {
    const auto s = fig3();
    const auto res = value_iterate(s, build_grid(s, 11), 1e-8);
    const auto r = bellman_backup(s, res.value);
    EXPECT_LE(r.residual, 1e-8 * (1 - s.beta) / (2 * s.beta) * s.beta + 1e-15);
}

TEST(BellmanBackup, ResidualsContract) {
    const auto s = fig3();
    const auto g = build_grid(s, 11);
    ValueFunction v{g, std::vector<double>(g.size(), 0.0)};
    double prev = bellman_backup(s, v).residual;
    const TransitionKernel k(s, g);
    v = bellman_backup(k, v).value;
    for (int it = 0; it < 40; ++it) {
        const auto r = bellman_backup(k, v);
        EXPECT_LE(r.residual, s.beta * prev + 1e-12);
        prev = r.residual;
        v = r.value;
    }
}

TEST(BellmanBackup, ContractionOnRandomPairs) {
    std::mt19937_64 rng(9);
    const auto s = fig3();
    const auto g = build_grid(s, 7);
    const TransitionKernel k(s, g);
    for (int i = 0; i < 100; ++i) {
        const auto a = random_field(g, rng, 20.0);
        const auto b = random_field(g, rng, 20.0);
        double in = 0.0, out = 0.0;
        const auto ba = bellman_backup(k, a).value;
        const auto bb = bellman_backup(k, b).value;
        for (std::size_t j = 0; j < g.size(); ++j) {
            in = std::max(in, std::abs(a.values[j] - b.values[j]));
            out = std::max(out, std::abs(ba.values[j] - bb.values[j]));
        }
        EXPECT_LE(out, s.beta * in + 1e-12);
    }
}

TEST(BellmanBackup, OperatorIsMonotone) {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    const auto s = fig3();
    const auto g = build_grid(s, 7);
    const TransitionKernel k(s, g);
    for (int i = 0; i < 100; ++i) {
        const auto a = random_field(g, rng, 20.0);
        auto b = a;
        for (auto& x : b.values) x += u(rng);
        const auto ba = bellman_backup(k, a).value;
        const auto bb = bellman_backup(k, b).value;
        for (std::size_t j = 0; j < g.size(); ++j) EXPECT_LE(ba.values[j], bb.values[j] + 1e-12);
    }
}

TEST(BellmanBackup, InputUntouched) {
    std::mt19937_64 rng(11);
    const auto s = fig3();
    const auto v = random_field(build_grid(s, 5), rng, 3.0);
    const auto copy = v.values;
    (void)bellman_backup(s, v);
    EXPECT_EQ(v.values, copy);
}

TEST(ValueIterate, AllGoodChannelsClosedForm) {
    // Every belief moves to (1,1,1) after one slot, so V(p) = max_a g_a(p) + beta * 53.4.
    const auto s = with_channel(fig3(), 1.0, 1.0);
    const double eps = 1e-8;
    const auto g = build_grid(s, 11);
    const auto v = value_iterate(s, g, eps).value;
    const double vstar = 3 * 1.78 / (1 - 0.9);
    EXPECT_NEAR(vstar, 53.4, 1e-12);
    EXPECT_NEAR(v.values.back(), vstar, eps);
    for (std::size_t i = 0; i < g.size(); ++i) {
        EXPECT_NEAR(v.values[i], max_reward(s, g.point(i)) + 0.9 * vstar, eps);
    }
}

TEST(ValueIterate, BetaZeroOneIterationExact) {
    const auto s = with_beta(fig3(), 0.0);
    const auto g = build_grid(s, 11);
    const auto r = value_iterate(s, g, 1e-6);
    EXPECT_EQ(r.iterations, 1U);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(r.value.values[i], max_reward(s, g.point(i)));
}

TEST(ValueIterate, MaximumAtAllGoodVertex) {
    const auto& v = fig3_21();
    EXPECT_EQ(*std::max_element(v.values.begin(), v.values.end()), v.values.back());
}

TEST(ValueIterate, IterationCapRaises) {
    const auto s = fig3();
    try {
        (void)value_iterate(s, build_grid(s, 5), 1e-10, IterationOptions{3});
        FAIL() << "expected NonConvergenceError";
    } catch (const NonConvergenceError& e) {
        EXPECT_EQ(e.iterations(), 3U);
        EXPECT_GT(e.residual(), 0.0);
    }
}

TEST(ValueIterate, EpsilonBoundHoldsAgainstTighterSolve) {
    const auto s = fig3();
    const auto g = build_grid(s, 11);
    const auto loose = value_iterate(s, g, 1e-3).value;
    const auto tight = value_iterate(s, g, 1e-11).value;
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(loose.values[i], tight.values[i], 1e-3);
}

TEST(ExtractPolicy, VertexChoices) {
    const auto s = fig3();
    const auto p = extract_policy(s, fig3_21());
    const auto& g = p.grid;
    auto at = [&](std::size_t a, std::size_t b, std::size_t c) {
        const std::size_t last = g.axis(0).size() - 1;
        const std::vector<std::size_t> idx{a * last, b * last, c * last};
        return p.choice[g.flat_index(idx)];
    };
    EXPECT_EQ(at(0, 0, 0), Action::none(3));
    EXPECT_EQ(at(1, 1, 1), Action::all(3));
    EXPECT_EQ(at(1, 0, 0), Action::from_bits({1, 0, 0}));
    EXPECT_EQ(at(0, 1, 1), Action::from_bits({0, 1, 1}));
}

TEST(ExtractPolicy, ChoiceIsInArgmaxAndTieBroken) {
    const auto s = fig3();
    const auto& v = fig3_21();
    const auto p = extract_policy(s, v);
    for (std::size_t i = 0; i < p.grid.size(); i += 13) {
        EXPECT_TRUE(p.in_argmax(i, p.choice[i]));
        EXPECT_GE(p.tie_count(i), 1U);
        for (const auto& a : enumerate_actions(3)) {
            if (p.in_argmax(i, a)) EXPECT_FALSE(tie_break_less(a, p.choice[i]));
        }
    }
}

TEST(ExtractPolicy, LookupNearestSnapsToGrid) {
    const auto p = extract_policy(fig3(), fig3_21());
    const Belief q{0.99, 0.98, 0.97};
    EXPECT_EQ(lookup_nearest(p, q), p.choice.back());
}
