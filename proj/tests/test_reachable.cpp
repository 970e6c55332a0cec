#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

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

bool contains(const std::vector<double>& alphabet, double x) {
    return std::any_of(alphabet.begin(), alphabet.end(), [&](double y) { return std::abs(x - y) < 1e-15; });
}

}  // namespace

TEST(ReachableSet, FirstOrbitStepsPresent) {
    const auto set = build_reachable_set(fig3(), Belief{0.1, 0.9, 0.5}, 1);
    for (double x : {0.1, 0.9, 0.18, 0.82, 0.5}) EXPECT_TRUE(contains(set.alphabet, x)) << x;
    EXPECT_TRUE(std::is_sorted(set.alphabet.begin(), set.alphabet.end()));
}

TEST(ReachableSet, SizeBoundForVertexTypeStarts) {
    for (unsigned n : {1U, 3U, 10U, 25U}) {
        const auto set = build_reachable_set(fig3(), Belief{0.1, 0.9, 0.5}, n);
        EXPECT_LE(set.alphabet.size(), 2 * (n + 1) + 1 + 3);
    }
}

TEST(ReachableSet, GeneralStartAddsItsOwnOrbit) {
    const unsigned n = 6;
    const auto set = build_reachable_set(fig3(), Belief{0.37, 0.37, 0.61}, n);
    EXPECT_LE(set.alphabet.size(), std::size_t{(2 + 3) * (n + 1) + 1});
    EXPECT_TRUE(contains(set.alphabet, 0.37));
    EXPECT_TRUE(contains(set.alphabet, propagate_belief(fig3().channel, 0.61)));
}

TEST(ReachableSet, SigmaZeroCollapses) {
    const auto set = build_reachable_set(with_channel(fig3(), 0.4, 0.4), Belief{0.2, 0.7, 0.4}, 5);
    EXPECT_EQ(set.alphabet, (std::vector<double>{0.2, 0.4, 0.7}));
}

TEST(ReachableSet, SuccessorsStayInAlphabet) {
    const auto s = fig3();
    const auto set = build_reachable_set(s, Belief{0.5, 0.3, 0.9}, 8);
    for (std::size_t i = 0; i < set.alphabet.size(); ++i) {
        ASSERT_LT(set.successor[i], set.alphabet.size());
        const double image = propagate_belief(s.channel, set.alphabet[i]);
        const double snapped = set.alphabet[set.successor[i]];
        // Either the exact image or the stationary snap.
        EXPECT_TRUE(image == snapped || set.successor[i] == set.index_stationary);
    }
    EXPECT_EQ(set.alphabet[set.index_lambda0], 0.1);
    EXPECT_EQ(set.alphabet[set.index_lambda1], 0.9);
}

TEST(ReachableSet, SigmaOneRejected) {
    EXPECT_THROW((void)build_reachable_set(with_channel(fig3(), 0.0, 1.0), Belief{0.5, 0.5, 0.5}, 3),
                 std::domain_error);
}

TEST(SolveReachable, ConstantBeliefsClosedForm) {
    // sigma = 0: after one slot every coordinate equals lambda0.
    const auto s = with_channel(fig3(), 0.4, 0.4);
    const Belief p0{0.2, 0.7, 0.9};
    const double eps = 1e-9;
    const auto sol = solve_reachable(s, p0, 3, eps);
    const double tail = max_reward(s, Belief{0.4, 0.4, 0.4}) / (1 - s.beta);
    EXPECT_NEAR(sol.value_at_start, max_reward(s, p0) + s.beta * tail, eps);
}

TEST(SolveReachable, BetaZeroIsMyopic) {
    const auto s = with_beta(fig3(), 0.0);
    const Belief p0{0.3, 0.8, 0.55};
    const auto sol = solve_reachable(s, p0, 4, 1e-9);
    EXPECT_NEAR(sol.value_at_start, max_reward(s, p0), 1e-14);
}

TEST(SolveReachable, AgreesWithFineGrid) {
    const auto s = fig3();
    const Belief p0{0.9, 0.9, 0.9};
    const double eps = 1e-7;
    const auto exact = solve_reachable(s, p0, 25, eps);
    const auto grid = value_iterate(s, build_grid(s, 41), eps).value;
    const double approx = interpolate(grid, p0);
    // Interpolation only ever overestimates a convex field, and the gap is small at 41 points per axis.
    EXPECT_NEAR(exact.value_at_start, approx, 10 * eps + 0.02);
    RecordProperty("gap", std::to_string(approx - exact.value_at_start));
}

TEST(SolveReachable, CapacityErrorAdvisesTruncation) {
    ReachableOptions opts;
    opts.max_states = 1000;
    try {
        (void)solve_reachable(fig3(), Belief{0.5, 0.5, 0.5}, 25, 1e-6, opts);
        FAIL() << "expected CapacityError";
    } catch (const CapacityError& e) {
        EXPECT_NE(std::string(e.what()).find("n_trunc"), std::string::npos);
    }
}

TEST(SolveReachable, LookupReturnsGreedyAction) {
    const auto s = fig3();
    const auto sol = solve_reachable(s, Belief{0.5, 0.5, 0.5}, 10, 1e-8);
    EXPECT_EQ(sol.lookup(Belief{0.9, 0.9, 0.9}), Action::all(3));
    EXPECT_EQ(sol.lookup(Belief{0.1, 0.1, 0.1}), Action::none(3));
}
