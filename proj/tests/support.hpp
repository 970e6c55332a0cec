#pragma once

#include <random>
#include <vector>

#include "gepower/model.hpp"

namespace gepower::testing {

inline ProblemSpec fig3() {
    ProblemSpec s;
    s.channel = {0.1, 0.9};
    s.schedule.rewards = {3.0, 2.0, 1.78};
    s.schedule.penalties = {1.5, 1.0, 0.89};
    s.beta = 0.9;
    return s;
}

inline ProblemSpec fig5() {
    ProblemSpec s = fig3();
    s.schedule.rewards = {3.0, 1.75, 1.361};
    s.schedule.penalties = {1.5, 0.875, 0.6805};
    return s;
}

inline ProblemSpec toy2() {
    ProblemSpec s;
    s.channel = {0.2, 0.8};
    s.schedule.rewards = {2.0, 1.5};
    s.schedule.penalties = {1.0, 0.75};
    s.beta = 0.9;
    return s;
}

inline ProblemSpec with_channel(ProblemSpec s, double l0, double l1) {
    s.channel = {l0, l1};
    return s;
}

inline ProblemSpec with_beta(ProblemSpec s, double beta) {
    s.beta = beta;
    return s;
}

/// Test-side reward formula: sum over used channels of p(R+C) minus k C.
inline double reward_oracle(const ProblemSpec& s, const std::vector<int>& bits, const std::vector<double>& p) {
    int k = 0;
    for (int b : bits) k += b;
    if (k == 0) return 0.0;
    const double r = s.schedule.rewards[static_cast<std::size_t>(k - 1)];
    const double c = s.schedule.penalties[static_cast<std::size_t>(k - 1)];
    double g = 0.0;
    for (std::size_t j = 0; j < bits.size(); ++j) {
        if (bits[j]) g += p[j] * r - (1.0 - p[j]) * c;
    }
    return g;
}

inline std::vector<double> random_belief(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> p(n);
    for (auto& x : p) x = u(rng);
    return p;
}

}  // namespace gepower::testing
