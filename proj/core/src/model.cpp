#include "gepower/model.hpp"

#include <bit>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace gepower {

namespace {

void require_probability(double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) {
        std::ostringstream os;
        os << what << " must lie in [0, 1], got " << p;
        throw std::invalid_argument(os.str());
    }
}

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(10);
    os << x;
    return os.str();
}

}  // namespace

// ----------------------------------------------------------------------------
// Action

Action::Action(std::size_t n_channels, std::uint32_t mask) : n_(n_channels), mask_(mask) {
    if (n_channels == 0 || n_channels > kMaxChannels) {
        throw std::invalid_argument("action: channel count must be in [1, 16]");
    }
    if (mask >= (1U << n_channels)) {
        throw std::invalid_argument("action: mask has bits beyond the channel count");
    }
}

Action Action::from_bits(std::initializer_list<int> bits) {
    std::uint32_t mask = 0;
    for (int b : bits) {
        mask = (mask << 1U) | (b != 0 ? 1U : 0U);
    }
    return {bits.size(), mask};
}

Action Action::all(std::size_t n_channels) { return {n_channels, (1U << n_channels) - 1U}; }

std::size_t Action::cardinality() const noexcept { return static_cast<std::size_t>(std::popcount(mask_)); }

std::vector<std::size_t> Action::used_channels() const {
    std::vector<std::size_t> used;
    for (std::size_t j = 0; j < n_; ++j) {
        if (uses(j)) used.push_back(j);
    }
    return used;
}

Action Action::permuted(std::span<const std::size_t> perm) const {
    std::uint32_t mask = 0;
    for (std::size_t j = 0; j < n_; ++j) {
        if (uses(j)) mask |= 1U << (n_ - 1 - perm[j]);
    }
    return {n_, mask};
}

std::string Action::to_string() const {
    std::string s = "(";
    for (std::size_t j = 0; j < n_; ++j) {
        if (j > 0) s += ',';
        s += uses(j) ? '1' : '0';
    }
    return s + ")";
}

bool tie_break_less(const Action& a, const Action& b) noexcept {
    const auto ka = a.cardinality();
    const auto kb = b.cardinality();
    if (ka != kb) return ka < kb;
    return a.mask() < b.mask();
}

// ----------------------------------------------------------------------------
// Belief

Belief::Belief(std::vector<double> coords) : coords_(std::move(coords)) {
    for (double p : coords_) require_probability(p, "belief coordinate");
}

Belief::Belief(std::initializer_list<double> coords) : Belief(std::vector<double>(coords)) {}

Belief Belief::permuted(std::span<const std::size_t> perm) const {
    std::vector<double> out(coords_.size());
    for (std::size_t j = 0; j < coords_.size(); ++j) out[perm[j]] = coords_[j];
    Belief b;
    b.coords_ = std::move(out);
    return b;
}

// ----------------------------------------------------------------------------
// Belief dynamics

double propagate_belief(const ChannelParams& params, double p) {
    require_probability(p, "belief");
    if (params.lambda0 == params.lambda1) return params.lambda0;
    // Convex-combination form keeps T(0) = lambda0 and T(1) = lambda1 bit-exact.
    return (1.0 - p) * params.lambda0 + p * params.lambda1;
}

double propagate_belief_n(const ChannelParams& params, double p, unsigned n) {
    require_probability(p, "belief");
    if (n == 0 || params.is_identity()) return p;
    const double sigma = params.sigma();
    if (sigma == 1.0) return p;
    const double sn = std::pow(sigma, static_cast<double>(n));
    return params.lambda0 / (1.0 - sigma) * (1.0 - sn) + sn * p;
}

double stationary_belief(const ChannelParams& params) {
    const double sigma = params.sigma();
    if (sigma >= 1.0) {
        throw std::domain_error("stationary belief: sigma = 1, every belief is stationary");
    }
    return params.lambda0 / (1.0 - sigma);
}

double immediate_reward(const ProblemSpec& spec, const Action& action, const Belief& belief) {
    const std::size_t k = action.cardinality();
    if (k == 0) return 0.0;
    if (action.n_channels() != belief.size() || k > spec.n_channels()) {
        throw std::invalid_argument("immediate_reward: action, belief and spec sizes disagree");
    }
    const double r = spec.schedule.reward(k);
    const double c = spec.schedule.penalty(k);
    double sum = 0.0;
    for (std::size_t j = 0; j < belief.size(); ++j) {
        if (action.uses(j)) sum += belief[j];
    }
    return sum * (r + c) - static_cast<double>(k) * c;
}

OutcomeDistribution successor_outcomes(const ChannelParams& params, const Action& action,
                                       const Belief& belief) {
    const std::size_t n = belief.size();
    if (action.n_channels() != n) {
        throw std::invalid_argument("successor_outcomes: action and belief sizes disagree");
    }
    std::vector<double> base(n);
    for (std::size_t j = 0; j < n; ++j) {
        base[j] = action.uses(j) ? 0.0 : propagate_belief(params, belief[j]);
    }
    const auto used = action.used_channels();
    const std::size_t k = used.size();
    OutcomeDistribution dist;
    dist.outcomes.reserve(std::size_t{1} << k);
    for (std::uint32_t pattern = 0; pattern < (1U << k); ++pattern) {
        double prob = 1.0;
        std::vector<double> next = base;
        for (std::size_t i = 0; i < k; ++i) {
            const bool good = ((pattern >> (k - 1 - i)) & 1U) != 0U;
            const double p = belief[used[i]];
            prob *= good ? p : 1.0 - p;
            next[used[i]] = good ? params.lambda1 : params.lambda0;
        }
        dist.outcomes.push_back({prob, Belief(std::move(next))});
    }
    return dist;
}

std::vector<Action> enumerate_actions(std::size_t n_channels) {
    if (n_channels == 0 || n_channels > Action::kMaxChannels) {
        throw std::invalid_argument("enumerate_actions: channel count must be in [1, 16]");
    }
    std::vector<Action> actions;
    actions.reserve(std::size_t{1} << n_channels);
    for (std::uint32_t m = 0; m < (1U << n_channels); ++m) actions.emplace_back(n_channels, m);
    return actions;
}

// ----------------------------------------------------------------------------
// Validation

std::vector<Violation> validate_spec(const ProblemSpec& spec) {
    std::vector<Violation> out;
    const auto& ch = spec.channel;
    auto prob_ok = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (!prob_ok(ch.lambda0)) out.push_back({"0 <= lambda0 <= 1", "lambda0=" + fmt(ch.lambda0)});
    if (!prob_ok(ch.lambda1)) out.push_back({"0 <= lambda1 <= 1", "lambda1=" + fmt(ch.lambda1)});
    if (!(ch.lambda0 <= ch.lambda1)) {
        out.push_back({"lambda0 <= lambda1", "lambda0=" + fmt(ch.lambda0) + ", lambda1=" + fmt(ch.lambda1)});
    }
    if (!(spec.beta >= 0.0 && spec.beta < 1.0)) out.push_back({"0 <= beta < 1", "beta=" + fmt(spec.beta)});
    if (!(spec.total_power > 0.0)) out.push_back({"total_power > 0", "total_power=" + fmt(spec.total_power)});

    const auto& s = spec.schedule;
    const std::size_t n = s.rewards.size();
    if (n == 0) {
        out.push_back({"n >= 1", "no channels"});
        return out;
    }
    if (n > Action::kMaxChannels) out.push_back({"n <= 16", "n=" + std::to_string(n)});
    if (s.penalties.size() != n) {
        out.push_back({"len(C) == n", "len(R)=" + std::to_string(n) + ", len(C)=" + std::to_string(s.penalties.size())});
        return out;
    }
    auto pair_rules = [&](const std::vector<double>& v, const char* name) {
        for (std::size_t k1 = 1; k1 <= n; ++k1) {
            for (std::size_t k2 = k1 + 1; k2 <= n; ++k2) {
                const double a = v[k1 - 1];
                const double b = v[k2 - 1];
                const std::string i1 = std::string(name) + "[" + std::to_string(k1) + "]";
                const std::string i2 = std::string(name) + "[" + std::to_string(k2) + "]";
                if (!(b < a)) out.push_back({i2 + " < " + i1, i2 + "=" + fmt(b) + ", " + i1 + "=" + fmt(a)});
                const double cap = static_cast<double>(k2) / static_cast<double>(k1) * b;
                if (!(a < cap)) {
                    out.push_back({i1 + " < (" + std::to_string(k2) + "/" + std::to_string(k1) + ")*" + i2,
                                   i1 + "=" + fmt(a) + ", bound=" + fmt(cap)});
                }
            }
        }
    };
    pair_rules(s.rewards, "R");
    pair_rules(s.penalties, "C");
    for (std::size_t k = 1; k <= n; ++k) {
        const double r = s.rewards[k - 1];
        const double c = s.penalties[k - 1];
        const std::string ks = std::to_string(k);
        if (!(r > c)) out.push_back({"R[" + ks + "] > C[" + ks + "]", "R=" + fmt(r) + ", C=" + fmt(c)});
        if (!(c > 0.0)) out.push_back({"C[" + ks + "] > 0", "C=" + fmt(c)});
    }
    return out;
}

std::string format_violations(const std::vector<Violation>& violations) {
    std::string s;
    for (const auto& v : violations) s += "violated: " + v.rule + " (" + v.detail + ")\n";
    return s;
}

ProblemSpec reference_instance() {
    ProblemSpec spec;
    spec.channel = {0.1, 0.9};
    spec.schedule = {{3.0, 2.0, 1.78}, {1.5, 1.0, 0.89}};
    spec.beta = 0.9;
    return spec;
}

// ----------------------------------------------------------------------------
// JSON

void to_json(nlohmann::json& j, const ProblemSpec& spec) {
    j = nlohmann::json{{"n", spec.n_channels()},
                       {"lambda0", spec.channel.lambda0},
                       {"lambda1", spec.channel.lambda1},
                       {"beta", spec.beta},
                       {"R", spec.schedule.rewards},
                       {"C", spec.schedule.penalties},
                       {"total_power", spec.total_power}};
}

void from_json(const nlohmann::json& j, ProblemSpec& spec) {
    if (!j.is_object()) throw std::invalid_argument("problem spec must be a JSON object");
    for (const char* key : {"n", "lambda0", "lambda1", "beta", "R", "C"}) {
        if (!j.contains(key)) throw std::invalid_argument(std::string("problem spec: missing key '") + key + "'");
    }
    const auto n = j.at("n").get<std::size_t>();
    spec.channel.lambda0 = j.at("lambda0").get<double>();
    spec.channel.lambda1 = j.at("lambda1").get<double>();
    spec.beta = j.at("beta").get<double>();
    spec.schedule.rewards = j.at("R").get<std::vector<double>>();
    spec.schedule.penalties = j.at("C").get<std::vector<double>>();
    spec.total_power = j.value("total_power", 1.0);
    if (spec.schedule.rewards.size() != n || spec.schedule.penalties.size() != n) {
        throw std::invalid_argument("problem spec: R and C must both have n entries");
    }
}

}  // namespace gepower
