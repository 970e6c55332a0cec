#include "gepower/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

namespace gepower {

namespace {

class RevisedSimplex {
  public:
    RevisedSimplex(const StandardFormLP& lp, const SimplexOptions& options)
        : lp_(lp), opt_(options), m_(lp.rows), n_(lp.columns.size()), is_basic_(n_ + m_, false) {}

    SimplexResult solve(const std::optional<std::vector<std::size_t>>& initial_basis) {
        SimplexResult result;
        if (initial_basis) {
            if (initial_basis->size() != m_) throw std::invalid_argument("simplex: initial basis has wrong size");
            basis_ = *initial_basis;
            for (std::size_t j : basis_) {
                if (j >= n_ || is_basic_[j]) throw std::invalid_argument("simplex: invalid initial basis");
                is_basic_[j] = true;
            }
            phase_two_ = true;
            set_phase_costs(false);
            refactor();
            for (Eigen::Index i = 0; i < xb_.size(); ++i) {
                if (xb_[i] < -opt_.tolerance) throw std::invalid_argument("simplex: initial basis is not primal feasible");
            }
        } else {
            basis_.resize(m_);
            for (std::size_t i = 0; i < m_; ++i) {
                basis_[i] = n_ + i;
                is_basic_[n_ + i] = true;
            }
            set_phase_costs(true);
            binv_ = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(m_));
            xb_ = Eigen::Map<const Eigen::VectorXd>(lp_.rhs.data(), static_cast<Eigen::Index>(m_));
            recompute_duals();
            const auto status = iterate();
            if (status == SimplexStatus::pivot_limit) return finish(result, status);
            double infeasibility = 0.0;
            for (std::size_t i = 0; i < m_; ++i) {
                if (basis_[i] >= n_) infeasibility += std::max(0.0, xb_[static_cast<Eigen::Index>(i)]);
            }
            double scale = 1.0;
            for (double b : lp_.rhs) scale = std::max(scale, std::abs(b));
            if (infeasibility > opt_.tolerance * scale) return finish(result, SimplexStatus::infeasible);
            phase_two_ = true;
            drive_out_artificials();
            set_phase_costs(false);
            recompute_duals();
        }
        return finish(result, iterate());
    }

  private:
    [[nodiscard]] bool is_artificial(std::size_t j) const { return j >= n_; }

    [[nodiscard]] double dot_column(std::size_t j, const Eigen::VectorXd& v) const {
        if (is_artificial(j)) return v[static_cast<Eigen::Index>(j - n_)];
        double s = 0.0;
        for (const auto& [row, a] : lp_.columns[j].entries) s += a * v[static_cast<Eigen::Index>(row)];
        return s;
    }

    [[nodiscard]] Eigen::VectorXd ftran(std::size_t j) const {
        if (is_artificial(j)) return binv_.col(static_cast<Eigen::Index>(j - n_));
        Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m_));
        for (const auto& [row, a] : lp_.columns[j].entries) u.noalias() += a * binv_.col(static_cast<Eigen::Index>(row));
        return u;
    }

    void set_phase_costs(bool phase_one) {
        cost_.assign(n_ + m_, 0.0);
        if (phase_one) {
            std::fill(cost_.begin() + static_cast<std::ptrdiff_t>(n_), cost_.end(), -1.0);
        } else {
            std::copy(lp_.cost.begin(), lp_.cost.end(), cost_.begin());
        }
    }

    void recompute_duals() {
        Eigen::VectorXd cb(static_cast<Eigen::Index>(m_));
        for (std::size_t i = 0; i < m_; ++i) cb[static_cast<Eigen::Index>(i)] = cost_[basis_[i]];
        y_ = binv_.transpose() * cb;
    }

    void refactor() {
        const auto m = static_cast<Eigen::Index>(m_);
        Eigen::MatrixXd b = Eigen::MatrixXd::Zero(m, m);
        for (std::size_t i = 0; i < m_; ++i) {
            const std::size_t j = basis_[i];
            if (is_artificial(j)) {
                b(static_cast<Eigen::Index>(j - n_), static_cast<Eigen::Index>(i)) = 1.0;
            } else {
                for (const auto& [row, a] : lp_.columns[j].entries) {
                    b(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(i)) += a;
                }
            }
        }
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(b);
        binv_ = lu.inverse();
        xb_ = binv_ * Eigen::Map<const Eigen::VectorXd>(lp_.rhs.data(), m);
        recompute_duals();
        since_refactor_ = 0;
    }

    // Entering column, or npos when no column improves.
    [[nodiscard]] std::size_t price(bool bland) const {
        std::size_t best = npos;
        double best_d = opt_.tolerance;
        for (std::size_t j = 0; j < n_; ++j) {
            if (is_basic_[j]) continue;
            const double d = cost_[j] - dot_column(j, y_);
            if (d > best_d) {
                if (bland) return j;
                best = j;
                best_d = d;
            }
        }
        return best;
    }

    [[nodiscard]] std::size_t ratio_test(const Eigen::VectorXd& u, double& theta) const {
        std::size_t leave = npos;
        theta = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < m_; ++i) {
            const double ui = u[static_cast<Eigen::Index>(i)];
            double ratio;
            if (phase_two_ && is_artificial(basis_[i]) && std::abs(ui) > opt_.tolerance) {
                ratio = 0.0;  // redundant-row artificial must stay at zero
            } else if (ui > opt_.tolerance) {
                ratio = std::max(0.0, xb_[static_cast<Eigen::Index>(i)]) / ui;
            } else {
                continue;
            }
            if (leave == npos) {
                theta = ratio;
                leave = i;
                continue;
            }
            const double slack = 1e-12 * std::max(1.0, theta);
            if (ratio < theta - slack || (ratio <= theta + slack && basis_[i] < basis_[leave])) {
                theta = std::min(theta, ratio);
                leave = i;
            }
        }
        return leave;
    }

    void pivot(std::size_t enter, std::size_t leave, const Eigen::VectorXd& u, double theta, double reduced_cost) {
        const auto r = static_cast<Eigen::Index>(leave);
        xb_.noalias() -= theta * u;
        xb_[r] = theta;
        const Eigen::RowVectorXd row = binv_.row(r) / u[r];
        binv_.noalias() -= u * row;
        binv_.row(r) = row;
        y_.noalias() += reduced_cost * row.transpose();
        is_basic_[basis_[leave]] = false;
        is_basic_[enter] = true;
        basis_[leave] = enter;
        ++pivots_;
        if (++since_refactor_ >= opt_.refactor_every) refactor();
    }

    SimplexStatus iterate() {
        std::size_t degenerate_run = 0;
        while (true) {
            if (pivots_ >= opt_.max_pivots) return SimplexStatus::pivot_limit;
            const bool bland = opt_.rule == PivotRule::bland || degenerate_run >= opt_.degenerate_run_limit;
            const std::size_t enter = price(bland);
            if (enter == npos) {
                refactor();
                if (price(bland) == npos) return SimplexStatus::optimal;
                continue;
            }
            const Eigen::VectorXd u = ftran(enter);
            double theta = 0.0;
            const std::size_t leave = ratio_test(u, theta);
            if (leave == npos) return SimplexStatus::unbounded;
            degenerate_run = theta <= opt_.tolerance ? degenerate_run + 1 : 0;
            pivot(enter, leave, u, theta, cost_[enter] - dot_column(enter, y_));
        }
    }

    void drive_out_artificials() {
        for (std::size_t i = 0; i < m_; ++i) {
            if (!is_artificial(basis_[i])) continue;
            const Eigen::VectorXd row = binv_.row(static_cast<Eigen::Index>(i)).transpose();
            for (std::size_t j = 0; j < n_; ++j) {
                if (is_basic_[j] || std::abs(dot_column(j, row)) <= 1e-9) continue;
                const Eigen::VectorXd u = ftran(j);
                pivot(j, i, u, std::max(0.0, xb_[static_cast<Eigen::Index>(i)] / u[static_cast<Eigen::Index>(i)]), 0.0);
                break;
            }
        }
        refactor();
    }

    SimplexResult& finish(SimplexResult& result, SimplexStatus status) {
        result.status = status;
        result.pivots = pivots_;
        result.basis = basis_;
        result.x.assign(n_, 0.0);
        for (std::size_t i = 0; i < m_; ++i) {
            if (!is_artificial(basis_[i])) result.x[basis_[i]] = xb_[static_cast<Eigen::Index>(i)];
        }
        result.duals.assign(y_.data(), y_.data() + y_.size());
        result.objective = 0.0;
        for (std::size_t j = 0; j < n_; ++j) result.objective += lp_.cost[j] * result.x[j];
        return result;
    }

    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

    const StandardFormLP& lp_;
    SimplexOptions opt_;
    std::size_t m_;
    std::size_t n_;
    std::vector<bool> is_basic_;
    std::vector<std::size_t> basis_;
    std::vector<double> cost_;
    Eigen::MatrixXd binv_;
    Eigen::VectorXd xb_;
    Eigen::VectorXd y_;
    bool phase_two_ = false;
    std::size_t pivots_ = 0;
    std::size_t since_refactor_ = 0;
};

}  // namespace

SimplexResult solve_simplex(const StandardFormLP& lp, const SimplexOptions& options,
                            const std::optional<std::vector<std::size_t>>& initial_basis) {
    if (lp.rhs.size() != lp.rows || lp.cost.size() != lp.columns.size()) {
        throw std::invalid_argument("simplex: inconsistent problem dimensions");
    }
    for (double b : lp.rhs) {
        if (b < 0.0) throw std::invalid_argument("simplex: right-hand side must be nonnegative");
    }
    for (const auto& col : lp.columns) {
        for (const auto& [row, a] : col.entries) {
            if (row >= lp.rows) throw std::invalid_argument("simplex: column entry row out of range");
        }
    }
    RevisedSimplex solver(lp, options);
    return solver.solve(initial_basis);
}

}  // namespace gepower
