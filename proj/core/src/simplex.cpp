#include "kcluster/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kcluster/errors.hpp"

namespace kcluster {

namespace {

constexpr double kPivotTol = 1e-10;
constexpr double kReducedCostTol = 1e-10;

// Dense tableau: rows m, columns (structural + slack/artificial + rhs).
class Tableau {
  public:
    Tableau(std::size_t rows, std::size_t cols) : m_(rows), n_(cols), a_(rows * (cols + 1), 0.0) {}

    double& at(std::size_t r, std::size_t c) { return a_[r * (n_ + 1) + c]; }
    double at(std::size_t r, std::size_t c) const { return a_[r * (n_ + 1) + c]; }
    double& rhs(std::size_t r) { return a_[r * (n_ + 1) + n_]; }
    double rhs(std::size_t r) const { return a_[r * (n_ + 1) + n_]; }

    void pivot(std::size_t pr, std::size_t pc) {
        const double piv = at(pr, pc);
        const double inv = 1.0 / piv;
        double* prow = &a_[pr * (n_ + 1)];
        for (std::size_t c = 0; c <= n_; ++c) prow[c] *= inv;
        prow[pc] = 1.0;
        for (std::size_t r = 0; r < m_; ++r) {
            if (r == pr) continue;
            double* row = &a_[r * (n_ + 1)];
            const double f = row[pc];
            if (f == 0.0) continue;
            for (std::size_t c = 0; c <= n_; ++c) row[c] -= f * prow[c];
            row[pc] = 0.0;
        }
    }

    std::size_t rows() const { return m_; }
    std::size_t cols() const { return n_; }

  private:
    std::size_t m_, n_;
    std::vector<double> a_;
};

struct Phase {
    Tableau* tab;
    std::vector<std::size_t>* basis;
    std::vector<double> reduced;  // objective row (reduced costs), size cols+1 (last = -objective value)
};

// One simplex phase on the given objective; returns false on iteration limit.
bool run_phase(Tableau& tab, std::vector<std::size_t>& basis, std::vector<double>& cost,
               std::size_t usable_cols, long& iterations, long max_iterations, bool* unbounded) {
    const std::size_t m = tab.rows();
    *unbounded = false;
    // Reduced cost row: z_j - c_j form, maintained incrementally.
    std::vector<double> obj(usable_cols + 1, 0.0);
    for (std::size_t c = 0; c < usable_cols; ++c) obj[c] = cost[c];
    for (std::size_t r = 0; r < m; ++r) {
        const double cb = cost[basis[r]];
        if (cb == 0.0) continue;
        for (std::size_t c = 0; c < usable_cols; ++c) obj[c] -= cb * tab.at(r, c);
        obj[usable_cols] -= cb * tab.rhs(r);
    }
    long stall = 0;
    bool bland = false;
    double last_obj = obj[usable_cols];
    while (iterations < max_iterations) {
        // Entering column.
        std::size_t pc = usable_cols;
        if (!bland) {
            double best = -kReducedCostTol;
            for (std::size_t c = 0; c < usable_cols; ++c) {
                if (obj[c] < best) {
                    best = obj[c];
                    pc = c;
                }
            }
        } else {
            for (std::size_t c = 0; c < usable_cols; ++c) {
                if (obj[c] < -kReducedCostTol) {
                    pc = c;
                    break;
                }
            }
        }
        if (pc == usable_cols) return true;  // optimal
        // Ratio test; ties by smallest basis variable (Bland-friendly).
        std::size_t pr = m;
        double best_ratio = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < m; ++r) {
            const double a = tab.at(r, pc);
            if (a > kPivotTol) {
                const double ratio = tab.rhs(r) / a;
                if (ratio < best_ratio - 1e-12 || (ratio < best_ratio + 1e-12 && (pr == m || basis[r] < basis[pr]))) {
                    best_ratio = ratio;
                    pr = r;
                }
            }
        }
        if (pr == m) {
            *unbounded = true;
            return true;
        }
        tab.pivot(pr, pc);
        basis[pr] = pc;
        // Update the objective row.
        const double f = obj[pc];
        if (f != 0.0) {
            for (std::size_t c = 0; c < usable_cols; ++c) obj[c] -= f * tab.at(pr, c);
            obj[usable_cols] -= f * tab.rhs(pr);
            obj[pc] = 0.0;
        }
        ++iterations;
        if (std::abs(obj[usable_cols] - last_obj) < 1e-13 * (1.0 + std::abs(last_obj))) {
            if (++stall > static_cast<long>(2 * m)) bland = true;  // degenerate streak
        } else {
            stall = 0;
            last_obj = obj[usable_cols];
        }
    }
    return false;
}

}  // namespace

LpResult solve_lp(const LpProblem& problem, long max_iterations) {
    const std::size_t n = problem.num_vars;
    const std::size_t m = problem.rows.size();
    if (problem.objective.size() != n) throw InputError("solve_lp: objective size mismatch");

    // Column layout: [structural | slack/surplus | artificial].
    std::size_t num_slack = 0;
    for (const auto& row : problem.rows) {
        if (row.relation != LpProblem::Relation::Equal) ++num_slack;
    }
    const std::size_t slack_base = n;
    const std::size_t art_base = n + num_slack;
    const std::size_t total_cols = art_base + m;  // at most one artificial per row

    Tableau tab(m, total_cols);
    std::vector<std::size_t> basis(m);
    std::size_t slack_idx = 0;
    std::size_t num_art = 0;
    std::vector<std::size_t> art_cols;
    for (std::size_t r = 0; r < m; ++r) {
        const auto& row = problem.rows[r];
        double sign = 1.0;
        double rhs = row.rhs;
        auto rel = row.relation;
        if (rhs < 0) {  // normalize to nonnegative rhs
            sign = -1.0;
            rhs = -rhs;
            if (rel == LpProblem::Relation::LessEqual) rel = LpProblem::Relation::GreaterEqual;
            else if (rel == LpProblem::Relation::GreaterEqual) rel = LpProblem::Relation::LessEqual;
        }
        for (const auto& [var, coef] : row.coeffs) {
            if (var >= n) throw InputError("solve_lp: coefficient references unknown variable");
            tab.at(r, var) += sign * coef;
        }
        tab.rhs(r) = rhs;
        if (rel == LpProblem::Relation::LessEqual) {
            tab.at(r, slack_base + slack_idx) = 1.0;
            basis[r] = slack_base + slack_idx;
            ++slack_idx;
        } else if (rel == LpProblem::Relation::GreaterEqual) {
            tab.at(r, slack_base + slack_idx) = -1.0;
            ++slack_idx;
            const std::size_t art = art_base + num_art++;
            tab.at(r, art) = 1.0;
            basis[r] = art;
            art_cols.push_back(art);
        } else {
            const std::size_t art = art_base + num_art++;
            tab.at(r, art) = 1.0;
            basis[r] = art;
            art_cols.push_back(art);
        }
    }

    LpResult result;
    long iterations = 0;
    bool unbounded = false;

    if (num_art > 0) {
        std::vector<double> phase1_cost(total_cols, 0.0);
        for (std::size_t c : art_cols) phase1_cost[c] = 1.0;
        if (!run_phase(tab, basis, phase1_cost, total_cols, iterations, max_iterations, &unbounded)) {
            result.status = LpResult::Status::IterationLimit;
            result.iterations = iterations;
            return result;
        }
        double art_value = 0.0;
        for (std::size_t r = 0; r < m; ++r) {
            if (basis[r] >= art_base) art_value += tab.rhs(r);
        }
        if (art_value > 1e-7) {
            result.status = LpResult::Status::Infeasible;
            result.iterations = iterations;
            result.residual = art_value;
            return result;
        }
        // Drive any residual artificial out of the basis.
        for (std::size_t r = 0; r < m; ++r) {
            if (basis[r] < art_base) continue;
            std::size_t pc = art_base;
            for (std::size_t c = 0; c < art_base; ++c) {
                if (std::abs(tab.at(r, c)) > kPivotTol) {
                    pc = c;
                    break;
                }
            }
            if (pc < art_base) {
                tab.pivot(r, pc);
                basis[r] = pc;
            }
            // else: redundant row, the artificial stays basic at value ~0.
        }
    }

    std::vector<double> phase2_cost(total_cols, 0.0);
    for (std::size_t c = 0; c < n; ++c) phase2_cost[c] = problem.objective[c];
    // Artificial columns are frozen out by restricting the usable column range;
    // rows whose artificial stayed basic keep it at value 0.
    if (!run_phase(tab, basis, phase2_cost, art_base, iterations, max_iterations, &unbounded)) {
        result.status = LpResult::Status::IterationLimit;
        result.iterations = iterations;
        return result;
    }
    if (unbounded) {
        result.status = LpResult::Status::Unbounded;
        result.iterations = iterations;
        return result;
    }

    result.solution.assign(n, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
        if (basis[r] < n) result.solution[basis[r]] = tab.rhs(r);
    }
    result.objective = 0.0;
    for (std::size_t c = 0; c < n; ++c) result.objective += problem.objective[c] * result.solution[c];
    result.iterations = iterations;
    // Residual check against the original rows.
    double residual = 0.0;
    for (const auto& row : problem.rows) {
        double lhs = 0.0;
        for (const auto& [var, coef] : row.coeffs) lhs += coef * result.solution[var];
        double viol = 0.0;
        if (row.relation == LpProblem::Relation::LessEqual) viol = lhs - row.rhs;
        else if (row.relation == LpProblem::Relation::GreaterEqual) viol = row.rhs - lhs;
        else viol = std::abs(lhs - row.rhs);
        residual = std::max(residual, viol);
    }
    for (double v : result.solution) residual = std::max(residual, -v);
    result.residual = residual;
    result.status = LpResult::Status::Optimal;
    return result;
}

}  // namespace kcluster
