#pragma once

#include <cstddef>
#include <vector>

namespace kcluster {

// Minimal dense LP description: minimize c.z subject to the rows, z >= 0.
struct LpProblem {
    enum class Relation { LessEqual, Equal, GreaterEqual };
    struct Row {
        std::vector<std::pair<std::size_t, double>> coeffs;  // (variable, coefficient)
        Relation relation = Relation::LessEqual;
        double rhs = 0.0;
    };
    std::size_t num_vars = 0;
    std::vector<double> objective;
    std::vector<Row> rows;
};

struct LpResult {
    enum class Status { Optimal, Infeasible, Unbounded, IterationLimit };
    Status status = Status::Optimal;
    double objective = 0.0;
    std::vector<double> solution;
    long iterations = 0;
    double residual = 0.0;  // max constraint violation of the returned point
};

// Two-phase dense tableau simplex with a Bland fallback against cycling.
// Adequate for desk-scale relaxations (hundreds of rows/columns).
LpResult solve_lp(const LpProblem& problem, long max_iterations = 200000);

}  // namespace kcluster
