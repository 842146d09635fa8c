#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "kcluster/instance.hpp"
#include "kcluster/solution.hpp"

namespace kcluster {

// A solution allowed to open up to k + c facilities.
struct PseudoSolution {
    std::vector<std::size_t> open;
    double cost = 0.0;
};

struct ReductionConfig {
    double xi = 1.0 / 3.0;
    double delta = 1.0 / 9.0;  // in (0, 1/6)
    long long t = 3;
    int c = 1;
    double A = 0.0;  // density parameter (opt/t with an exact oracle, LP bound in field mode)

    void validate() const;
};

// B = 2 (A + cost(T)/t) (2/(delta xi))^p.
double reduction_bound_B(const ReductionConfig& cfg, double cost_T, double p);

// Exact optimum by exhaustive enumeration of k-subsets, ties by
// lexicographically least subset.  Throws SizeError when C(|F|, k) > 1e6.
IntegralSolution brute_force_opt(const Instance& inst);

// ((1-xi) d(i,OPT))^p |CBall(i, xi d(i,OPT))| > A with strict client balls.
bool is_dense(const Instance& inst, std::size_t facility, double A, const std::vector<std::size_t>& opt_open,
              double xi = 1.0 / 3.0);

// All facility subsets reachable by removing strict facility balls
// FBall(i_x, d(i_x, i'_x)) along pair sequences of length at most t, where
// each i_x must still be present (pruned prefixes are skipped).  Implemented
// as a breadth-first search over distinct reachable subsets, which emits the
// same set of instances as the ordered-sequence enumeration.
std::vector<Instance> reduce_to_sparse(const Instance& inst, long long t, std::size_t state_budget = 2000000);

// Greedy facility dropping with budget B, then (D, V) enumeration with the
// local FBall improvement.  Guarantees
//   cost(S) <= max(cost(T) + c B, ((xi+delta)/(xi-delta))^p opt).
IntegralSolution solve_sparse(const Instance& inst, const PseudoSolution& pseudo, const ReductionConfig& cfg);

// Composition: delta is the largest value with ((xi+delta)/(xi-delta))^p <=
// alpha (capped below 1/6), t = ceil((2/(delta xi))^p 4 alpha c / eps), A =
// opt/t.  When opt_lower_bound is not given the brute-force oracle supplies
// it exactly.  Returns a solution with cost at most (alpha+eps) opt on
// oracle-checkable instances.
IntegralSolution pseudo_to_true(const Instance& inst, const PseudoSolution& pseudo, double alpha, double eps,
                                std::optional<double> opt_lower_bound = std::nullopt);

// The delta used by the composition for a given alpha.
double pseudo_to_true_delta(double alpha, double p);

}  // namespace kcluster
