#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "kcluster/instance.hpp"
#include "kcluster/solution.hpp"

namespace kcluster {

struct LpSolveOptions {
    double accuracy = 1e-7;
    long max_iterations = 500000;
};

// Solves the standard relaxation
//   min sum d^p(i,j) x_ij   s.t.  sum_i y_i <= k,  sum_i x_ij = 1,
//   0 <= x_ij <= y_i <= 1
// and repairs the returned point to exact feasibility (clamp y, rescale if
// sum y overshoots k, refill x greedily by distance).  Throws SolverError on
// nonconvergence, carrying iteration count and residual.
FractionalSolution solve_relaxation(const Instance& inst, const LpSolveOptions& opts = {});

// The optimal assignment for a fixed opening vector: every client filled
// greedily by ascending distance.  Feasible by construction (needs sum y >= 1).
FractionalSolution assignment_for_opening(const Instance& inst, std::vector<double> y);

// Bookkeeping from facility splitting: each split facility keeps a pointer to
// the facility it came from and the share of that facility's opening.
struct SplitMap {
    std::vector<std::size_t> original;  // per split facility: position in the pre-split instance
    std::vector<double> share;

    // Maps an open set in split space back to distinct original facilities.
    std::vector<std::size_t> map_back(const std::vector<std::size_t>& open_split) const;
};

struct SplitResult {
    Instance instance;  // facilities replaced by their splits (same metric points)
    FractionalSolution solution;
    SplitMap split;
};

// Splits facilities so that every x_ij is either 0 or the full y_i of a split
// facility.  Total cost and sum of openings are preserved.
SplitResult split_for_all_or_nothing(const Instance& inst, const FractionalSolution& sol);

// Per-client set F_j: the nearest facilities whose openings sum to exactly 1.
struct NearestMassSet {
    struct Entry {
        std::size_t facility;
        double y;
        double distance;
    };
    std::vector<std::vector<Entry>> per_client;  // ascending distance

    double d_av(std::size_t client) const;   // sum y_i d(i,j) over F_j
    double d_max(std::size_t client) const;  // max distance in F_j
    double cost(const Instance& inst, std::size_t client) const;  // sum y_i d^p(i,j)
};

struct NearestMassResult {
    Instance instance;  // boundary facilities split as needed
    FractionalSolution solution;
    SplitMap split;
    NearestMassSet sets;
};

// Computes F_j for every client, splitting boundary facilities so inclusion
// is all-or-nothing.  Requires sum y >= 1.
NearestMassResult nearest_mass_sets(const Instance& inst, const FractionalSolution& sol);

// Harness round-trip format: {"y": [...], "x": [[i, j, v]...], "objective": real}.
std::string solution_to_json_string(const Instance& inst, const FractionalSolution& sol);
FractionalSolution solution_from_json_string(const std::string& text, std::size_t num_facilities,
                                             std::size_t num_clients);

}  // namespace kcluster
