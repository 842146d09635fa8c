#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "kcluster/instance.hpp"

namespace kcluster {

struct FacilityShare {
    std::size_t facility = 0;  // facility position in Instance::facilities
    double value = 0.0;
};

// LP solution: opening vector y over facilities, sparse assignment x per client.
struct FractionalSolution {
    std::vector<double> y;
    std::vector<std::vector<FacilityShare>> x;  // x[client] sorted by facility

    // Checks sum_i x_ij = 1 per client, x_ij <= y_i, sum y <= k, y in [0,1].
    // Throws InvariantError naming the violated constraint.
    void validate(const Instance& inst, double tol = 1e-9) const;

    bool is_integral(double tol = 1e-9) const;

    double total_opening() const;
};

struct IntegralSolution {
    std::vector<std::size_t> open;        // facility positions, sorted
    std::vector<std::size_t> assignment;  // per client: assigned facility position
    double total_cost = 0.0;
};

// sum_{i,j} d^p(i,j) x_ij; validates the solution first.
double fractional_cost(const Instance& inst, const FractionalSolution& sol);

// Same objective without the validation pass (callers that already validated).
double fractional_cost_unchecked(const Instance& inst, const FractionalSolution& sol);

// cost_{ybar}(j): cheapest way to buy one unit of fractional connection for
// client j under capacities ybar, filled greedily by ascending distance
// (ties by lowest facility index).  Throws InfeasibleError when sum ybar < 1.
double cost_under_opening(const Instance& inst, std::size_t client, const std::vector<double>& ybar);

// Nearest-open-facility assignment for every client (ties by lowest facility
// index); total_cost sums d^p.  Throws InputError on an empty open set.
IntegralSolution integral_cost(const Instance& inst, const std::vector<std::size_t>& open);

}  // namespace kcluster
