#include "kcluster/solution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kcluster/errors.hpp"

namespace kcluster {

void FractionalSolution::validate(const Instance& inst, double tol) const {
    if (y.size() != inst.num_facilities()) throw InvariantError("fractional solution: y size mismatch");
    if (x.size() != inst.num_clients()) throw InvariantError("fractional solution: x size mismatch");
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!(y[i] >= -tol && y[i] <= 1.0 + tol)) {
            throw InvariantError("fractional solution: y[" + std::to_string(i) + "] outside [0,1]");
        }
    }
    double total = total_opening();
    if (total > inst.k + 1e-9 * tolerance_scale(total, inst.k)) {
        throw InvariantError("fractional solution: sum y exceeds k");
    }
    for (std::size_t j = 0; j < x.size(); ++j) {
        double row = 0.0;
        for (const auto& share : x[j]) {
            if (share.facility >= y.size()) throw InvariantError("fractional solution: x references unknown facility");
            if (share.value < -tol) throw InvariantError("fractional solution: negative x entry");
            if (share.value > y[share.facility] + tol * tolerance_scale(share.value, y[share.facility])) {
                throw InvariantError("fractional solution: x_ij exceeds y_i for client " + std::to_string(j));
            }
            row += share.value;
        }
        if (!approx_eq(row, 1.0, tol)) {
            throw InvariantError("fractional solution: sum_i x_ij != 1 for client " + std::to_string(j));
        }
    }
}

bool FractionalSolution::is_integral(double tol) const {
    for (double v : y) {
        if (v > tol && v < 1.0 - tol) return false;
    }
    return true;
}

double FractionalSolution::total_opening() const {
    double s = 0.0;
    for (double v : y) s += v;
    return s;
}

double fractional_cost_unchecked(const Instance& inst, const FractionalSolution& sol) {
    double cost = 0.0;
    for (std::size_t j = 0; j < sol.x.size(); ++j) {
        for (const auto& share : sol.x[j]) cost += share.value * inst.cf_power(j, share.facility);
    }
    return cost;
}

double fractional_cost(const Instance& inst, const FractionalSolution& sol) {
    sol.validate(inst);
    return fractional_cost_unchecked(inst, sol);
}

double cost_under_opening(const Instance& inst, std::size_t client, const std::vector<double>& ybar) {
    if (ybar.size() != inst.num_facilities()) throw InputError("cost_under_opening: ybar size mismatch");
    std::vector<std::pair<double, std::size_t>> order;
    order.reserve(ybar.size());
    double total = 0.0;
    for (std::size_t i = 0; i < ybar.size(); ++i) {
        if (ybar[i] < 0) throw InputError("cost_under_opening: negative opening");
        if (ybar[i] > 0) {
            order.emplace_back(inst.cf_distance(client, i), i);
            total += ybar[i];
        }
    }
    if (total < 1.0 - 1e-9) throw InfeasibleError("cost_under_opening: total opening below 1");
    std::sort(order.begin(), order.end());
    double remaining = 1.0;
    double cost = 0.0;
    for (const auto& [d, i] : order) {
        double take = std::min(remaining, ybar[i]);
        cost += take * inst.cf_power(client, i);
        remaining -= take;
        if (remaining <= 1e-15) break;
    }
    return cost;
}

IntegralSolution integral_cost(const Instance& inst, const std::vector<std::size_t>& open) {
    if (open.empty()) throw InputError("integral_cost: empty open set");
    IntegralSolution sol;
    sol.open = open;
    std::sort(sol.open.begin(), sol.open.end());
    sol.open.erase(std::unique(sol.open.begin(), sol.open.end()), sol.open.end());
    for (std::size_t i : sol.open) {
        if (i >= inst.num_facilities()) throw InputError("integral_cost: unknown facility in open set");
    }
    sol.assignment.resize(inst.num_clients());
    for (std::size_t j = 0; j < inst.num_clients(); ++j) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_i = sol.open[0];
        for (std::size_t i : sol.open) {
            double d = inst.cf_distance(j, i);
            if (d < best) {  // ties keep the lowest facility index (open is sorted)
                best = d;
                best_i = i;
            }
        }
        sol.assignment[j] = best_i;
        sol.total_cost += inst.cf_power(j, best_i);
    }
    return sol;
}

}  // namespace kcluster
