#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "kcluster/instance.hpp"
#include "kcluster/lp.hpp"
#include "kcluster/rng.hpp"

namespace kcluster {

// Scale parameters for the preprocessing and pseudo-rounding stages.  The
// exponents c1..c5 follow the analysis; the theoretical magnitudes
// (delta = 1/eps^c1, L = eps^c2, ...) are not executable at desk scale, so
// surrogate values can be supplied and are recorded in every report.
struct ScaleConfig {
    double epsilon = 0.25;
    double p = 1.0;
    int c1 = 12, c2 = 51, c3 = 141, c4 = 89, c5 = 13;

    std::optional<int> delta_cap;            // surrogate Delta          (default 16)
    std::optional<double> L;                 // surrogate L              (default Delta/20, so 2L/Delta = 0.1)
    std::optional<int> T;                    // surrogate iteration count (default 200)
    std::optional<double> force_threshold;   // surrogate for the O(1/eps^c3) test (default 4*Delta)
    std::optional<int> budget;               // open-count budget audited by the harness (default 8)
    std::optional<double> z_cap;             // surrogate cap for the Z-tail report (default 1.0)
    std::optional<double> r_threshold;       // overrides A*eps^c3 in unbalanced-update

    static ScaleConfig for_p(double p);
    void validate() const;

    int effective_delta() const { return delta_cap.value_or(16); }
    double effective_L() const { return L.value_or(effective_delta() / 20.0); }
    int effective_T() const { return T.value_or(200); }
    double effective_force_threshold() const { return force_threshold.value_or(4.0 * effective_delta()); }
    int effective_budget() const { return budget.value_or(8); }
    double effective_z_cap() const { return z_cap.value_or(1.0); }
    double effective_r_threshold(double A) const;

    double theoretical_delta() const;  // 1/eps^c1
    double theoretical_L() const;      // eps^c2
    double eps_pow(int c) const;

    std::string to_json_string() const;  // includes surrogate overrides and theoretical formulas
};

// Output of the filtering step: representatives C*, their balls B_j and cores
// B'_j, the representative map and the client types.
struct FilterResult {
    std::vector<std::size_t> representatives;         // client indices, in selection order
    std::vector<std::size_t> representative_of;       // per client: index into `representatives`
    std::vector<int> client_type;                     // 1, 2 or 3

    // Parallel to `representatives`:
    std::vector<std::vector<std::size_t>> ball;       // B_j (facility positions)
    std::vector<std::vector<std::size_t>> core;       // B'_j
    std::vector<bool> ball_is_full_set;               // B_j == F_j
    std::vector<double> ball_radius;                  // d(j, C*\{j})/2 when not full

    std::string to_json_string() const;
};

// Greedy filtering by ascending d_av (ties by client index); asserts the
// structural guarantees: disjoint balls, the ball-volume bounds, the
// representative conditions and the non-type-1 distance bound.
FilterResult filter(const Instance& inst, const FractionalSolution& sol, const NearestMassSet& sets,
                    const ScaleConfig& cfg);

// Core consolidation y -> y': within every core one facility, drawn with
// probability proportional to y, receives the whole core mass.  E[y'] = y.
std::vector<double> consolidate_cores(const Instance& inst, const std::vector<double>& y, const FilterResult& filt,
                                      RngStream& rng);

// Randomized pipage rounding of y'/g to integers guided by a laminar family,
// returning y'' with entries that are integer multiples of g.  Marginals are
// preserved, set sums over family members move to an adjacent multiple of g,
// and entries paired within a set are negatively correlated.  The family is
// validated; a crossing pair raises InputError naming both sets.
std::vector<double> pipage_round(const std::vector<double>& yprime, const std::vector<std::vector<std::size_t>>& family,
                                 double g, RngStream& rng);

}  // namespace kcluster
