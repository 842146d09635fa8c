#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kcluster/instance.hpp"
#include "kcluster/lp.hpp"
#include "kcluster/neighborhood_graph.hpp"
#include "kcluster/rng.hpp"

namespace kcluster {

struct LmpOptions {
    // Skip non-useful iterations by drawing only among fractional facilities
    // and integral facilities that still have fractional out-neighbors.  The
    // restricted draw leaves the law of the useful transitions unchanged
    // because the excluded facilities are exact no-ops.
    bool conditional_sampling = true;
    std::uint64_t iteration_cap = 1000000;
    bool record_trace = false;
    bool check_drift = true;  // assert zero expected drift at every state
};

struct LmpIterationRecord {
    std::size_t chosen;
    std::vector<std::size_t> removed;  // facilities zeroed this iteration
};

struct LmpClientRecord {
    bool happy = false;
    std::size_t facility = 0;       // happy connection target (valid when happy)
    double cost = 0.0;              // d^p at selection time; nearest-open fallback otherwise
    double nearest_open_cost = 0.0; // d^p to the nearest finally-open facility
};

struct LmpRun {
    std::vector<double> initial_y;
    std::vector<std::size_t> open;  // facility positions with y' = 1 at the end
    std::vector<LmpIterationRecord> trace;
    std::vector<LmpClientRecord> clients;  // present when nearest-mass sets were given
    std::uint64_t useful_iterations = 0;
    std::uint64_t total_iterations = 0;
};

// Observes (y', graph) at the top of every iteration, before the draw.
using LmpObserver = std::function<void(const std::vector<double>&, const WeightedNeighborhoodGraph&)>;

// Algorithm: repeatedly draw a facility proportionally to y', zero each
// out-neighbor with probability w/y', open the drawn facility, until y' is
// integral.  Client accounting (happy connections) follows the given
// nearest-mass sets when provided.
LmpRun lmp_round(const Instance& inst, const std::vector<double>& y, const FacilityNeighborOrder& order,
                 RngStream& rng, const NearestMassSet* sets = nullptr, const LmpOptions& opts = {},
                 const LmpObserver* observer = nullptr);

// (1/|y'|_1) sum_{i'} y'_{i'} ( sum_{i in out(i')} (w_{i'i}/y'_{i'}) y'_i - 1 );
// identically zero for every valid state.
double expected_drift(const WeightedNeighborhoodGraph& graph, const std::vector<double>& yprime);

struct ClientFacilityTerm {
    double y;
    double distance;
};

// f(S, b) = alpha sum_{i in S} y_i d_i^p + (1 - y(S)) b^p, with 0 * inf^p = 0.
double potential_f(const std::vector<ClientFacilityTerm>& S, double b, double alpha, double p);

struct OneStepCheck {
    double lhs;  // exact one-iteration expectation of the successor potential
    double rhs;  // f(S, b)
};

// Exact enumeration of one iteration (all draws x all coin-flip outcomes) for
// small states; |F| <= 8.  Happy connections contribute d_i^p.
OneStepCheck one_step_potential_check(const std::vector<double>& yprime, const Instance& inst,
                                      const FacilityNeighborOrder& order,
                                      const std::vector<double>& client_distance, const std::vector<bool>& in_S,
                                      double b, double alpha);

// Certificate of Theorem-1 form: for facility set T with openings y and a
// client j,
//   sum_{i,i'} y_i y_{i'} max{alpha d^p(i,j), (d(i,j)+d(i,i'))^p}
//     <= (2 alpha - 1) y(T) sum_i y_i d^p(i,j)
// within 1e-9 relative slack.
bool verify_eq1(const std::vector<double>& y, const std::vector<double>& d_to_client,
                const std::vector<std::vector<double>>& d_pairwise, double p, double alpha);

// Euclidean pairwise certificates for p = 2 with the client at the origin:
// diff(i,i') + diff(i',i) <= -2(alpha-1) <v_i, v_i'>, where for alpha = 4 the
// relaxed difference (via (a+b)^2 <= 2a^2+2b^2) is used and for alpha = 11/3
// the unrelaxed one.
bool verify_euclid_pair(const std::vector<double>& vi, const std::vector<double>& vip, double alpha);

}  // namespace kcluster
