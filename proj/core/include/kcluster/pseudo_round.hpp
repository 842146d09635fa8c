#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kcluster/instance.hpp"
#include "kcluster/neighborhood_graph.hpp"
#include "kcluster/preprocess.hpp"
#include "kcluster/rng.hpp"
#include "kcluster/solution.hpp"

namespace kcluster {

// Mutable state of the k+O(1) rounding: the copy multiset F', the forced-open
// originals, and an event log.  Fresh copies always receive ids that were
// never used before, so they are disjoint from the initial copy set.
struct RoundingState {
    std::vector<FacilityCopy> fprime;
    std::vector<char> forced;  // per facility
    std::uint64_t next_copy_id = 0;
    int iteration = 0;

    struct Log {
        std::vector<double> z_values;  // branch-(b) net changes, in units of delta
        int unbalanced_calls = 0;
        int balanced_calls = 0;
        int force_events = 0;
    } log;

    std::size_t forced_count() const;
    std::vector<std::size_t> forced_list() const;
};

// F+/F0/F- partition of the copy graph by imbalance sign, with the quantity
// A = (1/delta) sum_{F+} imb = (1/delta) sum_{F-} |imb|.
struct ImbalancePartition {
    std::vector<std::uint32_t> plus, zero, minus;
    double A = 0.0;
};

ImbalancePartition partition_by_imbalance(const CopyNeighborhoodGraph& graph);

// Sampling stage of the unbalanced update, captured after R-removal and
// fictitious-facility construction so that Z(X) is a pure function of the
// selection indicator.  Exposed for the bounded-differences audits.
struct UnbalancedContext {
    int delta = 1;
    std::vector<std::uint32_t> surviving;      // node ids of the pre-removal graph
    std::vector<std::uint32_t> node_facility;  // per surviving node: facility position

    struct Candidate {
        bool fictitious = false;
        double probability = 0.0;
        double kappa = 0.0;                       // Lipschitz bound for Z
        std::uint32_t facility = 0;               // meaningful for real candidates
        std::vector<std::uint32_t> out_targets;   // surviving-node indices removed on selection
    };
    std::vector<Candidate> candidates;

    double z_of(const std::vector<char>& indicator) const;
    std::vector<char> sample(RngStream& rng) const;
};

struct UnbalancedOutcome {
    UnbalancedContext context;
    std::vector<char> indicator;  // per context candidate: selected into I
};

// One unbalanced-update step.  Branch (a) (A at most the force threshold)
// force-opens every original with a copy in F+ or F- and deletes those
// copies.  Branch (b) force-opens the heavy-negative set R, restores
// in-degrees with fictitious facilities, samples I independently and replaces
// the out-neighborhoods of I with fresh copy blocks.  Returns the sampling
// outcome when branch (b) ran.
std::optional<UnbalancedOutcome> unbalanced_update(RoundingState& state, const CopyNeighborhoodGraph& graph,
                                                   const ImbalancePartition& part, const ScaleConfig& cfg,
                                                   RngStream& rng);

// One balanced-update step over F0: randomized greedy conflict-free
// selection, then replacement of out-neighborhoods by fresh blocks.  Leaves
// |F'| unchanged exactly.  Returns the selected node ids.
std::vector<std::uint32_t> balanced_update(RoundingState& state, const CopyNeighborhoodGraph& graph,
                                           const ImbalancePartition& part, const ScaleConfig& cfg, RngStream& rng);

struct IterateOptions {
    bool track_fnew = false;  // diagnostic trajectory of the f^new potential
};

struct IterateResult {
    std::vector<double> ybar;    // per facility: copies/delta, forced overridden to 1
    std::vector<double> d2max;   // per client: d''_max from the initial copy set
    RoundingState state;
    int iterations_run = 0;

    // f^new diagnostic (when tracked): per-client count of iterations whose
    // realized potential increased, and total iterations observed.
    std::vector<long> fnew_increases;
    long fnew_steps = 0;
};

// Algorithm: T iterations, each running unbalanced- or balanced-update with
// probability 1/2 on a freshly built copy graph; then the copy counts are
// read off as the fractional k-center input.
IterateResult iterate(const Instance& inst, const std::vector<double>& ydoubleprime, const ScaleConfig& cfg,
                      RngStream& rng, const FacilityNeighborOrder& order, const IterateOptions& opts = {});

struct KCenterInput {
    std::vector<double> ybar;      // per facility; entries are multiples of 1/delta plus forced ones
    std::vector<double> dbar_max;  // per client: minimal r with ybar(ball(j, r)) >= 1
};

// Throws InfeasibleError if some client cannot gather unit mass.
KCenterInput kcenter_input(const Instance& inst, const std::vector<double>& ybar);

struct KCenterResult {
    IntegralSolution solution;
    std::vector<std::size_t> selected_clients;  // filter representatives that opened a facility
};

// Rounds the fractional k-center input: facilities with ybar >= 1 stay open,
// uncovered clients are filtered greedily by ascending radius, and each
// selected client opens the nearest positively-fractional facility within its
// radius.  Guarantees |open| <= ceil(|ybar|_1), forced facilities stay open,
// and every client connects within 3 dbar_max(j).
KCenterResult kcenter_finish(const KCenterInput& input, const Instance& inst);

// f^new(S, b) with |S| alive copies of the client's initial block.
double potential_f_new(std::size_t s_size, double sum_dp_over_S, double b, double alpha, const ScaleConfig& cfg);

}  // namespace kcluster
