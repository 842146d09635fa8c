#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "kcluster/instance.hpp"

namespace kcluster {

// Fractional neighborhood graph: every facility with y'_i > 0 receives
// in-edges from its nearest unit of fractional opening.  Edge sources are the
// (distance, index)-sorted prefix with the node itself always first, so
// w_{i,i} = y'_i holds even with co-located facilities; only the last source
// may carry a partial weight.
struct WeightedNeighborhoodGraph {
    struct Edge {
        std::uint32_t source;
        std::uint32_t target;
        double weight;
    };
    std::size_t num_facilities = 0;
    std::vector<Edge> edges;                            // grouped by target, sources in fill order
    std::vector<std::vector<std::uint32_t>> out_edges;  // per facility: indices into `edges`
    std::vector<std::vector<std::uint32_t>> in_edges;   // per facility: indices into `edges`

    std::string dump_edge_list() const;  // "source target weight" lines for golden tests
};

WeightedNeighborhoodGraph build_weighted(const std::vector<double>& yprime, const Instance& inst,
                                         const FacilityNeighborOrder& order);

// The copy model of the k+O(1) rounding: Delta copies per unit of opening.
struct FacilityCopy {
    std::uint32_t facility;  // position in Instance::facilities
    std::uint64_t copy_id;   // globally fresh, never reused

    friend bool operator==(const FacilityCopy&, const FacilityCopy&) = default;
};

struct CopySet {
    std::vector<FacilityCopy> copies;
    int delta = 1;
    std::uint64_t next_copy_id = 0;
};

// Delta * y''_i copies of every facility i; y'' must be 1/Delta-integral.
CopySet build_copies(const std::vector<double>& ydoubleprime, int delta);

// Unweighted copy graph: every node receives edges from the Delta nearest
// copies (itself first, then ties by (facility index, copy id)).
struct CopyNeighborhoodGraph {
    std::vector<FacilityCopy> nodes;
    int delta = 1;
    std::vector<std::vector<std::uint32_t>> in_edges;   // per node: source node positions
    std::vector<std::vector<std::uint32_t>> out_edges;  // per node: target node positions

    // (deg_in - deg_out)/Delta == (Delta - deg_out)/Delta.
    double imbalance(std::size_t node) const {
        return (static_cast<double>(delta) - static_cast<double>(out_edges[node].size())) / delta;
    }

    std::string dump_edge_list() const;
};

CopyNeighborhoodGraph build_copy_graph(const std::vector<FacilityCopy>& fprime, int delta, const Instance& inst,
                                       const FacilityNeighborOrder& order);

}  // namespace kcluster
