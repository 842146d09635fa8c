#include "kcluster/neighborhood_graph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kcluster/errors.hpp"

namespace kcluster {

WeightedNeighborhoodGraph build_weighted(const std::vector<double>& yprime, const Instance& inst,
                                         const FacilityNeighborOrder& order) {
    const std::size_t nf = inst.num_facilities();
    if (yprime.size() != nf) throw InputError("build_weighted: y' size mismatch");
    double total = 0.0;
    for (double v : yprime) {
        if (v < 0.0 || v > 1.0 + 1e-12) throw InputError("build_weighted: y' entry outside [0,1]");
        total += v;
    }
    if (total < 1.0 - 1e-9) throw InfeasibleError("build_weighted: sum y' below 1");

    WeightedNeighborhoodGraph g;
    g.num_facilities = nf;
    g.out_edges.resize(nf);
    g.in_edges.resize(nf);
    auto add_edge = [&](std::uint32_t src, std::size_t dst, double w) {
        const std::uint32_t e = static_cast<std::uint32_t>(g.edges.size());
        g.edges.push_back({src, static_cast<std::uint32_t>(dst), w});
        g.out_edges[src].push_back(e);
        g.in_edges[dst].push_back(e);
    };
    for (std::size_t i = 0; i < nf; ++i) {
        if (yprime[i] <= 0.0) continue;
        // Self-edge first so w_{i,i} = y'_i even when another facility is co-located.
        double need = 1.0;
        add_edge(static_cast<std::uint32_t>(i), i, std::min(need, yprime[i]));
        need -= std::min(need, yprime[i]);
        if (need > 1e-12) {
            for (std::uint32_t src : order.order(i)) {
                if (src == i) continue;
                const double ys = yprime[src];
                if (ys <= 0.0) continue;
                const double w = std::min(need, ys);
                add_edge(src, i, w);
                need -= w;
                if (need <= 1e-12) break;
            }
        }
        if (need > 1e-9) throw InfeasibleError("build_weighted: could not gather unit in-mass");
    }
    return g;
}

std::string WeightedNeighborhoodGraph::dump_edge_list() const {
    std::ostringstream out;
    for (const auto& e : edges) out << e.source << " " << e.target << " " << e.weight << "\n";
    return out.str();
}

CopySet build_copies(const std::vector<double>& ydoubleprime, int delta) {
    if (delta < 1) throw InputError("build_copies: delta must be >= 1");
    CopySet cs;
    cs.delta = delta;
    for (std::size_t i = 0; i < ydoubleprime.size(); ++i) {
        const double scaled = ydoubleprime[i] * delta;
        const double rounded = std::round(scaled);
        if (std::abs(scaled - rounded) > 1e-6) {
            throw InputError("build_copies: y'' is not 1/delta-integral at facility " + std::to_string(i));
        }
        const long count = static_cast<long>(rounded);
        for (long c = 0; c < count; ++c) {
            cs.copies.push_back({static_cast<std::uint32_t>(i), cs.next_copy_id++});
        }
    }
    return cs;
}

CopyNeighborhoodGraph build_copy_graph(const std::vector<FacilityCopy>& fprime, int delta, const Instance& inst,
                                       const FacilityNeighborOrder& order) {
    const std::size_t n = fprime.size();
    if (n < static_cast<std::size_t>(delta)) {
        throw InfeasibleError("build_copy_graph: fewer than delta copies");
    }
    CopyNeighborhoodGraph g;
    g.nodes = fprime;
    g.delta = delta;
    g.in_edges.resize(n);
    g.out_edges.resize(n);

    // Per facility: positions of its copies, ordered by copy id.
    std::vector<std::vector<std::uint32_t>> by_facility(inst.num_facilities());
    std::vector<std::uint32_t> pos(n);
    for (std::uint32_t v = 0; v < n; ++v) by_facility[fprime[v].facility].push_back(v);
    for (auto& vec : by_facility) {
        std::sort(vec.begin(), vec.end(),
                  [&](std::uint32_t a, std::uint32_t b) { return fprime[a].copy_id < fprime[b].copy_id; });
    }

    for (std::uint32_t v = 0; v < n; ++v) {
        auto& in = g.in_edges[v];
        in.push_back(v);  // self first
        const std::uint32_t home = fprime[v].facility;
        for (std::uint32_t f : order.order(home)) {
            if (in.size() >= static_cast<std::size_t>(delta)) break;
            for (std::uint32_t u : by_facility[f]) {
                if (u == v) continue;
                in.push_back(u);
                if (in.size() >= static_cast<std::size_t>(delta)) break;
            }
        }
        if (in.size() != static_cast<std::size_t>(delta)) {
            throw InfeasibleError("build_copy_graph: could not gather delta in-edges");
        }
    }
    for (std::uint32_t v = 0; v < n; ++v) {
        for (std::uint32_t u : g.in_edges[v]) g.out_edges[u].push_back(v);
    }
    return g;
}

std::string CopyNeighborhoodGraph::dump_edge_list() const {
    std::ostringstream out;
    for (std::size_t v = 0; v < nodes.size(); ++v) {
        for (std::uint32_t u : in_edges[v]) {
            out << nodes[u].facility << ":" << nodes[u].copy_id << " " << nodes[v].facility << ":"
                << nodes[v].copy_id << "\n";
        }
    }
    return out.str();
}

}  // namespace kcluster
