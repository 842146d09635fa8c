#include "kcluster/lmp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kcluster/errors.hpp"

namespace kcluster {

namespace {

bool is_fractional(double v) { return v > 0.0 && v < 1.0; }

double pow_p(double base, double p) {
    if (p == 1.0) return base;
    if (p == 2.0) return base * base;
    return std::pow(base, p);
}

}  // namespace

double expected_drift(const WeightedNeighborhoodGraph& graph, const std::vector<double>& yprime) {
    double total = 0.0;
    for (double v : yprime) total += v;
    if (total <= 0) throw InputError("expected_drift: empty opening vector");
    double acc = 0.0;
    for (const auto& e : graph.edges) acc += e.weight * yprime[e.target];
    return (acc - total) / total;
}

LmpRun lmp_round(const Instance& inst, const std::vector<double>& y, const FacilityNeighborOrder& order,
                 RngStream& rng, const NearestMassSet* sets, const LmpOptions& opts, const LmpObserver* observer) {
    const std::size_t nf = inst.num_facilities();
    if (y.size() != nf) throw InputError("lmp_round: y size mismatch");

    LmpRun run;
    run.initial_y = y;
    std::vector<double> yp = y;

    // Alive facilities of each client's F_j, for happy-connection accounting.
    std::vector<std::vector<std::size_t>> alive_sets;
    std::vector<bool> happy;
    std::vector<std::vector<std::size_t>> watchers(nf);  // facility -> client ids in whose F_j it lies
    if (sets != nullptr) {
        alive_sets.resize(sets->per_client.size());
        happy.assign(sets->per_client.size(), false);
        run.clients.resize(sets->per_client.size());
        for (std::size_t j = 0; j < sets->per_client.size(); ++j) {
            for (const auto& e : sets->per_client[j]) {
                if (yp[e.facility] > 0) {
                    alive_sets[j].push_back(e.facility);
                    watchers[e.facility].push_back(j);
                }
            }
        }
    }

    std::vector<double> weights(nf);
    std::vector<std::size_t> removed;
    for (;;) {
        bool integral = true;
        for (double v : yp) {
            if (is_fractional(v)) {
                integral = false;
                break;
            }
        }
        if (integral) break;
        if (run.total_iterations >= opts.iteration_cap) {
            throw InvariantError("lmp_round: iteration cap exceeded");
        }
        ++run.total_iterations;

        WeightedNeighborhoodGraph graph = build_weighted(yp, inst, order);
        if (observer != nullptr) (*observer)(yp, graph);
        if (opts.check_drift) {
            const double drift = expected_drift(graph, yp);
            if (std::abs(drift) > 1e-9) throw InvariantError("lmp_round: nonzero expected drift");
        }

        // Draw i' proportionally to y'.  Under conditional sampling the draw
        // is restricted to facilities whose selection can change the state.
        for (std::size_t i = 0; i < nf; ++i) {
            double w = yp[i];
            if (opts.conditional_sampling && w > 0 && !is_fractional(w)) {
                bool has_fractional_out = false;
                for (std::uint32_t e : graph.out_edges[i]) {
                    if (is_fractional(yp[graph.edges[e].target])) {
                        has_fractional_out = true;
                        break;
                    }
                }
                if (!has_fractional_out) w = 0.0;
            }
            weights[i] = w;
        }
        const std::size_t chosen = rng.pick_weighted(weights);
        const double y_chosen = yp[chosen];

        removed.clear();
        for (std::uint32_t e : graph.out_edges[chosen]) {  // targets in fill order; sorted below
            const auto& edge = graph.edges[e];
            if (edge.target == chosen) continue;  // the self-loop is subsumed by reopening
            if (yp[edge.target] <= 0) continue;
            if (rng.bernoulli(edge.weight / y_chosen)) removed.push_back(edge.target);
        }
        std::sort(removed.begin(), removed.end());
        removed.erase(std::unique(removed.begin(), removed.end()), removed.end());

        const bool useful = is_fractional(y_chosen) || !removed.empty();
        for (std::size_t t : removed) yp[t] = 0.0;
        yp[chosen] = 1.0;

        if (sets != nullptr) {
            // Happy connection: the chosen facility lies in an alive F_j.
            for (std::size_t j : watchers[chosen]) {
                if (happy[j]) continue;
                const auto& alive = alive_sets[j];
                if (std::find(alive.begin(), alive.end(), chosen) != alive.end()) {
                    happy[j] = true;
                    run.clients[j].happy = true;
                    run.clients[j].facility = chosen;
                    run.clients[j].cost = inst.cf_power(j, chosen);
                }
            }
            for (std::size_t t : removed) {
                for (std::size_t j : watchers[t]) {
                    if (happy[j]) continue;
                    auto& alive = alive_sets[j];
                    alive.erase(std::remove(alive.begin(), alive.end(), t), alive.end());
                }
            }
        }

        if (useful) {
            ++run.useful_iterations;
            if (opts.record_trace) run.trace.push_back({chosen, removed});
        }
    }

    for (std::size_t i = 0; i < nf; ++i) {
        if (yp[i] >= 1.0) run.open.push_back(i);
    }
    if (sets != nullptr) {
        for (std::size_t j = 0; j < run.clients.size(); ++j) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t i : run.open) best = std::min(best, inst.cf_power(j, i));
            run.clients[j].nearest_open_cost = best;
            if (!run.clients[j].happy) run.clients[j].cost = best;
        }
    }
    return run;
}

double potential_f(const std::vector<ClientFacilityTerm>& S, double b, double alpha, double p) {
    double mass = 0.0;
    double weighted = 0.0;
    for (const auto& t : S) {
        mass += t.y;
        weighted += t.y * pow_p(t.distance, p);
    }
    const double slack = 1.0 - mass;
    double tail = 0.0;
    if (slack > 1e-12) {
        tail = slack * pow_p(b, p);  // b may be infinity
    }
    return alpha * weighted + tail;
}

OneStepCheck one_step_potential_check(const std::vector<double>& yprime, const Instance& inst,
                                      const FacilityNeighborOrder& order,
                                      const std::vector<double>& client_distance, const std::vector<bool>& in_S,
                                      double b, double alpha) {
    const std::size_t nf = inst.num_facilities();
    if (nf > 8) throw SizeError("one_step_potential_check: exact enumeration limited to |F| <= 8");
    if (yprime.size() != nf || client_distance.size() != nf || in_S.size() != nf) {
        throw InputError("one_step_potential_check: size mismatch");
    }
    const double p = inst.p;

    auto state_potential = [&](const std::vector<double>& yvec, const std::vector<bool>& mask, double backup) {
        std::vector<ClientFacilityTerm> terms;
        for (std::size_t i = 0; i < nf; ++i) {
            if (mask[i] && yvec[i] > 0) terms.push_back({yvec[i], client_distance[i]});
        }
        return potential_f(terms, backup, alpha, p);
    };

    const double rhs = state_potential(yprime, in_S, b);

    WeightedNeighborhoodGraph graph = build_weighted(yprime, inst, order);
    double total = 0.0;
    for (double v : yprime) total += v;

    double lhs = 0.0;
    for (std::size_t chosen = 0; chosen < nf; ++chosen) {
        if (yprime[chosen] <= 0) continue;
        const double p_choose = yprime[chosen] / total;
        if (in_S[chosen]) {
            lhs += p_choose * pow_p(client_distance[chosen], p);
            continue;
        }
        // Enumerate all coin-flip outcomes over the out-edges of `chosen`.
        std::vector<std::pair<std::size_t, double>> flips;  // (target, probability of removal)
        for (std::uint32_t e : graph.out_edges[chosen]) {
            const auto& edge = graph.edges[e];
            if (edge.target == chosen) continue;
            if (yprime[edge.target] <= 0) continue;
            flips.emplace_back(edge.target, edge.weight / yprime[chosen]);
        }
        const std::size_t m = flips.size();
        for (std::size_t mask = 0; mask < (std::size_t{1} << m); ++mask) {
            double prob = 1.0;
            std::vector<bool> next_S = in_S;
            for (std::size_t t = 0; t < m; ++t) {
                const bool fired = (mask >> t) & 1;
                prob *= fired ? flips[t].second : (1.0 - flips[t].second);
                if (fired) next_S[flips[t].first] = false;
            }
            if (prob <= 0) continue;
            const double next_b = std::min(b, client_distance[chosen]);
            lhs += p_choose * prob * state_potential(yprime, next_S, next_b);
        }
    }
    return {lhs, rhs};
}

bool verify_eq1(const std::vector<double>& y, const std::vector<double>& d_to_client,
                const std::vector<std::vector<double>>& d_pairwise, double p, double alpha) {
    const std::size_t n = y.size();
    if (d_to_client.size() != n || d_pairwise.size() != n) throw InputError("verify_eq1: size mismatch");
    double lhs = 0.0;
    double mass = 0.0;
    double base = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mass += y[i];
        base += y[i] * pow_p(d_to_client[i], p);
        for (std::size_t ip = 0; ip < n; ++ip) {
            const double a = alpha * pow_p(d_to_client[i], p);
            const double bterm = pow_p(d_to_client[i] + d_pairwise[i][ip], p);
            lhs += y[i] * y[ip] * std::max(a, bterm);
        }
    }
    const double rhs = (2.0 * alpha - 1.0) * mass * base;
    return approx_le(lhs, rhs, 1e-9);
}

bool verify_euclid_pair(const std::vector<double>& vi, const std::vector<double>& vip, double alpha) {
    if (vi.size() != vip.size()) throw InputError("verify_euclid_pair: dimension mismatch");
    double di2 = 0.0, dip2 = 0.0, inner = 0.0;
    for (std::size_t t = 0; t < vi.size(); ++t) {
        di2 += vi[t] * vi[t];
        dip2 += vip[t] * vip[t];
        inner += vi[t] * vip[t];
    }
    const bool relaxed = alpha >= 4.0 - 1e-9;
    auto diff = [&](double a2, double b2) {
        const double cross = a2 + b2 - 2.0 * inner;  // |v_i - v_i'|^2
        double second;
        if (relaxed) {
            second = 2.0 * a2 + 2.0 * cross;
        } else {
            const double s = std::sqrt(a2) + std::sqrt(std::max(cross, 0.0));
            second = s * s;
        }
        return std::max(alpha * a2, second) - (alpha - 0.5) * (a2 + b2);
    };
    const double lhs = diff(di2, dip2) + diff(dip2, di2);
    const double rhs = -2.0 * (alpha - 1.0) * inner;
    return approx_le(lhs, rhs, 1e-9);
}

}  // namespace kcluster
