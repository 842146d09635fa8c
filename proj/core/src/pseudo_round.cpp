#include "kcluster/pseudo_round.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "kcluster/errors.hpp"

namespace kcluster {

std::size_t RoundingState::forced_count() const {
    std::size_t c = 0;
    for (char f : forced) c += (f != 0);
    return c;
}

std::vector<std::size_t> RoundingState::forced_list() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < forced.size(); ++i) {
        if (forced[i]) out.push_back(i);
    }
    return out;
}

ImbalancePartition partition_by_imbalance(const CopyNeighborhoodGraph& graph) {
    ImbalancePartition part;
    double plus_sum = 0.0, minus_sum = 0.0;
    for (std::uint32_t v = 0; v < graph.nodes.size(); ++v) {
        const double imb = graph.imbalance(v);
        if (imb > 0) {
            part.plus.push_back(v);
            plus_sum += imb;
        } else if (imb < 0) {
            part.minus.push_back(v);
            minus_sum += -imb;
        } else {
            part.zero.push_back(v);
        }
    }
    if (!approx_eq(plus_sum, minus_sum, 1e-9)) {
        throw InvariantError("imbalance partition: positive and negative mass differ");
    }
    part.A = plus_sum / graph.delta;
    return part;
}

namespace {

void add_fresh_block(RoundingState& state, std::size_t facility, int delta) {
    for (int c = 0; c < delta; ++c) {
        state.fprime.push_back({static_cast<std::uint32_t>(facility), state.next_copy_id++});
    }
}

// Removes the nodes whose pre-removal graph positions are marked, keeping F'
// aligned with the graph's node order.
void remove_marked(RoundingState& state, const std::vector<char>& remove_node) {
    std::vector<FacilityCopy> kept;
    kept.reserve(state.fprime.size());
    for (std::size_t v = 0; v < state.fprime.size(); ++v) {
        if (!remove_node[v]) kept.push_back(state.fprime[v]);
    }
    state.fprime = std::move(kept);
}

}  // namespace

double UnbalancedContext::z_of(const std::vector<char>& indicator) const {
    if (indicator.size() != candidates.size()) throw InputError("z_of: indicator size mismatch");
    std::vector<char> removed(surviving.size(), 0);
    std::set<std::uint32_t> originals;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        if (!indicator[c]) continue;
        for (std::uint32_t t : candidates[c].out_targets) removed[t] = 1;
        if (!candidates[c].fictitious) originals.insert(candidates[c].facility);
    }
    long removed_count = std::count(removed.begin(), removed.end(), char{1});
    const double added = static_cast<double>(originals.size()) * delta;
    return (added - static_cast<double>(removed_count)) / delta;
}

std::vector<char> UnbalancedContext::sample(RngStream& rng) const {
    std::vector<char> indicator(candidates.size(), 0);
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        indicator[c] = rng.bernoulli(candidates[c].probability) ? 1 : 0;
    }
    return indicator;
}

std::optional<UnbalancedOutcome> unbalanced_update(RoundingState& state, const CopyNeighborhoodGraph& graph,
                                                   const ImbalancePartition& part, const ScaleConfig& cfg,
                                                   RngStream& rng) {
    const int delta = graph.delta;
    const std::size_t n = graph.nodes.size();
    if (state.fprime.size() != n) throw InputError("unbalanced_update: state and graph are out of step");
    state.log.unbalanced_calls += 1;

    if (part.A <= cfg.effective_force_threshold()) {
        // Branch (a): force-open everything unbalanced, delete those copies.
        if (part.plus.empty() && part.minus.empty()) return std::nullopt;
        std::vector<char> remove_node(n, 0);
        for (std::uint32_t v : part.plus) remove_node[v] = 1;
        for (std::uint32_t v : part.minus) remove_node[v] = 1;
        for (std::uint32_t v : part.plus) {
            if (!state.forced[graph.nodes[v].facility]) state.log.force_events += 1;
            state.forced[graph.nodes[v].facility] = 1;
        }
        for (std::uint32_t v : part.minus) {
            if (!state.forced[graph.nodes[v].facility]) state.log.force_events += 1;
            state.forced[graph.nodes[v].facility] = 1;
        }
        remove_marked(state, remove_node);
        return std::nullopt;
    }

    // Branch (b).  Heavy-negative copies are forced and removed.
    const double r_threshold = cfg.effective_r_threshold(part.A);
    std::vector<char> in_R(n, 0);
    for (std::uint32_t v : part.minus) {
        if (-graph.imbalance(v) >= r_threshold) in_R[v] = 1;
    }
    for (std::uint32_t v = 0; v < n; ++v) {
        if (in_R[v]) {
            if (!state.forced[graph.nodes[v].facility]) state.log.force_events += 1;
            state.forced[graph.nodes[v].facility] = 1;
        }
    }

    UnbalancedContext ctx;
    ctx.delta = delta;
    std::vector<std::uint32_t> surviving_index(n, std::numeric_limits<std::uint32_t>::max());
    for (std::uint32_t v = 0; v < n; ++v) {
        if (!in_R[v]) {
            surviving_index[v] = static_cast<std::uint32_t>(ctx.surviving.size());
            ctx.surviving.push_back(v);
            ctx.node_facility.push_back(graph.nodes[v].facility);
        }
    }

    // Surviving out-edges and in-degree deficits caused by removing R.
    const std::size_t ns = ctx.surviving.size();
    std::vector<int> deficit(ns, 0);
    for (std::size_t s = 0; s < ns; ++s) {
        const std::uint32_t v = ctx.surviving[s];
        int lost = 0;
        for (std::uint32_t u : graph.in_edges[v]) lost += in_R[u] ? 1 : 0;
        deficit[s] = lost;
    }

    auto surviving_out = [&](std::uint32_t v) {
        std::vector<std::uint32_t> out;
        for (std::uint32_t t : graph.out_edges[v]) {
            if (!in_R[t]) out.push_back(surviving_index[t]);
        }
        return out;
    };

    const double p_plus = 2.0 * cfg.effective_L() / delta;
    const double p_minus = p_plus * (1.0 + cfg.eps_pow(cfg.c5));
    if (p_minus > 1.0) throw ConfigError("unbalanced_update: selection probability exceeds 1");

    for (std::uint32_t v : part.plus) {
        UnbalancedContext::Candidate cand;
        cand.probability = p_plus;
        cand.facility = graph.nodes[v].facility;
        cand.out_targets = surviving_out(v);
        const double imb = (static_cast<double>(delta) - static_cast<double>(cand.out_targets.size())) / delta;
        cand.kappa = std::max(std::abs(imb), 1.0);
        ctx.candidates.push_back(std::move(cand));
    }
    for (std::uint32_t v : part.minus) {
        if (in_R[v]) continue;
        UnbalancedContext::Candidate cand;
        cand.probability = p_minus;
        cand.facility = graph.nodes[v].facility;
        cand.out_targets = surviving_out(v);
        const double imb = (static_cast<double>(delta) - static_cast<double>(cand.out_targets.size())) / delta;
        cand.kappa = std::max(std::abs(imb), 1.0);
        ctx.candidates.push_back(std::move(cand));
    }

    // Fictitious facilities restore the lost in-degrees exactly: for every
    // original, the r-th fictitious facility feeds the copies whose deficit
    // is at least r.
    std::vector<std::vector<std::uint32_t>> copies_of(state.forced.size());
    for (std::size_t s = 0; s < ns; ++s) copies_of[ctx.node_facility[s]].push_back(static_cast<std::uint32_t>(s));
    for (std::size_t facility = 0; facility < copies_of.size(); ++facility) {
        const auto& copies = copies_of[facility];
        if (copies.empty()) continue;
        int max_deficit = 0;
        for (std::uint32_t s : copies) max_deficit = std::max(max_deficit, deficit[s]);
        for (int r = 1; r <= max_deficit; ++r) {
            UnbalancedContext::Candidate cand;
            cand.fictitious = true;
            cand.probability = p_minus;
            for (std::uint32_t s : copies) {
                if (deficit[s] >= r) cand.out_targets.push_back(s);
            }
            cand.kappa = static_cast<double>(cand.out_targets.size()) / delta;
            ctx.candidates.push_back(std::move(cand));
        }
    }

    // Degree audit: fictitious edges must restore in-degree delta exactly.
    {
        std::vector<int> restored(ns, 0);
        for (const auto& cand : ctx.candidates) {
            if (!cand.fictitious) continue;
            for (std::uint32_t t : cand.out_targets) restored[t] += 1;
        }
        for (std::size_t s = 0; s < ns; ++s) {
            if (restored[s] != deficit[s]) {
                throw InvariantError("unbalanced_update: fictitious facilities failed to restore in-degree");
            }
        }
    }

    const std::vector<char> indicator = ctx.sample(rng);
    const double z = ctx.z_of(indicator);
    state.log.z_values.push_back(z);

    std::vector<char> remove_surviving(ns, 0);
    std::set<std::uint32_t> chosen_originals;
    for (std::size_t c = 0; c < ctx.candidates.size(); ++c) {
        if (!indicator[c]) continue;
        for (std::uint32_t t : ctx.candidates[c].out_targets) remove_surviving[t] = 1;
        if (!ctx.candidates[c].fictitious) chosen_originals.insert(ctx.candidates[c].facility);
    }

    std::vector<char> remove_node(n, 0);
    for (std::uint32_t v = 0; v < n; ++v) {
        if (in_R[v]) remove_node[v] = 1;
        else if (remove_surviving[surviving_index[v]]) remove_node[v] = 1;
    }
    remove_marked(state, remove_node);
    for (std::uint32_t facility : chosen_originals) add_fresh_block(state, facility, delta);
    return UnbalancedOutcome{std::move(ctx), indicator};
}

std::vector<std::uint32_t> balanced_update(RoundingState& state, const CopyNeighborhoodGraph& graph,
                                           const ImbalancePartition& part, const ScaleConfig& cfg, RngStream& rng) {
    const int delta = graph.delta;
    const std::size_t n = graph.nodes.size();
    if (state.fprime.size() != n) throw InputError("balanced_update: state and graph are out of step");
    state.log.balanced_calls += 1;
    if (part.zero.empty()) return {};

    const double p_select = 2.0 * (1.0 + cfg.eps_pow(cfg.c5)) * cfg.effective_L() / delta;
    if (p_select > 1.0) throw ConfigError("balanced_update: selection probability exceeds 1");

    std::vector<std::uint32_t> order = part.zero;
    rng.shuffle(order);

    std::vector<char> occupied(n, 0);
    std::set<std::uint32_t> chosen_originals;
    std::vector<std::uint32_t> selected;
    for (std::uint32_t v : order) {
        bool conflict = false;
        for (std::uint32_t t : graph.out_edges[v]) {
            if (occupied[t]) {
                conflict = true;
                break;
            }
        }
        // Copies of one original conflict with each other: selecting both
        // would remove two blocks while adding only one, breaking the exact
        // |F'| preservation this procedure guarantees.
        if (!conflict && chosen_originals.count(graph.nodes[v].facility)) conflict = true;
        if (conflict) continue;
        if (!rng.bernoulli(p_select)) continue;
        selected.push_back(v);
        chosen_originals.insert(graph.nodes[v].facility);
        for (std::uint32_t t : graph.out_edges[v]) occupied[t] = 1;
    }

    const std::size_t before = state.fprime.size();
    std::vector<char> remove_node(n, 0);
    std::size_t removed = 0;
    for (std::uint32_t v : selected) {
        for (std::uint32_t t : graph.out_edges[v]) {
            if (!remove_node[t]) {
                remove_node[t] = 1;
                ++removed;
            }
        }
    }
    if (removed != selected.size() * static_cast<std::size_t>(delta)) {
        throw InvariantError("balanced_update: selection was not conflict-free");
    }
    remove_marked(state, remove_node);
    for (std::uint32_t facility : chosen_originals) add_fresh_block(state, facility, delta);
    if (state.fprime.size() != before) {
        throw InvariantError("balanced_update: |F'| changed");
    }
    return selected;
}

IterateResult iterate(const Instance& inst, const std::vector<double>& ydoubleprime, const ScaleConfig& cfg,
                      RngStream& rng, const FacilityNeighborOrder& order, const IterateOptions& opts) {
    cfg.validate();
    const int delta = cfg.effective_delta();
    CopySet initial = build_copies(ydoubleprime, delta);

    IterateResult result;
    result.state.fprime = initial.copies;
    result.state.next_copy_id = initial.next_copy_id;
    result.state.forced.assign(inst.num_facilities(), 0);

    // d''_max: distance of the delta-th nearest copy of the initial set.
    const std::size_t nc = inst.num_clients();
    result.d2max.assign(nc, 0.0);
    {
        std::vector<std::pair<double, long>> dist_count;
        for (std::size_t j = 0; j < nc; ++j) {
            dist_count.clear();
            for (std::size_t i = 0; i < inst.num_facilities(); ++i) {
                const long copies = std::lround(ydoubleprime[i] * delta);
                if (copies > 0) dist_count.emplace_back(inst.cf_distance(j, i), copies);
            }
            std::sort(dist_count.begin(), dist_count.end());
            long need = delta;
            for (const auto& [d, c] : dist_count) {
                need -= c;
                result.d2max[j] = d;
                if (need <= 0) break;
            }
            if (need > 0) throw InfeasibleError("iterate: fewer than delta initial copies");
        }
    }

    // f^new diagnostic bookkeeping: the initial block of every client.
    std::vector<std::set<std::uint64_t>> block_ids(opts.track_fnew ? nc : 0);
    std::vector<double> fnew_prev;
    if (opts.track_fnew) {
        result.fnew_increases.assign(nc, 0);
        fnew_prev.assign(nc, 0.0);
        for (std::size_t j = 0; j < nc; ++j) {
            std::vector<std::pair<double, std::size_t>> ds;
            for (std::size_t v = 0; v < initial.copies.size(); ++v) {
                ds.emplace_back(inst.cf_distance(j, initial.copies[v].facility), v);
            }
            std::sort(ds.begin(), ds.end());
            for (int t = 0; t < delta; ++t) block_ids[j].insert(initial.copies[ds[t].second].copy_id);
        }
    }
    const double alpha_general = (std::pow(3.0, cfg.p) + 1.0) / 2.0;
    auto fnew_of_state = [&](std::size_t j) {
        double sum_dp = 0.0;
        std::size_t s_size = 0;
        for (const auto& copy : result.state.fprime) {
            if (block_ids[j].count(copy.copy_id)) {
                ++s_size;
                sum_dp += inst.cf_power(j, copy.facility);
            }
        }
        // b: min of 3 d''_max and the nearest integrally open facility.
        std::vector<long> copy_count(inst.num_facilities(), 0);
        for (const auto& copy : result.state.fprime) copy_count[copy.facility] += 1;
        double b = 3.0 * result.d2max[j];
        for (std::size_t i = 0; i < inst.num_facilities(); ++i) {
            if (result.state.forced[i] || copy_count[i] >= delta) b = std::min(b, inst.cf_distance(j, i));
        }
        return potential_f_new(s_size, sum_dp, b, alpha_general, cfg);
    };
    if (opts.track_fnew) {
        for (std::size_t j = 0; j < nc; ++j) fnew_prev[j] = fnew_of_state(j);
    }

    const int T = cfg.effective_T();
    for (int t = 0; t < T; ++t) {
        if (result.state.fprime.size() < static_cast<std::size_t>(delta)) break;
        CopyNeighborhoodGraph graph = build_copy_graph(result.state.fprime, delta, inst, order);
        ImbalancePartition part = partition_by_imbalance(graph);
        if (rng.bernoulli(0.5)) {
            unbalanced_update(result.state, graph, part, cfg, rng);
        } else {
            balanced_update(result.state, graph, part, cfg, rng);
        }
        result.state.iteration = t + 1;
        result.iterations_run = t + 1;
        if (opts.track_fnew) {
            ++result.fnew_steps;
            for (std::size_t j = 0; j < nc; ++j) {
                const double now = fnew_of_state(j);
                if (now > fnew_prev[j] + 1e-9 * tolerance_scale(now, fnew_prev[j])) result.fnew_increases[j] += 1;
                fnew_prev[j] = now;
            }
        }
    }

    result.ybar.assign(inst.num_facilities(), 0.0);
    for (const auto& copy : result.state.fprime) result.ybar[copy.facility] += 1.0;
    for (double& v : result.ybar) v /= delta;
    for (std::size_t i = 0; i < inst.num_facilities(); ++i) {
        if (result.state.forced[i]) result.ybar[i] = 1.0;
    }
    return result;
}

KCenterInput kcenter_input(const Instance& inst, const std::vector<double>& ybar) {
    KCenterInput input;
    input.ybar = ybar;
    input.dbar_max.assign(inst.num_clients(), 0.0);
    std::vector<std::pair<double, double>> dist_mass;
    for (std::size_t j = 0; j < inst.num_clients(); ++j) {
        dist_mass.clear();
        for (std::size_t i = 0; i < ybar.size(); ++i) {
            if (ybar[i] > 0) dist_mass.emplace_back(inst.cf_distance(j, i), ybar[i]);
        }
        std::sort(dist_mass.begin(), dist_mass.end());
        double acc = 0.0;
        bool done = false;
        for (const auto& [d, m] : dist_mass) {
            acc += m;
            if (acc >= 1.0 - 1e-9) {
                input.dbar_max[j] = d;
                done = true;
                break;
            }
        }
        if (!done) throw InfeasibleError("kcenter_input: client cannot gather unit mass");
    }
    return input;
}

KCenterResult kcenter_finish(const KCenterInput& input, const Instance& inst) {
    const std::size_t nf = inst.num_facilities();
    const std::size_t nc = inst.num_clients();
    if (input.ybar.size() != nf || input.dbar_max.size() != nc) throw InputError("kcenter_finish: size mismatch");

    KCenterResult result;
    std::vector<std::size_t> open;
    for (std::size_t i = 0; i < nf; ++i) {
        if (input.ybar[i] >= 1.0 - 1e-9) open.push_back(i);
    }

    auto covered = [&](std::size_t j) {
        const double radius = input.dbar_max[j];
        for (std::size_t i : open) {
            if (inst.cf_distance(j, i) <= radius + 1e-12 * tolerance_scale(radius, 1.0)) return true;
        }
        return false;
    };

    std::vector<std::size_t> order(nc);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return input.dbar_max[a] < input.dbar_max[b] || (input.dbar_max[a] == input.dbar_max[b] && a < b);
    });

    std::vector<std::size_t> selected;
    for (std::size_t j : order) {
        if (covered(j)) continue;
        bool blocked = false;
        for (std::size_t j2 : selected) {
            const double lim = input.dbar_max[j] + input.dbar_max[j2];
            if (inst.metric.distance(inst.clients[j], inst.clients[j2]) <= lim + 1e-12 * tolerance_scale(lim, 1.0)) {
                blocked = true;
                break;
            }
        }
        if (blocked) continue;
        // Open the nearest positively-fractional facility within the radius.
        std::size_t best = nf;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < nf; ++i) {
            if (input.ybar[i] <= 0) continue;
            const double d = inst.cf_distance(j, i);
            if (d <= input.dbar_max[j] + 1e-12 * tolerance_scale(input.dbar_max[j], 1.0) && d < best_d) {
                best_d = d;
                best = i;
            }
        }
        if (best == nf) throw InfeasibleError("kcenter_finish: no fractional mass within the client radius");
        open.push_back(best);
        selected.push_back(j);
    }

    result.selected_clients = selected;
    result.solution = integral_cost(inst, open);
    // Connection guarantee: every client within 3 dbar_max of an open facility.
    for (std::size_t j = 0; j < nc; ++j) {
        const double d = inst.cf_distance(j, result.solution.assignment[j]);
        if (d > 3.0 * input.dbar_max[j] + 1e-9 * tolerance_scale(d, 3.0 * input.dbar_max[j])) {
            throw InvariantError("kcenter_finish: connection distance exceeds 3 dbar_max");
        }
    }
    return result;
}

double potential_f_new(std::size_t s_size, double sum_dp_over_S, double b, double alpha, const ScaleConfig& cfg) {
    const double delta = cfg.effective_delta();
    const double head = alpha / delta * sum_dp_over_S;
    const double coeff = 1.0 + 2.0 * cfg.eps_pow(cfg.c5) - static_cast<double>(s_size) / delta;
    double tail = 0.0;
    if (coeff > 1e-12) {
        tail = coeff * std::pow(b, cfg.p);
    }
    return (1.0 + cfg.epsilon) * (head + tail);
}

}  // namespace kcluster
