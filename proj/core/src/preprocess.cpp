#include "kcluster/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include <json.hpp>

#include "kcluster/errors.hpp"

namespace kcluster {

using nlohmann::json;

ScaleConfig ScaleConfig::for_p(double p) {
    if (p < 1.0) throw ConfigError("scale config: p must be >= 1");
    ScaleConfig cfg;
    cfg.p = p;
    cfg.c1 = static_cast<int>(std::ceil(12.0 * p * p));
    cfg.c5 = cfg.c1 + 1;
    cfg.c2 = static_cast<int>(std::ceil(48.0 * p * p)) + 3;
    cfg.c3 = static_cast<int>(std::ceil(132.0 * p * p)) + 9;
    cfg.c4 = static_cast<int>(std::ceil(84.0 * p * p)) + 5;
    const double bound = 3.0 * p * p * p * p;
    long inv = std::max<long>(4, static_cast<long>(std::floor(bound)) + 1);
    cfg.epsilon = 1.0 / static_cast<double>(inv);
    return cfg;
}

void ScaleConfig::validate() const {
    if (p < 1.0) throw ConfigError("scale config: p must be >= 1");
    const double bound = 1.0 / (3.0 * p * p * p * p);
    if (!(epsilon > 0.0 && epsilon < bound)) {
        throw ConfigError("scale config: epsilon must lie in (0, 1/(3p^4))");
    }
    const double inv = 1.0 / epsilon;
    if (std::abs(inv - std::round(inv)) > 1e-9) throw ConfigError("scale config: 1/epsilon must be integral");
    if (c1 < 1 || c2 < 1 || c3 < 1 || c4 < 1 || c5 < 1) throw ConfigError("scale config: exponents must be positive");
    if (delta_cap && *delta_cap < 1) throw ConfigError("scale config: delta must be >= 1");
    if (L && *L <= 0) throw ConfigError("scale config: L must be positive");
    if (T && *T < 0) throw ConfigError("scale config: T must be >= 0");
    if (budget && *budget < 0) throw ConfigError("scale config: budget must be >= 0");
    const double ratio = 2.0 * effective_L() / effective_delta();
    if (!(ratio > 0.0 && ratio <= 1.0)) throw ConfigError("scale config: 2L/delta must be a probability");
}

double ScaleConfig::eps_pow(int c) const { return std::pow(epsilon, c); }

double ScaleConfig::theoretical_delta() const { return std::pow(epsilon, -c1); }

double ScaleConfig::theoretical_L() const { return eps_pow(c2); }

double ScaleConfig::effective_r_threshold(double A) const {
    if (r_threshold) return *r_threshold;
    return A * eps_pow(c3);
}

std::string ScaleConfig::to_json_string() const {
    json j;
    j["epsilon"] = epsilon;
    j["p"] = p;
    j["c"] = {c1, c2, c3, c4, c5};
    json surrogate;
    surrogate["delta"] = effective_delta();
    surrogate["L"] = effective_L();
    surrogate["T"] = effective_T();
    surrogate["force_threshold"] = effective_force_threshold();
    surrogate["budget"] = effective_budget();
    surrogate["z_cap"] = effective_z_cap();
    json overridden = json::array();
    if (delta_cap) overridden.push_back("delta");
    if (L) overridden.push_back("L");
    if (T) overridden.push_back("T");
    if (force_threshold) overridden.push_back("force_threshold");
    if (budget) overridden.push_back("budget");
    if (z_cap) overridden.push_back("z_cap");
    if (r_threshold) {
        surrogate["r_threshold"] = *r_threshold;
        overridden.push_back("r_threshold");
    }
    surrogate["overridden"] = std::move(overridden);
    j["surrogate"] = std::move(surrogate);
    json theory;
    theory["delta"] = "1/eps^c1";
    theory["L"] = "eps^c2";
    theory["T"] = "Theta(log(1/eps)/eps^(c1+c2))";
    theory["force_threshold"] = "O(1/eps^c3)";
    theory["delta_value"] = theoretical_delta();
    theory["L_value"] = theoretical_L();
    j["theoretical"] = std::move(theory);
    return j.dump();
}

namespace {

double filter_radius_factor(const ScaleConfig& cfg) {
    // 1/(eps/p)^{4p} - 2
    return std::pow(cfg.p / cfg.epsilon, 4.0 * cfg.p) - 2.0;
}

}  // namespace

FilterResult filter(const Instance& inst, const FractionalSolution& sol, const NearestMassSet& sets,
                    const ScaleConfig& cfg) {
    cfg.validate();
    const std::size_t nc = inst.num_clients();
    const std::size_t nf = inst.num_facilities();
    if (sets.per_client.size() != nc) throw InputError("filter: nearest-mass sets size mismatch");

    std::vector<double> dav(nc), dmax(nc);
    for (std::size_t j = 0; j < nc; ++j) {
        dav[j] = sets.d_av(j);
        dmax[j] = sets.d_max(j);
    }
    const double radius_factor = filter_radius_factor(cfg);

    FilterResult out;
    out.representative_of.assign(nc, 0);
    out.client_type.assign(nc, 0);

    std::vector<bool> alive(nc, true);
    std::size_t remaining = nc;
    while (remaining > 0) {
        std::size_t best = nc;
        for (std::size_t j = 0; j < nc; ++j) {
            if (!alive[j]) continue;
            if (best == nc || dav[j] < dav[best]) best = j;
        }
        const std::size_t rep_idx = out.representatives.size();
        out.representatives.push_back(best);
        for (std::size_t j = 0; j < nc; ++j) {
            if (!alive[j]) continue;
            if (inst.metric.distance(inst.clients[j], inst.clients[best]) <=
                radius_factor * dav[j] + 1e-12 * tolerance_scale(radius_factor * dav[j], 1.0)) {
                alive[j] = false;
                --remaining;
                out.representative_of[j] = rep_idx;
            }
        }
    }

    // Balls B_j and cores B'_j.
    const std::size_t nrep = out.representatives.size();
    out.ball.resize(nrep);
    out.core.resize(nrep);
    out.ball_is_full_set.assign(nrep, false);
    out.ball_radius.assign(nrep, 0.0);
    for (std::size_t r = 0; r < nrep; ++r) {
        const std::size_t j = out.representatives[r];
        double nearest_other = std::numeric_limits<double>::infinity();
        for (std::size_t r2 = 0; r2 < nrep; ++r2) {
            if (r2 == r) continue;
            nearest_other = std::min(
                nearest_other, inst.metric.distance(inst.clients[j], inst.clients[out.representatives[r2]]));
        }
        const double half = nearest_other / 2.0;
        if (half < dmax[j]) {
            out.ball_radius[r] = half;
            for (std::size_t i = 0; i < nf; ++i) {
                if (sol.y[i] <= 0) continue;
                if (inst.cf_distance(j, i) < half) out.ball[r].push_back(i);
            }
        } else {
            out.ball_is_full_set[r] = true;
            for (const auto& e : sets.per_client[j]) out.ball[r].push_back(e.facility);
            out.ball_radius[r] = dmax[j];
        }
        const double core_radius = cfg.epsilon * dmax[j];
        for (std::size_t i = 0; i < nf; ++i) {
            if (sol.y[i] <= 0) continue;
            if (inst.cf_distance(j, i) <= core_radius + 1e-12 * tolerance_scale(core_radius, 1.0)) {
                out.core[r].push_back(i);
            }
        }
    }

    // Client types.
    const double type1_factor = std::pow(cfg.p / cfg.epsilon, 4.0 * cfg.p);
    for (std::size_t j = 0; j < nc; ++j) {
        if (dmax[j] <= type1_factor * dav[j] + 1e-12 * tolerance_scale(type1_factor * dav[j], 1.0)) {
            out.client_type[j] = 1;
        } else if (out.ball_is_full_set[out.representative_of[j]]) {
            out.client_type[j] = 2;
        } else {
            out.client_type[j] = 3;
        }
    }

    // Structural guarantees.
    std::vector<int> owner(nf, -1);
    for (std::size_t r = 0; r < nrep; ++r) {
        for (std::size_t i : out.ball[r]) {
            if (owner[i] != -1) throw InvariantError("filter: balls are not disjoint");
            owner[i] = static_cast<int>(r);
        }
        std::set<std::size_t> in_ball(out.ball[r].begin(), out.ball[r].end());
        for (std::size_t i : out.core[r]) {
            if (!in_ball.count(i)) throw InvariantError("filter: core escapes its ball");
        }
        double mass = 0.0;
        for (std::size_t i : out.ball[r]) mass += sol.y[i];
        if (mass > 1.0 + 1e-9) throw InvariantError("filter: ball mass exceeds 1");
        if (!(mass > 1.0 / (2.0 - cfg.epsilon) - 1e-9)) throw InvariantError("filter: ball mass below 1/(2-eps)");
    }
    for (std::size_t j = 0; j < nc; ++j) {
        const std::size_t rep = out.representatives[out.representative_of[j]];
        if (dav[rep] > dav[j] + 1e-9 * tolerance_scale(dav[rep], dav[j])) {
            throw InvariantError("filter: representative has larger d_av");
        }
        const double dj = inst.metric.distance(inst.clients[j], inst.clients[rep]);
        if (dj > radius_factor * dav[j] + 1e-9 * tolerance_scale(dj, radius_factor * dav[j])) {
            throw InvariantError("filter: representative too far");
        }
        if (out.client_type[j] != 1 && dj > 4.0 * dav[j] + 1e-9 * tolerance_scale(dj, dav[j])) {
            throw InvariantError("filter: non-type-1 client farther than 4 d_av from its representative");
        }
    }
    return out;
}

std::string FilterResult::to_json_string() const {
    json j;
    j["representatives"] = representatives;
    j["representative_of"] = representative_of;
    j["types"] = client_type;
    j["balls"] = ball;
    j["cores"] = core;
    j["ball_is_full_set"] = ball_is_full_set;
    return j.dump();
}

std::vector<double> consolidate_cores(const Instance& inst, const std::vector<double>& y, const FilterResult& filt,
                                      RngStream& rng) {
    if (y.size() != inst.num_facilities()) throw InputError("consolidate_cores: y size mismatch");
    std::vector<double> yprime = y;
    std::vector<double> weights;
    for (std::size_t r = 0; r < filt.core.size(); ++r) {
        const auto& core = filt.core[r];
        double mass = 0.0;
        weights.clear();
        for (std::size_t i : core) {
            mass += y[i];
            weights.push_back(y[i]);
        }
        if (mass <= 0) continue;  // empty core: nothing to consolidate
        const std::size_t winner = core[rng.pick_weighted(weights)];
        for (std::size_t i : core) yprime[i] = 0.0;
        yprime[winner] = mass;
    }
    return yprime;
}

std::vector<double> pipage_round(const std::vector<double>& yprime, const std::vector<std::vector<std::size_t>>& family,
                                 double g, RngStream& rng) {
    const std::size_t n = yprime.size();
    if (!(g > 0.0 && g <= 1.0)) throw InputError("pipage_round: granularity must lie in (0,1]");
    for (double v : yprime) {
        if (v < 0.0) throw InputError("pipage_round: negative opening");
    }

    // Validate laminarity on the family as given, so error indices match input.
    std::vector<std::set<std::size_t>> given;
    for (const auto& s : family) {
        std::set<std::size_t> ss(s.begin(), s.end());
        for (std::size_t e : ss) {
            if (e >= n) throw InputError("pipage_round: family references unknown element");
        }
        given.push_back(std::move(ss));
    }
    for (std::size_t a = 0; a < given.size(); ++a) {
        for (std::size_t b = a + 1; b < given.size(); ++b) {
            bool disjoint = true;
            for (std::size_t e : given[a]) {
                if (given[b].count(e)) {
                    disjoint = false;
                    break;
                }
            }
            if (disjoint) continue;
            const bool a_in_b = std::includes(given[b].begin(), given[b].end(), given[a].begin(), given[a].end());
            const bool b_in_a = std::includes(given[a].begin(), given[a].end(), given[b].begin(), given[b].end());
            if (!a_in_b && !b_in_a) {
                throw InputError("pipage_round: family is not laminar, sets " + std::to_string(a) + " and " +
                                 std::to_string(b) + " cross");
            }
        }
    }

    std::vector<std::set<std::size_t>> sets;
    for (auto& s : given) {
        bool dup = false;
        for (const auto& t : sets) {
            if (t == s) {
                dup = true;
                break;
            }
        }
        if (!dup) sets.push_back(std::move(s));
    }

    // Scaled values; snapped back to integer multiples of g at the end.
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = yprime[i] / g;

    auto frac = [&](std::size_t i) {
        const double f = u[i] - std::floor(u[i]);
        if (f < 1e-12 || f > 1.0 - 1e-12) return 0.0;
        return f;
    };
    // One pipage step; at least one of the two entries becomes integral, the
    // pair sum is preserved exactly and both marginals are preserved.
    auto pair_entries = [&](std::size_t a, std::size_t b) {
        const double fa = frac(a);
        const double fb = frac(b);
        const double d1 = std::min(1.0 - fa, fb);
        const double d2 = std::min(fa, 1.0 - fb);
        if (rng.next_double() < d2 / (d1 + d2)) {
            u[a] += d1;
            u[b] -= d1;
        } else {
            u[a] -= d2;
            u[b] += d2;
        }
        for (std::size_t i : {a, b}) {
            const double r = std::round(u[i]);
            if (std::abs(u[i] - r) < 1e-9) u[i] = r;
        }
    };
    // Pairs the fractional entries of the list in index order until at most
    // one survives; the survivor (if any) is returned.
    auto reduce = [&](std::vector<std::size_t>& candidates) {
        std::sort(candidates.begin(), candidates.end());
        candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
        std::size_t carry = n;
        for (std::size_t e : candidates) {
            if (frac(e) == 0.0) continue;
            if (carry == n) {
                carry = e;
                continue;
            }
            pair_entries(carry, e);
            if (frac(carry) == 0.0) carry = (frac(e) == 0.0) ? n : e;
        }
        candidates.clear();
        if (carry != n) candidates.push_back(carry);
    };

    // Containment forest: parent = smallest strict superset.
    const std::size_t m = sets.size();
    std::vector<int> parent(m, -1);
    for (std::size_t a = 0; a < m; ++a) {
        std::size_t best = std::numeric_limits<std::size_t>::max();
        for (std::size_t b = 0; b < m; ++b) {
            if (b == a || sets[b].size() <= sets[a].size()) continue;
            if (sets[b].size() < best &&
                std::includes(sets[b].begin(), sets[b].end(), sets[a].begin(), sets[a].end())) {
                best = sets[b].size();
                parent[a] = static_cast<int>(b);
            }
        }
    }
    std::vector<std::vector<std::size_t>> children(m);
    for (std::size_t a = 0; a < m; ++a) {
        if (parent[a] >= 0) children[parent[a]].push_back(a);
    }

    // Bottom-up: each set reduces its direct elements plus the survivors
    // handed up by its children, then passes at most one entry to its parent.
    std::vector<std::size_t> order(m);
    for (std::size_t i = 0; i < m; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sets[a].size() < sets[b].size(); });
    std::vector<std::vector<std::size_t>> carry(m);
    std::vector<std::size_t> root_pending;
    std::vector<char> childmark(n, 0);
    for (std::size_t a : order) {
        std::fill(childmark.begin(), childmark.end(), 0);
        for (std::size_t c : children[a]) {
            for (std::size_t e : sets[c]) childmark[e] = 1;
        }
        std::vector<std::size_t> candidates = std::move(carry[a]);
        for (std::size_t e : sets[a]) {
            if (!childmark[e]) candidates.push_back(e);
        }
        reduce(candidates);
        auto& sink = (parent[a] >= 0) ? carry[parent[a]] : root_pending;
        for (std::size_t e : candidates) sink.push_back(e);
    }

    // Root pass over top-level survivors plus elements outside every set.
    std::vector<char> covered(n, 0);
    for (const auto& s : sets) {
        for (std::size_t e : s) covered[e] = 1;
    }
    for (std::size_t e = 0; e < n; ++e) {
        if (!covered[e]) root_pending.push_back(e);
    }
    reduce(root_pending);
    if (!root_pending.empty()) {
        // One fractional entry can survive; round it alone, keeping its marginal.
        const std::size_t e = root_pending.front();
        const double f = frac(e);
        if (f != 0.0) u[e] = rng.next_double() < f ? std::ceil(u[e]) : std::floor(u[e]);
    }

    std::vector<double> result(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = std::round(u[i]);
        if (std::abs(u[i] - r) > 1e-6) throw InvariantError("pipage_round: non-integral result entry");
        result[i] = r * g;
    }
    return result;
}

}  // namespace kcluster
