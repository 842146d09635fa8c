#include "kcluster/reduction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "kcluster/errors.hpp"

namespace kcluster {

void ReductionConfig::validate() const {
    if (xi <= 0 || xi >= 1) throw ConfigError("reduction config: xi must lie in (0,1)");
    if (!(delta > 0 && delta < 1.0 / 6.0)) throw ConfigError("reduction config: delta must lie in (0, 1/6)");
    if (t < 1) throw ConfigError("reduction config: t must be >= 1");
    if (c < 0) throw ConfigError("reduction config: c must be >= 0");
    if (A < 0) throw ConfigError("reduction config: A must be >= 0");
}

double reduction_bound_B(const ReductionConfig& cfg, double cost_T, double p) {
    return 2.0 * (cfg.A + cost_T / static_cast<double>(cfg.t)) * std::pow(2.0 / (cfg.delta * cfg.xi), p);
}

namespace {

double binomial_guard(std::size_t n, std::size_t k, double limit) {
    double c = 1.0;
    for (std::size_t i = 0; i < k; ++i) {
        c *= static_cast<double>(n - i) / static_cast<double>(i + 1);
        if (c > limit) return c;
    }
    return c;
}

}  // namespace

IntegralSolution brute_force_opt(const Instance& inst) {
    inst.validate();
    const std::size_t nf = inst.num_facilities();
    const std::size_t k = static_cast<std::size_t>(inst.k);
    if (binomial_guard(nf, k, 1e6) > 1e6) {
        throw SizeError("brute_force_opt: C(|F|, k) exceeds 1e6");
    }
    std::vector<std::size_t> comb(k);
    for (std::size_t i = 0; i < k; ++i) comb[i] = i;
    IntegralSolution best;
    best.total_cost = std::numeric_limits<double>::infinity();
    for (;;) {
        IntegralSolution cur = integral_cost(inst, comb);
        if (cur.total_cost < best.total_cost - 1e-15) best = cur;  // ties keep the lexicographically first
        // next combination
        std::size_t i = k;
        while (i > 0 && comb[i - 1] == nf - k + (i - 1)) --i;
        if (i == 0) break;
        ++comb[i - 1];
        for (std::size_t j = i; j < k; ++j) comb[j] = comb[j - 1] + 1;
    }
    return best;
}

bool is_dense(const Instance& inst, std::size_t facility, double A, const std::vector<std::size_t>& opt_open,
              double xi) {
    if (opt_open.empty()) throw InputError("is_dense: empty optimum set");
    double d_opt = std::numeric_limits<double>::infinity();
    for (std::size_t i : opt_open) d_opt = std::min(d_opt, inst.ff_distance(facility, i));
    const double radius = xi * d_opt;
    long ball = 0;
    for (std::size_t j = 0; j < inst.num_clients(); ++j) {
        if (inst.cf_distance(j, facility) < radius) ++ball;  // strict
    }
    const double lhs = std::pow((1.0 - xi) * d_opt, inst.p) * static_cast<double>(ball);
    return lhs > A;
}

std::vector<Instance> reduce_to_sparse(const Instance& inst, long long t, std::size_t state_budget) {
    inst.validate();
    if (t < 0) throw InputError("reduce_to_sparse: t must be >= 0");
    const std::size_t nf = inst.num_facilities();
    if (nf > 63) throw SizeError("reduce_to_sparse: facility sets beyond 63 are not enumerable");

    using Mask = std::uint64_t;
    const Mask full = (nf == 64) ? ~Mask{0} : ((Mask{1} << nf) - 1);

    // Level-synchronous BFS over reachable facility subsets; a transition
    // removes FBall(i_x, d(i_x, i'_x)) for a present facility i_x.
    std::set<Mask> seen{full};
    std::vector<Mask> frontier{full};
    std::size_t expansions = 0;
    for (long long depth = 0; depth < t && !frontier.empty(); ++depth) {
        std::vector<Mask> next;
        for (Mask cur : frontier) {
            for (std::size_t ix = 0; ix < nf; ++ix) {
                if (!(cur >> ix & 1)) continue;  // pruned: i_x already removed
                for (std::size_t ip = 0; ip < nf; ++ip) {
                    if (ip == ix) continue;
                    if (++expansions > state_budget) {
                        throw SizeError("reduce_to_sparse: enumeration bound exceeded");
                    }
                    const double radius = inst.ff_distance(ix, ip);
                    Mask removed = 0;
                    for (std::size_t f = 0; f < nf; ++f) {
                        if ((cur >> f & 1) && inst.ff_distance(ix, f) < radius) removed |= Mask{1} << f;
                    }
                    const Mask nxt = cur & ~removed;
                    if (nxt == cur) continue;
                    if (seen.insert(nxt).second) next.push_back(nxt);
                }
            }
        }
        frontier = std::move(next);
    }

    std::vector<Instance> out;
    out.reserve(seen.size());
    for (Mask mask : seen) {
        Instance sub = inst;
        sub.facilities.clear();
        for (std::size_t f = 0; f < nf; ++f) {
            if (mask >> f & 1) sub.facilities.push_back(inst.facilities[f]);
        }
        if (sub.facilities.empty()) continue;
        if (sub.facilities.size() < static_cast<std::size_t>(inst.k)) continue;
        out.push_back(std::move(sub));
    }
    return out;
}

IntegralSolution solve_sparse(const Instance& inst, const PseudoSolution& pseudo, const ReductionConfig& cfg) {
    cfg.validate();
    const std::size_t k = static_cast<std::size_t>(inst.k);
    if (pseudo.open.size() < k) throw InputError("solve_sparse: pseudo-solution opens fewer than k facilities");
    const double B = reduction_bound_B(cfg, pseudo.cost, inst.p);

    std::vector<std::size_t> T = pseudo.open;
    std::sort(T.begin(), T.end());
    T.erase(std::unique(T.begin(), T.end()), T.end());
    double cur_cost = integral_cost(inst, T).total_cost;
    while (T.size() > k) {
        std::size_t best = T.size();
        double best_cost = std::numeric_limits<double>::infinity();
        for (std::size_t idx = 0; idx < T.size(); ++idx) {
            std::vector<std::size_t> trial = T;
            trial.erase(trial.begin() + idx);
            const double c = integral_cost(inst, trial).total_cost;
            if (c < best_cost) {
                best_cost = c;
                best = idx;
            }
        }
        if (best == T.size() || best_cost > cur_cost + B) break;
        T.erase(T.begin() + best);
        cur_cost = best_cost;
    }
    if (T.size() == k) return integral_cost(inst, T);

    // (D, V) enumeration: |D| + |V| = k, |V| < t.
    const std::size_t nf = inst.num_facilities();
    IntegralSolution best;
    best.total_cost = std::numeric_limits<double>::infinity();

    std::vector<double> L(T.size());
    for (std::size_t idx = 0; idx < T.size(); ++idx) {
        double d = std::numeric_limits<double>::infinity();
        for (std::size_t idx2 = 0; idx2 < T.size(); ++idx2) {
            if (idx2 != idx) d = std::min(d, inst.ff_distance(T[idx], T[idx2]));
        }
        L[idx] = d;
    }

    double work = 0.0;
    for (std::size_t v_size = 0; v_size <= k; ++v_size) {
        if (static_cast<long long>(v_size) >= cfg.t) break;
        const std::size_t d_size = k - v_size;
        if (d_size > T.size()) continue;
        work += binomial_guard(T.size(), d_size, 1e7) * binomial_guard(nf, v_size, 1e7);
        if (work > 2e6) throw SizeError("solve_sparse: (D,V) enumeration bound exceeded; reduce t or k");
    }

    std::vector<std::size_t> d_comb, v_comb;
    auto for_each_combination = [](std::size_t n, std::size_t r, auto&& fn) {
        std::vector<std::size_t> comb(r);
        for (std::size_t i = 0; i < r; ++i) comb[i] = i;
        if (r > n) return;
        for (;;) {
            fn(comb);
            std::size_t i = r;
            while (i > 0 && comb[i - 1] == n - r + (i - 1)) --i;
            if (i == 0) break;
            ++comb[i - 1];
            for (std::size_t j = i; j < r; ++j) comb[j] = comb[j - 1] + 1;
        }
    };

    for (std::size_t v_size = 0; v_size <= k && static_cast<long long>(v_size) < cfg.t; ++v_size) {
        const std::size_t d_size = k - v_size;
        if (d_size > T.size()) continue;
        for_each_combination(T.size(), d_size, [&](const std::vector<std::size_t>& d_idx) {
            for_each_combination(nf, v_size, [&](const std::vector<std::size_t>& v_set) {
                std::vector<std::size_t> open(v_set.begin(), v_set.end());
                for (std::size_t idx : d_idx) {
                    const std::size_t i = T[idx];
                    const double Li = L[idx];
                    std::size_t f_best = i;  // FBall(i, 0) is empty: i itself is the only sensible choice
                    if (Li > 0) {
                        double best_obj = std::numeric_limits<double>::infinity();
                        for (std::size_t f = 0; f < nf; ++f) {
                            if (!(inst.ff_distance(i, f) < cfg.delta * Li)) continue;  // strict FBall
                            double obj = 0.0;
                            for (std::size_t j = 0; j < inst.num_clients(); ++j) {
                                if (!(inst.cf_distance(j, i) < cfg.xi * Li)) continue;  // strict CBall
                                double dv = std::numeric_limits<double>::infinity();
                                for (std::size_t v : v_set) dv = std::min(dv, inst.cf_power(j, v));
                                obj += std::min(inst.cf_power(j, f), dv);
                            }
                            if (obj < best_obj) {
                                best_obj = obj;
                                f_best = f;
                            }
                        }
                    }
                    open.push_back(f_best);
                }
                IntegralSolution cand = integral_cost(inst, open);
                if (cand.total_cost < best.total_cost) best = cand;
            });
        });
    }
    if (!std::isfinite(best.total_cost)) throw SizeError("solve_sparse: no (D,V) candidate produced a solution");
    return best;
}

double pseudo_to_true_delta(double alpha, double p) {
    if (alpha < 1.0) throw ConfigError("pseudo_to_true: alpha must be >= 1");
    const double root = std::pow(alpha, 1.0 / p);
    double delta = (1.0 / 3.0) * (root - 1.0) / (root + 1.0);
    const double cap = 1.0 / 6.0 - 1e-9;
    if (delta > cap) delta = cap;
    return delta;
}

IntegralSolution pseudo_to_true(const Instance& inst, const PseudoSolution& pseudo, double alpha, double eps,
                                std::optional<double> opt_lower_bound) {
    inst.validate();
    if (eps <= 0) throw ConfigError("pseudo_to_true: eps must be positive");
    const std::size_t k = static_cast<std::size_t>(inst.k);
    if (pseudo.open.size() <= k) {
        return integral_cost(inst, pseudo.open);
    }
    const int c = static_cast<int>(pseudo.open.size() - k);
    const double delta = pseudo_to_true_delta(alpha, inst.p);
    const long long t = static_cast<long long>(
        std::ceil(std::pow(2.0 / (delta * (1.0 / 3.0)), inst.p) * 4.0 * alpha * c / eps));

    const double opt_estimate = opt_lower_bound ? *opt_lower_bound : brute_force_opt(inst).total_cost;

    ReductionConfig cfg;
    cfg.delta = delta;
    cfg.t = t;
    cfg.c = c;
    cfg.A = opt_estimate / static_cast<double>(t);

    std::set<std::size_t> pseudo_points;
    for (std::size_t i : pseudo.open) pseudo_points.insert(inst.facilities.at(i));

    IntegralSolution best;
    best.total_cost = std::numeric_limits<double>::infinity();
    for (const Instance& sub : reduce_to_sparse(inst, t)) {
        // Restrict the pseudo-solution to the surviving facilities.
        PseudoSolution restricted;
        for (std::size_t i = 0; i < sub.num_facilities(); ++i) {
            if (pseudo_points.count(sub.facilities[i])) restricted.open.push_back(i);
        }
        if (restricted.open.size() < k) continue;
        restricted.cost = integral_cost(sub, restricted.open).total_cost;
        IntegralSolution sol = solve_sparse(sub, restricted, cfg);
        if (sol.total_cost < best.total_cost) {
            // Map open facilities back to positions in the original instance.
            std::vector<std::size_t> open_orig;
            for (std::size_t i : sol.open) {
                const std::size_t point = sub.facilities[i];
                for (std::size_t f = 0; f < inst.num_facilities(); ++f) {
                    if (inst.facilities[f] == point) {
                        open_orig.push_back(f);
                        break;
                    }
                }
            }
            best = integral_cost(inst, open_orig);
        }
    }
    if (!std::isfinite(best.total_cost)) throw SizeError("pseudo_to_true: no sub-instance admitted the pseudo-solution");
    return best;
}

}  // namespace kcluster
