#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "kcluster/errors.hpp"
#include "kcluster/harness.hpp"
#include "kcluster/lmp.hpp"
#include "kcluster/pseudo_round.hpp"
#include "kcluster/reduction.hpp"
#include "kcluster/rng.hpp"

namespace kcluster::suites {

namespace {

std::string fmt(double v) {
    std::ostringstream ss;
    ss.precision(6);
    ss << v;
    return ss.str();
}

double alpha_general(double p) { return (std::pow(3.0, p) + 1.0) / 2.0; }

// Rotating pool of desk-scale instances used by the rounding suites.
Instance standard_instance(std::size_t idx, std::uint64_t seed, double p) {
    const std::uint64_t s = RngStream::mix(seed, "standard-suite", idx);
    Instance inst;
    switch (idx % 3) {
        case 0:
            inst = generate_instance("clustered(3,0.04," + std::to_string(s % 100000) + ")", 3, p);
            break;
        case 1:
            inst = generate_instance("euclidean(10,12,2," + std::to_string(s % 100000) + ")", 3, p);
            break;
        default:
            inst = generate_instance("clustered(4,0.03," + std::to_string(s % 100000) + ")", 4, p);
            break;
    }
    return inst;
}

struct PreprocessedRun {
    LmpSetup setup;
    FilterResult filt;
    std::vector<double> yprime;
    std::vector<double> ydp;  // after pipage at g = 1/delta
};

// A random fractional feasible LP point with sum y = k: the rounding
// guarantees hold for every feasible solution, and random desk-scale
// instances usually have integral LP optima, which would make the Monte
// Carlo checks vacuous.
std::vector<double> random_fractional_opening(const Instance& inst, RngStream& rng) {
    const std::size_t nf = inst.num_facilities();
    std::vector<double> y(nf);
    for (double& v : y) v = rng.uniform(0.2, 1.0);
    double target = static_cast<double>(inst.k);
    for (int pass = 0; pass < 50; ++pass) {
        double total = 0.0;
        double headroom = 0.0;
        for (double v : y) {
            total += v;
            if (v < 1.0) headroom += v;
        }
        if (std::abs(total - target) < 1e-12) break;
        const double scale = 1.0 + (target - total) / headroom;
        bool clamped = false;
        for (double& v : y) {
            if (v < 1.0) {
                v *= scale;
                if (v >= 1.0) {
                    v = 1.0;
                    clamped = true;
                }
            }
        }
        if (!clamped && std::abs(scale - 1.0) < 1e-15) break;
    }
    return y;
}

// Stretched two-representative line instance whose clients are type-3: almost
// all of each client's mass sits on a co-located facility while a sliver
// lives 300 units away, so d_max blows past the type-1 factor and the two
// representatives cap each other's balls.
Instance type3_instance(double p) {
    std::vector<std::vector<double>> pts = {{0.0}, {300.0}, {0.0}, {300.0}, {1000.0}};
    Instance inst;
    inst.metric = MetricSpace::euclidean(pts);
    inst.clients = {0, 1};
    inst.facilities = {2, 3, 4};
    inst.k = 2;
    inst.p = p;
    return inst;
}

std::vector<double> type3_opening() { return {0.9999, 0.9999, 0.0002}; }

LmpSetup fractional_setup(const Instance& inst, RngStream& rng) {
    FractionalSolution sol = assignment_for_opening(inst, random_fractional_opening(inst, rng));
    SplitResult split = split_for_all_or_nothing(inst, sol);
    NearestMassResult nms = nearest_mass_sets(split.instance, split.solution);
    LmpSetup setup;
    setup.lp_objective = fractional_cost_unchecked(inst, sol);
    setup.instance = std::move(nms.instance);
    setup.solution = std::move(nms.solution);
    setup.sets = std::move(nms.sets);
    setup.split.original.resize(nms.split.original.size());
    setup.split.share = nms.split.share;
    for (std::size_t s = 0; s < nms.split.original.size(); ++s) {
        setup.split.original[s] = split.split.original[nms.split.original[s]];
    }
    return setup;
}

std::vector<std::vector<std::size_t>> pipage_family(const FilterResult& filt, std::size_t nf) {
    std::vector<std::vector<std::size_t>> family;
    for (std::size_t i = 0; i < nf; ++i) family.push_back({i});
    for (const auto& ball : filt.ball) {
        if (!ball.empty()) family.push_back(ball);
    }
    std::vector<std::size_t> everything(nf);
    std::iota(everything.begin(), everything.end(), std::size_t{0});
    family.push_back(everything);
    return family;
}

PreprocessedRun preprocess_instance(const Instance& inst, const ScaleConfig& cfg, RngStream& rng, bool lp_based) {
    PreprocessedRun run;
    run.setup = lp_based ? prepare_lmp(inst) : fractional_setup(inst, rng);
    run.filt = filter(run.setup.instance, run.setup.solution, run.setup.sets, cfg);
    run.yprime = consolidate_cores(run.setup.instance, run.setup.solution.y, run.filt, rng);
    run.ydp = pipage_round(run.yprime, pipage_family(run.filt, run.yprime.size()), 1.0 / cfg.effective_delta(), rng);
    return run;
}

}  // namespace

SuiteResult zero_drift(std::size_t instances, std::size_t min_states, std::uint64_t seed) {
    SuiteResult res{"zero-drift", true, ""};
    double worst = 0.0;
    std::size_t states = 0;
    for (std::size_t idx = 0; idx < instances || states < min_states; ++idx) {
        if (idx >= instances * 40) break;  // safety
        const std::uint64_t s = RngStream::mix(seed, "drift-inst", idx);
        Instance inst = generate_instance("euclidean(" + std::to_string(6 + idx % 5) + "," +
                                              std::to_string(8 + idx % 7) + ",2," + std::to_string(s % 100000) + ")",
                                          2 + static_cast<int>(idx % 3), 1.0 + static_cast<double>(idx % 2));
        RngStream rng = RngStream::derive(seed, "drift-run", idx);
        LmpSetup setup = fractional_setup(inst, rng);
        FacilityNeighborOrder order(setup.instance);
        LmpObserver observer = [&](const std::vector<double>& yp, const WeightedNeighborhoodGraph& g) {
            worst = std::max(worst, std::abs(expected_drift(g, yp)));
            ++states;
        };
        lmp_round(setup.instance, setup.solution.y, order, rng, nullptr, {}, &observer);
    }
    res.passed = worst <= 1e-9 && states >= min_states;
    res.detail = "max |drift| = " + fmt(worst) + " over " + std::to_string(states) + " states";
    return res;
}

SuiteResult lmp_open_count(std::size_t trials, std::uint64_t seed) {
    SuiteResult res{"lmp-open-count", true, ""};
    Instance inst = generate_instance("euclidean(12,20,2," + std::to_string(seed % 100000 + 7) + ")", 4, 2.0);
    RngStream setup_rng = RngStream::derive(seed, "open-count-setup", 0);
    LmpSetup setup = fractional_setup(inst, setup_rng);
    FacilityNeighborOrder order(setup.instance);
    const double target = setup.solution.total_opening();
    std::vector<double> opens(trials);
    for (std::size_t t = 0; t < trials; ++t) {
        RngStream rng = RngStream::derive(seed, "open-count", t);
        LmpRun run = lmp_round(setup.instance, setup.solution.y, order, rng);
        opens[t] = static_cast<double>(run.open.size());
    }
    StatSummary s = StatSummary::of(opens);
    const double dev = std::abs(s.mean - target);
    res.passed = dev <= 4.0 * s.stderr_;
    res.detail = "|y|_1 = " + fmt(target) + ", mean open = " + fmt(s.mean) + " +- " + fmt(s.stderr_) + " (" +
                 std::to_string(trials) + " trials)";
    return res;
}

SuiteResult lmp_cost(double p, bool euclidean, std::size_t trials, std::uint64_t seed) {
    const double alpha = (p == 2.0 && euclidean) ? 11.0 / 3.0 : alpha_general(p);
    SuiteResult res{"lmp-cost(p=" + fmt(p) + (euclidean ? ",euclidean" : ",general") + ")", true, ""};
    Instance inst;
    if (euclidean || p == 1.0) {
        inst = generate_instance("euclidean(10,16,2," + std::to_string(seed % 100000 + 11) + ")", 3, p);
    } else {
        inst = generate_instance("graph_metric(14,0.4," + std::to_string(seed % 100000 + 13) + ")", 3, p);
    }
    RngStream setup_rng = RngStream::derive(seed, "lmp-cost-setup", static_cast<std::uint64_t>(p));
    LmpSetup setup = fractional_setup(inst, setup_rng);
    FacilityNeighborOrder order(setup.instance);
    const std::size_t nc = setup.instance.num_clients();
    std::vector<double> frac(nc);
    for (std::size_t j = 0; j < nc; ++j) frac[j] = setup.sets.cost(setup.instance, j);
    std::vector<double> sums(nc, 0.0);
    for (std::size_t t = 0; t < trials; ++t) {
        RngStream rng = RngStream::derive(seed, "lmp-cost", t * 4 + static_cast<std::uint64_t>(p));
        LmpRun run = lmp_round(setup.instance, setup.solution.y, order, rng, &setup.sets);
        for (std::size_t j = 0; j < nc; ++j) sums[j] += run.clients[j].cost;
    }
    double worst_ratio = 0.0;
    for (std::size_t j = 0; j < nc; ++j) {
        const double mean = sums[j] / trials;
        if (frac[j] <= 0) continue;
        worst_ratio = std::max(worst_ratio, mean / frac[j]);
    }
    res.passed = worst_ratio <= alpha * 1.02;
    res.detail = "worst per-client mean/fractional = " + fmt(worst_ratio) + " vs alpha*1.02 = " + fmt(alpha * 1.02);
    return res;
}

SuiteResult eq1_certificate(double p, std::size_t samples, std::uint64_t seed) {
    const double alpha = alpha_general(p);
    SuiteResult res{"eq1(p=" + fmt(p) + ")", true, ""};
    RngStream rng = RngStream::derive(seed, "eq1", static_cast<std::uint64_t>(p * 8));
    std::size_t violations = 0;
    std::size_t tested = 0;
    for (std::size_t s = 0; s < samples; ++s) {
        const std::size_t n = 1 + rng.next_index(6);
        const std::size_t dim = 1 + rng.next_index(3);
        std::vector<std::vector<double>> pts(n + 1, std::vector<double>(dim));
        for (auto& pt : pts) {
            for (double& v : pt) v = rng.uniform(-1.0, 1.0);
        }
        std::vector<double> y(n), dj(n);
        std::vector<std::vector<double>> dp(n, std::vector<double>(n));
        auto dist = [&](const std::vector<double>& a, const std::vector<double>& b) {
            double acc = 0;
            for (std::size_t t = 0; t < dim; ++t) acc += (a[t] - b[t]) * (a[t] - b[t]);
            return std::sqrt(acc);
        };
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = rng.uniform(0.01, 1.0);
            dj[i] = dist(pts[i], pts[n]);
            for (std::size_t ip = 0; ip < n; ++ip) dp[i][ip] = dist(pts[i], pts[ip]);
        }
        ++tested;
        if (!verify_eq1(y, dj, dp, p, alpha)) ++violations;
    }
    // Collinear adversarial grid: client at the origin, pairs on a line.
    for (double x1 = -2.0; x1 <= 2.0 + 1e-9; x1 += 0.08) {
        for (double x2 = -2.0; x2 <= 2.0 + 1e-9; x2 += 0.08) {
            for (double y2 : {1.0, 0.5, 0.1}) {
                std::vector<double> y = {1.0, y2};
                std::vector<double> dj = {std::abs(x1), std::abs(x2)};
                std::vector<std::vector<double>> dp = {{0.0, std::abs(x1 - x2)}, {std::abs(x1 - x2), 0.0}};
                ++tested;
                if (!verify_eq1(y, dj, dp, p, alpha)) ++violations;
            }
        }
    }
    res.passed = violations == 0;
    res.detail = std::to_string(violations) + " violations over " + std::to_string(tested) +
                 " samples at alpha = " + fmt(alpha);
    return res;
}

SuiteResult euclid_certificate(std::size_t samples, std::uint64_t seed) {
    SuiteResult res{"euclid-claims", true, ""};
    RngStream rng = RngStream::derive(seed, "euclid", 0);
    std::size_t violations = 0;
    std::size_t tested = 0;
    for (std::size_t s = 0; s < samples; ++s) {
        const std::size_t dim = 2 + rng.next_index(9);
        const double scale_i = std::pow(10.0, rng.uniform(-2.0, 2.0));
        const double scale_ip = std::pow(10.0, rng.uniform(-2.0, 2.0));
        std::vector<double> vi(dim), vip(dim);
        for (std::size_t t = 0; t < dim; ++t) {
            vi[t] = scale_i * rng.normal();
            vip[t] = scale_ip * rng.normal();
        }
        for (double alpha : {11.0 / 3.0, 4.0}) {
            ++tested;
            if (!verify_euclid_pair(vi, vip, alpha)) ++violations;
        }
    }
    // Degenerate pairs.
    for (double alpha : {11.0 / 3.0, 4.0}) {
        std::vector<double> a = {1.0, 0.0}, b = {0.0, 1.0}, z = {0.0, 0.0};
        tested += 3;
        if (!verify_euclid_pair(a, b, alpha)) ++violations;
        if (!verify_euclid_pair(a, a, alpha)) ++violations;
        if (!verify_euclid_pair(a, z, alpha)) ++violations;
    }
    res.passed = violations == 0;
    res.detail = std::to_string(violations) + " violations over " + std::to_string(tested) + " pairs";
    return res;
}

SuiteResult one_step_potential(std::size_t states, std::uint64_t seed) {
    SuiteResult res{"one-step-potential", true, ""};
    RngStream rng = RngStream::derive(seed, "one-step", 0);
    std::size_t failures = 0;
    double worst_gap = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < states; ++s) {
        const double p = (s % 2 == 0) ? 1.0 : 2.0;
        const double alpha = alpha_general(p);
        const std::size_t nf = 3 + rng.next_index(4);  // 3..6
        std::vector<std::vector<double>> fpts(nf, std::vector<double>(2));
        for (auto& pt : fpts) {
            pt[0] = rng.next_double();
            pt[1] = rng.next_double();
        }
        std::vector<double> client = {rng.next_double(), rng.next_double()};
        std::vector<std::vector<double>> pts = {client};
        pts.insert(pts.end(), fpts.begin(), fpts.end());
        Instance inst;
        inst.metric = MetricSpace::euclidean(pts);
        inst.clients = {0};
        inst.facilities.resize(nf);
        std::iota(inst.facilities.begin(), inst.facilities.end(), std::size_t{1});
        inst.k = static_cast<int>(nf);
        inst.p = p;

        std::vector<double> yp(nf);
        double total = 0.0;
        for (double& v : yp) {
            v = rng.uniform(0.05, 1.0);
            if (rng.bernoulli(0.2)) v = 1.0;
            total += v;
        }
        if (total < 1.0) continue;  // needs a valid neighborhood graph
        std::vector<bool> in_S(nf, false);
        double mass = 0.0;
        for (std::size_t i = 0; i < nf; ++i) {
            if (rng.bernoulli(0.5)) in_S[i] = true;
        }
        for (std::size_t i = 0; i < nf; ++i) {
            if (in_S[i]) mass += yp[i];
        }
        if (mass > 1.0) {  // scale S entries down so y(S) <= 1
            for (std::size_t i = 0; i < nf; ++i) {
                if (in_S[i]) yp[i] *= 0.999 / mass;
            }
            mass = 0.999;
            total = 0.0;
            for (double v : yp) total += v;
            if (total < 1.0) continue;
        }
        std::vector<double> cd(nf);
        double dmax = 0.0;
        for (std::size_t i = 0; i < nf; ++i) {
            cd[i] = inst.cf_distance(0, i);
            dmax = std::max(dmax, cd[i]);
        }
        double b;
        if (s % 5 == 0 && std::abs(mass - 1.0) < 1e-6) b = std::numeric_limits<double>::infinity();
        else b = rng.uniform(0.3 * dmax, 3.0 * dmax + 0.1);

        FacilityNeighborOrder order(inst);
        OneStepCheck check = one_step_potential_check(yp, inst, order, cd, in_S, b, alpha);
        if (std::isinf(check.rhs)) continue;
        const double gap = check.lhs - check.rhs;
        worst_gap = std::max(worst_gap, gap);
        if (!approx_le(check.lhs, check.rhs, 1e-9)) ++failures;
    }
    res.passed = failures == 0;
    res.detail = std::to_string(failures) + " violations, worst lhs-rhs = " + fmt(worst_gap);
    return res;
}

SuiteResult filter_invariants(std::size_t instances, std::uint64_t seed) {
    SuiteResult res{"filter-invariants", true, ""};
    std::size_t type_counts[4] = {0, 0, 0, 0};
    std::size_t lemma10_checks = 0;
    try {
        for (std::size_t idx = 0; idx < instances; ++idx) {
            Instance inst = standard_instance(idx, RngStream::mix(seed, "filter", idx), 1.0 + (idx % 2));
            ScaleConfig cfg = ScaleConfig::for_p(inst.p);
            LmpSetup setup = prepare_lmp(inst);
            FilterResult filt = filter(setup.instance, setup.solution, setup.sets, cfg);
            for (int t : filt.client_type) type_counts[t] += 1;
            // Lemma-10-style core-volume bound for type-3 configurations.
            for (std::size_t j = 0; j < setup.instance.num_clients(); ++j) {
                if (filt.client_type[j] != 3) continue;
                const std::size_t r1 = filt.representative_of[j];
                const std::size_t j1 = filt.representatives[r1];
                double best = std::numeric_limits<double>::infinity();
                std::size_t r2 = r1;
                for (std::size_t r = 0; r < filt.representatives.size(); ++r) {
                    if (r == r1) continue;
                    const double d = setup.instance.metric.distance(setup.instance.clients[j1],
                                                                    setup.instance.clients[filt.representatives[r]]);
                    if (d < best) {
                        best = d;
                        r2 = r;
                    }
                }
                if (r2 == r1) continue;
                const std::size_t j2 = filt.representatives[r2];
                if (setup.sets.d_max(j2) >= cfg.epsilon * setup.sets.d_max(j1)) {
                    double core_mass = 0.0;
                    for (std::size_t i : filt.core[r2]) core_mass += setup.solution.y[i];
                    const double bound = 1.0 - 4.0 * std::pow(cfg.epsilon, inst.p + 1.0);
                    ++lemma10_checks;
                    if (core_mass < bound - 1e-9) {
                        throw InvariantError("filter suite: core volume bound violated");
                    }
                }
            }
        }
    } catch (const std::exception& e) {
        res.passed = false;
        res.detail = e.what();
        return res;
    }
    res.detail = "types 1/2/3 = " + std::to_string(type_counts[1]) + "/" + std::to_string(type_counts[2]) + "/" +
                 std::to_string(type_counts[3]) + ", core-volume checks = " + std::to_string(lemma10_checks);
    return res;
}

SuiteResult consolidate_marginals(std::size_t trials, std::uint64_t seed) {
    SuiteResult res{"consolidate-marginals", true, ""};
    Instance inst = standard_instance(0, RngStream::mix(seed, "consolidate", 1), 1.0);
    ScaleConfig cfg = ScaleConfig::for_p(inst.p);
    RngStream setup_rng = RngStream::derive(seed, "consolidate-setup", 0);
    LmpSetup setup = fractional_setup(inst, setup_rng);
    FilterResult filt = filter(setup.instance, setup.solution, setup.sets, cfg);
    const std::size_t nf = setup.solution.y.size();
    std::vector<double> sums(nf, 0.0), sq(nf, 0.0);
    for (std::size_t t = 0; t < trials; ++t) {
        RngStream rng = RngStream::derive(seed, "consolidate-trial", t);
        std::vector<double> yp = consolidate_cores(setup.instance, setup.solution.y, filt, rng);
        for (std::size_t i = 0; i < nf; ++i) {
            sums[i] += yp[i];
            sq[i] += yp[i] * yp[i];
        }
    }
    double worst_sigma = 0.0;
    for (std::size_t i = 0; i < nf; ++i) {
        const double mean = sums[i] / trials;
        const double var = std::max(0.0, sq[i] / trials - mean * mean);
        const double se = std::sqrt(var / trials);
        const double dev = std::abs(mean - setup.solution.y[i]);
        if (se > 0) worst_sigma = std::max(worst_sigma, dev / se);
        else if (dev > 1e-12) worst_sigma = std::numeric_limits<double>::infinity();
    }
    res.passed = worst_sigma <= 4.0;
    res.detail = "worst |mean - y| in stderr units = " + fmt(worst_sigma) + " (" + std::to_string(trials) + " trials)";
    return res;
}

SuiteResult pipage_properties(std::size_t quantization_runs, std::size_t marginal_trials, std::uint64_t seed) {
    SuiteResult res{"pipage", true, ""};
    RngStream setup_rng = RngStream::derive(seed, "pipage-setup", 0);
    const std::size_t n = 10;
    std::vector<double> yp(n);
    for (double& v : yp) v = setup_rng.next_double();
    std::vector<std::vector<std::size_t>> family;
    for (std::size_t i = 0; i < n; ++i) family.push_back({i});
    family.push_back({0, 1, 2});
    family.push_back({3, 4, 5, 6});
    std::vector<std::size_t> everything(n);
    std::iota(everything.begin(), everything.end(), std::size_t{0});
    family.push_back(everything);

    const double gs[3] = {0.25, 0.125, 0.0625};
    // Deterministic per-run quantization property.
    for (std::size_t r = 0; r < quantization_runs; ++r) {
        RngStream run_rng = RngStream::derive(seed, "pipage-quant", r);
        std::vector<double> y = yp;
        if (r % 2 == 1) {
            for (double& v : y) v = run_rng.next_double();
        }
        const double g = gs[r % 3];
        std::vector<double> out = pipage_round(y, family, g, run_rng);
        for (std::size_t i = 0; i < n; ++i) {
            const double scaled = out[i] / g;
            if (std::abs(scaled - std::round(scaled)) > 1e-9) {
                res.passed = false;
                res.detail = "entry not a multiple of g in run " + std::to_string(r);
                return res;
            }
        }
        for (const auto& s : family) {
            double in_sum = 0.0, out_sum = 0.0;
            for (std::size_t i : s) {
                in_sum += y[i];
                out_sum += out[i];
            }
            const double lo = std::floor(in_sum / g + 1e-9);
            const double hi = std::ceil(in_sum / g - 1e-9);
            const double got = out_sum / g;
            if (got < lo - 1e-6 || got > hi + 1e-6) {
                res.passed = false;
                res.detail = "sum quantization violated in run " + std::to_string(r);
                return res;
            }
        }
    }

    // Marginals and within-ball covariance.
    const double g = 0.25;
    std::vector<double> sums(n, 0.0);
    std::vector<std::vector<double>> samples(marginal_trials);
    for (std::size_t t = 0; t < marginal_trials; ++t) {
        RngStream run_rng = RngStream::derive(seed, "pipage-marginal", t);
        samples[t] = pipage_round(yp, family, g, run_rng);
        for (std::size_t i = 0; i < n; ++i) sums[i] += samples[t][i];
    }
    double worst_sigma = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double mean = sums[i] / marginal_trials;
        double var = 0.0;
        for (std::size_t t = 0; t < marginal_trials; ++t) var += (samples[t][i] - mean) * (samples[t][i] - mean);
        var /= (marginal_trials - 1);
        const double se = std::sqrt(var / marginal_trials);
        const double dev = std::abs(mean - yp[i]);
        if (se > 0) worst_sigma = std::max(worst_sigma, dev / se);
        else if (dev > 1e-12) worst_sigma = std::numeric_limits<double>::infinity();
    }
    if (worst_sigma > 4.0) {
        res.passed = false;
        res.detail = "marginal off by " + fmt(worst_sigma) + " stderr";
        return res;
    }
    double worst_cov_sigma = -std::numeric_limits<double>::infinity();
    const std::vector<std::size_t>& ball = family[n];  // {0,1,2}
    for (std::size_t a = 0; a < ball.size(); ++a) {
        for (std::size_t b = a + 1; b < ball.size(); ++b) {
            const std::size_t i = ball[a], j = ball[b];
            const double mi = sums[i] / marginal_trials, mj = sums[j] / marginal_trials;
            std::vector<double> prods(marginal_trials);
            for (std::size_t t = 0; t < marginal_trials; ++t) prods[t] = (samples[t][i] - mi) * (samples[t][j] - mj);
            StatSummary s = StatSummary::of(prods);
            if (s.stderr_ > 0) worst_cov_sigma = std::max(worst_cov_sigma, s.mean / s.stderr_);
        }
    }
    if (worst_cov_sigma > 4.0) {
        res.passed = false;
        res.detail = "positive within-ball covariance at " + fmt(worst_cov_sigma) + " stderr";
        return res;
    }
    res.detail = "quantization exact in " + std::to_string(quantization_runs) + " runs; worst marginal " +
                 fmt(worst_sigma) + " se; worst covariance z = " + fmt(worst_cov_sigma);
    return res;
}

SuiteResult pseudo_structure(std::size_t runs, std::uint64_t seed) {
    SuiteResult res{"pseudo-structure", true, ""};
    std::size_t balanced_calls = 0, unbalanced_calls = 0, fict_candidates = 0;
    try {
        for (std::size_t r = 0; r < runs; ++r) {
            Instance inst = standard_instance(r, RngStream::mix(seed, "pseudo-structure", r), 1.0);
            ScaleConfig cfg = ScaleConfig::for_p(inst.p);
            RngStream rng = RngStream::derive(seed, "pseudo-structure-run", r);
            PreprocessedRun pre = preprocess_instance(inst, cfg, rng, r % 2 == 0);
            FacilityNeighborOrder order(pre.setup.instance);
            IterateResult rounded = iterate(pre.setup.instance, pre.ydp, cfg, rng, order);
            balanced_calls += rounded.state.log.balanced_calls;
            unbalanced_calls += rounded.state.log.unbalanced_calls;
            KCenterInput kc = kcenter_input(pre.setup.instance, rounded.ybar);
            KCenterResult finished = kcenter_finish(kc, pre.setup.instance);
            for (std::size_t j = 0; j < pre.setup.instance.num_clients(); ++j) {
                const double d = pre.setup.instance.cf_distance(j, finished.solution.assignment[j]);
                if (d > 3.0 * rounded.d2max[j] + 1e-9 * tolerance_scale(d, rounded.d2max[j])) {
                    throw InvariantError("pseudo suite: backup distance above 3 d''_max");
                }
            }
            (void)fict_candidates;
        }
    } catch (const std::exception& e) {
        res.passed = false;
        res.detail = e.what();
        return res;
    }
    res.detail = std::to_string(runs) + " runs, " + std::to_string(balanced_calls) + " balanced / " +
                 std::to_string(unbalanced_calls) + " unbalanced calls, all exact invariants held";
    return res;
}

SuiteResult pseudo_budget(std::size_t runs, std::uint64_t seed) {
    SuiteResult res{"pseudo-budget", true, ""};
    std::size_t ok = 0;
    std::vector<double> z_all;
    std::size_t z_exceed = 0;
    ScaleConfig cfg0 = ScaleConfig::for_p(1.0);
    for (std::size_t r = 0; r < runs; ++r) {
        Instance inst = standard_instance(r, RngStream::mix(seed, "pseudo-budget", r), 1.0);
        ScaleConfig cfg = ScaleConfig::for_p(inst.p);
        RngStream rng = RngStream::derive(seed, "pseudo-budget-run", r);
        PreprocessedRun pre = preprocess_instance(inst, cfg, rng, r % 2 == 0);
        FacilityNeighborOrder order(pre.setup.instance);
        IterateResult rounded = iterate(pre.setup.instance, pre.ydp, cfg, rng, order);
        double total = 0.0;
        for (double v : rounded.ybar) total += v;
        const double slack = static_cast<double>(rounded.state.forced_count()) +
                             std::max(0.0, total - static_cast<double>(inst.k));
        if (slack <= cfg.effective_budget() + 1e-9) ++ok;
        for (double z : rounded.state.log.z_values) {
            z_all.push_back(z);
            if (z >= cfg.effective_z_cap()) ++z_exceed;
        }
    }
    const double rate = static_cast<double>(ok) / runs;
    const double z_rate = z_all.empty() ? 0.0 : static_cast<double>(z_exceed) / z_all.size();
    res.passed = rate >= 0.9 && z_rate <= 0.10;
    StatSummary zs = StatSummary::of(z_all.empty() ? std::vector<double>{0.0} : z_all);
    res.detail = "budget held in " + fmt(100.0 * rate) + "% of " + std::to_string(runs) + " runs (budget " +
                 std::to_string(cfg0.effective_budget()) + "); Z exceedance " + fmt(100.0 * z_rate) +
                 "% of " + std::to_string(z_all.size()) + " updates, Z mean " + fmt(zs.mean) + " max " + fmt(zs.max);
    return res;
}

namespace {

// A fractional 1/delta-integral state with real imbalance, for the sampling
// and bounded-differences audits.  force_threshold 0 routes every unbalanced
// call into branch (b); the r-threshold keeps R away unless heavy.
struct AuditState {
    Instance inst;
    ScaleConfig cfg;
    std::vector<double> ydp;
};

AuditState make_audit_state(std::uint64_t seed, std::size_t idx) {
    AuditState st;
    st.inst = standard_instance(idx, RngStream::mix(seed, "audit-state", idx), 1.0);
    st.cfg = ScaleConfig::for_p(st.inst.p);
    st.cfg.force_threshold = 0.0;
    st.cfg.r_threshold = 0.9;  // only near-saturated negative copies are forced
    RngStream rng = RngStream::derive(seed, "audit-prep", idx);
    // Random 1/delta-integral opening with a healthy share of partial blocks,
    // so both update branches see real imbalance.
    const int delta = st.cfg.effective_delta();
    const std::size_t nf = st.inst.num_facilities();
    st.ydp.assign(nf, 0.0);
    long total = 0;
    for (std::size_t i = 0; i < nf; ++i) {
        long m = 0;
        const double u = rng.next_double();
        if (u < 0.25) m = 0;
        else if (u < 0.65) m = 1 + static_cast<long>(rng.next_index(delta - 1));
        else m = delta;
        st.ydp[i] = static_cast<double>(m) / delta;
        total += m;
    }
    if (total < delta) st.ydp[0] = 1.0;
    return st;
}

}  // namespace

SuiteResult sampling_marginals(std::size_t trials, std::uint64_t seed) {
    SuiteResult res{"sampling-marginals", true, ""};
    AuditState st = make_audit_state(seed, 1);
    FacilityNeighborOrder order(st.inst);
    CopySet copies = build_copies(st.ydp, st.cfg.effective_delta());
    if (copies.copies.size() < static_cast<std::size_t>(st.cfg.effective_delta())) {
        res.passed = false;
        res.detail = "audit state too small";
        return res;
    }
    CopyNeighborhoodGraph graph = build_copy_graph(copies.copies, st.cfg.effective_delta(), st.inst, order);
    ImbalancePartition part = partition_by_imbalance(graph);
    const double delta = st.cfg.effective_delta();
    const double L = st.cfg.effective_L();
    const double eps5 = st.cfg.eps_pow(st.cfg.c5);

    // Per-iteration marginals: candidates of the unbalanced branch; the
    // iteration picks unbalanced with probability 1/2.
    std::map<std::size_t, std::size_t> unbalanced_hits;  // candidate -> count
    std::size_t unbalanced_calls = 0;
    std::size_t candidate_count = 0;
    std::vector<std::size_t> pair_hits;  // joint selections for the first few pairs
    std::map<std::uint64_t, std::size_t> balanced_hits;  // copy_id -> count
    std::size_t balanced_calls = 0;

    for (std::size_t t = 0; t < trials; ++t) {
        RngStream rng = RngStream::derive(seed, "sampling-trial", t);
        RoundingState state;
        state.fprime = copies.copies;
        state.next_copy_id = copies.next_copy_id;
        state.forced.assign(st.inst.num_facilities(), 0);
        if (rng.bernoulli(0.5)) {
            auto outcome = unbalanced_update(state, graph, part, st.cfg, rng);
            if (!outcome) continue;
            ++unbalanced_calls;
            candidate_count = outcome->context.candidates.size();
            if (pair_hits.empty()) pair_hits.assign(std::min<std::size_t>(candidate_count * candidate_count, 64), 0);
            for (std::size_t c = 0; c < candidate_count; ++c) {
                if (outcome->indicator[c]) unbalanced_hits[c] += 1;
            }
            const std::size_t m = std::min<std::size_t>(candidate_count, 8);
            for (std::size_t a = 0; a < m; ++a) {
                for (std::size_t b = a + 1; b < m; ++b) {
                    if (outcome->indicator[a] && outcome->indicator[b]) pair_hits[a * 8 + b] += 1;
                }
            }
        } else {
            auto selected = balanced_update(state, graph, part, st.cfg, rng);
            ++balanced_calls;
            for (std::uint32_t v : selected) balanced_hits[graph.nodes[v].copy_id] += 1;
        }
    }

    // Claim-10 band for unbalanced candidates, per iteration: [L, (1+eps5)L]/delta.
    double worst_dev = 0.0;
    const double lo = L / delta, hi = (1.0 + eps5) * L / delta;
    for (std::size_t c = 0; c < candidate_count; ++c) {
        const double phat = static_cast<double>(unbalanced_hits[c]) / trials;  // over all iterations
        const double se = std::sqrt(std::max(phat * (1 - phat), 1e-12) / trials);
        if (phat < lo - 4 * se || phat > hi + 4 * se) worst_dev = std::max(worst_dev, std::max(lo - phat, phat - hi) / se);
    }
    // Pairwise bound 2((1+eps5)L)^2/delta^2 per iteration.
    const double pair_bound = 2.0 * std::pow((1.0 + eps5) * L, 2) / (delta * delta);
    double worst_pair = 0.0;
    for (std::size_t a = 0; a < std::min<std::size_t>(candidate_count, 8); ++a) {
        for (std::size_t b = a + 1; b < std::min<std::size_t>(candidate_count, 8); ++b) {
            const double phat = pair_hits.empty() ? 0.0 : static_cast<double>(pair_hits[a * 8 + b]) / trials;
            const double se = std::sqrt(std::max(phat * (1 - phat), 1e-12) / trials);
            if (phat > pair_bound + 4 * se) worst_pair = std::max(worst_pair, (phat - pair_bound) / se);
        }
    }
    // Lemma-13 band for balanced nodes, conditioned on a balanced call: the
    // selection probability 2(1+eps5)L/delta minus the exactly computable
    // union-bound loss over the node's conflict neighborhood.
    const double q = 2.0 * (1.0 + eps5) * L / delta;
    double worst_balanced = 0.0;
    for (std::uint32_t v : part.zero) {
        std::set<std::uint32_t> conflicts;
        for (std::uint32_t tnode : graph.out_edges[v]) {
            for (std::uint32_t u : part.zero) {
                if (u == v) continue;
                for (std::uint32_t t2 : graph.out_edges[u]) {
                    if (t2 == tnode) {
                        conflicts.insert(u);
                        break;
                    }
                }
            }
        }
        for (std::uint32_t u : part.zero) {
            if (u != v && graph.nodes[u].facility == graph.nodes[v].facility) conflicts.insert(u);
        }
        const double loss = std::min(1.0, static_cast<double>(conflicts.size()) * q);
        const double lo_b = (1.0 - loss) * q;
        const double phat = balanced_calls == 0
                                ? 0.0
                                : static_cast<double>(balanced_hits[graph.nodes[v].copy_id]) / balanced_calls;
        const double se = std::sqrt(std::max(phat * (1 - phat), 1e-12) / std::max<std::size_t>(balanced_calls, 1));
        if (phat < lo_b - 4 * se || phat > q + 4 * se) {
            worst_balanced = std::max(worst_balanced, std::max(lo_b - phat, phat - q) / se);
        }
    }

    res.passed = worst_dev == 0.0 && worst_pair == 0.0 && worst_balanced == 0.0;
    res.detail = "unbalanced candidates " + std::to_string(candidate_count) + ", band [" + fmt(lo) + ", " + fmt(hi) +
                 "], worst dev " + fmt(worst_dev) + " se; pair bound ok; balanced worst dev " + fmt(worst_balanced) +
                 " se over " + std::to_string(balanced_calls) + " calls";
    return res;
}

SuiteResult bounded_differences(std::size_t coordinates, std::uint64_t seed) {
    SuiteResult res{"bounded-differences", true, ""};
    std::size_t audited = 0;
    double worst_excess = -std::numeric_limits<double>::infinity();
    for (std::size_t idx = 0; audited < coordinates && idx < 200; ++idx) {
        AuditState st = make_audit_state(seed, idx % 5);
        FacilityNeighborOrder order(st.inst);
        CopySet copies = build_copies(st.ydp, st.cfg.effective_delta());
        RngStream rng = RngStream::derive(seed, "bd-run", idx);
        RoundingState state;
        state.fprime = copies.copies;
        state.next_copy_id = copies.next_copy_id;
        state.forced.assign(st.inst.num_facilities(), 0);
        CopyNeighborhoodGraph graph = build_copy_graph(state.fprime, st.cfg.effective_delta(), st.inst, order);
        ImbalancePartition part = partition_by_imbalance(graph);
        auto outcome = unbalanced_update(state, graph, part, st.cfg, rng);
        if (!outcome) continue;
        const auto& ctx = outcome->context;
        if (ctx.candidates.empty()) continue;
        RngStream coord_rng = RngStream::derive(seed, "bd-coord", idx);
        for (std::size_t rep = 0; rep < 16 && audited < coordinates; ++rep) {
            const std::size_t c = coord_rng.next_index(ctx.candidates.size());
            std::vector<char> ind = outcome->indicator;
            ind[c] = 0;
            const double z0 = ctx.z_of(ind);
            ind[c] = 1;
            const double z1 = ctx.z_of(ind);
            const double diff = std::abs(z1 - z0);
            worst_excess = std::max(worst_excess, diff - ctx.candidates[c].kappa);
            if (diff > ctx.candidates[c].kappa + 1e-12) {
                res.passed = false;
                res.detail = "toggle exceeded kappa at candidate " + std::to_string(c);
                return res;
            }
            ++audited;
        }
    }
    res.passed = res.passed && audited >= coordinates;
    res.detail = std::to_string(audited) + " coordinates audited, worst |dZ|-kappa = " + fmt(worst_excess);
    return res;
}

SuiteResult reduction_exactness(std::size_t instances, std::uint64_t seed) {
    SuiteResult res{"reduction-exactness", true, ""};
    std::size_t witness_found = 0, a2_checked = 0, composed = 0;
    try {
        for (std::size_t idx = 0; idx < instances; ++idx) {
            RngStream rng = RngStream::derive(seed, "reduction-inst", idx);
            const double p = (idx % 2 == 0) ? 1.0 : 2.0;
            const int k = 2 + static_cast<int>(idx % 2);
            const std::size_t nf = 6 + rng.next_index(3);  // 6..8
            const std::size_t ncl = 8 + rng.next_index(5);  // 8..12
            Instance inst = generate_instance("euclidean(" + std::to_string(ncl) + "," + std::to_string(nf) + ",2," +
                                                  std::to_string(rng.next_index(100000)) + ")",
                                              k, p);
            IntegralSolution opt = brute_force_opt(inst);
            const long long t = 4;
            const double A = opt.total_cost / static_cast<double>(t);

            // Lemma A1 witness: some emitted instance preserves OPT and is A-sparse.
            bool witness = false;
            for (const Instance& sub : reduce_to_sparse(inst, t)) {
                std::set<std::size_t> points(sub.facilities.begin(), sub.facilities.end());
                bool keeps_opt = true;
                for (std::size_t i : opt.open) {
                    if (!points.count(inst.facilities[i])) {
                        keeps_opt = false;
                        break;
                    }
                }
                if (!keeps_opt) continue;
                if (brute_force_opt(sub).total_cost > opt.total_cost + 1e-9) continue;
                std::vector<std::size_t> opt_in_sub;
                for (std::size_t i = 0; i < sub.num_facilities(); ++i) {
                    for (std::size_t o : opt.open) {
                        if (sub.facilities[i] == inst.facilities[o]) opt_in_sub.push_back(i);
                    }
                }
                bool sparse = true;
                for (std::size_t i = 0; i < sub.num_facilities(); ++i) {
                    if (is_dense(sub, i, A, opt_in_sub)) {
                        sparse = false;
                        break;
                    }
                }
                if (sparse) {
                    witness = true;
                    break;
                }
            }
            if (!witness) throw InvariantError("reduction suite: no OPT-preserving sparse instance emitted");
            ++witness_found;

            // Pseudo solution: OPT plus c extra facilities.
            const int c = 1 + static_cast<int>(idx % 2);
            std::set<std::size_t> open_set(opt.open.begin(), opt.open.end());
            for (int e = 0; e < c; ++e) {
                for (std::size_t tries = 0; tries < 4 * nf; ++tries) {
                    const std::size_t cand = rng.next_index(nf);
                    if (!open_set.count(cand)) {
                        open_set.insert(cand);
                        break;
                    }
                }
            }
            if (open_set.size() <= static_cast<std::size_t>(k)) continue;
            PseudoSolution pseudo;
            pseudo.open.assign(open_set.begin(), open_set.end());
            pseudo.cost = integral_cost(inst, pseudo.open).total_cost;

            // Lemma A2 inequality on the original instance.
            ReductionConfig cfg;
            cfg.delta = pseudo_to_true_delta(alpha_general(p), p);
            cfg.t = t;
            cfg.c = static_cast<int>(pseudo.open.size()) - k;
            cfg.A = A;
            IntegralSolution s7 = solve_sparse(inst, pseudo, cfg);
            const double B = reduction_bound_B(cfg, pseudo.cost, p);
            const double ratio = std::pow((cfg.xi + cfg.delta) / (cfg.xi - cfg.delta), p);
            const double bound = std::max(pseudo.cost + cfg.c * B, ratio * opt.total_cost);
            if (s7.total_cost > bound + 1e-9 * tolerance_scale(s7.total_cost, bound)) {
                throw InvariantError("reduction suite: Lemma A2 bound violated");
            }
            ++a2_checked;

            // Full composition.
            const double alpha = alpha_general(p);
            const double eps = 0.25;
            IntegralSolution composedSol = pseudo_to_true(inst, pseudo, alpha, eps);
            if (composedSol.total_cost > (alpha + eps) * opt.total_cost + 1e-9) {
                throw InvariantError("reduction suite: pseudo_to_true exceeded (alpha+eps) opt");
            }
            ++composed;
        }
    } catch (const std::exception& e) {
        res.passed = false;
        res.detail = e.what();
        return res;
    }
    res.detail = "witness/A2/composition checks = " + std::to_string(witness_found) + "/" +
                 std::to_string(a2_checked) + "/" + std::to_string(composed);
    return res;
}

SuiteResult end_to_end(double p, std::size_t seeds, std::uint64_t seed) {
    SuiteResult res{"end-to-end(p=" + fmt(p) + ")", true, ""};
    const double alpha = alpha_general(p);
    Instance inst = generate_instance("euclidean(9,7,2," + std::to_string(seed % 100000 + 29) + ")", 2, p);
    IntegralSolution opt = brute_force_opt(inst);
    LmpSetup setup = prepare_lmp(inst);
    ScaleConfig cfg = ScaleConfig::for_p(p);
    FacilityNeighborOrder order(setup.instance);
    double best_ratio = std::numeric_limits<double>::infinity();
    std::ostringstream runs;
    for (std::size_t s = 0; s < seeds; ++s) {
        RngStream rng = RngStream::derive(seed, "e2e", s);
        FilterResult filt = filter(setup.instance, setup.solution, setup.sets, cfg);
        std::vector<double> yprime = consolidate_cores(setup.instance, setup.solution.y, filt, rng);
        std::vector<double> ydp =
            pipage_round(yprime, pipage_family(filt, yprime.size()), 1.0 / cfg.effective_delta(), rng);
        IterateResult rounded = iterate(setup.instance, ydp, cfg, rng, order);
        KCenterInput kc = kcenter_input(setup.instance, rounded.ybar);
        KCenterResult finished = kcenter_finish(kc, setup.instance);
        std::vector<std::size_t> open_orig = setup.split.map_back(finished.solution.open);
        IntegralSolution final_sol = integral_cost(inst, open_orig);
        double cost = final_sol.total_cost;
        std::size_t open_count = final_sol.open.size();
        if (open_count > static_cast<std::size_t>(inst.k)) {
            PseudoSolution pseudo{final_sol.open, final_sol.total_cost};
            IntegralSolution reduced = pseudo_to_true(inst, pseudo, alpha, 0.25, opt.total_cost);
            cost = reduced.total_cost;
            open_count = reduced.open.size();
        }
        const double ratio = opt.total_cost > 0 ? cost / opt.total_cost : 1.0;
        best_ratio = std::min(best_ratio, ratio);
        runs << " run" << s << ": ratio " << fmt(ratio) << " open " << open_count << ";";
    }
    res.passed = best_ratio <= alpha + 0.5;
    res.detail = "best ratio " + fmt(best_ratio) + " vs " + fmt(alpha + 0.5) + ";" + runs.str();
    return res;
}

SuiteResult cost_lemmas(std::size_t trials, std::uint64_t seed) {
    SuiteResult res{"cost-lemmas", true, ""};
    Instance inst = standard_instance(2, RngStream::mix(seed, "cost-lemmas", 3), 1.0);
    ScaleConfig cfg = ScaleConfig::for_p(inst.p);
    LmpSetup setup = prepare_lmp(inst);
    FilterResult filt = filter(setup.instance, setup.solution, setup.sets, cfg);
    const std::size_t nc = setup.instance.num_clients();
    std::vector<double> base_cost(nc);
    for (std::size_t j = 0; j < nc; ++j) {
        base_cost[j] = cost_under_opening(setup.instance, j, setup.solution.y);
    }
    std::vector<double> sum_yprime_cost(nc, 0.0), sum_ydp_cost(nc, 0.0);
    const auto family = pipage_family(filt, setup.solution.y.size());
    for (std::size_t t = 0; t < trials; ++t) {
        RngStream rng = RngStream::derive(seed, "cost-lemmas-trial", t);
        std::vector<double> yprime = consolidate_cores(setup.instance, setup.solution.y, filt, rng);
        std::vector<double> ydp = pipage_round(yprime, family, 1.0 / cfg.effective_delta(), rng);
        for (std::size_t j = 0; j < nc; ++j) {
            sum_yprime_cost[j] += cost_under_opening(setup.instance, j, yprime);
            sum_ydp_cost[j] += cost_under_opening(setup.instance, j, ydp);
        }
    }
    double worst_c3 = 0.0;   // Lemma-3 constant: (E[cost_y'] / cost_y - 1) / (p eps)
    double worst_t1 = 0.0;   // type-1 slack: E[cost_y''] / cost_y - 1
    for (std::size_t j = 0; j < nc; ++j) {
        if (base_cost[j] <= 1e-12) continue;
        const double r1 = sum_yprime_cost[j] / trials / base_cost[j];
        worst_c3 = std::max(worst_c3, (r1 - 1.0) / (inst.p * cfg.epsilon));
        if (filt.client_type[j] == 1) {
            const double r2 = sum_ydp_cost[j] / trials / base_cost[j];
            worst_t1 = std::max(worst_t1, r2 - 1.0);
        }
    }
    res.detail = "measured Lemma-3 constant C = " + fmt(worst_c3) + "; worst type-1 slack = " + fmt(worst_t1) +
                 " (eps^(p^2) = " + fmt(cfg.eps_pow(static_cast<int>(std::ceil(inst.p * inst.p)))) + ")";
    res.passed = std::isfinite(worst_c3) && std::isfinite(worst_t1);
    return res;
}

SuiteResult fnew_diagnostic(std::size_t runs, std::uint64_t seed) {
    SuiteResult res{"fnew-diagnostic", true, ""};
    long increases = 0, steps = 0;
    for (std::size_t r = 0; r < runs; ++r) {
        Instance inst = standard_instance(r, RngStream::mix(seed, "fnew", r), 1.0);
        ScaleConfig cfg = ScaleConfig::for_p(inst.p);
        RngStream rng = RngStream::derive(seed, "fnew-run", r);
        PreprocessedRun pre = preprocess_instance(inst, cfg, rng, false);
        FacilityNeighborOrder order(pre.setup.instance);
        IterateOptions opts;
        opts.track_fnew = true;
        IterateResult rounded = iterate(pre.setup.instance, pre.ydp, cfg, rng, order, opts);
        for (long v : rounded.fnew_increases) increases += v;
        steps += rounded.fnew_steps * static_cast<long>(rounded.fnew_increases.size());
    }
    const double rate = steps > 0 ? static_cast<double>(increases) / steps : 0.0;
    res.detail = "realized f^new increased in " + fmt(100.0 * rate) + "% of " + std::to_string(steps) +
                 " client-steps (diagnostic only)";
    res.passed = true;
    return res;
}

}  // namespace kcluster::suites
