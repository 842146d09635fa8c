#include "kcluster/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "kcluster/errors.hpp"
#include "kcluster/lmp.hpp"
#include "kcluster/pseudo_round.hpp"
#include "kcluster/rng.hpp"

namespace kcluster {

using nlohmann::json;

StatSummary StatSummary::of(const std::vector<double>& values) {
    StatSummary s;
    s.count = values.size();
    if (values.empty()) return s;
    s.min = *std::min_element(values.begin(), values.end());
    s.max = *std::max_element(values.begin(), values.end());
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
    if (values.size() > 1) {
        double acc = 0.0;
        for (double v : values) acc += (v - s.mean) * (v - s.mean);
        s.stdev = std::sqrt(acc / (values.size() - 1));
    }
    s.stderr_ = s.stdev / std::sqrt(static_cast<double>(values.size()));
    return s;
}

namespace {

json summary_json(const StatSummary& s) {
    json j;
    j["mean"] = s.mean;
    j["stdev"] = s.stdev;
    j["stderr"] = s.stderr_;
    j["min"] = s.min;
    j["max"] = s.max;
    j["n"] = s.count;
    return j;
}

// "name(a,b,...)" -> (name, args)
bool parse_call(const std::string& spec, std::string* name, std::vector<double>* args) {
    const auto open = spec.find('(');
    if (open == std::string::npos || spec.back() != ')') return false;
    *name = spec.substr(0, open);
    const std::string body = spec.substr(open + 1, spec.size() - open - 2);
    args->clear();
    if (body.empty()) return true;
    std::stringstream ss(body);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            args->push_back(std::stod(tok));
        } catch (...) {
            return false;
        }
    }
    return true;
}

}  // namespace

Instance generate_instance(const std::string& spec, int k, double p) {
    std::string name;
    std::vector<double> args;
    if (!parse_call(spec, &name, &args)) throw ConfigError("generator: cannot parse spec \"" + spec + "\"");

    Instance inst;
    inst.k = k;
    inst.p = p;
    if (name == "line") {
        if (args.size() != 1 || args[0] < 1) throw ConfigError("generator: line(n) needs n >= 1");
        const std::size_t n = static_cast<std::size_t>(args[0]);
        std::vector<std::vector<double>> pts;
        for (std::size_t i = 0; i < n; ++i) pts.push_back({static_cast<double>(i)});
        for (std::size_t i = 0; i < n; ++i) pts.push_back({static_cast<double>(i)});
        inst.metric = MetricSpace::euclidean(std::move(pts));
        inst.clients.resize(n);
        std::iota(inst.clients.begin(), inst.clients.end(), std::size_t{0});
        inst.facilities.resize(n);
        std::iota(inst.facilities.begin(), inst.facilities.end(), n);
    } else if (name == "euclidean") {
        if (args.size() != 4) throw ConfigError("generator: euclidean(n_c, n_f, dim, seed)");
        const std::size_t nc = static_cast<std::size_t>(args[0]);
        const std::size_t nf = static_cast<std::size_t>(args[1]);
        const std::size_t dim = static_cast<std::size_t>(args[2]);
        if (nc < 1 || nf < 1 || dim < 1) throw ConfigError("generator: euclidean sizes must be positive");
        RngStream rng = RngStream::derive(static_cast<std::uint64_t>(args[3]), "gen.euclidean", 0);
        std::vector<std::vector<double>> pts;
        for (std::size_t i = 0; i < nc + nf; ++i) {
            std::vector<double> pt(dim);
            for (double& v : pt) v = rng.next_double();
            pts.push_back(std::move(pt));
        }
        inst.metric = MetricSpace::euclidean(std::move(pts));
        inst.clients.resize(nc);
        std::iota(inst.clients.begin(), inst.clients.end(), std::size_t{0});
        inst.facilities.resize(nf);
        std::iota(inst.facilities.begin(), inst.facilities.end(), nc);
    } else if (name == "graph_metric") {
        if (args.size() != 3) throw ConfigError("generator: graph_metric(n, edge_density, seed)");
        const std::size_t n = static_cast<std::size_t>(args[0]);
        const double density = args[1];
        if (n < 2 || density < 0 || density > 1) throw ConfigError("generator: bad graph_metric parameters");
        RngStream rng = RngStream::derive(static_cast<std::uint64_t>(args[2]), "gen.graph", 0);
        const double inf = std::numeric_limits<double>::infinity();
        std::vector<std::vector<double>> d(n, std::vector<double>(n, inf));
        for (std::size_t i = 0; i < n; ++i) d[i][i] = 0.0;
        auto add_edge = [&](std::size_t a, std::size_t b, double w) {
            d[a][b] = std::min(d[a][b], w);
            d[b][a] = d[a][b];
        };
        // random spanning chain keeps the graph connected
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        rng.shuffle(perm);
        for (std::size_t i = 1; i < n; ++i) add_edge(perm[i - 1], perm[i], rng.uniform(0.5, 1.5));
        for (std::size_t a = 0; a < n; ++a) {
            for (std::size_t b = a + 1; b < n; ++b) {
                if (rng.bernoulli(density)) add_edge(a, b, rng.uniform(0.5, 1.5));
            }
        }
        for (std::size_t m = 0; m < n; ++m) {  // shortest-path closure
            for (std::size_t a = 0; a < n; ++a) {
                for (std::size_t b = 0; b < n; ++b) {
                    d[a][b] = std::min(d[a][b], d[a][m] + d[m][b]);
                }
            }
        }
        inst.metric = MetricSpace::from_matrix(std::move(d));
        inst.clients.resize(n);
        std::iota(inst.clients.begin(), inst.clients.end(), std::size_t{0});
        inst.facilities = inst.clients;
    } else if (name == "clustered") {
        if (args.size() != 3) throw ConfigError("generator: clustered(centers, spread, seed)");
        const std::size_t centers = static_cast<std::size_t>(args[0]);
        const double spread = args[1];
        if (centers < 1 || spread < 0) throw ConfigError("generator: bad clustered parameters");
        RngStream rng = RngStream::derive(static_cast<std::uint64_t>(args[2]), "gen.clustered", 0);
        std::vector<std::vector<double>> client_pts, facility_pts;
        for (std::size_t c = 0; c < centers; ++c) {
            const double cx = rng.next_double();
            const double cy = rng.next_double();
            for (int i = 0; i < 4; ++i) {
                client_pts.push_back({cx + spread * rng.normal(), cy + spread * rng.normal()});
            }
            for (int i = 0; i < 3; ++i) {
                facility_pts.push_back({cx + spread * rng.normal(), cy + spread * rng.normal()});
            }
        }
        std::vector<std::vector<double>> pts = client_pts;
        pts.insert(pts.end(), facility_pts.begin(), facility_pts.end());
        inst.metric = MetricSpace::euclidean(std::move(pts));
        inst.clients.resize(client_pts.size());
        std::iota(inst.clients.begin(), inst.clients.end(), std::size_t{0});
        inst.facilities.resize(facility_pts.size());
        std::iota(inst.facilities.begin(), inst.facilities.end(), client_pts.size());
    } else {
        throw ConfigError("generator: unknown generator \"" + name + "\"");
    }
    inst.validate();
    return inst;
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const int count = std::min<int>(threads, static_cast<int>(n));
    for (int t = 0; t < count; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

LmpSetup prepare_lmp(const Instance& inst, const LpSolveOptions& opts) {
    FractionalSolution sol = solve_relaxation(inst, opts);
    const double objective = fractional_cost_unchecked(inst, sol);
    SplitResult split = split_for_all_or_nothing(inst, sol);
    NearestMassResult nms = nearest_mass_sets(split.instance, split.solution);

    LmpSetup setup;
    setup.lp_objective = objective;
    setup.instance = std::move(nms.instance);
    setup.solution = std::move(nms.solution);
    setup.sets = std::move(nms.sets);
    // Compose the two split maps back to the original facility space.
    setup.split.original.resize(nms.split.original.size());
    setup.split.share = nms.split.share;
    for (std::size_t s = 0; s < nms.split.original.size(); ++s) {
        setup.split.original[s] = split.split.original[nms.split.original[s]];
    }
    return setup;
}

namespace {

struct TrialRecord {
    std::uint64_t seed = 0;
    double lp_objective = 0.0;
    double lmp_open = 0.0;
    double lmp_cost_ratio = 0.0;  // total happy cost / LP objective
    double pseudo_open = 0.0;
    double forced = 0.0;
    double final_cost = 0.0;
    double final_open = 0.0;
    double ratio_vs_lp = 0.0;
    double ratio_vs_oracle = 0.0;  // 0 when no oracle
    double reduced_cost = 0.0;     // 0 when the reduce stage did not run
    double reduced_ratio_vs_oracle = 0.0;
};

bool stage_enabled(const std::string& stages, const std::string& name) {
    if (stages == "full" || stages.empty()) return true;
    std::stringstream ss(stages);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok == name) return true;
    }
    return false;
}

}  // namespace

std::string run_pipeline(const ExperimentConfig& cfg) {
    if (cfg.trials < 1) throw ConfigError("pipeline: trial count must be >= 1");
    if (!cfg.instance_file.empty() && !cfg.generator.empty()) {
        throw ConfigError("pipeline: give either an instance file or a generator, not both");
    }
    Instance inst = cfg.instance_file.empty() ? generate_instance(cfg.generator, cfg.k, cfg.p)
                                              : Instance::load_file(cfg.instance_file);
    if (!cfg.instance_file.empty() && cfg.k > 0) inst.k = cfg.k;
    if (!cfg.instance_file.empty() && cfg.p >= 1) inst.p = cfg.p;
    inst.validate();

    ScaleConfig scale = cfg.scale;
    if (scale.epsilon <= 0) scale = ScaleConfig::for_p(inst.p);
    scale.p = inst.p;
    scale.validate();
    const double alpha = cfg.reduce_alpha > 0 ? cfg.reduce_alpha : (std::pow(3.0, inst.p) + 1.0) / 2.0;

    // Oracle optimum when affordable.
    std::optional<double> oracle;
    try {
        oracle = brute_force_opt(inst).total_cost;
    } catch (const SizeError&) {
    }

    LmpSetup setup;
    try {
        setup = prepare_lmp(inst);
    } catch (const std::exception& e) {
        throw InfeasibleError(std::string("pipeline stage lp: ") + e.what());
    }
    const FacilityNeighborOrder order(setup.instance);

    std::vector<TrialRecord> records(cfg.trials);
    parallel_for(static_cast<std::size_t>(cfg.trials), cfg.threads, [&](std::size_t trial) {
        TrialRecord rec;
        rec.seed = RngStream::mix(cfg.base_seed, "trial", trial);
        rec.lp_objective = setup.lp_objective;

        if (stage_enabled(cfg.stages, "lmp")) {
            RngStream rng = RngStream::derive(cfg.base_seed, "lmp", trial);
            LmpRun run;
            try {
                run = lmp_round(setup.instance, setup.solution.y, order, rng, &setup.sets);
            } catch (const std::exception& e) {
                throw InvariantError(std::string("pipeline stage lmp (trial ") + std::to_string(trial) + "): " + e.what());
            }
            rec.lmp_open = static_cast<double>(run.open.size());
            double happy_cost = 0.0;
            for (const auto& c : run.clients) happy_cost += c.cost;
            rec.lmp_cost_ratio = setup.lp_objective > 0 ? happy_cost / setup.lp_objective : 1.0;
        }

        if (stage_enabled(cfg.stages, "round")) {
            try {
                RngStream rng = RngStream::derive(cfg.base_seed, "round", trial);
                FilterResult filt = filter(setup.instance, setup.solution, setup.sets, scale);
                std::vector<double> yprime = consolidate_cores(setup.instance, setup.solution.y, filt, rng);
                std::vector<std::vector<std::size_t>> family;
                for (std::size_t i = 0; i < yprime.size(); ++i) family.push_back({i});
                for (const auto& ball : filt.ball) family.push_back(ball);
                std::vector<std::size_t> everything(yprime.size());
                std::iota(everything.begin(), everything.end(), std::size_t{0});
                family.push_back(everything);
                const double g = 1.0 / scale.effective_delta();
                std::vector<double> ydp = pipage_round(yprime, family, g, rng);
                IterateResult rounded = iterate(setup.instance, ydp, scale, rng, order);
                double total = 0.0;
                for (double v : rounded.ybar) total += v;
                rec.pseudo_open = total;
                rec.forced = static_cast<double>(rounded.state.forced_count());
                KCenterInput kc = kcenter_input(setup.instance, rounded.ybar);
                KCenterResult finished = kcenter_finish(kc, setup.instance);
                // Lemma-16 style backup-distance audit on the final solution.
                for (std::size_t j = 0; j < setup.instance.num_clients(); ++j) {
                    const double d = setup.instance.cf_distance(j, finished.solution.assignment[j]);
                    if (d > 3.0 * rounded.d2max[j] + 1e-9 * tolerance_scale(d, rounded.d2max[j])) {
                        throw InvariantError("backup distance exceeded 3 d''_max");
                    }
                }
                // Map the split-space solution back to original facilities.
                std::vector<std::size_t> open_orig = setup.split.map_back(finished.solution.open);
                IntegralSolution final_sol = integral_cost(inst, open_orig);
                rec.final_cost = final_sol.total_cost;
                rec.final_open = static_cast<double>(final_sol.open.size());
                rec.ratio_vs_lp = setup.lp_objective > 0 ? final_sol.total_cost / setup.lp_objective : 1.0;
                if (oracle && *oracle > 0) rec.ratio_vs_oracle = final_sol.total_cost / *oracle;
                else if (oracle && final_sol.total_cost == 0) rec.ratio_vs_oracle = 1.0;

                if (stage_enabled(cfg.stages, "reduce") && oracle && final_sol.open.size() > static_cast<std::size_t>(inst.k) &&
                    final_sol.open.size() <= static_cast<std::size_t>(inst.k) + 4) {
                    PseudoSolution pseudo{final_sol.open, final_sol.total_cost};
                    IntegralSolution reduced = pseudo_to_true(inst, pseudo, alpha, cfg.reduce_eps, oracle);
                    rec.reduced_cost = reduced.total_cost;
                    if (*oracle > 0) rec.reduced_ratio_vs_oracle = reduced.total_cost / *oracle;
                } else if (stage_enabled(cfg.stages, "reduce") && final_sol.open.size() <= static_cast<std::size_t>(inst.k)) {
                    rec.reduced_cost = final_sol.total_cost;
                    if (oracle && *oracle > 0) rec.reduced_ratio_vs_oracle = final_sol.total_cost / *oracle;
                }
            } catch (const InvariantError&) {
                throw;
            } catch (const std::exception& e) {
                throw InfeasibleError(std::string("pipeline stage round (trial ") + std::to_string(trial) + "): " + e.what());
            }
        }
        records[trial] = rec;
    });

    auto collect = [&](auto getter) {
        std::vector<double> v;
        v.reserve(records.size());
        for (const auto& r : records) v.push_back(getter(r));
        return v;
    };

    json j;
    j["config"] = json::parse(scale.to_json_string());
    j["instance"] = cfg.instance_file.empty() ? cfg.generator : cfg.instance_file;
    j["k"] = inst.k;
    j["p"] = inst.p;
    j["base_seed"] = cfg.base_seed;
    j["trials"] = cfg.trials;
    j["alpha"] = alpha;
    j["lp_objective"] = setup.lp_objective;
    if (oracle) j["oracle_cost"] = *oracle;
    j["stats"]["lmp_open"] = summary_json(StatSummary::of(collect([](const TrialRecord& r) { return r.lmp_open; })));
    j["stats"]["lmp_cost_ratio"] =
        summary_json(StatSummary::of(collect([](const TrialRecord& r) { return r.lmp_cost_ratio; })));
    j["stats"]["pseudo_open"] =
        summary_json(StatSummary::of(collect([](const TrialRecord& r) { return r.pseudo_open; })));
    j["stats"]["forced"] = summary_json(StatSummary::of(collect([](const TrialRecord& r) { return r.forced; })));
    j["stats"]["final_cost"] =
        summary_json(StatSummary::of(collect([](const TrialRecord& r) { return r.final_cost; })));
    j["stats"]["final_open"] =
        summary_json(StatSummary::of(collect([](const TrialRecord& r) { return r.final_open; })));
    j["stats"]["ratio_vs_lp"] =
        summary_json(StatSummary::of(collect([](const TrialRecord& r) { return r.ratio_vs_lp; })));
    j["stats"]["ratio_vs_oracle"] =
        summary_json(StatSummary::of(collect([](const TrialRecord& r) { return r.ratio_vs_oracle; })));
    j["stats"]["reduced_ratio_vs_oracle"] =
        summary_json(StatSummary::of(collect([](const TrialRecord& r) { return r.reduced_ratio_vs_oracle; })));

    if (!cfg.out_prefix.empty()) {
        std::ofstream csv(cfg.out_prefix + ".trials.csv");
        if (!csv) throw ConfigError("pipeline: cannot write " + cfg.out_prefix + ".trials.csv");
        csv << "trial,seed,lp_objective,lmp_open,lmp_cost_ratio,pseudo_open,forced,final_cost,final_open,"
               "ratio_vs_lp,ratio_vs_oracle,reduced_cost,reduced_ratio_vs_oracle\n";
        csv.precision(17);
        for (std::size_t trial = 0; trial < records.size(); ++trial) {
            const auto& r = records[trial];
            csv << trial << "," << r.seed << "," << r.lp_objective << "," << r.lmp_open << "," << r.lmp_cost_ratio
                << "," << r.pseudo_open << "," << r.forced << "," << r.final_cost << "," << r.final_open << ","
                << r.ratio_vs_lp << "," << r.ratio_vs_oracle << "," << r.reduced_cost << ","
                << r.reduced_ratio_vs_oracle << "\n";
        }
        std::ofstream summary(cfg.out_prefix + ".summary.json");
        if (!summary) throw ConfigError("pipeline: cannot write " + cfg.out_prefix + ".summary.json");
        summary << j.dump(2) << "\n";
    }
    return j.dump();
}

int verify_suite(const std::vector<std::string>& selectors, std::uint64_t seed, std::string* log) {
    struct Entry {
        std::string name;
        std::function<std::vector<suites::SuiteResult>(std::uint64_t, double)> run;
    };
    auto one = [](suites::SuiteResult r) { return std::vector<suites::SuiteResult>{std::move(r)}; };
    const std::vector<Entry> registry = {
        {"drift", [&](std::uint64_t s, double) { return one(suites::zero_drift(20, 400, s)); }},
        {"open-count", [&](std::uint64_t s, double) { return one(suites::lmp_open_count(20000, s)); }},
        {"lmp-cost",
         [&](std::uint64_t s, double p) {
             if (p > 0) return one(suites::lmp_cost(p, false, 20000, s));
             return std::vector<suites::SuiteResult>{suites::lmp_cost(1, false, 20000, s),
                                                     suites::lmp_cost(2, false, 20000, s),
                                                     suites::lmp_cost(2, true, 20000, s)};
         }},
        {"eq1",
         [&](std::uint64_t s, double p) {
             if (p > 0) return one(suites::eq1_certificate(p, 10000, s));
             return std::vector<suites::SuiteResult>{suites::eq1_certificate(1, 10000, s),
                                                     suites::eq1_certificate(2, 10000, s),
                                                     suites::eq1_certificate(3, 10000, s)};
         }},
        {"euclid", [&](std::uint64_t s, double) { return one(suites::euclid_certificate(100000, s)); }},
        {"potential", [&](std::uint64_t s, double) { return one(suites::one_step_potential(100, s)); }},
        {"filter", [&](std::uint64_t s, double) { return one(suites::filter_invariants(40, s)); }},
        {"consolidate", [&](std::uint64_t s, double) { return one(suites::consolidate_marginals(50000, s)); }},
        {"pipage", [&](std::uint64_t s, double) { return one(suites::pipage_properties(10000, 50000, s)); }},
        {"pseudo",
         [&](std::uint64_t s, double) {
             return std::vector<suites::SuiteResult>{suites::pseudo_structure(200, s),
                                                     suites::sampling_marginals(20000, s),
                                                     suites::bounded_differences(1000, s),
                                                     suites::pseudo_budget(200, s)};
         }},
        {"reduction", [&](std::uint64_t s, double) { return one(suites::reduction_exactness(25, s)); }},
        {"cost-lemmas", [&](std::uint64_t s, double) { return one(suites::cost_lemmas(20000, s)); }},
        {"fnew", [&](std::uint64_t s, double) { return one(suites::fnew_diagnostic(40, s)); }},
        {"e2e",
         [&](std::uint64_t s, double p) {
             if (p > 0) return one(suites::end_to_end(p, 5, s));
             return std::vector<suites::SuiteResult>{suites::end_to_end(1, 5, s), suites::end_to_end(2, 5, s)};
         }},
    };

    std::vector<std::pair<std::string, double>> wanted;  // (name, p arg; 0 = all)
    if (selectors.empty()) {
        for (const auto& e : registry) wanted.emplace_back(e.name, 0.0);
    } else {
        for (const std::string& sel : selectors) {
            std::stringstream ss(sel);
            std::string name;
            std::getline(ss, name, ',');
            double p = 0.0;
            std::string arg;
            while (std::getline(ss, arg, ',')) {
                if (arg.rfind("p=", 0) == 0) p = std::stod(arg.substr(2));
                else throw ConfigError("verify: unknown suite argument \"" + arg + "\"");
            }
            bool found = false;
            for (const auto& e : registry) {
                if (e.name == name) {
                    found = true;
                    break;
                }
            }
            if (!found) throw ConfigError("verify: unknown suite \"" + name + "\"");
            wanted.emplace_back(name, p);
        }
    }

    int failures = 0;
    std::ostringstream out;
    for (const auto& [name, p] : wanted) {
        for (const auto& e : registry) {
            if (e.name != name) continue;
            for (const suites::SuiteResult& r : e.run(seed, p)) {
                out << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail << "\n";
                if (!r.passed) ++failures;
            }
        }
    }
    if (log != nullptr) *log = out.str();
    return failures;
}

}  // namespace kcluster
