// kcluster command line: instance generation, LP solving, the rounding
// algorithms and the verification suites.
//
// Exit codes: 0 ok, 1 invariant violation, 2 config error, 3 size or
// feasibility error.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kcluster/errors.hpp"
#include "kcluster/harness.hpp"
#include "kcluster/lmp.hpp"
#include "kcluster/pseudo_round.hpp"
#include "kcluster/reduction.hpp"
#include "kcluster/rng.hpp"

namespace {

using namespace kcluster;

struct ScaleFlags {
    std::optional<double> eps;
    std::optional<int> delta;
    std::optional<double> L;
    std::optional<int> T;
    std::optional<double> force_threshold;
    std::optional<int> budget;

    void attach(CLI::App* cmd) {
        cmd->add_option("--eps", eps, "epsilon (default: largest valid 1/n for the given p)");
        cmd->add_option("--scale-delta", delta, "surrogate delta (copies per unit opening)");
        cmd->add_option("--scale-L", L, "surrogate L (per-copy selection rate scale)");
        cmd->add_option("--scale-T", T, "surrogate iteration count");
        cmd->add_option("--scale-force-threshold", force_threshold, "surrogate force threshold on A");
        cmd->add_option("--scale-budget", budget, "open-count budget used in reports");
    }

    ScaleConfig build(double p) const {
        ScaleConfig cfg = ScaleConfig::for_p(p);
        if (eps) cfg.epsilon = *eps;
        cfg.delta_cap = delta;
        cfg.L = L;
        cfg.T = T;
        cfg.force_threshold = force_threshold;
        cfg.budget = budget;
        cfg.validate();
        return cfg;
    }
};

Instance load_or_generate(const std::string& instance_file, const std::string& gen, int k, double p) {
    if (!instance_file.empty() && !gen.empty()) {
        throw ConfigError("give either --instance or --gen, not both");
    }
    if (!instance_file.empty()) {
        Instance inst = Instance::load_file(instance_file);
        if (k > 0) inst.k = k;
        if (p >= 1) inst.p = p;
        inst.validate();
        return inst;
    }
    if (gen.empty()) throw ConfigError("an instance is required (--instance or --gen)");
    return generate_instance(gen, k > 0 ? k : 2, p >= 1 ? p : 1.0);
}

void write_or_print(const std::string& out, const std::string& text) {
    if (out.empty()) {
        std::cout << text << "\n";
        return;
    }
    std::ofstream f(out);
    if (!f) throw ConfigError("cannot write " + out);
    f << text << "\n";
}

int run(int argc, char** argv) {
    CLI::App app{"k-clustering LP-rounding toolkit"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "generate an instance file");
    std::string gen_spec, gen_out;
    int gen_k = 2;
    double gen_p = 1.0;
    gen->add_option("--spec", gen_spec,
                    "euclidean(n_c,n_f,dim,seed) | graph_metric(n,density,seed) | line(n) | clustered(c,spread,seed)")
        ->required();
    gen->add_option("--k", gen_k, "number of clusters");
    gen->add_option("--p", gen_p, "distance exponent");
    gen->add_option("--out", gen_out, "output path (stdout when omitted)");

    // solve-lp
    auto* solvelp = app.add_subcommand("solve-lp", "solve the LP relaxation");
    std::string lp_instance, lp_gen, lp_out;
    int lp_k = 0;
    double lp_p = 0.0, lp_accuracy = 1e-7;
    solvelp->add_option("--instance", lp_instance, "instance file");
    solvelp->add_option("--gen", lp_gen, "generator spec");
    solvelp->add_option("--k", lp_k, "override k");
    solvelp->add_option("--p", lp_p, "override p");
    solvelp->add_option("--accuracy", lp_accuracy, "relative objective accuracy");
    solvelp->add_option("--out", lp_out, "solution dump path");

    // lmp
    auto* lmp = app.add_subcommand("lmp", "run the LMP iterative rounding");
    std::string lmp_instance, lmp_gen, lmp_out, lmp_trace;
    int lmp_k = 0, lmp_trials = 1000;
    double lmp_p = 0.0;
    std::uint64_t lmp_seed = 1;
    bool lmp_naive = false;
    lmp->add_option("--instance", lmp_instance, "instance file");
    lmp->add_option("--gen", lmp_gen, "generator spec");
    lmp->add_option("--k", lmp_k, "override k");
    lmp->add_option("--p", lmp_p, "override p");
    lmp->add_option("--trials", lmp_trials, "number of seeded runs")->check(CLI::PositiveNumber);
    lmp->add_option("--seed", lmp_seed, "base seed");
    lmp->add_option("--out", lmp_out, "summary output path");
    lmp->add_option("--trace", lmp_trace, "write a JSONL iteration trace of trial 0");
    lmp->add_flag("--naive", lmp_naive, "keep non-useful iterations (fidelity mode, capped)");

    // round
    auto* round = app.add_subcommand("round", "preprocess + pseudo-rounding + k-center finish");
    std::string round_instance, round_gen, round_out;
    int round_k = 0, round_trials = 10;
    double round_p = 0.0;
    std::uint64_t round_seed = 1;
    ScaleFlags round_scale;
    round->add_option("--instance", round_instance, "instance file");
    round->add_option("--gen", round_gen, "generator spec");
    round->add_option("--k", round_k, "override k");
    round->add_option("--p", round_p, "override p");
    round->add_option("--trials", round_trials, "number of seeded runs")->check(CLI::PositiveNumber);
    round->add_option("--seed", round_seed, "base seed");
    round->add_option("--out", round_out, "run report path");
    round_scale.attach(round);

    // reduce
    auto* reduce = app.add_subcommand("reduce", "pseudo-solution to true solution");
    std::string reduce_instance, reduce_gen, reduce_out;
    int reduce_k = 0;
    double reduce_p = 0.0, reduce_alpha = 0.0, reduce_eps = 0.25;
    std::vector<std::size_t> reduce_open;
    reduce->add_option("--instance", reduce_instance, "instance file");
    reduce->add_option("--gen", reduce_gen, "generator spec");
    reduce->add_option("--k", reduce_k, "override k");
    reduce->add_option("--p", reduce_p, "override p");
    reduce->add_option("--alpha", reduce_alpha, "pseudo-approximation factor (default (3^p+1)/2)");
    reduce->add_option("--eps", reduce_eps, "target additive loss");
    reduce->add_option("--open", reduce_open, "pseudo-solution facility positions")->required();
    reduce->add_option("--out", reduce_out, "output path");

    // pipeline
    auto* pipeline = app.add_subcommand("pipeline", "full LP -> preprocess -> round -> reduce run");
    ExperimentConfig pcfg;
    ScaleFlags pipe_scale;
    pipeline->add_option("--instance", pcfg.instance_file, "instance file");
    pipeline->add_option("--gen", pcfg.generator, "generator spec");
    pipeline->add_option("--k", pcfg.k, "number of clusters");
    pipeline->add_option("--p", pcfg.p, "distance exponent");
    pipeline->add_option("--stages", pcfg.stages, "comma list over {lp,lmp,round,reduce} or 'full'");
    pipeline->add_option("--trials", pcfg.trials, "trial count")->check(CLI::PositiveNumber);
    pipeline->add_option("--seed", pcfg.base_seed, "base seed");
    pipeline->add_option("--threads", pcfg.threads, "worker threads");
    pipeline->add_option("--alpha", pcfg.reduce_alpha, "reduction alpha");
    pipeline->add_option("--reduce-eps", pcfg.reduce_eps, "reduction eps");
    pipeline->add_option("--out", pcfg.out_prefix, "output prefix for .trials.csv / .summary.json");
    pipe_scale.attach(pipeline);

    // verify
    auto* verify = app.add_subcommand("verify", "run property/certificate suites");
    std::vector<std::string> verify_suites;
    std::uint64_t verify_seed = 1;
    verify->add_option("--suite", verify_suites, "suite selector, e.g. eq1,p=1 (repeatable; default all)");
    verify->add_option("--seed", verify_seed, "base seed");

    CLI11_PARSE(app, argc, argv);

    if (gen->parsed()) {
        Instance inst = generate_instance(gen_spec, gen_k, gen_p);
        write_or_print(gen_out, inst.to_json_string());
        return 0;
    }

    if (solvelp->parsed()) {
        Instance inst = load_or_generate(lp_instance, lp_gen, lp_k, lp_p);
        LpSolveOptions opts;
        opts.accuracy = lp_accuracy;
        FractionalSolution sol = solve_relaxation(inst, opts);
        write_or_print(lp_out, solution_to_json_string(inst, sol));
        return 0;
    }

    if (lmp->parsed()) {
        Instance inst = load_or_generate(lmp_instance, lmp_gen, lmp_k, lmp_p);
        LmpSetup setup = prepare_lmp(inst);
        FacilityNeighborOrder order(setup.instance);
        LmpOptions opts;
        opts.conditional_sampling = !lmp_naive;
        std::vector<double> opens;
        double cost_sum = 0.0;
        for (int t = 0; t < lmp_trials; ++t) {
            RngStream rng = RngStream::derive(lmp_seed, "lmp", static_cast<std::uint64_t>(t));
            LmpOptions run_opts = opts;
            run_opts.record_trace = (t == 0 && !lmp_trace.empty());
            LmpRun run = lmp_round(setup.instance, setup.solution.y, order, rng, &setup.sets, run_opts);
            opens.push_back(static_cast<double>(run.open.size()));
            for (const auto& c : run.clients) cost_sum += c.cost;
            if (run_opts.record_trace) {
                std::ofstream trace(lmp_trace);
                if (!trace) throw ConfigError("cannot write " + lmp_trace);
                for (const auto& rec : run.trace) {
                    trace << "{\"chosen\":" << rec.chosen << ",\"removed\":[";
                    for (std::size_t i = 0; i < rec.removed.size(); ++i) {
                        trace << (i ? "," : "") << rec.removed[i];
                    }
                    trace << "]}\n";
                }
            }
        }
        StatSummary s = StatSummary::of(opens);
        std::ostringstream out;
        out.precision(12);
        out << "{\"lp_objective\":" << setup.lp_objective << ",\"total_opening\":" << setup.solution.total_opening()
            << ",\"mean_open\":" << s.mean << ",\"stderr_open\":" << s.stderr_
            << ",\"mean_total_cost\":" << cost_sum / lmp_trials << ",\"trials\":" << lmp_trials << "}";
        write_or_print(lmp_out, out.str());
        return 0;
    }

    if (round->parsed()) {
        Instance inst = load_or_generate(round_instance, round_gen, round_k, round_p);
        ExperimentConfig cfg;
        if (!round_instance.empty()) cfg.instance_file = round_instance;
        else cfg.generator = round_gen;
        cfg.k = round_k > 0 ? round_k : inst.k;
        cfg.p = round_p >= 1 ? round_p : inst.p;
        cfg.stages = "lp,round";
        cfg.trials = round_trials;
        cfg.base_seed = round_seed;
        cfg.scale = round_scale.build(cfg.p);
        std::string summary = run_pipeline(cfg);
        write_or_print(round_out, summary);
        return 0;
    }

    if (reduce->parsed()) {
        Instance inst = load_or_generate(reduce_instance, reduce_gen, reduce_k, reduce_p);
        PseudoSolution pseudo;
        pseudo.open = reduce_open;
        pseudo.cost = integral_cost(inst, pseudo.open).total_cost;
        const double alpha = reduce_alpha > 0 ? reduce_alpha : (std::pow(3.0, inst.p) + 1.0) / 2.0;
        IntegralSolution sol = pseudo_to_true(inst, pseudo, alpha, reduce_eps);
        std::ostringstream out;
        out.precision(12);
        out << "{\"pseudo_cost\":" << pseudo.cost << ",\"cost\":" << sol.total_cost << ",\"open\":[";
        for (std::size_t i = 0; i < sol.open.size(); ++i) out << (i ? "," : "") << sol.open[i];
        out << "]}";
        write_or_print(reduce_out, out.str());
        return 0;
    }

    if (pipeline->parsed()) {
        pcfg.scale = pipe_scale.build(pcfg.p >= 1 ? pcfg.p : 1.0);
        std::string summary = run_pipeline(pcfg);
        if (pcfg.out_prefix.empty()) std::cout << summary << "\n";
        return 0;
    }

    if (verify->parsed()) {
        std::string log;
        const int failures = verify_suite(verify_suites, verify_seed, &log);
        std::cout << log;
        if (failures > 0) {
            std::cerr << failures << " suite(s) failed\n";
            return 1;
        }
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const kcluster::InvariantError& e) {
        std::cerr << "invariant violation: " << e.what() << "\n";
        return 1;
    } catch (const kcluster::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const kcluster::SolverError& e) {
        std::cerr << "solver error: " << e.what() << " (iterations " << e.iterations << ", residual " << e.residual
                  << ")\n";
        return 3;
    } catch (const kcluster::SizeError& e) {
        std::cerr << "size error: " << e.what() << "\n";
        return 3;
    } catch (const kcluster::InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
