#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kcluster/instance.hpp"
#include "kcluster/lp.hpp"
#include "kcluster/preprocess.hpp"
#include "kcluster/reduction.hpp"

namespace kcluster {

struct StatSummary {
    double mean = 0.0;
    double stdev = 0.0;   // sample standard deviation
    double stderr_ = 0.0; // stdev / sqrt(n)
    double min = 0.0;
    double max = 0.0;
    std::size_t count = 0;

    static StatSummary of(const std::vector<double>& values);
};

// Generator specs: euclidean(n_c, n_f, dim, seed), graph_metric(n,
// edge_density, seed), line(n), clustered(centers, spread, seed).
// k and p ride along separately.
Instance generate_instance(const std::string& spec, int k, double p);

// Runs fn(0..n-1) on a small worker pool; results must be written to
// index-addressed slots so the outcome is independent of scheduling.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

// LP -> all-or-nothing split -> nearest-mass sets, packaged for the rounding
// algorithms (which operate on the split instance).
struct LmpSetup {
    Instance instance;          // split instance
    FractionalSolution solution;
    SplitMap split;
    NearestMassSet sets;
    double lp_objective = 0.0;
};

LmpSetup prepare_lmp(const Instance& inst, const LpSolveOptions& opts = {});

struct ExperimentConfig {
    std::string instance_file;  // exactly one of instance_file / generator
    std::string generator;
    int k = 2;
    double p = 1.0;
    std::string stages = "full";  // comma list over {lp, lmp, round, reduce}
    int trials = 1;
    std::uint64_t base_seed = 1;
    ScaleConfig scale;            // defaulted from p when epsilon is unset (0)
    double reduce_alpha = 0.0;    // 0 -> (3^p+1)/2
    double reduce_eps = 0.25;
    std::string out_prefix;       // when nonempty, writes <prefix>.trials.csv and <prefix>.summary.json
    int threads = 1;
};

// Wires LP -> preprocess -> pseudo-round -> k-center (-> reduction when the
// oracle is affordable), repeating over seeded trials.  Inline invariant
// checks from the stage modules abort the run with a stage-named diagnostic.
// Returns the summary as a JSON string; reports are a pure function of
// (instance bytes, config, base seed).
std::string run_pipeline(const ExperimentConfig& cfg);

namespace suites {

struct SuiteResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

SuiteResult zero_drift(std::size_t instances, std::size_t min_states, std::uint64_t seed);
SuiteResult lmp_open_count(std::size_t trials, std::uint64_t seed);
SuiteResult lmp_cost(double p, bool euclidean, std::size_t trials, std::uint64_t seed);
SuiteResult eq1_certificate(double p, std::size_t samples, std::uint64_t seed);
SuiteResult euclid_certificate(std::size_t samples, std::uint64_t seed);
SuiteResult one_step_potential(std::size_t states, std::uint64_t seed);
SuiteResult filter_invariants(std::size_t instances, std::uint64_t seed);
SuiteResult consolidate_marginals(std::size_t trials, std::uint64_t seed);
SuiteResult pipage_properties(std::size_t quantization_runs, std::size_t marginal_trials, std::uint64_t seed);
SuiteResult pseudo_structure(std::size_t runs, std::uint64_t seed);
SuiteResult pseudo_budget(std::size_t runs, std::uint64_t seed);
SuiteResult sampling_marginals(std::size_t trials, std::uint64_t seed);
SuiteResult bounded_differences(std::size_t coordinates, std::uint64_t seed);
SuiteResult reduction_exactness(std::size_t instances, std::uint64_t seed);
SuiteResult end_to_end(double p, std::size_t seeds, std::uint64_t seed);
SuiteResult cost_lemmas(std::size_t trials, std::uint64_t seed);
SuiteResult fnew_diagnostic(std::size_t runs, std::uint64_t seed);

}  // namespace suites

// Runs the selected property suites ("eq1,p=1", "pipage", "drift", ...;
// empty selector = all) and streams one line per suite.  Returns the number
// of failed suites.
int verify_suite(const std::vector<std::string>& selectors, std::uint64_t seed, std::string* log);

}  // namespace kcluster
