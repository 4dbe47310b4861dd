#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "softseq/config.hpp"
#include "softseq/training.hpp"

namespace softseq {

struct RunSummary {
    Algorithm alg = Algorithm::Mle;
    std::uint64_t seed = 0;
    double reward = 0.0;           // corpus_eval on the validation split
    double expected_reward = 0.0;  // E_{y ~ pi}[R] on the validation split
    bool diverged = false;
};

/// Trains `alg` on the configured copy task with the given seed.
RunSummary run_experiment(Algorithm alg, const ExperimentConfig& config, std::uint64_t seed);

/// One row of a sweep table. Divergent runs are counted and left out of the
/// statistics; a row whose runs all diverged has no statistics.
struct SweepRow {
    double tau = 0.0;
    double beta = 0.0;
    double lambda_var = 0.0;
    int runs = 0;
    int diverged = 0;
    double mean = 0.0;
    double min = 0.0;
    double max = 0.0;
};

/// ERAC runs for every (tau, seed).
std::vector<SweepRow> tau_sweep(const ExperimentConfig& config, const std::vector<double>& taus,
                                const std::vector<std::uint64_t>& seeds);

/// ERAC runs over the target-network rate x smoothing-weight grid.
std::vector<SweepRow> target_smoothing_grid(const ExperimentConfig& config, const std::vector<double>& betas,
                                            const std::vector<double>& lambdas,
                                            const std::vector<std::uint64_t>& seeds);

/// Tab-separated data file with a header line. `kind` is "tau" or "grid".
std::string format_sweep(const std::vector<SweepRow>& rows, const std::string& kind);

/// Mean corpus reward of each algorithm over seeds, with the pairwise
/// orderings ERAC >= AC and VAML >= RAML >= MLE evaluated on the means.
struct OrderingReport {
    std::map<Algorithm, std::vector<RunSummary>> runs;
    std::map<Algorithm, double> mean;
    std::map<Algorithm, double> mean_expected;  // reported only
    bool erac_ge_ac = false;
    bool vaml_ge_raml = false;
    bool raml_ge_mle = false;
};

OrderingReport desk_ordering(const ExperimentConfig& config, const std::vector<std::uint64_t>& seeds);

std::string format_ordering(const OrderingReport& report);

}  // namespace softseq
