#include "softseq/experiments.hpp"

#include <algorithm>
#include <cstdio>

namespace softseq {

namespace {

SweepRow summarize(const std::vector<RunSummary>& runs) {
    SweepRow row;
    std::vector<double> ok;
    for (const auto& r : runs) {
        ++row.runs;
        if (r.diverged)
            ++row.diverged;
        else
            ok.push_back(r.reward);
    }
    if (!ok.empty()) {
        double sum = 0.0;
        for (double x : ok) sum += x;
        row.mean = sum / static_cast<double>(ok.size());
        row.min = *std::min_element(ok.begin(), ok.end());
        row.max = *std::max_element(ok.begin(), ok.end());
    }
    return row;
}

std::string number(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", x);
    return buf;
}

}  // namespace

RunSummary run_experiment(Algorithm alg, const ExperimentConfig& config, std::uint64_t seed) {
    TrainerConfig trainer = config.trainer;
    trainer.seed = seed;
    const Dataset train_set = make_dataset(config.dataset);
    const Dataset val_set = validation_split(train_set);
    const TrainResult result = train(alg, train_set, val_set, trainer);
    RunSummary s;
    s.alg = alg;
    s.seed = seed;
    s.diverged = result.diverged;
    if (!result.diverged) {
        s.reward = corpus_eval(result.actor, val_set);
        s.expected_reward = expected_reward(result.actor, val_set);
    }
    return s;
}

std::vector<SweepRow> tau_sweep(const ExperimentConfig& config, const std::vector<double>& taus,
                                const std::vector<std::uint64_t>& seeds) {
    std::vector<SweepRow> rows;
    for (double tau : taus) {
        ExperimentConfig c = config;
        c.trainer.tau = tau;
        std::vector<RunSummary> runs;
        for (auto seed : seeds) runs.push_back(run_experiment(Algorithm::Erac, c, seed));
        SweepRow row = summarize(runs);
        row.tau = tau;
        row.beta = c.trainer.beta;
        row.lambda_var = c.trainer.lambda_var;
        rows.push_back(row);
    }
    return rows;
}

std::vector<SweepRow> target_smoothing_grid(const ExperimentConfig& config, const std::vector<double>& betas,
                                            const std::vector<double>& lambdas,
                                            const std::vector<std::uint64_t>& seeds) {
    std::vector<SweepRow> rows;
    for (double lambda : lambdas)
        for (double beta : betas) {
            ExperimentConfig c = config;
            c.trainer.beta = beta;
            c.trainer.lambda_var = lambda;
            std::vector<RunSummary> runs;
            for (auto seed : seeds) runs.push_back(run_experiment(Algorithm::Erac, c, seed));
            SweepRow row = summarize(runs);
            row.tau = c.trainer.tau;
            row.beta = beta;
            row.lambda_var = lambda;
            rows.push_back(row);
        }
    return rows;
}

std::string format_sweep(const std::vector<SweepRow>& rows, const std::string& kind) {
    std::string out = kind == "tau" ? "tau" : "lambda_var\tbeta";
    out += "\tmean\tmin\tmax\truns\tdiverged\n";
    for (const auto& r : rows) {
        out += kind == "tau" ? number(r.tau) : number(r.lambda_var) + "\t" + number(r.beta);
        const bool any = r.diverged < r.runs;
        out += "\t" + (any ? number(r.mean) : std::string("NA"));
        out += "\t" + (any ? number(r.min) : std::string("NA"));
        out += "\t" + (any ? number(r.max) : std::string("NA"));
        out += "\t" + std::to_string(r.runs) + "\t" + std::to_string(r.diverged) + "\n";
    }
    return out;
}

OrderingReport desk_ordering(const ExperimentConfig& config, const std::vector<std::uint64_t>& seeds) {
    OrderingReport report;
    ExperimentConfig ac = config;
    ac.trainer.tau = 0.0;
    for (Algorithm alg : {Algorithm::Mle, Algorithm::Raml, Algorithm::Vaml, Algorithm::Ac, Algorithm::Erac}) {
        double sum = 0.0;
        double expected = 0.0;
        for (auto seed : seeds) {
            const RunSummary s = run_experiment(alg, alg == Algorithm::Ac ? ac : config, seed);
            sum += s.reward;
            expected += s.expected_reward;
            report.runs[alg].push_back(s);
        }
        report.mean[alg] = sum / static_cast<double>(seeds.size());
        report.mean_expected[alg] = expected / static_cast<double>(seeds.size());
    }
    report.erac_ge_ac = report.mean[Algorithm::Erac] >= report.mean[Algorithm::Ac];
    report.vaml_ge_raml = report.mean[Algorithm::Vaml] >= report.mean[Algorithm::Raml];
    report.raml_ge_mle = report.mean[Algorithm::Raml] >= report.mean[Algorithm::Mle];
    return report;
}

std::string format_ordering(const OrderingReport& report) {
    std::string out = "alg\tmean\tmean_expected";
    const std::size_t n = report.runs.begin()->second.size();
    for (std::size_t i = 0; i < n; ++i) out += "\tseed" + std::to_string(report.runs.begin()->second[i].seed);
    out += "\n";
    for (const auto& [alg, runs] : report.runs) {
        out += std::string(to_string(alg)) + "\t" + number(report.mean.at(alg)) + "\t" +
               number(report.mean_expected.at(alg));
        for (const auto& r : runs) out += "\t" + (r.diverged ? std::string("diverged") : number(r.reward));
        out += "\n";
    }
    return out;
}

}  // namespace softseq
