#include "softseq/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "softseq/checks.hpp"
#include "softseq/config.hpp"
#include "softseq/error.hpp"
#include "softseq/experiments.hpp"
#include "softseq/oracle.hpp"
#include "softseq/training.hpp"

namespace softseq {

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + path.string());
    out << text;
}

ExperimentConfig config_from(const std::string& path) { return path.empty() ? ExperimentConfig{} : load_config(path); }

std::string number(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

struct OracleArgs {
    int vocab = 3;
    int horizon = 2;
    std::string ref = "0,2";
    double tau = 1.0;
    std::string reward = "exact-match";
    std::string out;
};

int oracle_command(const OracleArgs& a, std::ostream& out) {
    const SeqSpace space(Vocab(a.vocab), a.horizon);
    const GroundTruthPair ref{0, space.make(parse_token_ids(a.ref))};
    RewardSpec spec;
    spec.kind = parse_reward_kind(a.reward);
    const SoftOracle oracle = solve_soft_oracle(space, ref, a.tau, spec);
    const SeqDistribution pr = exact_pr(space, ref, a.tau, spec);
    const SeqDistribution m = induced_marginal(oracle);
    double dev = 0.0;
    for (std::size_t i = 0; i < m.support.size(); ++i) dev = std::max(dev, std::abs(m.probs[i] - pr.prob(m.support[i])));
    std::ostringstream dump;
    write_oracle_dump(dump, oracle);
    if (a.out.empty())
        out << dump.str();
    else
        write_file(a.out, dump.str());
    out << "max_marginal_deviation " << number(dev) << "\n";
    return dev <= 1e-9 ? kExitOk : kExitCheckFailed;
}

struct TrainArgs {
    std::string alg;
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
};

int train_command(const TrainArgs& a, std::ostream& out, std::ostream& err) {
    const Algorithm alg = parse_algorithm(a.alg);
    ExperimentConfig config = config_from(a.config);
    if (a.seed) config.trainer.seed = *a.seed;
    const Dataset train_set = make_dataset(config.dataset);
    const Dataset val_set = validation_split(train_set);
    const TrainResult result = train(alg, train_set, val_set, config.trainer);

    const std::filesystem::path dir(a.out);
    std::filesystem::create_directories(dir);
    write_file(dir / "metrics.jsonl", result.log.to_jsonl());
    write_file(dir / "config.txt", serialize_config(config));
    std::ostringstream actor;
    write_checkpoint(actor, result.actor);
    write_file(dir / "actor.ckpt", actor.str());
    if (result.critic) {
        std::ostringstream critic;
        write_checkpoint(critic, *result.critic);
        write_file(dir / "critic.ckpt", critic.str());
    }
    if (result.diverged) {
        err << "training diverged: " << result.divergence_reason << "\n";
        return kExitDiverged;
    }
    out << "reward_val " << number(corpus_eval(result.actor, val_set)) << "\n";
    return kExitOk;
}

int eval_command(const std::string& checkpoint, const std::string& config_path, std::ostream& out) {
    std::ifstream in(checkpoint);
    if (!in) throw Error(ErrorKind::InvalidArgument, "cannot open checkpoint " + checkpoint);
    const ParamTable actor = read_checkpoint(in);
    if (actor.kind() != TableKind::PolicyLogits)
        throw Error(ErrorKind::InvalidArgument, "eval needs an actor (policy-logits) checkpoint");
    const Dataset data = validation_split(make_dataset(config_from(config_path).dataset));
    if (actor.space() != data.space) throw Error(ErrorKind::InvalidArgument, "checkpoint and dataset spaces differ");
    out << "mean_reward " << number(corpus_eval(actor, data)) << "\n";
    return kExitOk;
}

int check_command(std::ostream& out) {
    bool ok = true;
    for (const CheckResult& r : run_check_suite()) {
        out << format_check(r) << "\n";
        ok = ok && r.passed;
    }
    out << (ok ? "all checks passed\n" : "some checks FAILED\n");
    return ok ? kExitOk : kExitCheckFailed;
}

struct SweepArgs {
    std::string kind = "tau";
    std::string config;
    std::vector<double> taus{0.0, 0.01, 0.05, 0.2, 1.0};
    std::vector<double> betas{0.001, 0.01, 0.1, 1.0};
    std::vector<double> lambdas{0.0, 0.001};
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::string out;
};

int sweep_command(const SweepArgs& a, std::ostream& out) {
    const ExperimentConfig config = config_from(a.config);
    const auto rows = a.kind == "tau" ? tau_sweep(config, a.taus, a.seeds)
                                      : target_smoothing_grid(config, a.betas, a.lambdas, a.seeds);
    const std::string table = format_sweep(rows, a.kind);
    if (!a.out.empty()) {
        const std::filesystem::path path(a.out);
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        write_file(path, table);
    }
    out << table;
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Entropy-regularized sequence training on tabular models", "softseq"};
    app.require_subcommand(1);

    OracleArgs oracle_args;
    auto* oracle = app.add_subcommand("oracle", "Build the exact soft oracle, dump it and verify the marginal match");
    oracle->add_option("--vocab", oracle_args.vocab, "Vocabulary size including eos")->capture_default_str();
    oracle->add_option("--horizon", oracle_args.horizon, "Maximum length T including eos")->capture_default_str();
    oracle->add_option("--ref", oracle_args.ref, "Reference token ids, comma separated")->capture_default_str();
    oracle->add_option("--tau", oracle_args.tau, "Temperature")->capture_default_str();
    oracle->add_option("--reward", oracle_args.reward, "exact-match, prefix-match or scaled-bleu")
        ->capture_default_str();
    oracle->add_option("--out", oracle_args.out, "Dump file (default: stdout)");

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "Train one algorithm on the configured copy task");
    train_cmd->add_option("--alg", train_args.alg, "mle, raml, softq, vaml, ac or erac")
        ->required()
        ->check(CLI::IsMember({"mle", "raml", "softq", "vaml", "ac", "erac"}));
    train_cmd->add_option("--config", train_args.config, "Config file")->check(CLI::ExistingFile);
    train_cmd->add_option("--seed", train_args.seed, "Training seed (overrides the config)");
    train_cmd->add_option("--out", train_args.out, "Output directory")->required();

    std::string eval_checkpoint;
    std::string eval_config;
    auto* eval = app.add_subcommand("eval", "Mean greedy reward of an actor checkpoint on the configured dataset");
    eval->add_option("--checkpoint", eval_checkpoint, "Actor checkpoint")->required()->check(CLI::ExistingFile);
    eval->add_option("--config", eval_config, "Config file")->check(CLI::ExistingFile);

    auto* check = app.add_subcommand("check", "Run the invariant and gradient-check suite");

    SweepArgs sweep_args;
    auto* sweep = app.add_subcommand("sweep", "ERAC temperature sweep or target-rate x smoothing grid");
    sweep->add_option("--kind", sweep_args.kind, "tau or grid")
        ->check(CLI::IsMember({"tau", "grid"}))
        ->capture_default_str();
    sweep->add_option("--config", sweep_args.config, "Config file")->check(CLI::ExistingFile);
    sweep->add_option("--taus", sweep_args.taus, "Temperatures")->delimiter(',');
    sweep->add_option("--betas", sweep_args.betas, "Target network rates")->delimiter(',');
    sweep->add_option("--lambdas", sweep_args.lambdas, "Smoothing weights")->delimiter(',');
    sweep->add_option("--seeds", sweep_args.seeds, "Seeds")->delimiter(',');
    sweep->add_option("--out", sweep_args.out, "Data file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        if (*oracle) return oracle_command(oracle_args, out);
        if (*train_cmd) return train_command(train_args, out, err);
        if (*eval) return eval_command(eval_checkpoint, eval_config, out);
        if (*check) return check_command(out);
        if (*sweep) return sweep_command(sweep_args, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        const bool usage = e.kind() == ErrorKind::ParseError || e.kind() == ErrorKind::InvalidArgument;
        return usage ? kExitUsage : kExitCheckFailed;
    }
    return kExitUsage;
}

}  // namespace softseq
