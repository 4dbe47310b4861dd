#include "softseq/training.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <utility>

#include <json.hpp>

#include "softseq/error.hpp"

namespace softseq {

std::string_view to_string(Algorithm alg) {
    switch (alg) {
        case Algorithm::Mle: return "mle";
        case Algorithm::Raml: return "raml";
        case Algorithm::SoftQ: return "softq";
        case Algorithm::Vaml: return "vaml";
        case Algorithm::Ac: return "ac";
        case Algorithm::Erac: return "erac";
    }
    return "unknown";
}

Algorithm parse_algorithm(std::string_view text) {
    for (Algorithm a : {Algorithm::Mle, Algorithm::Raml, Algorithm::SoftQ, Algorithm::Vaml, Algorithm::Ac,
                        Algorithm::Erac})
        if (to_string(a) == text) return a;
    throw Error(ErrorKind::ParseError, "unknown algorithm '" + std::string(text) + "'");
}

namespace {

nlohmann::json optional_number(const std::optional<double>& x) {
    if (x && std::isfinite(*x)) return *x;
    return nullptr;
}

nlohmann::json phase_json(const PhaseSettings& p) {
    return {{"optimizer", to_string(p.optimizer.kind)}, {"lr", p.optimizer.step_size}, {"epochs", p.epochs}};
}

bool finite_loss(const LossGrad& lg) { return std::isfinite(lg.loss) && lg.grads.all_finite(); }

bool table_finite(const ParamTable& t) {
    for (const auto& [_, r] : t.rows())
        for (double x : r)
            if (!std::isfinite(x)) return false;
    return true;
}

std::vector<std::size_t> shuffled_order(std::size_t n, Rng& rng) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
    return order;
}

// Per-example update: accumulates named losses and returns false on divergence.
using StepFn = std::function<bool(const GroundTruthPair&, std::map<std::string, double>&)>;

class Run {
public:
    Run(Algorithm alg, const Dataset& train_set, const Dataset& val_set, const TrainerConfig& config)
        : alg_(alg),
          train_(train_set),
          val_(val_set),
          config_(config),
          rewards_(train_set.space, train_set.reward),
          rng_(config.seed),
          actor_(train_set.space, TableKind::PolicyLogits),
          critics_(train_set.space) {
        validate_dataset(train_set);
        validate_dataset(val_set);
        log_.alg = std::string(to_string(alg));
        log_.seed = config.seed;
        log_.config_echo = config_echo_json(config);
    }

    TrainResult execute() {
        switch (alg_) {
            case Algorithm::Mle: pretrain_actor(); break;
            case Algorithm::Raml: weighted_actor(false); break;
            case Algorithm::SoftQ: softq_critic(); break;
            case Algorithm::Vaml:
                if (softq_critic()) weighted_actor(true);
                break;
            case Algorithm::Ac:
            case Algorithm::Erac:
                if (pretrain_actor() && pretrain_critic()) joint();
                break;
        }
        TrainResult result{std::move(actor_), std::nullopt, std::move(log_), diverged_, reason_};
        if (alg_ != Algorithm::Mle && alg_ != Algorithm::Raml) result.critic = std::move(critics_.online);
        return result;
    }

private:
    bool entropy_regularized() const { return alg_ == Algorithm::Erac; }

    // Runs `epochs` passes over the training set in a seeded order. Actor phases
    // halve every optimizer's step size when validation reward stalls.
    bool run_phase(std::string_view phase, std::string_view stream, int epochs, bool trains_actor,
                   std::vector<Optimizer*> optimizers, const StepFn& step) {
        const Rng order_stream = rng_.split(stream).split("order");
        double best = -std::numeric_limits<double>::infinity();
        int stalled = 0;
        for (int e = 0; e < epochs; ++e) {
            Rng order_rng = order_stream.split(static_cast<std::uint64_t>(e));
            std::map<std::string, double> sums;
            for (std::size_t idx : shuffled_order(train_.pairs.size(), order_rng)) {
                if (!step(train_.pairs[idx], sums)) return diverge(phase);
            }
            EpochRecord rec;
            rec.epoch = ++epoch_;
            rec.alg = log_.alg;
            rec.phase = std::string(phase);
            for (auto& [name, total] : sums) rec.losses[name] = total / static_cast<double>(train_.pairs.size());
            rec.reward_train = corpus_eval(actor_, train_);
            rec.reward_val = corpus_eval(actor_, val_);
            rec.actor_entropy = mean_actor_entropy(actor_, train_);
            rec.step_size = optimizers.front()->step_size();
            log_.records.push_back(std::move(rec));

            if (!trains_actor) continue;
            const double val = *log_.records.back().reward_val;
            if (val > best) {
                best = val;
                stalled = 0;
            } else if (++stalled >= config_.lr_patience) {
                for (Optimizer* opt : optimizers) opt->set_step_size(opt->step_size() * 0.5);
                stalled = 0;
            }
        }
        return true;
    }

    bool diverge(std::string_view phase) {
        diverged_ = true;
        reason_ = "non-finite loss or gradient in phase " + std::string(phase);
        EpochRecord rec;
        rec.epoch = ++epoch_;
        rec.alg = log_.alg;
        rec.phase = std::string(phase);
        rec.diverged = true;
        log_.records.push_back(std::move(rec));
        return false;
    }

    bool apply(Optimizer& opt, ParamTable& table, LossGrad& lg) {
        if (!finite_loss(lg)) return false;
        clip_global_norm(lg.grads, config_.clip_norm);
        opt.step(table, lg.grads);
        return true;
    }

    bool pretrain_actor() {
        Optimizer opt(config_.pretrain_actor.optimizer);
        return run_phase("pretrain-actor", "pretrain-actor", config_.pretrain_actor.epochs, true, {&opt},
                         [&](const GroundTruthPair& pair, std::map<std::string, double>& sums) {
                             LossGrad lg = mle_loss(actor_, pair);
                             sums["mle"] += lg.loss;
                             return apply(opt, actor_, lg);
                         });
    }

    // RAML, or VAML phase 2 when `token_targets` is set. Both draw batches from
    // the same stream so kappa = 0 reproduces RAML exactly.
    bool weighted_actor(bool token_targets) {
        const PhaseSettings& ps = token_targets ? config_.vaml_actor : config_.raml;
        Optimizer opt(ps.optimizer);
        Rng batch_rng = rng_.split("weighted-actor").split("batches");
        const ProposalConfig proposal = config_.proposal();
        return run_phase(token_targets ? "vaml-actor" : "raml", "weighted-actor", ps.epochs, true, {&opt},
                         [&](const GroundTruthPair& pair, std::map<std::string, double>& sums) {
                             auto samples = draw_proposal_batch(train_.space.vocab(), pair.reference, batch_rng, proposal);
                             const WeightedBatch batch = normalized_payoff_weights(std::move(samples), pair.reference,
                                                                                   config_.raml_tau, train_.reward);
                             LossGrad lg = token_targets ? vaml_loss(actor_, critics_.online, pair, batch,
                                                                     config_.raml_tau, config_.kappa)
                                                         : raml_loss(actor_, pair, batch);
                             sums[token_targets ? "vaml" : "raml"] += lg.loss;
                             return apply(opt, actor_, lg);
                         });
    }

    bool softq_critic() {
        Optimizer opt(config_.vaml_critic.optimizer);
        Rng batch_rng = rng_.split("vaml-critic").split("batches");
        const ProposalConfig proposal = config_.proposal();
        return run_phase("vaml-critic", "vaml-critic", config_.vaml_critic.epochs, false, {&opt},
                         [&](const GroundTruthPair& pair, std::map<std::string, double>& sums) {
                             const auto batch = draw_proposal_batch(train_.space.vocab(), pair.reference, batch_rng,
                                                                    proposal);
                             LossGrad total;
                             const double scale = 1.0 / static_cast<double>(batch.size());
                             for (const Prefix& y : batch) {
                                 const LossGrad lg = softq_loss(critics_.online, pair, y, config_.raml_tau, rewards_);
                                 total.loss += scale * lg.loss;
                                 total.grads.merge(lg.grads, scale);
                             }
                             sums["softq"] += total.loss;
                             return apply(opt, critics_.online, total);
                         });
    }

    LossGrad critic_loss(const GroundTruthPair& pair, const Prefix& y) const {
        return entropy_regularized()
                   ? erac_critic_loss(critics_, actor_, pair, y, config_.tau, config_.lambda_var, rewards_)
                   : ac_critic_loss(critics_, actor_, pair, y, config_.lambda_var, rewards_);
    }

    LossGrad actor_loss(const GroundTruthPair& pair, const Prefix& y) const {
        return entropy_regularized() ? erac_actor_loss(actor_, critics_.online, pair, y, config_.tau, config_.lambda_mle)
                                     : ac_actor_loss(actor_, critics_.online, pair, y, config_.lambda_mle);
    }

    bool pretrain_critic() {
        Optimizer opt(config_.pretrain_critic.optimizer);
        Rng traj_rng = rng_.split("pretrain-critic").split("trajectories");
        return run_phase("pretrain-critic", "pretrain-critic", config_.pretrain_critic.epochs, false, {&opt},
                         [&](const GroundTruthPair& pair, std::map<std::string, double>& sums) {
                             const Prefix y = sample_trajectory(actor_, pair.example_id, traj_rng);
                             LossGrad lg = critic_loss(pair, y);
                             sums["critic"] += lg.loss;
                             if (!apply(opt, critics_.online, lg)) return false;
                             polyak_update(critics_, config_.beta);
                             return table_finite(critics_.target);
                         });
    }

    bool joint() {
        Optimizer critic_opt(config_.joint.optimizer);
        Optimizer actor_opt(config_.joint.optimizer);
        Rng traj_rng = rng_.split("joint").split("trajectories");
        return run_phase("joint", "joint", config_.joint.epochs, true, {&actor_opt, &critic_opt},
                         [&](const GroundTruthPair& pair, std::map<std::string, double>& sums) {
                             const Prefix y = sample_trajectory(actor_, pair.example_id, traj_rng);
                             LossGrad lc = critic_loss(pair, y);
                             LossGrad la = actor_loss(pair, y);
                             sums["critic"] += lc.loss;
                             sums["actor"] += la.loss;
                             if (!apply(critic_opt, critics_.online, lc)) return false;
                             if (!apply(actor_opt, actor_, la)) return false;
                             polyak_update(critics_, config_.beta);
                             return table_finite(critics_.target);
                         });
    }

    Algorithm alg_;
    const Dataset& train_;
    const Dataset& val_;
    TrainerConfig config_;
    StepRewards rewards_;
    Rng rng_;
    ParamTable actor_;
    CriticPair critics_;
    RunLog log_;
    int epoch_ = 0;
    bool diverged_ = false;
    std::string reason_;
};

}  // namespace

std::string config_echo_json(const TrainerConfig& c) {
    nlohmann::json j = {{"tau", c.tau},
                        {"raml_tau", c.raml_tau},
                        {"beta", c.beta},
                        {"lambda_var", c.lambda_var},
                        {"lambda_mle", c.lambda_mle},
                        {"kappa", c.kappa},
                        {"num_samples", c.num_samples},
                        {"max_ngram", c.max_ngram},
                        {"clip_norm", c.clip_norm},
                        {"lr_patience", c.lr_patience},
                        {"seed", c.seed},
                        {"pretrain_actor", phase_json(c.pretrain_actor)},
                        {"pretrain_critic", phase_json(c.pretrain_critic)},
                        {"joint", phase_json(c.joint)},
                        {"raml", phase_json(c.raml)},
                        {"vaml_critic", phase_json(c.vaml_critic)},
                        {"vaml_actor", phase_json(c.vaml_actor)}};
    return j.dump();
}

std::string RunLog::to_jsonl() const {
    std::string out;
    nlohmann::json header = {{"format_version", kRunLogVersion},
                             {"type", "header"},
                             {"alg", alg},
                             {"seed", seed},
                             {"config", nlohmann::json::parse(config_echo.empty() ? "{}" : config_echo)}};
    out += header.dump() + '\n';
    for (const EpochRecord& r : records) {
        nlohmann::json losses = nlohmann::json::object();
        for (const auto& [name, v] : r.losses) losses[name] = optional_number(v);
        nlohmann::json j = {{"format_version", kRunLogVersion},
                            {"epoch", r.epoch},
                            {"alg", r.alg},
                            {"phase", r.phase},
                            {"losses", losses},
                            {"reward_train", optional_number(r.reward_train)},
                            {"reward_val", optional_number(r.reward_val)},
                            {"actor_entropy", optional_number(r.actor_entropy)},
                            {"step_size", r.step_size},
                            {"diverged", r.diverged}};
        out += j.dump() + '\n';
    }
    return out;
}

TrainResult train(Algorithm alg, const Dataset& train_set, const Dataset& val_set, const TrainerConfig& config) {
    return Run(alg, train_set, val_set, config).execute();
}

}  // namespace softseq
